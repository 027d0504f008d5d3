#ifndef TOKENFA_SCORER_HPP
#define TOKENFA_SCORER_HPP

// Next-token log-probability sources. All log-probabilities are natural
// logs in double precision; every returned vector is normalized.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tokenfa/error.hpp"
#include "tokenfa/vocabulary.hpp"

namespace tokenfa {

using LogProbs = std::vector<double>;

/// Abstract language model: log p(next token | prefix) over the whole
/// vocabulary. Implementations must be safe for concurrent calls.
class Scorer {
public:
  virtual ~Scorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual LogProbs next_logprobs(std::span<const TokenId> prefix) const = 0;
};

inline double logsumexp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs)
    hi = std::max(hi, x);
  if (!std::isfinite(hi))
    return hi;
  double sum = 0.0;
  for (double x : xs)
    sum += std::exp(x - hi);
  return hi + std::log(sum);
}

inline LogProbs uniform_logprobs(std::size_t vocab_size) {
  if (vocab_size == 0)
    throw ScorerError("uniform distribution needs a non-empty vocabulary");
  return LogProbs(vocab_size, -std::log(static_cast<double>(vocab_size)));
}

/// The min(k, |V|) highest-scoring ids, ties broken toward the lower id.
/// Returned in ascending id order.
inline std::vector<TokenId> top_k_set(std::span<const double> logprobs,
                                      std::size_t k) {
  std::vector<TokenId> ids(logprobs.size());
  std::iota(ids.begin(), ids.end(), TokenId{0});
  k = std::min(k, ids.size());
  auto better = [&](TokenId a, TokenId b) {
    if (logprobs[a] != logprobs[b])
      return logprobs[a] > logprobs[b];
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k),
                    ids.end(), better);
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Divide by `temperature` and renormalize. Temperature 1 is the identity.
inline LogProbs apply_temperature(LogProbs lp, double temperature) {
  if (temperature == 1.0)
    return lp;
  if (!(temperature > 0.0))
    throw ConfigError("temperature must be positive");
  for (double &x : lp)
    x /= temperature;
  double z = logsumexp(lp);
  for (double &x : lp)
    x -= z;
  return lp;
}

class UniformScorer final : public Scorer {
public:
  explicit UniformScorer(std::size_t vocab_size)
      : logprobs_(uniform_logprobs(vocab_size)) {}

  std::size_t vocab_size() const override { return logprobs_.size(); }
  LogProbs next_logprobs(std::span<const TokenId>) const override {
    return logprobs_;
  }

private:
  LogProbs logprobs_;
};

/// Additively smoothed n-gram model:
///   p(t | ctx) = (count(ctx, t) + alpha) / (total(ctx) + alpha * |V|)
/// where ctx is the last order-1 tokens, left-padded with a begin marker.
class NGramModel final : public Scorer {
public:
  static constexpr TokenId kBegin = std::numeric_limits<TokenId>::max();

  NGramModel(std::size_t order, double alpha, std::size_t vocab_size)
      : order_(order), alpha_(alpha), vocab_size_(vocab_size) {
    if (order_ < 1)
      throw ConfigError("n-gram order must be at least 1");
    if (!(alpha_ > 0.0))
      throw ConfigError("n-gram alpha must be positive");
    if (vocab_size_ == 0)
      throw ConfigError("n-gram vocabulary must be non-empty");
  }

  void add_sequence(std::span<const TokenId> seq) {
    std::vector<TokenId> ctx(order_ - 1, kBegin);
    for (TokenId t : seq) {
      if (t >= vocab_size_)
        throw ConfigError("corpus token " + std::to_string(t) +
                          " outside vocabulary of size " +
                          std::to_string(vocab_size_));
      auto &c = counts_[ctx];
      ++c.per_token[t];
      ++c.total;
      if (!ctx.empty()) {
        ctx.erase(ctx.begin());
        ctx.push_back(t);
      }
    }
  }

  std::size_t order() const noexcept { return order_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t vocab_size() const override { return vocab_size_; }

  /// Context key used for `prefix`: its last order-1 tokens, padded.
  std::vector<TokenId> context_of(std::span<const TokenId> prefix) const {
    std::vector<TokenId> ctx(order_ - 1, kBegin);
    std::size_t take = std::min(prefix.size(), order_ - 1);
    std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(),
              ctx.end() - static_cast<std::ptrdiff_t>(take));
    return ctx;
  }

  double count(const std::vector<TokenId> &ctx, TokenId t) const {
    auto it = counts_.find(ctx);
    if (it == counts_.end())
      return 0.0;
    auto jt = it->second.per_token.find(t);
    return jt == it->second.per_token.end() ? 0.0 : jt->second;
  }

  double total(const std::vector<TokenId> &ctx) const {
    auto it = counts_.find(ctx);
    return it == counts_.end() ? 0.0 : it->second.total;
  }

  LogProbs next_logprobs(std::span<const TokenId> prefix) const override {
    auto ctx = context_of(prefix);
    double denom = total(ctx) + alpha_ * static_cast<double>(vocab_size_);
    LogProbs lp(vocab_size_, std::log(alpha_ / denom));
    if (auto it = counts_.find(ctx); it != counts_.end())
      for (const auto &[t, c] : it->second.per_token)
        lp[t] = std::log((c + alpha_) / denom);
    return lp;
  }

private:
  struct ContextCounts {
    std::unordered_map<TokenId, double> per_token;
    double total = 0.0;
  };

  std::size_t order_;
  double alpha_;
  std::size_t vocab_size_;
  std::map<std::vector<TokenId>, ContextCounts> counts_;
};

inline NGramModel train_ngram(const std::vector<std::vector<TokenId>> &corpus,
                              std::size_t order, double alpha,
                              std::size_t vocab_size) {
  NGramModel model(order, alpha, vocab_size);
  for (const auto &seq : corpus)
    model.add_sequence(seq);
  return model;
}

/// Explicit table prefix -> distribution, with a default for unlisted
/// prefixes.
class FixtureScorer final : public Scorer {
public:
  explicit FixtureScorer(std::size_t vocab_size)
      : vocab_size_(vocab_size), default_(uniform_logprobs(vocab_size)) {}

  void set(std::vector<TokenId> prefix, LogProbs logprobs) {
    check(logprobs);
    table_[std::move(prefix)] = std::move(logprobs);
  }

  /// Convenience: store a distribution given as probabilities.
  void set_probs(std::vector<TokenId> prefix, const std::vector<double> &probs) {
    set(std::move(prefix), from_probs(probs));
  }

  void set_default(LogProbs logprobs) {
    check(logprobs);
    default_ = std::move(logprobs);
  }

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t entry_count() const noexcept { return table_.size(); }

  LogProbs next_logprobs(std::span<const TokenId> prefix) const override {
    auto it = table_.find(std::vector<TokenId>(prefix.begin(), prefix.end()));
    return it == table_.end() ? default_ : it->second;
  }

  static LogProbs from_probs(const std::vector<double> &probs) {
    LogProbs lp(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] < 0.0)
        throw ScorerError("fixture probability must be non-negative");
      lp[i] = std::log(probs[i]);
    }
    return lp;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["vocab_size"] = vocab_size_;
    j["default"] = vector_to_json(default_);
    j["entries"] = nlohmann::json::array();
    for (const auto &[prefix, lp] : table_)
      j["entries"].push_back({{"prefix", prefix}, {"logprobs", vector_to_json(lp)}});
    return j;
  }

  // JSON has no infinities; a zero-probability entry is written as null.
  static nlohmann::json vector_to_json(const LogProbs &lp) {
    auto arr = nlohmann::json::array();
    for (double x : lp)
      arr.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return arr;
  }

  static LogProbs vector_from_json(const nlohmann::json &arr) {
    LogProbs lp;
    for (const auto &x : arr)
      lp.push_back(x.is_null() ? -std::numeric_limits<double>::infinity()
                               : x.get<double>());
    return lp;
  }

  static FixtureScorer from_json(const nlohmann::json &j) {
    try {
      FixtureScorer f(j.at("vocab_size").get<std::size_t>());
      if (j.contains("default")) {
        const auto &d = j.at("default");
        bool uniform = d.is_string() && d.get<std::string>() == "uniform";
        if (!uniform)
          f.set_default(vector_from_json(d));
      }
      if (j.contains("entries"))
        for (const auto &e : j.at("entries")) {
          auto prefix = e.at("prefix").get<std::vector<TokenId>>();
          if (e.contains("logprobs"))
            f.set(std::move(prefix), vector_from_json(e.at("logprobs")));
          else
            f.set_probs(std::move(prefix), e.at("probs").get<std::vector<double>>());
        }
      return f;
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError(std::string("invalid fixture table: ") + e.what());
    }
  }

  static FixtureScorer load(const std::string &path) {
    std::ifstream in(path);
    if (!in)
      throw ConfigError("cannot open fixture table " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError("invalid fixture table " + path + ": " + e.what());
    }
    return from_json(j);
  }

private:
  void check(const LogProbs &lp) const {
    if (lp.size() != vocab_size_)
      throw ShapeError("fixture vector has " + std::to_string(lp.size()) +
                       " entries, expected " + std::to_string(vocab_size_));
    double z = logsumexp(lp);
    if (!(std::abs(z) <= 1e-6))
      throw NormalizationError("fixture vector is not normalized (logsumexp " +
                               std::to_string(z) + ")");
  }

  std::size_t vocab_size_;
  LogProbs default_;
  std::map<std::vector<TokenId>, LogProbs> table_;
};

/// Forwards to another scorer and counts calls.
class CountingScorer final : public Scorer {
public:
  explicit CountingScorer(const Scorer &inner) : inner_(inner) {}

  std::size_t vocab_size() const override { return inner_.vocab_size(); }
  LogProbs next_logprobs(std::span<const TokenId> prefix) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.next_logprobs(prefix);
  }

  std::size_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

private:
  const Scorer &inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

} // namespace tokenfa

#endif
