#ifndef TOKENFA_TRAVERSAL_HPP
#define TOKENFA_TRAVERSAL_HPP

// Traversal of a token automaton under a scorer.
//
// Shortest mode is Dijkstra over the prefix tree of token sequences, with
// edge cost -log p(token | prompt, previous tokens). Search nodes are token
// sequences, not automaton states. Matches come out in nondecreasing cost; equal costs
// are ordered by token ids lexicographically (shorter first on a shared
// prefix).
//
// Sample mode draws token by token from the scorer's distribution restricted
// to the automaton's outgoing edges (and the top-k filter), renormalized.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokenfa/detail/base64.hpp"
#include "tokenfa/detail/random.hpp"
#include "tokenfa/error.hpp"
#include "tokenfa/scorer.hpp"
#include "tokenfa/token_automaton.hpp"
#include "tokenfa/vocabulary.hpp"

namespace tokenfa {

enum class TopKScope {
  /// top-k over the full vocabulary, then intersect with the automaton's
  /// edges; paths through tokens outside the top-k become unreachable.
  FullVocab,
  /// top-k among the automaton's outgoing edges only; never dead-ends.
  AllowedOnly,
};

struct QueryOptions {
  /// No prompt when empty; a fixed prompt when one; otherwise each sample
  /// picks one uniformly at random (sample mode only).
  std::vector<std::vector<TokenId>> prompts;
  std::optional<std::size_t> top_k;
  TopKScope topk_scope = TopKScope::FullVocab;
  std::size_t max_match_tokens = 64;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  /// Attempts per sample before it is recorded as a dead end.
  std::size_t max_attempts = 100;
};

struct MatchResult {
  std::vector<TokenId> tokens;
  std::string decoded;
  double logprob = 0.0;  // sum of log p over tokens, <= 0
  std::size_t rank = 0;  // 1-based emission order; 0 for samples
};

struct SearchNode {
  std::vector<TokenId> tokens;
  StateId state = 0;
  double cost = 0.0; // sum of -log p, nats
};

namespace detail {

inline void validate_options(const QueryOptions &q) {
  if (q.max_match_tokens < 1)
    throw ConfigError("max_match_tokens must be at least 1");
  if (q.top_k && *q.top_k < 1)
    throw ConfigError("top_k must be at least 1");
}

inline std::vector<TokenId> join(std::span<const TokenId> a,
                                 std::span<const TokenId> b) {
  std::vector<TokenId> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline LogProbs checked_logprobs(const Scorer &scorer,
                                 std::span<const TokenId> context,
                                 std::size_t vocab_size) {
  LogProbs lp = scorer.next_logprobs(context);
  if (lp.size() != vocab_size)
    throw ShapeError("scorer returned " + std::to_string(lp.size()) +
                     " log-probabilities for a vocabulary of " +
                     std::to_string(vocab_size));
  return lp;
}

/// Outgoing edges of `state` that survive the top-k filter.
inline std::vector<TokenAutomaton::Edge>
candidate_edges(const TokenAutomaton &ta, StateId state, const LogProbs &lp,
                const QueryOptions &q) {
  auto edges = ta.edges(state);
  std::vector<TokenAutomaton::Edge> out;
  if (!q.top_k) {
    out.assign(edges.begin(), edges.end());
    return out;
  }
  if (q.topk_scope == TopKScope::FullVocab) {
    auto top = top_k_set(lp, *q.top_k);
    for (const auto &e : edges)
      if (std::binary_search(top.begin(), top.end(), e.token))
        out.push_back(e);
    return out;
  }
  out.assign(edges.begin(), edges.end());
  auto better = [&](const TokenAutomaton::Edge &a, const TokenAutomaton::Edge &b) {
    if (lp[a.token] != lp[b.token])
      return lp[a.token] > lp[b.token];
    return a.token < b.token;
  };
  if (out.size() > *q.top_k) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(*q.top_k),
                      out.end(), better);
    out.resize(*q.top_k);
  }
  std::sort(out.begin(), out.end(),
            [](const auto &a, const auto &b) { return a.token < b.token; });
  return out;
}

} // namespace detail

/// Lazy lowest-cost-first enumeration of accepted token sequences.
class ShortestPathEnumerator {
public:
  ShortestPathEnumerator(const TokenAutomaton &automaton, const Scorer &scorer,
                         const Vocabulary &vocab, QueryOptions options = {})
      : ta_(automaton), scorer_(scorer), vocab_(vocab), opts_(std::move(options)) {
    detail::validate_options(opts_);
    if (opts_.prompts.size() > 1)
      throw ConfigError("shortest-path enumeration takes at most one prompt");
    if (scorer_.vocab_size() != vocab_.size())
      throw ConfigError("scorer vocabulary size " +
                        std::to_string(scorer_.vocab_size()) +
                        " differs from vocabulary size " +
                        std::to_string(vocab_.size()));
    if (!opts_.prompts.empty())
      prompt_ = opts_.prompts.front();
    if (!ta_.empty_language())
      frontier_.push(SearchNode{{}, ta_.start(), 0.0});
  }

  /// Next match in cost order, or nullopt once the frontier is exhausted.
  std::optional<MatchResult> next() {
    if (pending_) {
      expand(*pending_);
      pending_.reset();
    }
    while (!frontier_.empty()) {
      SearchNode node = frontier_.top();
      frontier_.pop();
      if (ta_.is_accept(node.state)) {
        MatchResult m;
        m.decoded = decode(vocab_, node.tokens);
        m.logprob = -node.cost;
        m.rank = ++emitted_;
        m.tokens = node.tokens;
        // children are expanded on the following call so a consumer that
        // stops here does not pay for another scorer query
        pending_ = std::move(node);
        return m;
      }
      expand(node);
    }
    return std::nullopt;
  }

  std::size_t expansions() const noexcept { return expansions_; }
  std::size_t frontier_size() const noexcept { return frontier_.size(); }

private:
  struct Later {
    bool operator()(const SearchNode &a, const SearchNode &b) const {
      if (a.cost != b.cost)
        return a.cost > b.cost;
      return std::lexicographical_compare(b.tokens.begin(), b.tokens.end(),
                                          a.tokens.begin(), a.tokens.end());
    }
  };

  void expand(const SearchNode &node) {
    if (node.tokens.size() >= opts_.max_match_tokens ||
        ta_.edges(node.state).empty())
      return;
    ++expansions_;
    auto context = detail::join(prompt_, node.tokens);
    LogProbs lp = detail::checked_logprobs(scorer_, context, vocab_.size());
    for (const auto &e : detail::candidate_edges(ta_, node.state, lp, opts_)) {
      double step = -lp[e.token];
      if (!std::isfinite(step))
        continue; // zero probability
      SearchNode child;
      child.tokens = node.tokens;
      child.tokens.push_back(e.token);
      child.state = e.target;
      child.cost = node.cost + std::max(step, 0.0);
      frontier_.push(std::move(child));
    }
  }

  const TokenAutomaton &ta_;
  const Scorer &scorer_;
  const Vocabulary &vocab_;
  QueryOptions opts_;
  std::vector<TokenId> prompt_;
  std::priority_queue<SearchNode, std::vector<SearchNode>, Later> frontier_;
  std::optional<SearchNode> pending_;
  std::size_t emitted_ = 0;
  std::size_t expansions_ = 0;
};

/// Up to `limit` matches in cost order.
inline std::vector<MatchResult>
enumerate_shortest(const TokenAutomaton &automaton, const Scorer &scorer,
                   const Vocabulary &vocab, const QueryOptions &options,
                   std::size_t limit) {
  std::vector<MatchResult> out;
  if (limit == 0)
    return out;
  ShortestPathEnumerator it(automaton, scorer, vocab, options);
  while (out.size() < limit) {
    auto m = it.next();
    if (!m)
      break;
    out.push_back(std::move(*m));
  }
  return out;
}

struct SampleResult {
  std::optional<MatchResult> match; // empty: dead end after all attempts
  std::size_t prompt_index = 0;
  std::size_t attempts = 0;

  bool dead_end() const noexcept { return !match.has_value(); }
};

/// Constrained sampler. At an accepting state that still has outgoing edges,
/// stopping competes with continuing, weighted by the scorer's EOS
/// probability. The stop option is not subject to the top-k filter.
class ConstrainedSampler {
public:
  ConstrainedSampler(const TokenAutomaton &automaton, const Scorer &scorer,
                     const Vocabulary &vocab, QueryOptions options = {})
      : ta_(automaton), scorer_(scorer), vocab_(vocab), opts_(std::move(options)),
        rng_(opts_.seed) {
    detail::validate_options(opts_);
    if (opts_.max_attempts < 1)
      throw ConfigError("max_attempts must be at least 1");
    if (scorer_.vocab_size() != vocab_.size())
      throw ConfigError("scorer vocabulary size differs from vocabulary size");
    if (opts_.prompts.empty())
      opts_.prompts.emplace_back();
  }

  SampleResult draw() {
    SampleResult r;
    r.prompt_index =
        opts_.prompts.size() > 1 ? rng_.index(opts_.prompts.size()) : 0;
    const auto &prompt = opts_.prompts[r.prompt_index];
    while (r.attempts < opts_.max_attempts) {
      ++r.attempts;
      if (auto m = attempt(prompt)) {
        r.match = std::move(m);
        break;
      }
    }
    return r;
  }

private:
  std::optional<MatchResult> attempt(const std::vector<TokenId> &prompt) {
    StateId state = ta_.start();
    std::vector<TokenId> tokens;
    double logprob = 0.0;
    auto finish = [&]() {
      MatchResult m;
      m.decoded = decode(vocab_, tokens);
      m.tokens = std::move(tokens);
      m.logprob = logprob;
      return m;
    };

    while (true) {
      bool accepting = ta_.is_accept(state);
      if (tokens.size() >= opts_.max_match_tokens || ta_.edges(state).empty()) {
        if (accepting)
          return finish();
        return std::nullopt;
      }
      auto context = detail::join(prompt, tokens);
      LogProbs lp = detail::checked_logprobs(scorer_, context, vocab_.size());
      LogProbs weights_lp = apply_temperature(lp, opts_.temperature);
      auto cands = detail::candidate_edges(ta_, state, weights_lp, opts_);

      double stop_weight = accepting ? std::exp(weights_lp[ta_.eos_id()]) : 0.0;
      double total = stop_weight;
      for (const auto &e : cands)
        total += std::exp(weights_lp[e.token]);
      if (!(total > 0.0)) {
        if (accepting)
          return finish();
        return std::nullopt;
      }

      double u = rng_.uniform01() * total;
      if (u < stop_weight)
        return finish();
      double acc = stop_weight;
      const TokenAutomaton::Edge *pick = nullptr;
      for (const auto &e : cands) {
        double w = std::exp(weights_lp[e.token]);
        if (w <= 0.0)
          continue;
        pick = &e;
        acc += w;
        if (u < acc)
          break;
      }
      tokens.push_back(pick->token);
      logprob += lp[pick->token];
      state = pick->target;
    }
  }

  const TokenAutomaton &ta_;
  const Scorer &scorer_;
  const Vocabulary &vocab_;
  QueryOptions opts_;
  detail::Rng rng_;
};

inline std::vector<SampleResult> sample(const TokenAutomaton &automaton,
                                        const Scorer &scorer,
                                        const Vocabulary &vocab,
                                        const QueryOptions &options,
                                        std::size_t num_samples) {
  ConstrainedSampler sampler(automaton, scorer, vocab, options);
  std::vector<SampleResult> out;
  out.reserve(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i)
    out.push_back(sampler.draw());
  return out;
}

/// `{"rank":..., "tokens":[...], "decoded_b64":"...", "logprob":...}`
inline std::string to_json_line(const MatchResult &m) {
  nlohmann::ordered_json j;
  j["rank"] = m.rank;
  j["tokens"] = m.tokens;
  j["decoded_b64"] = detail::base64_encode(m.decoded);
  j["logprob"] = m.logprob;
  return j.dump();
}

} // namespace tokenfa

#endif
