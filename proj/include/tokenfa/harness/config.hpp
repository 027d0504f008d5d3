#ifndef TOKENFA_HARNESS_CONFIG_HPP
#define TOKENFA_HARNESS_CONFIG_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokenfa/harness/bias.hpp"
#include "tokenfa/harness/language_understanding.hpp"
#include "tokenfa/harness/memorization.hpp"
#include "tokenfa/harness/stop_words.hpp"
#include "tokenfa/harness/url_validation.hpp"
#include "tokenfa/scorer_spec.hpp"

namespace tokenfa::harness {

namespace detail {

// Typed access to a JSON object that rejects unknown keys.
class ObjectReader {
public:
  ObjectReader(const nlohmann::json &j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object())
      throw ConfigError(where_ + ": expected a JSON object");
  }

  template <class T> std::optional<T> optional(const std::string &key) {
    used_.insert(key);
    if (!j_.contains(key))
      return std::nullopt;
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception &) {
      throw ConfigError(where_ + ": key \"" + key + "\" has the wrong type");
    }
  }

  template <class T> T required(const std::string &key) {
    auto v = optional<T>(key);
    if (!v)
      throw ConfigError(where_ + ": missing required key \"" + key + "\"");
    return *v;
  }

  const nlohmann::json *raw(const std::string &key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto &[k, _] : j_.items())
      if (!used_.count(k))
        throw ConfigError(where_ + ": unknown key \"" + k + "\"");
  }

private:
  const nlohmann::json &j_;
  std::string where_;
  std::set<std::string> used_;
};

inline std::string resolve(const std::filesystem::path &base, const std::string &p) {
  std::filesystem::path path(p);
  return (path.is_relative() ? base / path : path).string();
}

} // namespace detail

/// Settings shared by every experiment config.
struct CommonConfig {
  std::filesystem::path base_dir;
  std::string vocab_path;   // resolved; empty means fetch from a remote scorer
  std::string scorer = "uniform";
  ScorerSpec scorer_spec;
  std::uint64_t seed = 0;
  nlohmann::json raw;
};

struct ValidatorConfig {
  std::string kind = "mock";
  std::map<std::string, MockValidator::Outcome> table;
  MockValidator::Outcome fallback{404};
  double latency_s = 0.05;
  double timeout_s = 10.0;
  std::size_t max_concurrency = 16;
  std::string user_agent = "tokenfa-url-check/1.0";
};

struct MemorizationExperiment {
  CommonConfig common;
  MemorizationConfig config;
  ValidatorConfig validator;
};

struct LanguageExperiment {
  CommonConfig common;
  std::string dataset_path;
  LanguageConfig config;
};

struct BiasExperiment {
  CommonConfig common;
  BiasConfig config;
};

inline nlohmann::json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

namespace detail {

inline CommonConfig read_common(ObjectReader &r, const nlohmann::json &raw,
                                const std::filesystem::path &base) {
  CommonConfig c;
  c.base_dir = base;
  c.raw = raw;
  c.scorer = r.optional<std::string>("scorer").value_or("uniform");
  c.scorer_spec = parse_scorer_spec(c.scorer);
  if (auto v = r.optional<std::string>("vocab"))
    c.vocab_path = resolve(base, *v);
  else if (c.scorer_spec.kind != ScorerSpec::Kind::Remote)
    throw ConfigError("config: \"vocab\" is required unless the scorer is remote");
  c.seed = r.optional<std::uint64_t>("seed").value_or(0);
  return c;
}

inline MockValidator::Outcome read_outcome(const nlohmann::json &v, const std::string &where) {
  if (v.is_number_integer()) {
    int s = v.get<int>();
    if (s < 100 || s > 599)
      throw ConfigError(where + ": status " + std::to_string(s) + " out of range");
    return {s};
  }
  if (v.is_string() && v.get<std::string>() == "timeout")
    return {std::nullopt};
  throw ConfigError(where + ": expected an HTTP status or \"timeout\"");
}

inline ValidatorConfig read_validator(const nlohmann::json &j) {
  ObjectReader r(j, "validator");
  ValidatorConfig v;
  v.kind = r.optional<std::string>("kind").value_or("mock");
  if (v.kind != "mock" && v.kind != "live")
    throw ConfigError("validator: kind must be \"mock\" or \"live\"");
  v.timeout_s = r.optional<double>("timeout_s").value_or(10.0);
  v.max_concurrency = r.optional<std::size_t>("max_concurrency").value_or(16);
  if (v.max_concurrency < 1)
    throw ConfigError("validator: max_concurrency must be at least 1");
  if (!(v.timeout_s > 0))
    throw ConfigError("validator: timeout_s must be positive");
  if (v.kind == "mock") {
    v.latency_s = r.optional<double>("latency_s").value_or(0.05);
    if (const auto *t = r.raw("table")) {
      if (!t->is_object())
        throw ConfigError("validator: table must map url to status");
      for (const auto &[url, outcome] : t->items())
        v.table[url] = read_outcome(outcome, "validator table entry " + url);
    }
    if (const auto *d = r.raw("default"))
      v.fallback = read_outcome(*d, "validator default");
  } else {
    v.user_agent = r.optional<std::string>("user_agent").value_or(v.user_agent);
  }
  r.finish();
  return v;
}

} // namespace detail

inline MemorizationExperiment load_memorization_config(const std::string &path) {
  auto raw = read_json_file(path);
  auto base = std::filesystem::path(path).parent_path();
  detail::ObjectReader r(raw, "memorization config");
  MemorizationExperiment e;
  e.common = detail::read_common(r, raw, base);
  auto &c = e.config;
  c.seed = e.common.seed;
  c.url_regex = r.optional<std::string>("url_regex").value_or(c.url_regex);
  c.prompt = r.optional<std::string>("prompt").value_or(c.prompt);
  c.baselines = r.optional<std::vector<std::size_t>>("baselines").value_or(c.baselines);
  c.num_samples = r.optional<std::size_t>("num_samples").value_or(c.num_samples);
  c.terminated = r.optional<bool>("terminated").value_or(c.terminated);
  c.max_match_tokens = r.optional<std::size_t>("max_match_tokens").value_or(c.max_match_tokens);
  c.seconds_per_call = r.optional<double>("seconds_per_call").value_or(c.seconds_per_call);
  auto clock = r.optional<std::string>("clock").value_or("virtual");
  if (clock != "virtual" && clock != "wall")
    throw ConfigError("memorization config: clock must be \"virtual\" or \"wall\"");
  c.clock = clock == "wall" ? Clock::Wall : Clock::Virtual;
  if (c.num_samples < 1)
    throw ConfigError("memorization config: num_samples must be at least 1");
  for (auto n : c.baselines)
    if (n < 1)
      throw ConfigError("memorization config: baseline token limits must be positive");
  if (!(c.seconds_per_call >= 0))
    throw ConfigError("memorization config: seconds_per_call must be non-negative");
  parse_regex(c.url_regex); // syntax errors surface before any work
  if (const auto *v = r.raw("validator"))
    e.validator = detail::read_validator(*v);
  r.finish();
  return e;
}

inline LanguageExperiment load_language_config(const std::string &path) {
  auto raw = read_json_file(path);
  auto base = std::filesystem::path(path).parent_path();
  detail::ObjectReader r(raw, "language config");
  LanguageExperiment e;
  e.common = detail::read_common(r, raw, base);
  e.dataset_path = detail::resolve(base, r.required<std::string>("dataset"));
  if (auto qs = r.optional<std::vector<std::string>>("query_types")) {
    e.config.query_types.clear();
    for (const auto &q : *qs)
      e.config.query_types.push_back(parse_query_type(q));
    if (e.config.query_types.empty())
      throw ConfigError("language config: query_types is empty");
  }
  if (auto sw = r.optional<std::string>("stop_words"))
    e.config.stop_words = load_stop_words(detail::resolve(base, *sw));
  e.config.max_examples = r.optional<std::size_t>("max_examples").value_or(0);
  e.config.max_match_tokens =
      r.optional<std::size_t>("max_match_tokens").value_or(e.config.max_match_tokens);
  if (e.config.max_match_tokens < 1)
    throw ConfigError("language config: max_match_tokens must be at least 1");
  r.finish();
  return e;
}

inline BiasExperiment load_bias_config(const std::string &path) {
  auto raw = read_json_file(path);
  auto base = std::filesystem::path(path).parent_path();
  detail::ObjectReader r(raw, "bias config");
  BiasExperiment e;
  e.common = detail::read_common(r, raw, base);
  auto &c = e.config;
  c.seed = e.common.seed;
  c.genders = r.optional<std::vector<std::string>>("genders").value_or(c.genders);
  c.professions = r.optional<std::vector<std::string>>("professions").value_or(c.professions);
  c.use_context = r.optional<bool>("use_context").value_or(false);
  c.num_samples = r.optional<std::size_t>("num_samples").value_or(c.num_samples);
  c.top_k = r.optional<std::size_t>("top_k");
  c.max_match_tokens = r.optional<std::size_t>("max_match_tokens").value_or(c.max_match_tokens);
  if (c.genders.empty() || c.professions.empty())
    throw ConfigError("bias config: genders and professions must be non-empty");
  if (c.top_k && *c.top_k < 1)
    throw ConfigError("bias config: top_k must be at least 1");
  r.finish();
  return e;
}

/// Vocabulary from the config, or from the remote scorer when none is given.
inline Vocabulary load_experiment_vocabulary(const CommonConfig &c) {
  if (!c.vocab_path.empty())
    return load_vocabulary(c.vocab_path);
  return fetch_remote_vocabulary(c.scorer_spec.url);
}

inline std::unique_ptr<Validator> make_validator(const ValidatorConfig &v) {
  if (v.kind == "live")
    return std::make_unique<HttpValidator>(v.timeout_s, v.user_agent);
  return std::make_unique<MockValidator>(v.table, v.fallback, v.latency_s, v.timeout_s);
}

} // namespace tokenfa::harness

#endif
