#ifndef TOKENFA_HARNESS_MEMORIZATION_HPP
#define TOKENFA_HARNESS_MEMORIZATION_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tokenfa/automata.hpp"
#include "tokenfa/harness/url_validation.hpp"
#include "tokenfa/scorer.hpp"
#include "tokenfa/token_automaton.hpp"
#include "tokenfa/traversal.hpp"
#include "tokenfa/vocabulary.hpp"

namespace tokenfa::harness {

inline constexpr const char *kDefaultUrlRegex =
    "https://[a-zA-Z0-9.-]+(/[a-zA-Z0-9._~/%-]*)?";
inline constexpr const char *kConstrainedArm = "constrained";

enum class Clock { Virtual, Wall };

struct MemorizationConfig {
  std::string url_regex = kDefaultUrlRegex;
  /// Prompt text for the baseline arms.
  std::string prompt = "https://";
  std::vector<std::size_t> baselines{4, 8, 16};
  std::size_t num_samples = 200;
  std::uint64_t seed = 0;
  /// Constrained matches must end in EOS.
  bool terminated = true;
  std::size_t max_match_tokens = 64;
  Clock clock = Clock::Virtual;
  /// Virtual cost of one scorer call.
  double seconds_per_call = 0.01;
};

struct UrlRecord {
  std::string arm;
  std::size_t emission_index = 0;
  double emitted_at = 0.0;
  std::string url;
  std::vector<TokenId> tokens;
  bool duplicate = false; // same url string earlier in this arm
  bool regex_match = false;
  // filled by validation
  std::string status;
  bool valid = false;
  double validated_at = 0.0;
};

struct ArmRun {
  std::string arm;
  std::vector<UrlRecord> records;
  std::size_t scorer_calls = 0;
  std::size_t failures = 0; // samples that ended in a dead end
};

inline std::string baseline_arm_name(std::size_t n) {
  return "baseline-" + std::to_string(n);
}

namespace detail {

class ArmClock {
public:
  ArmClock(Clock mode, double seconds_per_call, const CountingScorer &calls)
      : mode_(mode), spc_(seconds_per_call), calls_(calls),
        start_(std::chrono::steady_clock::now()) {}

  double now() const {
    if (mode_ == Clock::Virtual)
      return static_cast<double>(calls_.calls()) * spc_;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

private:
  Clock mode_;
  double spc_;
  const CountingScorer &calls_;
  std::chrono::steady_clock::time_point start_;
};

inline void mark_duplicates(std::vector<UrlRecord> &records) {
  std::set<std::string> seen;
  for (auto &r : records)
    r.duplicate = !seen.insert(r.url).second;
}

} // namespace detail

/// Generate the constrained arm (shortest-path enumeration over the URL
/// automaton) and one sampling arm per baseline length. Records are not yet
/// validated.
inline std::vector<ArmRun> run_memorization(const Scorer &scorer, const Vocabulary &vocab,
                                            const MemorizationConfig &config) {
  if (config.num_samples == 0)
    throw ConfigError("num_samples must be at least 1");
  for (std::size_t n : config.baselines)
    if (n == 0)
      throw ConfigError("baseline token limits must be at least 1");
  const Dfa url_dfa = compile_regex(config.url_regex);
  const TokenTrie trie = build_trie(vocab);
  std::vector<ArmRun> runs;

  {
    ArmRun run;
    run.arm = kConstrainedArm;
    CountingScorer counted(scorer);
    detail::ArmClock clock(config.clock, config.seconds_per_call, counted);
    TransduceOptions topts;
    topts.terminated = config.terminated;
    auto ta = transduce(url_dfa, vocab, trie, topts);
    QueryOptions q;
    q.max_match_tokens = config.max_match_tokens;
    ShortestPathEnumerator it(ta, counted, vocab, q);
    while (run.records.size() < config.num_samples) {
      auto m = it.next();
      if (!m)
        break;
      UrlRecord r;
      r.arm = run.arm;
      r.emission_index = run.records.size();
      r.emitted_at = clock.now();
      r.url = m->decoded;
      r.tokens = std::move(m->tokens);
      r.regex_match = dfa_matches(url_dfa, r.url);
      run.records.push_back(std::move(r));
    }
    run.scorer_calls = counted.calls();
    detail::mark_duplicates(run.records);
    runs.push_back(std::move(run));
  }

  // free continuation: any bytes, stopping on EOS or the token limit
  const auto anything = transduce(compile_regex("[\\x00-\\xff]*"), vocab, trie);
  const auto prompt = encode_greedy(trie, config.prompt);
  for (std::size_t i = 0; i < config.baselines.size(); ++i) {
    std::size_t n = config.baselines[i];
    ArmRun run;
    run.arm = baseline_arm_name(n);
    CountingScorer counted(scorer);
    detail::ArmClock clock(config.clock, config.seconds_per_call, counted);
    QueryOptions q;
    q.prompts = {prompt};
    q.max_match_tokens = n;
    q.seed = config.seed + 1 + i;
    ConstrainedSampler sampler(anything, counted, vocab, q);
    for (std::size_t s = 0; s < config.num_samples; ++s) {
      auto res = sampler.draw();
      if (!res.match) {
        ++run.failures;
        continue;
      }
      UrlRecord r;
      r.arm = run.arm;
      r.emission_index = run.records.size();
      r.emitted_at = clock.now();
      r.url = config.prompt + res.match->decoded;
      r.tokens = std::move(res.match->tokens);
      r.regex_match = dfa_matches(url_dfa, r.url);
      run.records.push_back(std::move(r));
    }
    run.scorer_calls = counted.calls();
    detail::mark_duplicates(run.records);
    runs.push_back(std::move(run));
  }
  return runs;
}

/// Validate every record. Each distinct URL is checked once across all
/// arms. Per arm, validation is modeled as a second pipeline stage: a record
/// finishes at max(its emission, previous finish) + latency, and a repeated
/// URL finishes without further latency.
inline void validate_records(std::vector<ArmRun> &runs, Validator &validator,
                             std::size_t max_concurrency) {
  std::vector<std::string> urls;
  for (const auto &run : runs)
    for (const auto &r : run.records)
      urls.push_back(r.url);
  auto results = validate_unique(urls, validator, max_concurrency);
  for (auto &run : runs) {
    double done = 0.0;
    for (auto &r : run.records) {
      const auto &res = results.at(r.url);
      r.status = res.status_text();
      r.valid = res.valid();
      done = std::max(done, r.emitted_at) + (r.duplicate ? 0.0 : res.latency_s);
      r.validated_at = done;
    }
  }
}

struct ThroughputPoint {
  std::string arm;
  double elapsed_s = 0.0;
  std::size_t cumulative_valid_unique = 0;
  std::size_t cumulative_valid_with_dupes = 0;
};

/// One point per record, in completion order within each arm.
inline std::vector<ThroughputPoint> throughput_curve(const std::vector<ArmRun> &runs) {
  std::vector<ThroughputPoint> out;
  for (const auto &run : runs) {
    std::set<std::string> valid_seen;
    std::size_t with_dupes = 0;
    for (const auto &r : run.records) {
      if (r.valid) {
        ++with_dupes;
        valid_seen.insert(r.url);
      }
      out.push_back({run.arm, r.validated_at, valid_seen.size(), with_dupes});
    }
  }
  return out;
}

struct ArmSummary {
  std::string arm;
  std::size_t records = 0;
  std::size_t failures = 0;
  std::size_t scorer_calls = 0;
  std::size_t duplicate_records = 0;
  std::size_t duplicate_token_sequences = 0;
  std::size_t regex_matches = 0;
  std::size_t valid_unique = 0;
  std::size_t valid_with_dupes = 0;
  double elapsed_s = 0.0;
  double unique_valid_per_s = 0.0; // over the arm's whole run
  /// Common horizon: the earliest time any arm finished. Rates at the horizon
  /// compare every arm over the same time budget.
  double horizon_s = 0.0;
  std::size_t valid_unique_at_horizon = 0;
  double rate_at_horizon = 0.0;
  /// rate_at_horizon over the best baseline's; +inf when every baseline found
  /// nothing by then.
  double ratio_vs_best_baseline = 0.0;

  double duplicate_fraction() const {
    return records ? static_cast<double>(duplicate_records) / static_cast<double>(records)
                   : 0.0;
  }
};

inline std::vector<ArmSummary> summarize(const std::vector<ArmRun> &runs) {
  std::vector<ArmSummary> out;
  double best_baseline = 0.0;
  for (const auto &run : runs) {
    ArmSummary s;
    s.arm = run.arm;
    s.records = run.records.size();
    s.failures = run.failures;
    s.scorer_calls = run.scorer_calls;
    std::set<std::string> valid;
    std::set<std::vector<TokenId>> seqs;
    for (const auto &r : run.records) {
      s.duplicate_records += r.duplicate;
      s.duplicate_token_sequences += !seqs.insert(r.tokens).second;
      s.regex_matches += r.regex_match;
      if (r.valid) {
        ++s.valid_with_dupes;
        valid.insert(r.url);
      }
      s.elapsed_s = std::max(s.elapsed_s, r.validated_at);
    }
    s.valid_unique = valid.size();
    s.unique_valid_per_s =
        s.elapsed_s > 0 ? static_cast<double>(s.valid_unique) / s.elapsed_s : 0.0;
    out.push_back(std::move(s));
  }
  double horizon = std::numeric_limits<double>::infinity();
  for (const auto &s : out)
    if (s.elapsed_s > 0)
      horizon = std::min(horizon, s.elapsed_s);
  if (std::isinf(horizon))
    horizon = 0.0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto &s = out[i];
    s.horizon_s = horizon;
    std::set<std::string> valid;
    for (const auto &r : runs[i].records)
      if (r.valid && r.validated_at <= horizon)
        valid.insert(r.url);
    s.valid_unique_at_horizon = valid.size();
    s.rate_at_horizon = horizon > 0 ? static_cast<double>(valid.size()) / horizon : 0.0;
    if (runs[i].arm != kConstrainedArm)
      best_baseline = std::max(best_baseline, s.rate_at_horizon);
  }
  for (auto &s : out)
    s.ratio_vs_best_baseline = best_baseline > 0 ? s.rate_at_horizon / best_baseline
                                                 : std::numeric_limits<double>::infinity();
  return out;
}

} // namespace tokenfa::harness

#endif
