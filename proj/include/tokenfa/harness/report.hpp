#ifndef TOKENFA_HARNESS_REPORT_HPP
#define TOKENFA_HARNESS_REPORT_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tokenfa/error.hpp"
#include "tokenfa/harness/bias.hpp"
#include "tokenfa/harness/language_understanding.hpp"
#include "tokenfa/harness/memorization.hpp"

namespace tokenfa::harness {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the config's canonical (key-sorted, compact) JSON text.
inline std::string config_hash(const nlohmann::json &config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return std::string("fnv1a64:") + buf;
}

inline std::string format_number(double x, int decimals = 6) {
  if (std::isinf(x))
    return x > 0 ? "inf" : "-inf";
  if (std::isnan(x))
    return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

/// RFC 4180 quoting when needed.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos)
    return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path &path, std::uint64_t seed,
            const std::vector<std::string> &header)
      : out_(path, std::ios::binary) {
    if (!out_)
      throw ConfigError("cannot write " + path.string());
    out_ << "# seed=" << seed << "\n";
    row(header);
  }

  void row(const std::vector<std::string> &fields) {
    for (std::size_t i = 0; i < fields.size(); ++i)
      out_ << (i ? "," : "") << csv_field(fields[i]);
    out_ << "\n";
  }

private:
  std::ofstream out_;
};

inline std::string join_ids(const std::vector<TokenId> &ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i)
    s += (i ? " " : "") + std::to_string(ids[i]);
  return s;
}

inline std::vector<std::string>
write_memorization_reports(const std::filesystem::path &dir, std::uint64_t seed,
                           const std::vector<ArmRun> &runs) {
  std::vector<std::string> files{"memorization_records.csv", "memorization_throughput.csv",
                                 "memorization_summary.csv"};
  {
    CsvWriter w(dir / files[0], seed,
                {"arm", "emission_index", "emitted_at", "validated_at", "url", "status",
                 "valid", "duplicate", "regex_match", "tokens"});
    for (const auto &run : runs)
      for (const auto &r : run.records)
        w.row({r.arm, std::to_string(r.emission_index), format_number(r.emitted_at),
               format_number(r.validated_at), r.url, r.status, r.valid ? "1" : "0",
               r.duplicate ? "1" : "0", r.regex_match ? "1" : "0", join_ids(r.tokens)});
  }
  {
    CsvWriter w(dir / files[1], seed,
                {"arm", "elapsed_s", "cumulative_valid_unique", "cumulative_valid_with_dupes"});
    for (const auto &p : throughput_curve(runs))
      w.row({p.arm, format_number(p.elapsed_s), std::to_string(p.cumulative_valid_unique),
             std::to_string(p.cumulative_valid_with_dupes)});
  }
  {
    CsvWriter w(dir / files[2], seed,
                {"arm", "records", "failures", "scorer_calls", "duplicate_records",
                 "duplicate_fraction", "duplicate_token_sequences", "regex_match_fraction",
                 "valid_unique", "valid_with_dupes", "elapsed_s", "unique_valid_per_s",
                 "horizon_s", "valid_unique_at_horizon", "rate_at_horizon",
                 "ratio_vs_best_baseline"});
    for (const auto &s : summarize(runs))
      w.row({s.arm, std::to_string(s.records), std::to_string(s.failures),
             std::to_string(s.scorer_calls), std::to_string(s.duplicate_records),
             format_number(s.duplicate_fraction()),
             std::to_string(s.duplicate_token_sequences),
             format_number(s.records ? double(s.regex_matches) / double(s.records) : 0.0),
             std::to_string(s.valid_unique), std::to_string(s.valid_with_dupes),
             format_number(s.elapsed_s), format_number(s.unique_valid_per_s),
             format_number(s.horizon_s), std::to_string(s.valid_unique_at_horizon),
             format_number(s.rate_at_horizon), format_number(s.ratio_vs_best_baseline)});
  }
  return files;
}

inline std::vector<std::string>
write_language_reports(const std::filesystem::path &dir, std::uint64_t seed,
                       const std::vector<LambadaExample> &dataset,
                       const LanguageReport &report) {
  std::vector<std::string> files{"lambada_accuracy.csv", "lambada_predictions.csv"};
  {
    CsvWriter w(dir / files[0], seed, {"query_type", "examples", "hits", "accuracy"});
    for (const auto &row : report.accuracy)
      w.row({to_string(row.query), std::to_string(row.examples), std::to_string(row.hits),
             format_number(row.accuracy())});
  }
  {
    CsvWriter w(dir / files[1], seed,
                {"example", "query_type", "target", "prediction", "hit"});
    for (const auto &p : report.predictions)
      w.row({std::to_string(p.example), to_string(p.query), dataset[p.example].target,
             p.predicted.value_or(""), p.hit ? "1" : "0"});
  }
  return files;
}

inline std::vector<std::string> write_bias_reports(const std::filesystem::path &dir,
                                                   std::uint64_t seed,
                                                   const BiasEstimate &est) {
  std::vector<std::string> files{"bias_matrix.csv", "bias_summary.csv"};
  {
    CsvWriter w(dir / files[0], seed, {"gender", "profession", "count", "conditional"});
    for (std::size_t g = 0; g < est.genders.size(); ++g)
      for (std::size_t p = 0; p < est.professions.size(); ++p)
        w.row({est.genders[g], est.professions[p], std::to_string(est.counts[g][p]),
               format_number(est.conditional(g, p), 9)});
  }
  {
    CsvWriter w(dir / files[1], seed, {"gender", "count", "marginal"});
    for (std::size_t g = 0; g < est.genders.size(); ++g)
      w.row({est.genders[g], std::to_string(est.gender_total(g)),
             format_number(est.gender_marginal(g), 9)});
    w.row({"<dead-end>", std::to_string(est.dead_ends), format_number(est.dead_end_rate(), 9)});
  }
  return files;
}

/// run_manifest.json: seed, config hash, outputs and wall-clock timings.
inline void write_manifest(const std::filesystem::path &dir, const std::string &command,
                           std::uint64_t seed, const nlohmann::json &config,
                           const std::vector<std::string> &outputs,
                           const nlohmann::json &timings) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["seed"] = seed;
  m["config_hash"] = config_hash(config);
  m["outputs"] = outputs;
  m["timings"] = timings;
  std::ofstream out(dir / "run_manifest.json", std::ios::binary);
  if (!out)
    throw ConfigError("cannot write " + (dir / "run_manifest.json").string());
  out << m.dump(2) << "\n";
}

} // namespace tokenfa::harness

#endif
