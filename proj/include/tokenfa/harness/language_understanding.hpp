#ifndef TOKENFA_HARNESS_LANGUAGE_UNDERSTANDING_HPP
#define TOKENFA_HARNESS_LANGUAGE_UNDERSTANDING_HPP

#include <cctype>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tokenfa/automata.hpp"
#include "tokenfa/harness/stop_words.hpp"
#include "tokenfa/regex.hpp"
#include "tokenfa/scorer.hpp"
#include "tokenfa/token_automaton.hpp"
#include "tokenfa/traversal.hpp"
#include "tokenfa/vocabulary.hpp"

namespace tokenfa::harness {

struct LambadaExample {
  std::string context;
  std::string target;
};

enum class QueryType { Baseline, Word, Terminated, NoStop };

inline constexpr QueryType kAllQueryTypes[] = {QueryType::Baseline, QueryType::Word,
                                               QueryType::Terminated, QueryType::NoStop};

inline std::string to_string(QueryType q) {
  switch (q) {
  case QueryType::Baseline:
    return "baseline";
  case QueryType::Word:
    return "word";
  case QueryType::Terminated:
    return "terminated";
  case QueryType::NoStop:
    return "no-stop";
  }
  return "?";
}

inline QueryType parse_query_type(std::string_view s) {
  for (QueryType q : kAllQueryTypes)
    if (to_string(q) == s)
      return q;
  throw ConfigError("unknown query type \"" + std::string(s) + "\"");
}

/// JSON-lines `{"context": "...", "target": "..."}`.
inline std::vector<LambadaExample> parse_lambada(std::istream &in) {
  std::vector<LambadaExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("context").get<std::string>(), j.at("target").get<std::string>()});
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<LambadaExample> load_lambada(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open dataset " + path);
  return parse_lambada(in);
}

/// Trim ASCII punctuation from both ends.
inline std::string strip_punctuation(std::string_view w) {
  std::size_t b = 0, e = w.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(w[b])))
    ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(w[e - 1])))
    --e;
  return std::string(w.substr(b, e - b));
}

/// Distinct whitespace-delimited words of `text`, punctuation stripped, in
/// order of first appearance.
inline std::vector<std::string> context_words(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
      ++j;
    if (j > i) {
      auto w = strip_punctuation(text.substr(i, j - i));
      if (!w.empty() && seen.insert(w).second)
        out.push_back(std::move(w));
    }
    i = j;
  }
  return out;
}

/// Word extracted from decoded model output: leading whitespace and
/// surrounding punctuation removed.
inline std::string normalize_prediction(std::string_view decoded) {
  std::size_t b = 0;
  while (b < decoded.size() && std::isspace(static_cast<unsigned char>(decoded[b])))
    ++b;
  return strip_punctuation(decoded.substr(b));
}

/// Pattern ` ?(w1|w2|...)` over escaped words.
inline std::string word_alternation(const std::vector<std::string> &words) {
  std::string p = " ?(";
  for (std::size_t i = 0; i < words.size(); ++i)
    p += (i ? "|" : "") + regex_escape(words[i]);
  return p + ")";
}

inline constexpr const char *kAnyWordPattern = " ?[^ \\t\\n\\r\\f\\v]+";

struct LanguageConfig {
  std::vector<QueryType> query_types{kAllQueryTypes, kAllQueryTypes + 4};
  StopWords stop_words = default_stop_words();
  std::size_t max_examples = 0; // 0: all
  std::size_t max_match_tokens = 8;
};

struct Prediction {
  std::size_t example = 0;
  QueryType query = QueryType::Baseline;
  std::optional<std::string> predicted; // empty: no candidate
  bool hit = false;
};

struct AccuracyRow {
  QueryType query = QueryType::Baseline;
  std::size_t examples = 0;
  std::size_t hits = 0;
  double accuracy() const {
    return examples ? static_cast<double>(hits) / static_cast<double>(examples) : 0.0;
  }
};

struct LanguageReport {
  std::vector<AccuracyRow> accuracy;
  std::vector<Prediction> predictions;
};

/// Query automaton for one example, or nullopt when the candidate set is
/// empty.
inline std::optional<TokenAutomaton> lambada_query(QueryType q,
                                                   const LambadaExample &ex,
                                                   const Vocabulary &vocab,
                                                   const TokenTrie &trie,
                                                   const StopWords &stop_words) {
  std::string pattern;
  TransduceOptions topts;
  if (q == QueryType::Baseline) {
    pattern = kAnyWordPattern;
  } else {
    auto words = context_words(ex.context);
    if (q == QueryType::NoStop)
      std::erase_if(words, [&](const std::string &w) { return is_stop_word(stop_words, w); });
    if (words.empty())
      return std::nullopt;
    pattern = word_alternation(words);
    topts.terminated = q != QueryType::Word;
  }
  return transduce(compile_regex(pattern), vocab, trie, topts);
}

/// Most probable match per query type. Baseline keeps only the single most
/// likely token at each step over the whole vocabulary.
inline LanguageReport run_language_understanding(const Scorer &scorer,
                                                 const Vocabulary &vocab,
                                                 const std::vector<LambadaExample> &dataset,
                                                 const LanguageConfig &config) {
  if (config.query_types.empty())
    throw ConfigError("no query types selected");
  const TokenTrie trie = build_trie(vocab);
  std::size_t n = dataset.size();
  if (config.max_examples)
    n = std::min(n, config.max_examples);

  LanguageReport report;
  for (QueryType q : config.query_types)
    report.accuracy.push_back({q, n, 0});

  for (std::size_t i = 0; i < n; ++i) {
    const auto &ex = dataset[i];
    const auto prompt = encode_greedy(trie, ex.context);
    for (std::size_t qi = 0; qi < config.query_types.size(); ++qi) {
      QueryType q = config.query_types[qi];
      Prediction p;
      p.example = i;
      p.query = q;
      if (auto ta = lambada_query(q, ex, vocab, trie, config.stop_words)) {
        QueryOptions opts;
        opts.prompts = {prompt};
        opts.max_match_tokens = config.max_match_tokens;
        if (q == QueryType::Baseline)
          opts.top_k = 1;
        auto best = enumerate_shortest(*ta, scorer, vocab, opts, 1);
        if (!best.empty())
          p.predicted = normalize_prediction(best.front().decoded);
      }
      p.hit = p.predicted && *p.predicted == ex.target;
      report.accuracy[qi].hits += p.hit;
      report.predictions.push_back(std::move(p));
    }
  }
  return report;
}

} // namespace tokenfa::harness

#endif
