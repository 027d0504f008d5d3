#ifndef TOKENFA_HARNESS_STOP_WORDS_HPP
#define TOKENFA_HARNESS_STOP_WORDS_HPP

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <string>
#include <string_view>

#include "tokenfa/error.hpp"

namespace tokenfa::harness {

using StopWords = std::set<std::string>; // lower-case

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Same list as data/stop_words.txt.
inline StopWords default_stop_words() {
  return {"a",    "an",   "the",  "and",  "or",   "but",   "if",   "of",   "at",
          "by",   "for",  "with", "about", "to",  "from",  "in",   "on",   "up",
          "out",  "as",   "into", "than", "then", "so",    "it",   "its",  "he",
          "him",  "his",  "she",  "her",  "they", "them",  "their", "we",  "us",
          "our",  "you",  "your", "i",    "me",   "my",    "is",   "was",  "be",
          "been", "were", "are",  "that", "this"};
}

/// One word per line; blank lines and lines starting with '#' are skipped.
inline StopWords load_stop_words(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open stop-word list " + path);
  StopWords out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
      line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b])))
      ++b;
    line.erase(0, b);
    if (line.empty() || line[0] == '#')
      continue;
    out.insert(ascii_lower(line));
  }
  return out;
}

inline bool is_stop_word(const StopWords &words, std::string_view w) {
  return words.count(ascii_lower(w)) > 0;
}

} // namespace tokenfa::harness

#endif
