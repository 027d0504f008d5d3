#ifndef TOKENFA_VOCABULARY_HPP
#define TOKENFA_VOCABULARY_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tokenfa/detail/base64.hpp"
#include "tokenfa/error.hpp"

namespace tokenfa {

using TokenId = std::uint32_t;

/// Token id <-> byte string table. Ids are dense; the end-of-sequence entry
/// is a control token with an empty byte string.
class Vocabulary {
public:
  Vocabulary() = default;

  Vocabulary(std::vector<std::string> entries, TokenId eos_id)
      : entries_(std::move(entries)), eos_id_(eos_id) {
    if (eos_id_ >= entries_.size())
      throw VocabularyError(0, "missing EOS: eos_id " + std::to_string(eos_id_) +
                                   " is outside the table");
    if (!entries_[eos_id_].empty())
      throw VocabularyError(0, "EOS entry must have an empty byte string");
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (i != eos_id_ && entries_[i].empty())
        throw VocabularyError(0, "token " + std::to_string(i) +
                                     " has an empty byte string");
  }

  std::size_t size() const noexcept { return entries_.size(); }
  TokenId eos_id() const noexcept { return eos_id_; }
  bool contains(TokenId id) const noexcept { return id < entries_.size(); }

  const std::string &bytes(TokenId id) const {
    if (!contains(id))
      throw VocabularyError(0, "unknown token id " + std::to_string(id));
    return entries_[id];
  }

  const std::vector<std::string> &entries() const noexcept { return entries_; }

private:
  std::vector<std::string> entries_;
  TokenId eos_id_ = 0;
};

/// Read the line-oriented vocabulary format:
///   {"eos_id": <int>, "size": <int>}
///   {"id": <int>, "bytes_b64": "<base64>"}   (size lines, ids 0..size-1)
inline Vocabulary parse_vocabulary(std::istream &in) {
  using nlohmann::json;
  std::string line;
  std::size_t lineno = 0;

  auto parse_line = [&](const std::string &text) {
    try {
      return json::parse(text);
    } catch (const json::parse_error &e) {
      throw VocabularyError(lineno, std::string("malformed JSON: ") + e.what());
    }
  };
  auto get_int = [&](const json &obj, const char *key) -> std::int64_t {
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number_integer())
      throw VocabularyError(lineno, std::string("expected integer field \"") +
                                        key + "\"");
    return obj[key].get<std::int64_t>();
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty())
      break;
  }
  if (line.empty())
    throw VocabularyError(lineno, "missing header line");
  json header = parse_line(line);
  if (!header.is_object() || !header.contains("eos_id"))
    throw VocabularyError(lineno, "missing EOS: header has no eos_id");
  std::int64_t eos = get_int(header, "eos_id");
  std::int64_t size = get_int(header, "size");
  if (size < 1)
    throw VocabularyError(lineno, "size must be positive");
  if (eos < 0 || eos >= size)
    throw VocabularyError(lineno, "missing EOS: eos_id outside 0..size-1");

  std::vector<std::string> entries;
  entries.reserve(static_cast<std::size_t>(size));
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    json entry = parse_line(line);
    std::int64_t id = get_int(entry, "id");
    auto expected = static_cast<std::int64_t>(entries.size());
    if (id != expected)
      throw VocabularyError(lineno, "gap in ids: expected " +
                                        std::to_string(expected) + ", got " +
                                        std::to_string(id));
    if (id >= size)
      throw VocabularyError(lineno, "more entries than declared size");
    if (!entry.contains("bytes_b64") || !entry["bytes_b64"].is_string())
      throw VocabularyError(lineno, "expected string field \"bytes_b64\"");
    auto bytes = detail::base64_decode(entry["bytes_b64"].get<std::string>());
    if (!bytes)
      throw VocabularyError(lineno, "invalid base64");
    entries.push_back(std::move(*bytes));
  }
  if (static_cast<std::int64_t>(entries.size()) != size)
    throw VocabularyError(lineno, "expected " + std::to_string(size) +
                                      " entries, found " +
                                      std::to_string(entries.size()));
  return Vocabulary(std::move(entries), static_cast<TokenId>(eos));
}

inline Vocabulary parse_vocabulary(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_vocabulary(in);
}

inline Vocabulary load_vocabulary(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw VocabularyError(0, "cannot open " + path);
  return parse_vocabulary(in);
}

inline std::string serialize_vocabulary(const Vocabulary &vocab) {
  std::string out = "{\"eos_id\": " + std::to_string(vocab.eos_id()) +
                    ", \"size\": " + std::to_string(vocab.size()) + "}\n";
  for (TokenId id = 0; id < vocab.size(); ++id)
    out += "{\"id\": " + std::to_string(id) + ", \"bytes_b64\": \"" +
           detail::base64_encode(vocab.bytes(id)) + "\"}\n";
  return out;
}

inline void save_vocabulary(const Vocabulary &vocab, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw VocabularyError(0, "cannot write " + path);
  out << serialize_vocabulary(vocab);
}

/// Byte trie over every non-EOS token string.
class TokenTrie {
public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kRoot = 0;
  static constexpr NodeId kNone = ~NodeId{0};

  struct Node {
    std::vector<std::pair<std::uint8_t, NodeId>> children; // sorted by byte
    std::vector<TokenId> terminals;                         // ascending ids
  };

  TokenTrie() : nodes_(1) {}

  explicit TokenTrie(const Vocabulary &vocab) : nodes_(1) {
    for (TokenId id = 0; id < vocab.size(); ++id) {
      if (id == vocab.eos_id())
        continue;
      NodeId n = kRoot;
      for (char c : vocab.bytes(id))
        n = child_or_insert(n, static_cast<std::uint8_t>(c));
      nodes_[n].terminals.push_back(id);
    }
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  const Node &node(NodeId n) const { return nodes_[n]; }

  NodeId child(NodeId n, std::uint8_t b) const {
    const auto &ch = nodes_[n].children;
    auto it = std::lower_bound(ch.begin(), ch.end(), b,
                               [](const auto &p, std::uint8_t v) { return p.first < v; });
    return it != ch.end() && it->first == b ? it->second : kNone;
  }

  /// Node spelled by `bytes`, or kNone.
  NodeId find(std::string_view bytes) const {
    NodeId n = kRoot;
    for (char c : bytes) {
      n = child(n, static_cast<std::uint8_t>(c));
      if (n == kNone)
        return kNone;
    }
    return n;
  }

  /// Ids whose string is exactly `bytes` (empty when none).
  std::span<const TokenId> lookup(std::string_view bytes) const {
    NodeId n = find(bytes);
    if (n == kNone)
      return {};
    return nodes_[n].terminals;
  }

private:
  NodeId child_or_insert(NodeId n, std::uint8_t b) {
    auto &ch = nodes_[n].children;
    auto it = std::lower_bound(ch.begin(), ch.end(), b,
                               [](const auto &p, std::uint8_t v) { return p.first < v; });
    if (it != ch.end() && it->first == b)
      return it->second;
    auto fresh = static_cast<NodeId>(nodes_.size());
    ch.insert(it, {b, fresh});
    nodes_.emplace_back();
    return fresh;
  }

  std::vector<Node> nodes_;
};

inline TokenTrie build_trie(const Vocabulary &vocab) { return TokenTrie(vocab); }

/// Concatenated bytes of `tokens`; EOS contributes nothing.
inline std::string decode(const Vocabulary &vocab, std::span<const TokenId> tokens) {
  std::string out;
  for (TokenId t : tokens)
    out += vocab.bytes(t);
  return out;
}

/// Greedy longest-match tokenization of `text`; among duplicate strings the
/// lowest id wins.
inline std::vector<TokenId> encode_greedy(const TokenTrie &trie,
                                          std::string_view text) {
  std::vector<TokenId> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    TokenTrie::NodeId n = TokenTrie::kRoot;
    std::size_t best_len = 0;
    TokenId best = 0;
    for (std::size_t i = pos; i < text.size(); ++i) {
      n = trie.child(n, static_cast<std::uint8_t>(text[i]));
      if (n == TokenTrie::kNone)
        break;
      if (!trie.node(n).terminals.empty()) {
        best_len = i - pos + 1;
        best = trie.node(n).terminals.front();
      }
    }
    if (best_len == 0)
      throw VocabularyError(0, "no token covers byte offset " +
                                   std::to_string(pos) + " of the input");
    out.push_back(best);
    pos += best_len;
  }
  return out;
}

} // namespace tokenfa

#endif
