#ifndef TOKENFA_TOKEN_AUTOMATON_HPP
#define TOKENFA_TOKEN_AUTOMATON_HPP

// Token-level automaton: the byte DFA rewritten so that every edge consumes
// one vocabulary token. A token sequence is accepted iff its decoded bytes
// are accepted by the DFA (and, when terminated, it ends with exactly one
// EOS).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tokenfa/automata.hpp"
#include "tokenfa/error.hpp"
#include "tokenfa/vocabulary.hpp"

namespace tokenfa {

struct TransduceOptions {
  bool terminated = false;
  std::vector<TokenId> deny_list;
  std::size_t max_states = 1'000'000;
  std::size_t max_edges = 100'000'000;
};

class TokenAutomaton {
public:
  /// `dfa_state` tag of the EOS sink in terminated automata.
  static constexpr StateId kEosSink = ~StateId{0};

  struct Edge {
    TokenId token;
    StateId target;
  };
  struct State {
    StateId dfa_state = 0;
    bool accept = false;
    std::vector<Edge> edges; // sorted by token id
  };

  TokenAutomaton() = default;
  TokenAutomaton(std::vector<State> states, StateId start, bool terminated,
                 TokenId eos_id)
      : states_(std::move(states)), start_(start), terminated_(terminated),
        eos_id_(eos_id) {}

  StateId start() const noexcept { return start_; }
  std::size_t size() const noexcept { return states_.size(); }
  bool terminated() const noexcept { return terminated_; }
  TokenId eos_id() const noexcept { return eos_id_; }
  const State &state(StateId s) const { return states_[s]; }
  bool is_accept(StateId s) const { return states_[s].accept; }
  std::span<const Edge> edges(StateId s) const { return states_[s].edges; }

  std::optional<StateId> step(StateId s, TokenId t) const {
    const auto &e = states_[s].edges;
    auto it = std::lower_bound(e.begin(), e.end(), t,
                               [](const Edge &x, TokenId v) { return x.token < v; });
    if (it == e.end() || it->token != t)
      return std::nullopt;
    return it->target;
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto &s : states_)
      n += s.edges.size();
    return n;
  }

  bool empty_language() const {
    return !states_[start_].accept && states_[start_].edges.empty();
  }

private:
  std::vector<State> states_{State{}};
  StateId start_ = 0;
  bool terminated_ = false;
  TokenId eos_id_ = 0;
};

namespace detail {

// Every token whose bytes can be read from DFA state `q`, with the state it
// lands in. Walks the trie and the DFA together so shared prefixes are
// visited once.
inline void lockstep_edges(const Dfa &dfa, const TokenTrie &trie, StateId q,
                           const std::vector<char> &denied,
                           std::vector<TokenAutomaton::Edge> &out) {
  struct Frame {
    TokenTrie::NodeId node;
    StateId dfa_state;
  };
  std::vector<Frame> stack{{TokenTrie::kRoot, q}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const auto &node = trie.node(f.node);
    if (f.node != TokenTrie::kRoot)
      for (TokenId t : node.terminals)
        if (t >= denied.size() || !denied[t])
          out.push_back({t, f.dfa_state});

    const auto &next = dfa.states[f.dfa_state].next;
    auto d = next.begin();
    for (const auto &[byte, child] : node.children) {
      while (d != next.end() && d->byte < byte)
        ++d;
      if (d == next.end())
        break;
      if (d->byte == byte)
        stack.push_back({child, d->target});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto &a, const auto &b) { return a.token < b.token; });
}

} // namespace detail

/// Build the token automaton for `dfa` over `vocab`. States are pruned to
/// those both reachable from start and able to reach acceptance; the start
/// state is always kept.
inline TokenAutomaton transduce(const Dfa &dfa, const Vocabulary &vocab,
                                const TokenTrie &trie,
                                const TransduceOptions &options = {}) {
  std::vector<char> denied(vocab.size(), 0);
  for (TokenId t : options.deny_list) {
    if (t >= vocab.size())
      throw ConfigError("deny list names unknown token id " + std::to_string(t));
    if (options.terminated && t == vocab.eos_id())
      throw ConfigError("EOS cannot be denied for a terminated automaton");
    denied[t] = 1;
  }

  // raw graph indexed by DFA state, plus the optional EOS sink at the end
  const std::size_t sink = dfa.size();
  std::vector<std::vector<TokenAutomaton::Edge>> raw(dfa.size() + 1);
  std::vector<char> reached(dfa.size() + 1, 0);
  std::deque<StateId> queue{dfa.start};
  reached[dfa.start] = 1;
  std::size_t edges = 0;
  std::size_t states = 1;
  while (!queue.empty()) {
    StateId q = queue.front();
    queue.pop_front();
    detail::lockstep_edges(dfa, trie, q, denied, raw[q]);
    if (options.terminated && dfa.is_accept(q))
      raw[q].insert(std::upper_bound(raw[q].begin(), raw[q].end(), vocab.eos_id(),
                                     [](TokenId v, const auto &e) { return v < e.token; }),
                    {vocab.eos_id(), static_cast<StateId>(sink)});
    edges += raw[q].size();
    if (edges > options.max_edges)
      throw ResourceLimitError("token automaton exceeds edge cap of " +
                               std::to_string(options.max_edges));
    for (const auto &e : raw[q]) {
      if (!reached[e.target]) {
        reached[e.target] = 1;
        if (++states > options.max_states)
          throw ResourceLimitError("token automaton exceeds state cap of " +
                                   std::to_string(options.max_states));
        if (e.target != sink)
          queue.push_back(e.target);
      }
    }
  }

  auto accepting = [&](std::size_t q) {
    return options.terminated ? q == sink : (q < sink && dfa.is_accept(static_cast<StateId>(q)));
  };

  // co-reachability over the reversed graph
  std::vector<std::vector<StateId>> reverse(raw.size());
  for (std::size_t q = 0; q < raw.size(); ++q)
    if (reached[q])
      for (const auto &e : raw[q])
        reverse[e.target].push_back(static_cast<StateId>(q));
  std::vector<char> live(raw.size(), 0);
  std::vector<StateId> stack;
  for (std::size_t q = 0; q < raw.size(); ++q)
    if (reached[q] && accepting(q)) {
      live[q] = 1;
      stack.push_back(static_cast<StateId>(q));
    }
  while (!stack.empty()) {
    StateId q = stack.back();
    stack.pop_back();
    for (StateId p : reverse[q])
      if (!live[p]) {
        live[p] = 1;
        stack.push_back(p);
      }
  }

  // breadth-first renumbering over live states in token order
  std::vector<std::int64_t> id(raw.size(), -1);
  std::vector<std::size_t> order{dfa.start};
  id[dfa.start] = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::size_t q = order[i];
    if (!live[q])
      continue;
    for (const auto &e : raw[q])
      if (live[e.target] && id[e.target] < 0) {
        id[e.target] = static_cast<std::int64_t>(order.size());
        order.push_back(e.target);
      }
  }

  std::vector<TokenAutomaton::State> out(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::size_t q = order[i];
    auto &st = out[i];
    st.dfa_state = q == sink ? TokenAutomaton::kEosSink : static_cast<StateId>(q);
    st.accept = accepting(q);
    if (!live[q])
      continue;
    for (const auto &e : raw[q])
      if (live[e.target])
        st.edges.push_back({e.token, static_cast<StateId>(id[e.target])});
  }
  return TokenAutomaton(std::move(out), 0, options.terminated, vocab.eos_id());
}

inline bool accepts(const TokenAutomaton &ta, std::span<const TokenId> tokens) {
  StateId s = ta.start();
  for (TokenId t : tokens) {
    auto next = ta.step(s, t);
    if (!next)
      return false;
    s = *next;
  }
  return ta.is_accept(s);
}

namespace detail {

inline std::string dot_token_label(const Vocabulary &vocab, TokenId t) {
  std::string label = std::to_string(t) + ":";
  if (t == vocab.eos_id())
    return label + "<eos>";
  for (char c : vocab.bytes(t))
    label += dot_byte_label(static_cast<std::uint8_t>(c));
  return label;
}

} // namespace detail

/// Graphviz rendering: one node per state, one edge per token edge labeled
/// `id:bytes`. Accept states are double circles, the start state is bold.
inline std::string export_dot(const TokenAutomaton &ta, const Vocabulary &vocab) {
  std::ostringstream os;
  os << "digraph tokens {\n  rankdir=LR;\n";
  for (StateId s = 0; s < ta.size(); ++s) {
    os << "  " << s << " [shape=" << (ta.is_accept(s) ? "doublecircle" : "circle");
    if (s == ta.start())
      os << ", penwidth=2";
    os << "];\n";
  }
  for (StateId s = 0; s < ta.size(); ++s)
    for (const auto &e : ta.edges(s))
      os << "  " << s << " -> " << e.target << " [label=\""
         << detail::dot_token_label(vocab, e.token) << "\"];\n";
  os << "}\n";
  return os.str();
}

/// Line-oriented canonical serialization.
inline std::string to_canonical_string(const TokenAutomaton &ta) {
  std::ostringstream os;
  os << "token-automaton states " << ta.size() << " edges " << ta.edge_count()
     << " start " << ta.start() << " eos " << ta.eos_id() << " terminated "
     << (ta.terminated() ? 1 : 0) << "\n";
  for (StateId s = 0; s < ta.size(); ++s) {
    const auto &st = ta.state(s);
    os << "state " << s << " dfa ";
    if (st.dfa_state == TokenAutomaton::kEosSink)
      os << "eos-sink";
    else
      os << st.dfa_state;
    os << (st.accept ? " accept" : "") << "\n";
    for (const auto &e : st.edges)
      os << "edge " << s << " " << e.token << " " << e.target << "\n";
  }
  return os.str();
}

} // namespace tokenfa

#endif
