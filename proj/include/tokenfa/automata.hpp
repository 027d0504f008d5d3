#ifndef TOKENFA_AUTOMATA_HPP
#define TOKENFA_AUTOMATA_HPP

// Byte-level automata: Thompson NFA construction, subset construction and
// Hopcroft minimization, plus DOT export and a canonical text form.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokenfa/error.hpp"
#include "tokenfa/regex.hpp"

namespace tokenfa {

using StateId = std::uint32_t;

struct CompileOptions {
  std::size_t repeat_cap = 256;
  std::size_t max_dfa_states = 1'000'000;
};

struct Nfa {
  struct RangeEdge {
    ByteRange bytes;
    StateId target;
  };
  struct State {
    std::vector<RangeEdge> edges;
    std::vector<StateId> epsilon;
  };

  std::vector<State> states;
  StateId start = 0;
  std::vector<StateId> accepts;

  std::size_t size() const noexcept { return states.size(); }
};

/// Deterministic automaton over bytes. Transitions are kept sorted by byte.
struct Dfa {
  struct Transition {
    std::uint8_t byte;
    StateId target;
  };
  struct State {
    std::vector<Transition> next;
    bool accept = false;
  };

  std::vector<State> states;
  StateId start = 0;

  std::size_t size() const noexcept { return states.size(); }
  bool is_accept(StateId s) const { return states[s].accept; }

  std::optional<StateId> step(StateId s, std::uint8_t b) const {
    const auto &next = states[s].next;
    auto it = std::lower_bound(
        next.begin(), next.end(), b,
        [](const Transition &t, std::uint8_t v) { return t.byte < v; });
    if (it == next.end() || it->byte != b)
      return std::nullopt;
    return it->target;
  }

  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto &s : states)
      n += s.next.size();
    return n;
  }
};

namespace detail {

/// Rewrite Repeat nodes into Concat/Optional/Star so the NFA builder only
/// sees the core operators.
inline RegexAst expand_repeats(const RegexAst &ast, std::size_t cap) {
  RegexAst out = ast;
  for (auto &c : out.children)
    c = expand_repeats(c, cap);
  if (out.kind != RegexKind::Repeat)
    return out;

  const RegexAst &child = out.children.front();
  if (out.min > cap || (out.max && *out.max > cap))
    throw ResourceLimitError("repeat bound exceeds expansion cap of " +
                             std::to_string(cap));
  std::vector<RegexAst> parts(out.min, child);
  if (!out.max) {
    parts.push_back(RegexAst::unary(RegexKind::Star, child));
  } else if (*out.max > out.min) {
    // nested optionals: (c(c(c)?)?)?
    RegexAst tail = RegexAst::unary(RegexKind::Optional, child);
    for (std::size_t i = out.min + 1; i < *out.max; ++i)
      tail = RegexAst::unary(RegexKind::Optional,
                             RegexAst::concat({child, std::move(tail)}));
    parts.push_back(std::move(tail));
  }
  if (parts.empty())
    return RegexAst::empty();
  if (parts.size() == 1)
    return std::move(parts.front());
  return RegexAst::concat(std::move(parts));
}

class ThompsonBuilder {
public:
  struct Fragment {
    StateId in;
    StateId out;
  };

  Fragment build(const RegexAst &n) {
    switch (n.kind) {
    case RegexKind::Empty: {
      StateId s = add();
      return {s, s};
    }
    case RegexKind::Literal: {
      Fragment f{add(), add()};
      nfa.states[f.in].edges.push_back({{n.byte, n.byte}, f.out});
      return f;
    }
    case RegexKind::ByteClass: {
      Fragment f{add(), add()};
      for (const auto &r : n.bytes.ranges())
        nfa.states[f.in].edges.push_back({r, f.out});
      return f;
    }
    case RegexKind::Concat: {
      if (n.children.empty())
        return build(RegexAst::empty());
      Fragment f = build(n.children.front());
      for (std::size_t i = 1; i < n.children.size(); ++i) {
        Fragment g = build(n.children[i]);
        eps(f.out, g.in);
        f.out = g.out;
      }
      return f;
    }
    case RegexKind::Alternation: {
      Fragment f{add(), add()};
      for (const auto &c : n.children) {
        Fragment g = build(c);
        eps(f.in, g.in);
        eps(g.out, f.out);
      }
      return f;
    }
    case RegexKind::Star: {
      Fragment f{add(), add()};
      Fragment g = build(n.children.front());
      eps(f.in, g.in);
      eps(f.in, f.out);
      eps(g.out, g.in);
      eps(g.out, f.out);
      return f;
    }
    case RegexKind::Plus: {
      Fragment g = build(n.children.front());
      StateId out = add();
      eps(g.out, g.in);
      eps(g.out, out);
      return {g.in, out};
    }
    case RegexKind::Optional: {
      Fragment f{add(), add()};
      Fragment g = build(n.children.front());
      eps(f.in, g.in);
      eps(f.in, f.out);
      eps(g.out, f.out);
      return f;
    }
    case RegexKind::Repeat:
      break;
    }
    throw Error("internal: Repeat node reached the NFA builder unexpanded");
  }

  Nfa nfa;

private:
  StateId add() {
    nfa.states.emplace_back();
    return static_cast<StateId>(nfa.states.size() - 1);
  }
  void eps(StateId from, StateId to) { nfa.states[from].epsilon.push_back(to); }
};

inline void epsilon_closure(const Nfa &nfa, std::vector<StateId> &set) {
  std::vector<char> seen(nfa.size(), 0);
  std::vector<StateId> stack = set;
  for (StateId s : set)
    seen[s] = 1;
  while (!stack.empty()) {
    StateId s = stack.back();
    stack.pop_back();
    for (StateId t : nfa.states[s].epsilon) {
      if (!seen[t]) {
        seen[t] = 1;
        set.push_back(t);
        stack.push_back(t);
      }
    }
  }
  std::sort(set.begin(), set.end());
}

/// Renumber states in breadth-first order from start, visiting transitions
/// in byte order. Unreachable states are dropped.
inline Dfa canonicalize(const Dfa &in) {
  std::vector<StateId> order;
  std::vector<std::int64_t> id(in.size(), -1);
  std::deque<StateId> queue{in.start};
  id[in.start] = 0;
  order.push_back(in.start);
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (const auto &t : in.states[s].next) {
      if (id[t.target] < 0) {
        id[t.target] = static_cast<std::int64_t>(order.size());
        order.push_back(t.target);
        queue.push_back(t.target);
      }
    }
  }
  Dfa out;
  out.states.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto &src = in.states[order[i]];
    out.states[i].accept = src.accept;
    for (const auto &t : src.next)
      out.states[i].next.push_back(
          {t.byte, static_cast<StateId>(id[t.target])});
  }
  out.start = 0;
  return out;
}

inline std::string dot_byte_label(std::uint8_t b) {
  if (b == '"')
    return "\\\"";
  if (b == '\\')
    return "\\\\";
  if (b >= 0x21 && b < 0x7f)
    return std::string(1, static_cast<char>(b));
  static constexpr char hex[] = "0123456789ABCDEF";
  return std::string("\\\\x") + hex[b >> 4] + hex[b & 15];
}

inline std::string dot_range_label(ByteRange r) {
  if (r.lo == r.hi)
    return dot_byte_label(r.lo);
  return "[" + dot_byte_label(r.lo) + "-" + dot_byte_label(r.hi) + "]";
}

/// Collapse a sorted per-byte transition list into (range, target) runs.
inline std::vector<std::pair<ByteRange, StateId>>
transition_runs(const std::vector<Dfa::Transition> &next) {
  std::vector<std::pair<ByteRange, StateId>> runs;
  for (const auto &t : next) {
    if (!runs.empty() && runs.back().second == t.target &&
        runs.back().first.hi + 1 == t.byte)
      runs.back().first.hi = t.byte;
    else
      runs.push_back({{t.byte, t.byte}, t.target});
  }
  return runs;
}

} // namespace detail

/// Thompson construction. Repeat nodes are expanded first, subject to
/// `options.repeat_cap`.
inline Nfa compile_nfa(const RegexAst &ast, const CompileOptions &options = {}) {
  detail::ThompsonBuilder builder;
  auto frag = builder.build(detail::expand_repeats(ast, options.repeat_cap));
  builder.nfa.start = frag.in;
  builder.nfa.accepts = {frag.out};
  return std::move(builder.nfa);
}

/// Subset construction. Only reachable, non-empty subsets are materialized.
inline Dfa determinize(const Nfa &nfa, const CompileOptions &options = {}) {
  std::vector<char> is_accept(nfa.size(), 0);
  for (StateId a : nfa.accepts)
    is_accept[a] = 1;

  std::map<std::vector<StateId>, StateId> index;
  std::vector<std::vector<StateId>> subsets;
  Dfa dfa;

  auto intern = [&](std::vector<StateId> set) -> StateId {
    auto it = index.find(set);
    if (it != index.end())
      return it->second;
    if (subsets.size() >= options.max_dfa_states)
      throw ResourceLimitError("DFA exceeds state cap of " +
                               std::to_string(options.max_dfa_states));
    auto id = static_cast<StateId>(subsets.size());
    index.emplace(set, id);
    dfa.states.emplace_back();
    dfa.states.back().accept = std::any_of(
        set.begin(), set.end(), [&](StateId s) { return is_accept[s]; });
    subsets.push_back(std::move(set));
    return id;
  };

  std::vector<StateId> start{nfa.start};
  detail::epsilon_closure(nfa, start);
  dfa.start = intern(std::move(start));

  for (std::size_t cur = 0; cur < subsets.size(); ++cur) {
    // split the byte axis at every range boundary of the subset's edges
    std::vector<int> cuts{0, 256};
    for (StateId s : subsets[cur])
      for (const auto &e : nfa.states[s].edges) {
        cuts.push_back(e.bytes.lo);
        cuts.push_back(e.bytes.hi + 1);
      }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::vector<Dfa::Transition> next;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      int lo = cuts[i];
      int hi = cuts[i + 1] - 1;
      std::vector<StateId> targets;
      for (StateId s : subsets[cur])
        for (const auto &e : nfa.states[s].edges)
          if (e.bytes.lo <= lo && e.bytes.hi >= hi)
            targets.push_back(e.target);
      if (targets.empty())
        continue;
      std::sort(targets.begin(), targets.end());
      targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
      detail::epsilon_closure(nfa, targets);
      StateId t = intern(std::move(targets));
      for (int b = lo; b <= hi; ++b)
        next.push_back({static_cast<std::uint8_t>(b), t});
    }
    dfa.states[cur].next = std::move(next);
  }
  return dfa;
}

/// Hopcroft partition refinement. The result is trimmed (states with an
/// empty future language are removed) and canonically numbered.
inline Dfa minimize(const Dfa &dfa) {
  const std::size_t n = dfa.size();
  const auto dead = static_cast<StateId>(n);
  const std::size_t total = n + 1;

  // Bytes that every state treats identically share one alphabet class.
  std::array<std::uint16_t, 256> class_of{};
  std::vector<std::uint8_t> class_rep;
  {
    std::map<std::vector<StateId>, std::uint16_t> columns;
    for (int b = 0; b < 256; ++b) {
      std::vector<StateId> col(n);
      for (StateId s = 0; s < n; ++s)
        col[s] = dfa.step(s, static_cast<std::uint8_t>(b)).value_or(dead);
      auto [it, inserted] =
          columns.emplace(std::move(col), static_cast<std::uint16_t>(class_rep.size()));
      if (inserted)
        class_rep.push_back(static_cast<std::uint8_t>(b));
      class_of[b] = it->second;
    }
  }
  const std::size_t k = class_rep.size();

  std::vector<StateId> delta(total * k, dead);
  for (StateId s = 0; s < n; ++s)
    for (std::size_t c = 0; c < k; ++c)
      delta[s * k + c] = dfa.step(s, class_rep[c]).value_or(dead);

  // inverse[c][t] = sources reaching t on class c
  std::vector<std::vector<std::vector<StateId>>> inverse(
      k, std::vector<std::vector<StateId>>(total));
  for (StateId s = 0; s < total; ++s)
    for (std::size_t c = 0; c < k; ++c)
      inverse[c][delta[s * k + c]].push_back(s);

  std::vector<std::uint32_t> block_of(total, 0);
  std::vector<std::vector<StateId>> blocks;
  {
    std::vector<StateId> acc, rej;
    for (StateId s = 0; s < total; ++s)
      (s < n && dfa.states[s].accept ? acc : rej).push_back(s);
    for (auto *b : {&acc, &rej}) {
      if (b->empty())
        continue;
      for (StateId s : *b)
        block_of[s] = static_cast<std::uint32_t>(blocks.size());
      blocks.push_back(std::move(*b));
    }
  }

  std::deque<std::uint32_t> work;
  std::vector<char> in_work;
  for (std::uint32_t b = 0; b < blocks.size(); ++b) {
    work.push_back(b);
    in_work.push_back(1);
  }

  std::vector<char> marked(total, 0);
  std::vector<std::uint32_t> hit_count;
  while (!work.empty()) {
    std::uint32_t splitter = work.front();
    work.pop_front();
    in_work[splitter] = 0;
    const std::vector<StateId> members = blocks[splitter];

    for (std::size_t c = 0; c < k; ++c) {
      std::vector<StateId> preimage;
      for (StateId t : members)
        for (StateId s : inverse[c][t])
          preimage.push_back(s);
      if (preimage.empty())
        continue;

      hit_count.resize(blocks.size(), 0);
      std::vector<std::uint32_t> touched;
      for (StateId s : preimage) {
        if (marked[s])
          continue;
        marked[s] = 1;
        if (hit_count[block_of[s]]++ == 0)
          touched.push_back(block_of[s]);
      }
      for (std::uint32_t y : touched) {
        std::uint32_t hits = hit_count[y];
        hit_count[y] = 0;
        if (hits == blocks[y].size())
          continue;
        std::vector<StateId> inside, outside;
        for (StateId s : blocks[y])
          (marked[s] ? inside : outside).push_back(s);
        auto fresh = static_cast<std::uint32_t>(blocks.size());
        blocks[y] = std::move(outside);
        for (StateId s : inside)
          block_of[s] = fresh;
        blocks.push_back(std::move(inside));
        hit_count.push_back(0);
        in_work.push_back(0);
        if (in_work[y]) {
          work.push_back(fresh);
          in_work[fresh] = 1;
        } else {
          std::uint32_t smaller =
              blocks[fresh].size() <= blocks[y].size() ? fresh : y;
          work.push_back(smaller);
          in_work[smaller] = 1;
        }
      }
      for (StateId s : preimage)
        marked[s] = 0;
    }
  }

  const std::uint32_t dead_block = block_of[dead];
  Dfa out;
  if (block_of[dfa.start] == dead_block) {
    out.states.emplace_back();
    return out;
  }
  // dense ids for the surviving blocks
  std::vector<std::int64_t> new_id(blocks.size(), -1);
  StateId next_id = 0;
  for (std::uint32_t b = 0; b < blocks.size(); ++b)
    if (b != dead_block && !blocks[b].empty())
      new_id[b] = next_id++;
  out.states.resize(next_id);
  for (std::uint32_t b = 0; b < blocks.size(); ++b) {
    if (new_id[b] < 0)
      continue;
    StateId rep = blocks[b].front();
    auto &st = out.states[static_cast<std::size_t>(new_id[b])];
    st.accept = dfa.states[rep].accept;
    for (int byte = 0; byte < 256; ++byte) {
      StateId t = delta[rep * k + class_of[byte]];
      if (block_of[t] != dead_block)
        st.next.push_back({static_cast<std::uint8_t>(byte),
                           static_cast<StateId>(new_id[block_of[t]])});
    }
  }
  out.start = static_cast<StateId>(new_id[block_of[dfa.start]]);
  return detail::canonicalize(out);
}

/// Parse, build, determinize and minimize in one step.
inline Dfa compile_regex(std::string_view pattern,
                         const CompileOptions &options = {}) {
  return minimize(determinize(compile_nfa(parse_regex(pattern), options), options));
}

/// Full anchored match.
inline bool dfa_matches(const Dfa &dfa, std::string_view input) {
  StateId s = dfa.start;
  for (char c : input) {
    auto t = dfa.step(s, static_cast<std::uint8_t>(c));
    if (!t)
      return false;
    s = *t;
  }
  return dfa.is_accept(s);
}

/// NFA language membership by direct set simulation.
inline bool nfa_matches(const Nfa &nfa, std::string_view input) {
  std::vector<StateId> cur{nfa.start};
  detail::epsilon_closure(nfa, cur);
  for (char ch : input) {
    auto b = static_cast<std::uint8_t>(ch);
    std::vector<StateId> next;
    for (StateId s : cur)
      for (const auto &e : nfa.states[s].edges)
        if (e.bytes.lo <= b && b <= e.bytes.hi)
          next.push_back(e.target);
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    detail::epsilon_closure(nfa, next);
    cur = std::move(next);
  }
  return std::any_of(cur.begin(), cur.end(), [&](StateId s) {
    return std::find(nfa.accepts.begin(), nfa.accepts.end(), s) !=
           nfa.accepts.end();
  });
}

inline std::string to_dot(const Nfa &nfa) {
  std::ostringstream os;
  os << "digraph nfa {\n  rankdir=LR;\n";
  for (StateId s = 0; s < nfa.size(); ++s) {
    bool acc = std::find(nfa.accepts.begin(), nfa.accepts.end(), s) !=
               nfa.accepts.end();
    os << "  " << s << " [shape=" << (acc ? "doublecircle" : "circle") << "];\n";
  }
  os << "  start [shape=point];\n  start -> " << nfa.start << ";\n";
  for (StateId s = 0; s < nfa.size(); ++s) {
    for (const auto &e : nfa.states[s].edges)
      os << "  " << s << " -> " << e.target << " [label=\""
         << detail::dot_range_label(e.bytes) << "\"];\n";
    for (StateId t : nfa.states[s].epsilon)
      os << "  " << s << " -> " << t << " [label=\"&epsilon;\"];\n";
  }
  os << "}\n";
  return os.str();
}

inline std::string to_dot(const Dfa &dfa) {
  std::ostringstream os;
  os << "digraph dfa {\n  rankdir=LR;\n";
  for (StateId s = 0; s < dfa.size(); ++s)
    os << "  " << s << " [shape="
       << (dfa.states[s].accept ? "doublecircle" : "circle") << "];\n";
  os << "  start [shape=point];\n  start -> " << dfa.start << ";\n";
  for (StateId s = 0; s < dfa.size(); ++s)
    for (const auto &[range, target] : detail::transition_runs(dfa.states[s].next))
      os << "  " << s << " -> " << target << " [label=\""
         << detail::dot_range_label(range) << "\"];\n";
  os << "}\n";
  return os.str();
}

/// Line-oriented canonical form; equal strings mean identical automata.
inline std::string to_canonical_string(const Dfa &dfa) {
  std::ostringstream os;
  os << "dfa " << dfa.size() << " start " << dfa.start << "\n";
  for (StateId s = 0; s < dfa.size(); ++s) {
    os << "state " << s << (dfa.states[s].accept ? " accept" : "") << "\n";
    for (const auto &[range, target] : detail::transition_runs(dfa.states[s].next))
      os << "  " << int(range.lo) << "-" << int(range.hi) << " " << target
         << "\n";
  }
  return os.str();
}

} // namespace tokenfa

#endif
