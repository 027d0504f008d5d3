#ifndef TOKENFA_TESTS_FIXTURES_HPP
#define TOKENFA_TESTS_FIXTURES_HPP

#include <string>
#include <vector>

#include "tokenfa/scorer.hpp"
#include "tokenfa/vocabulary.hpp"

namespace tokenfa::test {

// ids of the toy vocabulary
enum ToyId : TokenId { kT = 0, kH = 1, kE = 2, kTh = 3, kHe = 4, kThe = 5, kEos = 6 };

/// {T, h, e, Th, he, The, <eos>}: every partition of "The" is a token.
inline Vocabulary toy_vocabulary() {
  return Vocabulary({"T", "h", "e", "Th", "he", "The", ""}, kEos);
}

/// Per-prefix distributions over the toy vocabulary. Path probabilities:
///   The 0.30, T-he 0.125, Th-e 0.12, T-h-e 0.0175.
/// With top-2 over the full vocabulary, Th (3rd at the root) and h (3rd
/// after T) are cut, so only The and T-he stay reachable.
inline FixtureScorer toy_fixture() {
  FixtureScorer f(7);
  //               T     h     e     Th    he    The   eos
  f.set_probs({}, {0.25, 0.10, 0.05, 0.20, 0.05, 0.30, 0.05});
  f.set_probs({kT}, {0.05, 0.10, 0.25, 0.02, 0.50, 0.03, 0.05});
  f.set_probs({kTh}, {0.05, 0.05, 0.60, 0.05, 0.05, 0.05, 0.15});
  f.set_probs({kT, kH}, {0.05, 0.05, 0.70, 0.05, 0.05, 0.05, 0.05});
  f.set_probs({kThe}, {0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.70});
  f.set_probs({kT, kHe}, {0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.70});
  f.set_probs({kTh, kE}, {0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.70});
  f.set_probs({kT, kH, kE}, {0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.70});
  return f;
}

} // namespace tokenfa::test

#endif
