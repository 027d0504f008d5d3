// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/fixtures.hpp"
#include "support/harness_fixtures.hpp"
#include "support/oracles.hpp"
#include "tokenfa/automata.hpp"
#include "tokenfa/harness/bias.hpp"
#include "tokenfa/harness/language_understanding.hpp"
#include "tokenfa/harness/memorization.hpp"
#include "tokenfa/token_automaton.hpp"
#include "tokenfa/traversal.hpp"

using namespace tokenfa;
using namespace tokenfa::test;
using Seq = std::vector<TokenId>;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string &what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Verdict()> check;
};

TokenAutomaton automaton(const std::string &pattern, const Vocabulary &v, bool terminated) {
  TransduceOptions opts;
  opts.terminated = terminated;
  return transduce(compile_regex(pattern), v, build_trie(v), opts);
}

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

double total_variation(const std::map<Seq, double> &p, const std::map<Seq, double> &q) {
  std::set<Seq> keys;
  for (const auto &[k, _] : p)
    keys.insert(k);
  for (const auto &[k, _] : q)
    keys.insert(k);
  double tv = 0;
  for (const auto &k : keys)
    tv += std::abs((p.count(k) ? p.at(k) : 0.0) - (q.count(k) ? q.at(k) : 0.0));
  return tv / 2;
}

Verdict tokenization_completeness() {
  Verdict v;
  auto vocab = toy_vocabulary();
  auto ta = automaton("The", vocab, false);
  auto got = accepted_paths(ta, 8);
  std::set<Seq> want{{kThe}, {kT, kHe}, {kTh, kE}, {kT, kH, kE}};
  v.require(got == want, std::to_string(got.size()) + " sequences accepted");
  v.require(got == brute_force_language(parse_regex("The"), vocab, 4, false),
            "differs from brute force");
  v.detail = v.pass ? "4 spellings of \"The\"" : v.detail;
  return v;
}

Verdict transducer_equivalence() {
  Verdict v;
  std::mt19937 rng(20240);
  std::size_t sequences = 0;
  for (int i = 0; i < 200; ++i) {
    auto ast = random_ast(rng, 4);
    auto vocab = random_vocabulary(rng, 12, 3, "abc");
    bool term = i % 2 == 1;
    TransduceOptions opts;
    opts.terminated = term;
    auto ta = transduce(minimize(determinize(compile_nfa(ast))), vocab, build_trie(vocab), opts);
    auto got = accepted_paths(ta, 4);
    auto want = brute_force_language(ast, vocab, 4, term);
    v.require(got == want, "instance " + std::to_string(i) + " /" + ast_to_pattern(ast) + "/");
    sequences += want.size();
  }
  if (v.pass)
    v.detail = "200 instances, " + std::to_string(sequences) + " accepted sequences";
  return v;
}

Verdict ordered_enumeration() {
  Verdict v;
  std::mt19937 rng(31337);
  int instances = 0, nonempty = 0;
  double worst = 0;
  while (instances < 50) {
    auto ast = random_ast(rng, 4);
    auto vocab = random_vocabulary(rng);
    bool term = instances % 2 == 1;
    std::unique_ptr<Scorer> scorer;
    if (instances % 2 == 0) {
      std::vector<Seq> corpus;
      for (int s = 0; s < 30; ++s) {
        Seq seq(1 + rng() % 6);
        for (auto &t : seq)
          t = TokenId(rng() % vocab.size());
        corpus.push_back(seq);
      }
      scorer = std::make_unique<NGramModel>(train_ngram(corpus, 3, 0.5, vocab.size()));
    } else {
      scorer = std::make_unique<FixtureScorer>(random_fixture(rng, vocab.size(), 3));
    }
    TransduceOptions opts;
    opts.terminated = term;
    auto ta = transduce(minimize(determinize(compile_nfa(ast))), vocab, build_trie(vocab), opts);
    QueryOptions q;
    q.max_match_tokens = 4;
    auto got = enumerate_shortest(ta, *scorer, vocab, q, 10);
    auto want = brute_force_ranking(brute_force_language(ast, vocab, 4, term), *scorer, {}, 10);
    std::string where = "instance " + std::to_string(instances) + " /" + ast_to_pattern(ast) + "/";
    v.require(got.size() == want.size(), where + " result count");
    std::set<Seq> seen;
    for (std::size_t r = 0; r < std::min(got.size(), want.size()); ++r) {
      v.require(got[r].tokens == want[r].first, where + " rank " + std::to_string(r + 1));
      double err = std::abs(-got[r].logprob - want[r].second);
      worst = std::max(worst, err);
      v.require(err <= 1e-9, where + " cost error " + std::to_string(err));
      v.require(seen.insert(got[r].tokens).second, where + " duplicate");
    }
    nonempty += !want.empty();
    ++instances;
  }
  v.require(nonempty >= 25, "too few non-empty instances");
  if (v.pass) {
    std::ostringstream os;
    os << "50 instances (" << nonempty << " non-empty), max cost error " << worst;
    v.detail = os.str();
  }
  return v;
}

Verdict topk_reachability() {
  Verdict v;
  auto vocab = toy_vocabulary();
  auto f = toy_fixture();
  auto ta = automaton("The", vocab, false);
  QueryOptions q;
  q.top_k = 2;
  std::set<Seq> got;
  for (const auto &m : enumerate_shortest(ta, f, vocab, q, 10))
    got.insert(m.tokens);
  std::set<Seq> want;
  for (const auto &s : accepted_paths(ta, 8))
    if (survives_top_k(f, {}, s, 2))
      want.insert(s);
  v.require(got == want, "reachable set differs from top-2 oracle");
  v.require(want.size() == 2 && want.count({kThe}) && want.count({kT, kHe}),
            "fixture should keep exactly The and T-he");
  // sampling under the same filter never leaves the reachable set
  q.seed = 4;
  for (const auto &s : sample(ta, f, vocab, q, 2000))
    v.require(s.match && want.count(s.match->tokens), "sample outside reachable set");
  if (v.pass)
    v.detail = "k=2 keeps The, T-he; cuts Th-e, T-h-e";
  return v;
}

Verdict sampling_fidelity() {
  Verdict v;
  auto vocab = toy_vocabulary();
  auto f = toy_fixture();
  auto ta = automaton("The|he|e", vocab, false);
  QueryOptions q;
  q.seed = 2023;
  const std::size_t n = 100000;
  auto samples = sample(ta, f, vocab, q, n);
  std::map<Seq, double> got;
  for (const auto &s : samples)
    if (s.match)
      got[s.match->tokens] += 1.0 / double(n);
  auto exact = exact_sample_distribution(brute_force_language(parse_regex("The|he|e"), vocab, 5, false),
                                         f, {}, kEos, false);
  double tv = total_variation(got, exact);
  v.require(tv < 0.02, "TVD " + fmt(tv));

  UniformScorer u(vocab.size());
  QueryOptions pq;
  pq.seed = 99;
  pq.prompts = {{kT}, {kH, kE}};
  double first = 0;
  auto ps = sample(automaton("e", vocab, false), u, vocab, pq, n);
  for (const auto &s : ps)
    first += s.prompt_index == 0;
  double frac = first / double(n);
  v.require(std::abs(frac - 0.5) <= 0.01, "prompt frequency " + fmt(frac));
  if (v.pass)
    v.detail = "TVD " + fmt(tv) + ", prompt split " + fmt(frac) + "/" + fmt(1 - frac);
  return v;
}

Verdict memorization() {
  Verdict v;
  auto f = url_fixture();
  auto scorer = url_scorer(f);
  harness::MemorizationConfig cfg;
  cfg.seed = 7;
  cfg.num_samples = 200;
  auto runs = harness::run_memorization(scorer, f.vocab, cfg);
  harness::MockValidator validator(f.table, {404}, 0.05);
  harness::validate_records(runs, validator, 8);
  auto summary = harness::summarize(runs);
  const auto &c = summary.front();
  v.require(c.arm == harness::kConstrainedArm, "first arm is not the constrained arm");
  v.require(c.ratio_vs_best_baseline > 1.0,
            "throughput ratio " + fmt(c.ratio_vs_best_baseline, 3) + " <= 1");
  v.require(c.duplicate_token_sequences == 0, "constrained arm repeated a token sequence");
  for (const auto &p : harness::throughput_curve(runs))
    v.require(p.cumulative_valid_with_dupes >= p.cumulative_valid_unique,
              p.arm + " curve: with-duplicates below unique");
  if (v.pass)
    v.detail = "ratio " + fmt(c.ratio_vs_best_baseline, 3) + " (" +
               std::to_string(c.valid_unique_at_horizon) + " unique valid by " +
               fmt(c.horizon_s, 2) + "s)";
  return v;
}

Verdict language_understanding() {
  Verdict v;
  auto f = lambada_fixture();
  auto report = harness::run_language_understanding(f.scorer, f.vocab, f.dataset, {});
  std::map<harness::QueryType, double> acc;
  for (const auto &row : report.accuracy)
    acc[row.query] = row.accuracy();
  using Q = harness::QueryType;
  for (Q q : {Q::Word, Q::Terminated, Q::NoStop})
    v.require(acc[q] == 1.0, harness::to_string(q) + " accuracy " + fmt(acc[q], 2));
  v.require(acc[Q::Baseline] < 1.0, "baseline accuracy is 100%");

  auto s = stop_word_fixture();
  auto sr = harness::run_language_understanding(s.scorer, s.vocab, s.dataset, {});
  std::map<Q, std::string> pred;
  for (const auto &p : sr.predictions)
    pred[p.query] = p.predicted.value_or("");
  v.require(pred[Q::Word] == "it", "word query predicted \"" + pred[Q::Word] + "\"");
  v.require(pred[Q::NoStop] == "dog", "no-stop query predicted \"" + pred[Q::NoStop] + "\"");
  if (v.pass)
    v.detail = "word/terminated/no-stop 100%, baseline " + fmt(100 * acc[Q::Baseline], 0) +
               "%; stop-word case it -> dog";
  return v;
}

// Exact P(profession | gender) from all spellings of each query string.
std::vector<std::vector<double>> exact_conditionals(const Scorer &scorer,
                                                    const harness::BiasConfig &cfg) {
  auto vocab = bias_vocabulary();
  auto trie = build_trie(vocab);
  std::vector<std::vector<double>> joint(cfg.genders.size(),
                                         std::vector<double>(cfg.professions.size()));
  auto add = [&](const std::map<Seq, double> &dist, std::size_t g_only) {
    for (const auto &[seq, p] : dist) {
      auto text = decode(vocab, seq);
      for (std::size_t g = 0; g < cfg.genders.size(); ++g)
        for (std::size_t k = 0; k < cfg.professions.size(); ++k) {
          bool hit = cfg.use_context
                         ? g == g_only && text == cfg.professions[k]
                         : text == harness::bias_prompt(cfg, g) + cfg.professions[k];
          if (hit)
            joint[g][k] += p;
        }
    }
  };
  if (cfg.use_context) {
    for (std::size_t g = 0; g < cfg.genders.size(); ++g)
      add(exact_sample_distribution(spellings(cfg.professions, vocab, false), scorer,
                                    encode_greedy(trie, harness::bias_prompt(cfg, g)),
                                    vocab.eos_id(), false),
          g);
  } else {
    add(exact_sample_distribution(spellings(bias_strings(cfg), vocab, false), scorer, {},
                                  vocab.eos_id(), false),
        0);
  }
  for (auto &row : joint) {
    double z = 0;
    for (double x : row)
      z += x;
    for (double &x : row)
      x /= z;
  }
  return joint;
}

Verdict bias() {
  Verdict v;
  auto vocab = bias_vocabulary();
  double worst = 0;
  for (bool context : {false, true}) {
    auto f = bias_fixture(false);
    auto cfg = bias_config(context);
    cfg.num_samples = 100000;
    cfg.seed = context ? 12 : 11;
    auto est = harness::run_bias(f, vocab, cfg);
    auto exact = exact_conditionals(f, cfg);
    for (std::size_t g = 0; g < 2; ++g) {
      double sum = 0;
      for (std::size_t k = 0; k < 3; ++k) {
        double err = std::abs(est.conditional(g, k) - exact[g][k]);
        worst = std::max(worst, err);
        v.require(err <= 0.02, std::string(context ? "context" : "joint") +
                                   " conditional error " + fmt(err));
        sum += est.conditional(g, k);
      }
      v.require(std::abs(sum - 1.0) <= 1e-9, "conditionals do not sum to 1");
    }
    if (context)
      for (std::size_t g = 0; g < 2; ++g)
        v.require(std::abs(est.gender_marginal(g) - 0.5) <= 0.01,
                  "context marginal " + fmt(est.gender_marginal(g)));
  }
  auto sym = bias_fixture(true);
  auto cfg = bias_config(false);
  cfg.num_samples = 100000;
  cfg.seed = 13;
  auto est = harness::run_bias(sym, vocab, cfg);
  double gap = 0;
  for (std::size_t k = 0; k < 3; ++k)
    gap = std::max(gap, std::abs(est.conditional(0, k) - est.conditional(1, k)));
  v.require(gap <= 0.02, "symmetric gap " + fmt(gap));
  if (v.pass)
    v.detail = "max conditional error " + fmt(worst) + ", symmetric gap " + fmt(gap);
  return v;
}

Verdict regex_soundness() {
  Verdict v;
  std::mt19937 rng(8080);
  auto strings = all_strings("abc", 5);
  for (int i = 0; i < 200; ++i) {
    auto ast = random_ast(rng, 4);
    auto dfa = minimize(determinize(compile_nfa(ast)));
    for (const auto &s : strings)
      if (dfa_matches(dfa, s) != ast_matches(ast, s)) {
        v.require(false, "/" + ast_to_pattern(ast) + "/ on \"" + s + "\"");
        break;
      }
    v.require(to_canonical_string(minimize(dfa)) == to_canonical_string(dfa),
              "minimization not idempotent on /" + ast_to_pattern(ast) + "/");
  }
  if (v.pass)
    v.detail = "200 ASTs x " + std::to_string(strings.size()) + " strings";
  return v;
}

} // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "tokenization completeness", 1, tokenization_completeness},
      {2, "transducer oracle equivalence", 60, transducer_equivalence},
      {3, "ordered enumeration", 60, ordered_enumeration},
      {4, "top-k reachability", 1, topk_reachability},
      {5, "sampling fidelity", 60, sampling_fidelity},
      {6, "memorization harness", 120, memorization},
      {7, "language-understanding harness", 10, language_understanding},
      {8, "bias harness", 60, bias},
      {9, "regex pipeline soundness", 30, regex_soundness},
  };
  int failed = 0;
  for (const auto &c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception &e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (v.pass && secs >= c.limit_s) {
      v.pass = false;
      v.detail = "took " + fmt(secs, 2) + "s, limit " + fmt(c.limit_s, 0) + "s";
    }
    failed += !v.pass;
    std::printf("%s criterion %d: %s (%.2fs) - %s\n", v.pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), secs, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
