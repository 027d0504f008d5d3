// tokenfa: compile regexes to token automata and query them against a scorer.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tokenfa/tokenfa.hpp"

namespace fs = std::filesystem;
using namespace tokenfa;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2 };

struct QueryFlags {
  std::string pattern;
  std::string vocab;
  std::string scorer = "uniform";
  bool terminated = false;
  std::vector<TokenId> deny;
  std::optional<std::size_t> top_k;
  std::string topk_scope = "full";
  std::size_t max_tokens = 64;
  std::string out;
};

struct CompileFlags {
  std::string pattern;
  std::string vocab;
  bool terminated = false;
  std::vector<TokenId> deny;
  std::string dot;
  std::string out;
};

struct EvalFlags {
  std::string config;
  std::string out;
};

void add_query_flags(CLI::App *cmd, QueryFlags &f) {
  cmd->add_option("-p,--pattern", f.pattern, "Regular expression (anchored, byte-level)")
      ->required();
  cmd->add_option("-v,--vocab", f.vocab, "Vocabulary file")->required();
  cmd->add_option("-s,--scorer", f.scorer,
                  "uniform | ngram:<corpus>:<order>:<alpha> | fixture:<table> | remote:<url>")
      ->capture_default_str();
  cmd->add_flag("-t,--terminated", f.terminated, "Require EOS after the match");
  cmd->add_option("--deny", f.deny, "Token ids excluded from the automaton");
  cmd->add_option("-k,--top-k", f.top_k, "Keep only the k most likely tokens per step");
  cmd->add_option("--topk-scope", f.topk_scope, "full: over the vocabulary; allowed: over legal edges")
      ->check(CLI::IsMember({"full", "allowed"}))
      ->capture_default_str();
  cmd->add_option("-m,--max-tokens", f.max_tokens, "Longest match in tokens")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("-o,--out", f.out, "Write results here instead of standard output");
}

QueryOptions query_options(const QueryFlags &f) {
  QueryOptions q;
  q.top_k = f.top_k;
  q.topk_scope = f.topk_scope == "allowed" ? TopKScope::AllowedOnly : TopKScope::FullVocab;
  q.max_match_tokens = f.max_tokens;
  return q;
}

TokenAutomaton build_automaton(const std::string &pattern, const Vocabulary &vocab,
                               bool terminated, const std::vector<TokenId> &deny) {
  TransduceOptions opts;
  opts.terminated = terminated;
  opts.deny_list = deny;
  return transduce(compile_regex(pattern), vocab, build_trie(vocab), opts);
}

std::size_t edge_count(const TokenAutomaton &ta) {
  std::size_t n = 0;
  for (StateId s = 0; s < ta.size(); ++s)
    n += ta.edges(s).size();
  return n;
}

void write_file(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigError("cannot write " + path);
  out << text;
}

// Standard output unless a path is given.
class Output {
public:
  explicit Output(const std::string &path) {
    if (path.empty())
      return;
    file_.open(path, std::ios::binary);
    if (!file_)
      throw ConfigError("cannot write " + path);
  }
  std::ostream &stream() { return file_.is_open() ? file_ : std::cout; }

private:
  std::ofstream file_;
};

int cmd_compile(const CompileFlags &f) {
  if (f.vocab.empty()) {
    auto dfa = compile_regex(f.pattern);
    if (!f.dot.empty())
      write_file(f.dot, to_dot(dfa));
    if (!f.out.empty())
      write_file(f.out, to_canonical_string(dfa));
    std::cout << "dfa_states=" << dfa.size() << "\n";
    return kOk;
  }
  auto vocab = load_vocabulary(f.vocab);
  auto ta = build_automaton(f.pattern, vocab, f.terminated, f.deny);
  if (!f.dot.empty())
    write_file(f.dot, export_dot(ta, vocab));
  if (!f.out.empty())
    write_file(f.out, to_canonical_string(ta));
  std::size_t accepting = 0;
  for (StateId s = 0; s < ta.size(); ++s)
    accepting += ta.is_accept(s);
  std::cout << "states=" << ta.size() << " edges=" << edge_count(ta)
            << " accepting=" << accepting << "\n";
  return kOk;
}

int cmd_enumerate(const QueryFlags &f, std::size_t limit, const std::string &prompt) {
  auto spec = parse_scorer_spec(f.scorer);
  auto q = query_options(f);
  auto vocab = load_vocabulary(f.vocab);
  auto ta = build_automaton(f.pattern, vocab, f.terminated, f.deny);
  Output out(f.out);
  if (limit == 0)
    return kOk;
  auto scorer = make_scorer(spec, vocab);
  if (!prompt.empty())
    q.prompts = {encode_greedy(build_trie(vocab), prompt)};
  ShortestPathEnumerator it(ta, *scorer, vocab, q);
  for (std::size_t i = 0; i < limit; ++i) {
    auto m = it.next();
    if (!m)
      break;
    out.stream() << to_json_line(*m) << "\n";
  }
  return kOk;
}

int cmd_sample(const QueryFlags &f, std::size_t num, std::uint64_t seed, double temperature,
               std::size_t max_attempts, const std::vector<std::string> &prompts) {
  auto spec = parse_scorer_spec(f.scorer);
  auto q = query_options(f);
  q.seed = seed;
  q.temperature = temperature;
  q.max_attempts = max_attempts;
  auto vocab = load_vocabulary(f.vocab);
  auto ta = build_automaton(f.pattern, vocab, f.terminated, f.deny);
  auto trie = build_trie(vocab);
  for (const auto &p : prompts)
    q.prompts.push_back(encode_greedy(trie, p));
  Output out(f.out);
  if (num == 0)
    return kOk;
  auto scorer = make_scorer(spec, vocab);
  ConstrainedSampler sampler(ta, *scorer, vocab, q);
  for (std::size_t i = 0; i < num; ++i) {
    auto r = sampler.draw();
    nlohmann::ordered_json j;
    if (r.match) {
      j = nlohmann::ordered_json::parse(to_json_line(*r.match));
    } else {
      j["dead_end"] = true;
    }
    j["prompt_index"] = r.prompt_index;
    j["attempts"] = r.attempts;
    out.stream() << j.dump() << "\n";
  }
  return kOk;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path prepare_out_dir(const std::string &dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p))
    throw ConfigError("cannot create output directory " + dir);
  return p;
}

int cmd_eval_mem(const EvalFlags &f) {
  auto t0 = Clock::now();
  auto e = harness::load_memorization_config(f.config);
  auto dir = prepare_out_dir(f.out);
  auto vocab = harness::load_experiment_vocabulary(e.common);
  auto scorer = make_scorer(e.common.scorer_spec, vocab, e.common.base_dir);
  double setup = seconds_since(t0);

  auto t1 = Clock::now();
  auto runs = harness::run_memorization(*scorer, vocab, e.config);
  double generation = seconds_since(t1);
  auto t2 = Clock::now();
  auto validator = harness::make_validator(e.validator);
  harness::validate_records(runs, *validator, e.validator.max_concurrency);
  double validation = seconds_since(t2);

  auto files = harness::write_memorization_reports(dir, e.config.seed, runs);
  harness::write_manifest(dir, "eval-mem", e.config.seed, e.common.raw, files,
                          {{"setup_s", setup},
                           {"generation_s", generation},
                           {"validation_s", validation},
                           {"total_s", seconds_since(t0)}});
  for (const auto &s : harness::summarize(runs))
    if (s.arm == harness::kConstrainedArm)
      std::cout << "eval-mem: " << s.valid_unique << " unique valid URLs from " << s.records
                << " records; throughput ratio vs best baseline "
                << harness::format_number(s.ratio_vs_best_baseline, 3) << "\n";
  return kOk;
}

int cmd_eval_lambada(const EvalFlags &f) {
  auto t0 = Clock::now();
  auto e = harness::load_language_config(f.config);
  auto dataset = harness::load_lambada(e.dataset_path);
  auto dir = prepare_out_dir(f.out);
  auto vocab = harness::load_experiment_vocabulary(e.common);
  auto scorer = make_scorer(e.common.scorer_spec, vocab, e.common.base_dir);
  double setup = seconds_since(t0);

  auto t1 = Clock::now();
  auto report = harness::run_language_understanding(*scorer, vocab, dataset, e.config);
  double queries = seconds_since(t1);

  auto files = harness::write_language_reports(dir, e.common.seed, dataset, report);
  harness::write_manifest(dir, "eval-lambada", e.common.seed, e.common.raw, files,
                          {{"setup_s", setup}, {"queries_s", queries},
                           {"total_s", seconds_since(t0)}});
  std::cout << "eval-lambada:";
  for (const auto &row : report.accuracy)
    std::cout << " " << harness::to_string(row.query) << "="
              << harness::format_number(100.0 * row.accuracy(), 1) << "%";
  std::cout << "\n";
  return kOk;
}

int cmd_eval_bias(const EvalFlags &f) {
  auto t0 = Clock::now();
  auto e = harness::load_bias_config(f.config);
  auto dir = prepare_out_dir(f.out);
  auto vocab = harness::load_experiment_vocabulary(e.common);
  auto scorer = make_scorer(e.common.scorer_spec, vocab, e.common.base_dir);
  double setup = seconds_since(t0);

  auto t1 = Clock::now();
  auto est = harness::run_bias(*scorer, vocab, e.config);
  double sampling = seconds_since(t1);

  auto files = harness::write_bias_reports(dir, e.config.seed, est);
  harness::write_manifest(dir, "eval-bias", e.config.seed, e.common.raw, files,
                          {{"setup_s", setup}, {"sampling_s", sampling},
                           {"total_s", seconds_since(t0)}});
  std::cout << "eval-bias: " << est.samples << " samples, dead-end rate "
            << harness::format_number(est.dead_end_rate(), 4);
  for (std::size_t g = 0; g < est.genders.size(); ++g)
    std::cout << ", " << est.genders[g] << "="
              << harness::format_number(est.gender_marginal(g), 4);
  std::cout << "\n";
  return kOk;
}

void add_eval(CLI::App &app, const char *name, const char *help, EvalFlags &f) {
  auto *cmd = app.add_subcommand(name, help);
  cmd->add_option("-c,--config", f.config, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", f.out, "Directory for CSV reports and the run manifest")
      ->required();
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Regular-expression queries over language models via token automata"};
  app.require_subcommand(1);

  CompileFlags cf;
  auto *compile = app.add_subcommand("compile", "Compile a pattern and report automaton size");
  compile->add_option("-p,--pattern", cf.pattern, "Regular expression")->required();
  compile->add_option("-v,--vocab", cf.vocab, "Vocabulary file; omit to compile the byte DFA only");
  compile->add_flag("-t,--terminated", cf.terminated, "Require EOS after the match");
  compile->add_option("--deny", cf.deny, "Token ids excluded from the automaton");
  compile->add_option("--dot", cf.dot, "Write Graphviz DOT here");
  compile->add_option("-o,--out", cf.out, "Write the canonical serialization here");

  QueryFlags ef;
  std::size_t limit = 10;
  std::string prompt;
  auto *enumerate = app.add_subcommand("enumerate", "Matches in order of decreasing probability");
  add_query_flags(enumerate, ef);
  enumerate->add_option("-n,--limit", limit, "Number of results")->capture_default_str();
  enumerate->add_option("--prompt", prompt, "Prompt text, tokenized greedily");

  QueryFlags sf;
  std::size_t num = 10, max_attempts = 100;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  std::vector<std::string> prompts;
  auto *samp = app.add_subcommand("sample", "Random matches drawn from the scorer");
  add_query_flags(samp, sf);
  samp->add_option("-n,--num", num, "Number of samples")->capture_default_str();
  samp->add_option("--seed", seed, "Random seed")->capture_default_str();
  samp->add_option("--temperature", temperature, "Sampling temperature")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  samp->add_option("--max-attempts", max_attempts, "Attempts per sample before a dead end")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  samp->add_option("--prompt", prompts, "Prompt text; repeat to choose uniformly per sample");

  EvalFlags mem, lam, bias;
  add_eval(app, "eval-mem", "URL memorization experiment", mem);
  add_eval(app, "eval-lambada", "Last-word prediction experiment", lam);
  add_eval(app, "eval-bias", "Gender/profession bias experiment", bias);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*compile)
      return cmd_compile(cf);
    if (*enumerate)
      return cmd_enumerate(ef, limit, prompt);
    if (*samp)
      return cmd_sample(sf, num, seed, temperature, max_attempts, prompts);
    if (app.got_subcommand("eval-mem"))
      return cmd_eval_mem(mem);
    if (app.got_subcommand("eval-lambada"))
      return cmd_eval_lambada(lam);
    if (app.got_subcommand("eval-bias"))
      return cmd_eval_bias(bias);
  } catch (const RegexSyntaxError &e) {
    std::cerr << "tokenfa: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError &e) {
    std::cerr << "tokenfa: " << e.what() << "\n";
    return kUsage;
  } catch (const VocabularyError &e) {
    std::cerr << "tokenfa: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception &e) {
    std::cerr << "tokenfa: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
