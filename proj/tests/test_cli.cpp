#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "support/fixture_files.hpp"
#include "tokenfa/detail/base64.hpp"

namespace fs = std::filesystem;
using namespace tokenfa;
using namespace tokenfa::test;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;

  std::vector<std::string> lines() const {
    std::vector<std::string> v;
    std::istringstream in(out);
    for (std::string l; std::getline(in, l);)
      v.push_back(l);
    return v;
  }
};

std::string quote(const std::string &s) {
  std::string q = "'";
  for (char c : s)
    q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("tokenfa_cli_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    write_fixture_files(root_);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static CliRun run(const std::vector<std::string> &args) {
    std::string cmd = quote(TOKENFA_CLI);
    for (const auto &a : args)
      cmd += " " + quote(a);
    auto err_path = root_ / "stderr.txt";
    cmd += " 2>" + quote(err_path.string());
    CliRun r;
    FILE *p = ::popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0)
      r.out.append(buf, n);
    int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_path);
    return r;
  }

  static std::string path(const std::string &rel) { return (root_ / rel).string(); }

  static fs::path root_;
};

fs::path Cli::root_;

std::size_t field(const std::string &line, const std::string &key) {
  std::smatch m;
  std::regex re(key + "=([0-9]+)");
  if (!std::regex_search(line, m, re))
    return ~std::size_t{0};
  return std::stoul(m[1]);
}

// RFC 4180 reader; quoted fields may span lines. Comment lines start with '#'.
std::vector<std::vector<std::string>> read_csv(const fs::path &p) {
  std::string text = slurp(p);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cur;
  bool quoted = false, line_start = true;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (line_start && c == '#') {
      i = text.find('\n', i);
      if (i == std::string::npos)
        break;
      continue;
    }
    line_start = false;
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"')
        cur += '"', ++i;
      else if (c == '"')
        quoted = false;
      else
        cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      row.push_back(std::move(cur));
      cur.clear();
      rows.push_back(std::move(row));
      row.clear();
      line_start = true;
    } else {
      cur += c;
    }
  }
  return rows;
}

} // namespace

TEST_F(Cli, HelpAndUsage) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"enumerate", "--help"}).code, 0);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"enumerate", "--pattern", "a"}).code, 1);
  EXPECT_EQ(run({"sample", "-p", "a", "-v", path("ab/vocab.txt"), "--temperature", "0"}).code, 1);
}

TEST_F(Cli, CompileToyPatternHasFourAcceptingPaths) {
  auto dot = path("toy/the.dot");
  auto r = run({"compile", "-p", "The", "-v", path("toy/vocab.txt"), "--dot", dot});
  ASSERT_EQ(r.code, 0) << r.err;
  // count start-to-accept paths in the DOT graph
  std::map<int, std::vector<int>> adj;
  std::set<int> accept;
  int start = -1;
  std::istringstream in(slurp(dot));
  std::smatch m;
  std::regex edge(R"(^\s*(\d+) -> (\d+))"), node(R"(^\s*(\d+) \[shape=(\w+)(, penwidth=2)?)");
  for (std::string line; std::getline(in, line);) {
    if (std::regex_search(line, m, edge)) {
      adj[std::stoi(m[1])].push_back(std::stoi(m[2]));
    } else if (std::regex_search(line, m, node)) {
      if (m[2] == "doublecircle")
        accept.insert(std::stoi(m[1]));
      if (m[3].matched)
        start = std::stoi(m[1]);
    }
  }
  std::function<int(int)> paths = [&](int s) {
    int n = accept.count(s) ? 1 : 0;
    for (int t : adj[s])
      n += paths(t);
    return n;
  };
  EXPECT_EQ(paths(start), 4);
  EXPECT_EQ(field(r.out, "accepting"), 1u);
}

TEST_F(Cli, CompileErrors) {
  auto r = run({"compile", "-p", "(ab", "-v", path("toy/vocab.txt")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("offset 0"), std::string::npos) << r.err;
  EXPECT_EQ(run({"compile", "-p", "a", "-v", path("missing.txt")}).code, 1);
  EXPECT_EQ(run({"compile", "-p", "a{300}"}).code, 2);
}

TEST_F(Cli, TerminatedAddsOneState) {
  for (const char *pattern : {"The", "(T|h)+e?", "Th*"}) {
    auto a = run({"compile", "-p", pattern, "-v", path("toy/vocab.txt")});
    auto b = run({"compile", "-p", pattern, "-v", path("toy/vocab.txt"), "--terminated"});
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(field(b.out, "states"), field(a.out, "states") + 1) << pattern;
  }
}

TEST_F(Cli, CompileWritesCanonicalForm) {
  auto out = path("toy/the.fa");
  ASSERT_EQ(run({"compile", "-p", "The", "-v", path("toy/vocab.txt"), "-o", out}).code, 0);
  auto vocab = toy_vocabulary();
  auto ta = transduce(compile_regex("The"), vocab, build_trie(vocab));
  EXPECT_EQ(slurp(out), to_canonical_string(ta));
}

TEST_F(Cli, EnumerateLanguageSize) {
  auto r = run({"enumerate", "-p", "a|b", "-v", path("ab/vocab.txt"), "--limit", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.lines().size(), 2u);
  auto zero = run({"enumerate", "-p", "a|b", "-v", path("ab/vocab.txt"), "--limit", "0"});
  EXPECT_EQ(zero.code, 0);
  EXPECT_TRUE(zero.out.empty());
}

TEST_F(Cli, EnumerateToyFixtureInOrder) {
  auto r = run({"enumerate", "-p", "The", "-v", path("toy/vocab.txt"), "-s",
                "fixture:" + path("toy/fixture.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto lines = r.lines();
  ASSERT_EQ(lines.size(), 4u);
  double prev = 0.0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto j = nlohmann::json::parse(lines[i]);
    EXPECT_EQ(j["rank"], i + 1);
    EXPECT_EQ(tokenfa::detail::base64_decode(j["decoded_b64"].get<std::string>()).value(), "The");
    EXPECT_LE(j["logprob"].get<double>(), prev);
    prev = j["logprob"].get<double>();
  }
  EXPECT_NEAR(nlohmann::json::parse(lines[0])["logprob"].get<double>(), std::log(0.30), 1e-12);
  auto top2 = run({"enumerate", "-p", "The", "-v", path("toy/vocab.txt"), "-s",
                   "fixture:" + path("toy/fixture.json"), "--top-k", "2"});
  EXPECT_EQ(top2.lines().size(), 2u);
}

TEST_F(Cli, ScorerFailuresAreRuntimeErrors) {
  auto r = run({"enumerate", "-p", "a", "-v", path("ab/vocab.txt"), "-s",
                "remote:http://127.0.0.1:9"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run({"enumerate", "-p", "a", "-v", path("ab/vocab.txt"), "-s", "bogus"}).code, 1);
  EXPECT_EQ(run({"enumerate", "-p", "a", "-v", path("ab/vocab.txt"), "-s",
                 "fixture:" + path("toy/fixture.json")})
                .code,
            1);
}

TEST_F(Cli, SampleIsSeededAndReportsDeadEnds) {
  std::vector<std::string> args{"sample", "-p", "The", "-v", path("toy/vocab.txt"), "-s",
                                "fixture:" + path("toy/fixture.json"), "-n", "50", "--seed",
                                "9"};
  auto a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.lines().size(), 50u);
  EXPECT_EQ(a.out, b.out);
  args[args.size() - 1] = "10";
  EXPECT_NE(run(args).out, a.out);

  auto dead = run({"sample", "-p", "h", "-v", path("toy/vocab.txt"), "-s",
                   "fixture:" + path("toy/fixture.json"), "-n", "3", "--top-k", "1",
                   "--max-attempts", "5"});
  ASSERT_EQ(dead.code, 0) << dead.err;
  for (const auto &l : dead.lines()) {
    auto j = nlohmann::json::parse(l);
    EXPECT_TRUE(j["dead_end"].get<bool>());
    EXPECT_EQ(j["attempts"], 5);
  }
}

TEST_F(Cli, SampleChoosesAmongPrompts) {
  auto r = run({"sample", "-p", "a|b", "-v", path("ab/vocab.txt"), "-n", "400", "--prompt",
                "a", "--prompt", "b"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t second = 0;
  for (const auto &l : r.lines())
    second += nlohmann::json::parse(l)["prompt_index"].get<std::size_t>();
  EXPECT_GT(second, 150u);
  EXPECT_LT(second, 250u);
}

TEST_F(Cli, EvalMemReportsAreConsistentAndReproducible) {
  auto out1 = path("mem/out1"), out2 = path("mem/out2");
  auto r = run({"eval-mem", "-c", path("mem/config.json"), "-o", out1});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("eval-mem:"), std::string::npos);
  ASSERT_EQ(run({"eval-mem", "-c", path("mem/config.json"), "-o", out2}).code, 0);
  for (const char *f :
       {"memorization_records.csv", "memorization_throughput.csv", "memorization_summary.csv"})
    EXPECT_EQ(slurp(fs::path(out1) / f), slurp(fs::path(out2) / f)) << f;
  EXPECT_EQ(slurp(fs::path(out1) / "memorization_records.csv").rfind("# seed=7\n", 0), 0u);

  auto table = nlohmann::json::parse(slurp(path("mem/config.json")))["validator"]["table"];
  std::map<std::string, std::set<std::string>> valid;
  auto records = read_csv(fs::path(out1) / "memorization_records.csv");
  ASSERT_EQ(records[0][4], "url");
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto &url = records[i][4];
    bool ok = table.contains(url) && table[url].is_number() && table[url].get<int>() < 400;
    EXPECT_EQ(records[i][6], ok ? "1" : "0") << url;
    if (ok)
      valid[records[i][0]].insert(url);
  }
  std::map<std::string, std::size_t> final_unique;
  auto curve = read_csv(fs::path(out1) / "memorization_throughput.csv");
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(std::stoul(curve[i][3]), std::stoul(curve[i][2]));
    final_unique[curve[i][0]] = std::stoul(curve[i][2]);
  }
  ASSERT_EQ(final_unique.size(), 4u);
  for (const auto &[arm, n] : final_unique)
    EXPECT_EQ(n, valid[arm].size()) << arm;

  auto manifest = nlohmann::json::parse(slurp(fs::path(out1) / "run_manifest.json"));
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_EQ(manifest["command"], "eval-mem");
  EXPECT_EQ(manifest["outputs"].size(), 3u);
  EXPECT_EQ(manifest["config_hash"].get<std::string>().rfind("fnv1a64:", 0), 0u);
}

TEST_F(Cli, EvalLambadaRiggedFixture) {
  auto out = path("lambada/out");
  auto r = run({"eval-lambada", "-c", path("lambada/config.json"), "-o", out});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = read_csv(fs::path(out) / "lambada_accuracy.csv");
  ASSERT_EQ(rows.size(), 5u);
  std::map<std::string, std::string> acc;
  for (std::size_t i = 1; i < rows.size(); ++i)
    acc[rows[i][0]] = rows[i][3];
  EXPECT_EQ(acc["word"], "1.000000");
  EXPECT_EQ(acc["terminated"], "1.000000");
  EXPECT_EQ(acc["no-stop"], "1.000000");
  EXPECT_EQ(acc["baseline"], "0.500000");
  EXPECT_NE(r.out.find("word=100.0%"), std::string::npos) << r.out;
}

TEST_F(Cli, EvalBiasRowsAreDistributions) {
  auto out = path("bias/out");
  auto r = run({"eval-bias", "-c", path("bias/config.json"), "-o", out});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = read_csv(fs::path(out) / "bias_matrix.csv");
  ASSERT_EQ(rows.size(), 7u);
  std::map<std::string, double> sums;
  std::map<std::string, std::map<std::string, double>> cond;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    sums[rows[i][0]] += std::stod(rows[i][3]);
    cond[rows[i][0]][rows[i][1]] = std::stod(rows[i][3]);
  }
  for (const auto &[g, s] : sums)
    EXPECT_NEAR(s, 1.0, 1e-9) << g;
  for (const char *p : {"art", "science", "law"})
    EXPECT_NEAR(cond["man"][p], cond["woman"][p], 0.02) << p;
}

TEST_F(Cli, ConfigErrorsStopBeforeScoring) {
  auto cfg = path("bad/config.json");
  write_json(cfg, {{"scorer", "remote:http://127.0.0.1:9"}, {"num_samplez", 3}});
  auto r = run({"eval-bias", "-c", cfg, "-o", path("bad/out")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("num_samplez"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("bad/out")));
  EXPECT_EQ(run({"eval-mem", "-c", path("nope.json"), "-o", path("bad/out")}).code, 1);
  write_json(cfg, {{"scorer", "remote:http://127.0.0.1:9"}});
  EXPECT_EQ(run({"eval-bias", "-c", cfg, "-o", path("bad/out")}).code, 2);
}
