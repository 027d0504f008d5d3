#ifndef TOKENFA_TESTS_FIXTURE_FILES_HPP
#define TOKENFA_TESTS_FIXTURE_FILES_HPP

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "support/fixtures.hpp"
#include "support/harness_fixtures.hpp"

namespace tokenfa::test {

inline void write_text(const std::filesystem::path &p, const std::string &text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline void write_json(const std::filesystem::path &p, const nlohmann::json &j) {
  write_text(p, j.dump(2) + "\n");
}

/// On-disk copies of the test fixtures, laid out as
///   toy/{vocab.txt,fixture.json}  ab/vocab.txt
///   mem/{vocab.txt,corpus.jsonl,config.json}
///   lambada/{vocab.txt,fixture.json,dataset.jsonl,config.json}
///   bias/{vocab.txt,fixture.json,config.json}
inline void write_fixture_files(const std::filesystem::path &root) {
  write_text(root / "toy/vocab.txt", serialize_vocabulary(toy_vocabulary()));
  write_json(root / "toy/fixture.json", toy_fixture().to_json());
  write_text(root / "ab/vocab.txt", serialize_vocabulary(Vocabulary({"a", "b", ""}, 2)));

  auto url = url_fixture();
  write_text(root / "mem/vocab.txt", serialize_vocabulary(url.vocab));
  std::string corpus;
  for (const auto &u : url.corpus_text)
    corpus += nlohmann::json{{"text", u}}.dump() + "\n";
  write_text(root / "mem/corpus.jsonl", corpus);
  nlohmann::json table = nlohmann::json::object();
  for (const auto &[u, outcome] : url.table)
    table[u] = outcome.status ? nlohmann::json(*outcome.status) : nlohmann::json("timeout");
  write_json(root / "mem/config.json",
             {{"vocab", "vocab.txt"},
              {"scorer", "ngram:corpus.jsonl:6:0.01"},
              {"seed", 7},
              {"num_samples", 200},
              {"validator",
               {{"kind", "mock"}, {"table", table}, {"default", 404}, {"latency_s", 0.05},
                {"max_concurrency", 8}}}});

  auto lam = lambada_fixture();
  write_text(root / "lambada/vocab.txt", serialize_vocabulary(lam.vocab));
  write_json(root / "lambada/fixture.json", lam.scorer.to_json());
  std::string dataset;
  for (const auto &ex : lam.dataset)
    dataset += nlohmann::json{{"context", ex.context}, {"target", ex.target}}.dump() + "\n";
  write_text(root / "lambada/dataset.jsonl", dataset);
  write_json(root / "lambada/config.json", {{"vocab", "vocab.txt"},
                                            {"scorer", "fixture:fixture.json"},
                                            {"dataset", "dataset.jsonl"}});

  write_text(root / "bias/vocab.txt", serialize_vocabulary(bias_vocabulary()));
  write_json(root / "bias/fixture.json", bias_fixture(true).to_json());
  write_json(root / "bias/config.json", {{"vocab", "vocab.txt"},
                                         {"scorer", "fixture:fixture.json"},
                                         {"seed", 3},
                                         {"professions", {"art", "science", "law"}},
                                         {"num_samples", 20000}});
}

} // namespace tokenfa::test

#endif
