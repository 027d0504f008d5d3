#ifndef TOKENFA_REMOTE_SCORER_HPP
#define TOKENFA_REMOTE_SCORER_HPP

// Client side of the HTTP scoring protocol:
//   GET  /v1/vocab     -> vocabulary file
//   POST /v1/logprobs  {"tokens": [...]} -> {"logprobs": [...]}

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "tokenfa/error.hpp"
#include "tokenfa/scorer.hpp"
#include "tokenfa/vocabulary.hpp"

namespace tokenfa {

namespace detail {

struct Endpoint {
  std::string origin; // scheme://host[:port]
  std::string base;   // path prefix without trailing slash
};

inline Endpoint split_endpoint(const std::string &url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint must look like http://host:port, got " + url);
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    e.base = url.substr(path_start);
    while (!e.base.empty() && e.base.back() == '/')
      e.base.pop_back();
  }
  return e;
}

/// Validate a logprob response body and renormalize small drift.
inline LogProbs parse_logprobs_response(const std::string &body,
                                        std::size_t vocab_size) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception &e) {
    throw ShapeError(std::string("logprobs response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("logprobs") || !j["logprobs"].is_array())
    throw ShapeError("logprobs response lacks a \"logprobs\" array");
  const auto &arr = j["logprobs"];
  if (arr.size() != vocab_size)
    throw ShapeError("logprobs response has " + std::to_string(arr.size()) +
                     " entries, expected " + std::to_string(vocab_size));
  LogProbs lp;
  lp.reserve(arr.size());
  for (const auto &x : arr) {
    if (x.is_null())
      lp.push_back(-std::numeric_limits<double>::infinity());
    else if (x.is_number())
      lp.push_back(x.get<double>());
    else
      throw ShapeError("logprobs response contains a non-numeric entry");
  }
  double z = logsumexp(lp);
  if (!(std::abs(z) <= 1e-3))
    throw NormalizationError("remote distribution off by logsumexp " +
                             std::to_string(z));
  for (double &x : lp)
    x -= z;
  return lp;
}

} // namespace detail

struct RemoteOptions {
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{60000};
};

inline Vocabulary fetch_remote_vocabulary(const std::string &endpoint,
                                          const RemoteOptions &options = {}) {
  auto ep = detail::split_endpoint(endpoint);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(options.connect_timeout);
  client.set_read_timeout(options.read_timeout);
  auto res = client.Get(ep.base + "/v1/vocab");
  if (!res)
    throw TransportError("GET " + endpoint + "/v1/vocab failed: " +
                         httplib::to_string(res.error()));
  if (res->status != 200)
    throw TransportError("GET /v1/vocab returned status " +
                         std::to_string(res->status));
  return parse_vocabulary(res->body);
}

/// Scorer backed by a remote model server. One keep-alive connection is
/// shared; calls are serialized.
class RemoteScorer final : public Scorer {
public:
  RemoteScorer(const std::string &endpoint, std::size_t vocab_size,
               const RemoteOptions &options = {})
      : endpoint_(detail::split_endpoint(endpoint)), vocab_size_(vocab_size),
        client_(std::make_unique<httplib::Client>(endpoint_.origin)) {
    client_->set_connection_timeout(options.connect_timeout);
    client_->set_read_timeout(options.read_timeout);
    client_->set_keep_alive(true);
  }

  std::size_t vocab_size() const override { return vocab_size_; }

  LogProbs next_logprobs(std::span<const TokenId> prefix) const override {
    nlohmann::json body = {{"tokens", std::vector<TokenId>(prefix.begin(), prefix.end())}};
    std::lock_guard lock(mutex_);
    auto res = client_->Post(endpoint_.base + "/v1/logprobs", body.dump(),
                             "application/json");
    if (!res)
      throw TransportError("POST /v1/logprobs failed: " +
                           httplib::to_string(res.error()));
    if (res->status != 200)
      throw TransportError("POST /v1/logprobs returned status " +
                           std::to_string(res->status) + ": " + res->body);
    return detail::parse_logprobs_response(res->body, vocab_size_);
  }

private:
  detail::Endpoint endpoint_;
  std::size_t vocab_size_;
  std::unique_ptr<httplib::Client> client_;
  mutable std::mutex mutex_;
};

/// One-shot query without a persistent client.
inline LogProbs remote_next_logprobs(const std::string &endpoint,
                                     std::span<const TokenId> prefix,
                                     std::size_t vocab_size) {
  return RemoteScorer(endpoint, vocab_size).next_logprobs(prefix);
}

} // namespace tokenfa

#endif
