#ifndef TOKENFA_HARNESS_URL_VALIDATION_HPP
#define TOKENFA_HARNESS_URL_VALIDATION_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>

#include "tokenfa/error.hpp"

namespace tokenfa::harness {

struct ValidationResult {
  std::optional<int> status; // empty on timeout or transport error
  std::string error;         // "timeout" or "error: ..." when status is empty
  double latency_s = 0.0;

  bool valid() const noexcept { return status && *status < 400; }

  /// Status code as text, or the error marker.
  std::string status_text() const {
    return status ? std::to_string(*status) : (error.empty() ? "error" : error);
  }
};

/// Checks one URL. Implementations must be safe to call concurrently.
class Validator {
public:
  virtual ~Validator() = default;
  virtual ValidationResult check(const std::string &url) = 0;
};

/// Table-driven validator. Unlisted URLs get the default outcome.
class MockValidator final : public Validator {
public:
  struct Outcome {
    std::optional<int> status; // empty means timeout
  };

  MockValidator(std::map<std::string, Outcome> table, Outcome fallback,
                double latency_s = 0.0, double timeout_s = 10.0)
      : table_(std::move(table)), fallback_(fallback), latency_s_(latency_s),
        timeout_s_(timeout_s) {}

  /// Make each check block for real, so overlapping calls can be observed.
  void set_real_delay(std::chrono::microseconds d) { delay_ = d; }

  ValidationResult check(const std::string &url) override {
    int now = ++in_flight_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    {
      std::lock_guard lock(mutex_);
      ++calls_[url];
    }
    if (delay_.count() > 0)
      std::this_thread::sleep_for(delay_);
    auto it = table_.find(url);
    const Outcome &o = it == table_.end() ? fallback_ : it->second;
    ValidationResult r;
    if (o.status) {
      r.status = o.status;
      r.latency_s = latency_s_;
    } else {
      r.error = "timeout";
      r.latency_s = timeout_s_;
    }
    --in_flight_;
    return r;
  }

  std::size_t calls(const std::string &url) const {
    std::lock_guard lock(mutex_);
    auto it = calls_.find(url);
    return it == calls_.end() ? 0 : it->second;
  }
  std::size_t total_calls() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto &[_, c] : calls_)
      n += c;
    return n;
  }
  int peak_in_flight() const noexcept { return peak_.load(); }

private:
  std::map<std::string, Outcome> table_;
  Outcome fallback_;
  double latency_s_;
  double timeout_s_;
  std::chrono::microseconds delay_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::size_t> calls_;
};

/// Single HTTP GET per URL. Redirects are not followed; the first status
/// line decides.
class HttpValidator final : public Validator {
public:
  explicit HttpValidator(double timeout_s = 10.0,
                         std::string user_agent = "tokenfa-url-check/1.0")
      : timeout_s_(timeout_s), user_agent_(std::move(user_agent)) {}

  ValidationResult check(const std::string &url) override {
    ValidationResult r;
    auto start = std::chrono::steady_clock::now();
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      r.error = "error: not an absolute URL";
      return r;
    }
    auto path_start = url.find('/', scheme_end + 3);
    std::string origin = url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    try {
      httplib::Client client(origin);
      auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::duration<double>(timeout_s_));
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_follow_location(false);
      client.set_default_headers({{"User-Agent", user_agent_}});
      auto res = client.Get(path);
      if (res) {
        r.status = res->status;
      } else if (res.error() == httplib::Error::ConnectionTimeout ||
                 res.error() == httplib::Error::Read) {
        r.error = "timeout";
      } else {
        r.error = "error: " + httplib::to_string(res.error());
      }
    } catch (const std::exception &e) {
      r.error = std::string("error: ") + e.what();
    }
    r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                      .count();
    return r;
  }

private:
  double timeout_s_;
  std::string user_agent_;
};

/// Validate each distinct URL once with at most `max_concurrency` checks in
/// flight. Results are keyed by URL.
inline std::map<std::string, ValidationResult>
validate_unique(const std::vector<std::string> &urls, Validator &validator,
                std::size_t max_concurrency) {
  if (max_concurrency < 1)
    throw ConfigError("max_concurrency must be at least 1");
  std::vector<std::string> distinct;
  std::map<std::string, ValidationResult> out;
  for (const auto &u : urls)
    if (out.emplace(u, ValidationResult{}).second)
      distinct.push_back(u);

  std::vector<ValidationResult> results(distinct.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < distinct.size(); i = next++)
      results[i] = validator.check(distinct[i]);
  };
  std::size_t n = std::min(max_concurrency, distinct.size());
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    pool.emplace_back(worker);
  for (auto &t : pool)
    t.join();

  for (std::size_t i = 0; i < distinct.size(); ++i)
    out[distinct[i]] = std::move(results[i]);
  return out;
}

} // namespace tokenfa::harness

#endif
