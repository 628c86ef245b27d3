#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "axp/tasks.hpp"

namespace axp {

enum class BackendKind { RemoteHttp, Oracle, Scripted };

std::string_view to_string(BackendKind k);

struct RawExchange {
  std::string request_body;
  std::string response_body;
  int status = 0;
  int attempts = 0;
};

struct ModelReply {
  std::string text;
  std::int64_t latency_ms = 0;
  BackendKind kind = BackendKind::Oracle;
  std::optional<RawExchange> raw_exchange;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendKind kind() const = 0;
  /// Row label used in reports, e.g. "oracle" or the remote model name.
  virtual std::string name() const = 0;
  /// Must be safe to call concurrently.
  virtual ModelReply send(const TaskInstance& inst) const = 0;
};

struct OracleConfig {
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Answers with the instance's ground truth in the demanded schema, plus
/// componentwise Gaussian noise seeded by (seed, instance id).
class OracleBackend : public Backend {
 public:
  explicit OracleBackend(OracleConfig config);
  BackendKind kind() const override { return BackendKind::Oracle; }
  std::string name() const override { return "oracle"; }
  ModelReply send(const TaskInstance& inst) const override;

 private:
  OracleConfig config_;
};

/// Replays recorded replies from a JSON object {instance id: reply text}.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::map<std::string, std::string> fixtures, std::string name = "scripted");
  static ScriptedBackend from_file(const std::filesystem::path& fixtures, std::string name = "scripted");

  BackendKind kind() const override { return BackendKind::Scripted; }
  std::string name() const override { return name_; }
  /// Throws MissingFixture when the instance id has no recorded reply.
  ModelReply send(const TaskInstance& inst) const override;

 private:
  std::map<std::string, std::string> fixtures_;
  std::string name_;
};

struct HttpResult {
  int status = 0;  // 0 when no response was received
  std::string body;
  bool timed_out = false;
  std::string error;
};

/// POSTs `body` as JSON to `url` with an optional bearer token.
using HttpTransport = std::function<HttpResult(const std::string& url, const std::string& body,
                                               const std::string& bearer, double timeout_s)>;

/// Default transport over cpp-httplib (http:// and https://).
HttpResult httplib_post(const std::string& url, const std::string& body, const std::string& bearer,
                        double timeout_s);

struct RemoteConfig {
  std::string endpoint;  // full URL of a chat-completions style endpoint
  std::string model;
  /// Environment variable holding the bearer token; empty sends no auth header.
  std::string token_env = "AXP_API_TOKEN";
  double timeout_s = 120.0;
  int max_retries = 3;
  double base_delay_s = 1.0;
  int max_tokens = 1024;
  std::uint64_t jitter_seed = 0;
};

/// Throws InvalidConfig when a field is out of bounds.
void validate_remote_config(const RemoteConfig& c);

/// OpenAI-style request: one user message whose content lists the PNG images
/// (base64 data URLs) in instance order, followed by the prompt text.
std::string build_remote_request(const RemoteConfig& config, const TaskInstance& inst);

/// choices[0].message.content, else the first string under a "text" key.
std::optional<std::string> extract_reply_text(const std::string& response_body);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

class RemoteHttpBackend : public Backend {
 public:
  using Sleeper = std::function<void(double seconds)>;

  explicit RemoteHttpBackend(RemoteConfig config, HttpTransport transport = httplib_post, Sleeper sleeper = {});

  BackendKind kind() const override { return BackendKind::RemoteHttp; }
  std::string name() const override { return config_.model; }
  /// Retries timeouts, connection failures, 429 and 5xx with exponential
  /// backoff (base_delay x 2^n, jitter +-20%). Throws AuthFailure on 401/403,
  /// and Timeout / RateLimited / BackendFailure once retries are exhausted.
  ModelReply send(const TaskInstance& inst) const override;

  /// Delay before retry n (0-based) with jitter factor u in [0, 1).
  static double backoff_delay(double base_s, int n, double u);

 private:
  RemoteConfig config_;
  HttpTransport transport_;
  Sleeper sleeper_;
  mutable std::mutex jitter_mutex_;
  mutable std::uint64_t jitter_state_;
};

/// Token bucket: `rate` tokens per second, capacity `burst`. rate <= 0 disables it.
class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;

  TokenBucket(double rate, double burst);
  /// Blocks until a token is available.
  void acquire();

 private:
  double rate_;
  double burst_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mutex_;
};

struct DispatchConfig {
  int concurrency = 1;
  /// Requests per second; default one request every two seconds.
  double rate_per_s = 0.5;
  double burst = 1.0;
};

struct DispatchOutcome {
  std::size_t delivered = 0;
  /// Set when an instance failed; delivery stopped just before it.
  std::exception_ptr error;
  std::size_t failed_index = 0;
};

/// Sends every instance with at most `concurrency` in flight, rate-limited.
/// on_reply is called on the calling thread in instance order; the first
/// failure stops delivery and no new requests are started.
DispatchOutcome dispatch(const Backend& backend, const std::vector<const TaskInstance*>& instances,
                         const DispatchConfig& config,
                         const std::function<void(std::size_t, const ModelReply&)>& on_reply);

}  // namespace axp
