#include "axp/backend.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <random>
#include <thread>
#include <variant>

#include <httplib.h>

namespace axp {

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::RemoteHttp: return "remote";
    case BackendKind::Oracle: return "oracle";
    case BackendKind::Scripted: return "scripted";
  }
  return "oracle";
}

// --- oracle -----------------------------------------------------------------

OracleBackend::OracleBackend(OracleConfig config) : config_(config) {
  if (!(config_.noise_sigma >= 0.0) || !std::isfinite(config_.noise_sigma)) {
    throw Error(ErrorCode::InvalidConfig, "noise_sigma must be >= 0");
  }
}

ModelReply OracleBackend::send(const TaskInstance& inst) const {
  ModelReply reply;
  reply.kind = BackendKind::Oracle;
  if (config_.noise_sigma == 0.0) {
    reply.text = format_ground_truth_answer(inst);
    return reply;
  }
  std::mt19937_64 rng(config_.seed ^ stable_hash(inst.id));
  std::normal_distribution<double> noise(0.0, config_.noise_sigma);
  std::string out;
  switch (inst.kind) {
    case TaskKind::Reconstruction:
      for (const auto& [label, p] : inst.gt_points) {
        const Vec3 q(p.x() + noise(rng), p.y() + noise(rng), p.z() + noise(rng));
        out += label + ": " + format_tuple(q) + "\n";
      }
      break;
    case TaskKind::Matching:
      for (const auto& m : inst.gt_matches) {
        const double u = m.pixel.u + noise(rng);
        const double v = m.pixel.v + noise(rng);
        // The perturbed answer is the candidate nearest the perturbed pixel.
        std::string best = m.label;
        double best_d = INFINITY;
        const auto it = inst.candidates.find(m.view);
        if (it != inst.candidates.end()) {
          for (const auto& c : it->second) {
            const double d = std::hypot(c.pixel.u - u, c.pixel.v - v);
            if (d < best_d) {
              best_d = d;
              best = c.label;
            }
          }
        }
        out += "View " + std::to_string(m.view + 1) + ": " + best + "\n";
      }
      break;
    case TaskKind::Detection:
      for (int i = 0; i < 3; ++i) {
        const double lo = inst.gt_box.min_corner[i] + noise(rng);
        const double hi = inst.gt_box.max_corner[i] + noise(rng);
        out += std::string(1, axis_name(static_cast<Axis>(i))) + ": [" + format_number(lo) + ", " +
               format_number(hi) + "]\n";
      }
      break;
  }
  reply.text = out;
  return reply;
}

// --- scripted ---------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::map<std::string, std::string> fixtures, std::string name)
    : fixtures_(std::move(fixtures)), name_(std::move(name)) {}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path, std::string name) {
  const Json j = parse_json(read_text_file(path));
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, path.string() + ": fixtures must be a JSON object");
  std::map<std::string, std::string> f;
  for (const auto& [id, text] : j.items()) {
    if (!text.is_string()) throw Error(ErrorCode::SchemaError, path.string() + ": reply for " + id + " is not a string");
    f[id] = text.get<std::string>();
  }
  return ScriptedBackend(std::move(f), std::move(name));
}

ModelReply ScriptedBackend::send(const TaskInstance& inst) const {
  const auto it = fixtures_.find(inst.id);
  if (it == fixtures_.end()) throw Error(ErrorCode::MissingFixture, inst.id);
  ModelReply r;
  r.kind = BackendKind::Scripted;
  r.text = it->second;
  return r;
}

// --- remote -----------------------------------------------------------------

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

HttpResult httplib_post(const std::string& url, const std::string& body, const std::string& bearer,
                        double timeout_s) {
  HttpResult r;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    r.error = "malformed URL " + url;
    return r;
  }
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client cli(base);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

  const auto t0 = std::chrono::steady_clock::now();
  auto res = cli.Post(path, headers, body, "application/json");
  if (!res) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.error = httplib::to_string(res.error());
    r.timed_out = res.error() == httplib::Error::Read || elapsed >= 0.9 * timeout_s;
    return r;
  }
  r.status = res->status;
  r.body = res->body;
  return r;
}

void validate_remote_config(const RemoteConfig& c) {
  if (c.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "remote endpoint is required");
  if (c.model.empty()) throw Error(ErrorCode::InvalidConfig, "remote model name is required");
  if (!(c.timeout_s > 0.0)) throw Error(ErrorCode::InvalidConfig, "timeout must be > 0");
  if (c.max_retries < 0) throw Error(ErrorCode::InvalidConfig, "max_retries must be >= 0");
  if (!(c.base_delay_s >= 0.0)) throw Error(ErrorCode::InvalidConfig, "base delay must be >= 0");
}

std::string build_remote_request(const RemoteConfig& config, const TaskInstance& inst) {
  Json content = Json::array();
  for (const auto& img : prompt_images(inst)) {
    content.push_back({{"type", "image_url"},
                       {"image_url", {{"url", "data:image/png;base64," + base64_encode(encode_png(img))}}}});
  }
  content.push_back({{"type", "text"}, {"text", inst.prompt}});
  Json req;
  req["model"] = config.model;
  req["messages"] = Json::array({{{"role", "user"}, {"content", std::move(content)}}});
  req["max_tokens"] = config.max_tokens;
  return req.dump();
}

namespace {

std::optional<std::string> first_text(const Json& j) {
  if (j.is_object()) {
    if (const auto it = j.find("text"); it != j.end() && it->is_string()) return it->get<std::string>();
    for (const auto& [k, v] : j.items()) {
      if (auto t = first_text(v)) return t;
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (auto t = first_text(v)) return t;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> extract_reply_text(const std::string& response_body) {
  const Json j = Json::parse(response_body, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  if (j.is_object()) {
    const auto choices = j.find("choices");
    if (choices != j.end() && choices->is_array() && !choices->empty()) {
      const Json& c0 = (*choices)[0];
      if (c0.is_object() && c0.contains("message") && c0["message"].is_object()) {
        const Json& content = c0["message"].value("content", Json());
        if (content.is_string()) return content.get<std::string>();
        if (auto t = first_text(content)) return t;
      }
    }
  }
  return first_text(j);
}

RemoteHttpBackend::RemoteHttpBackend(RemoteConfig config, HttpTransport transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      jitter_state_(config_.jitter_seed) {
  validate_remote_config(config_);
  if (!sleeper_) {
    sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
}

double RemoteHttpBackend::backoff_delay(double base_s, int n, double u) {
  return base_s * std::ldexp(1.0, n) * (0.8 + 0.4 * u);
}

ModelReply RemoteHttpBackend::send(const TaskInstance& inst) const {
  std::string token;
  if (!config_.token_env.empty()) {
    const char* v = std::getenv(config_.token_env.c_str());
    if (v == nullptr || *v == '\0') {
      throw Error(ErrorCode::AuthFailure, "environment variable " + config_.token_env + " is not set");
    }
    token = v;
  }
  const std::string body = build_remote_request(config_, inst);
  const auto t0 = std::chrono::steady_clock::now();
  HttpResult last;
  int attempt = 0;
  for (;; ++attempt) {
    last = transport_(config_.endpoint, body, token, config_.timeout_s);
    if (last.status == 401 || last.status == 403) {
      throw Error(ErrorCode::AuthFailure, "HTTP " + std::to_string(last.status) + " for " + inst.id);
    }
    if (last.status >= 200 && last.status < 300) break;
    const bool transient = last.status == 0 || last.status == 429 || last.status >= 500;
    if (!transient) {
      throw Error(ErrorCode::BackendFailure, "HTTP " + std::to_string(last.status) + " for " + inst.id + ": " +
                                                 last.body.substr(0, 200));
    }
    if (attempt >= config_.max_retries) {
      if (last.status == 429) throw Error(ErrorCode::RateLimited, inst.id + " after " + std::to_string(attempt + 1) + " attempts");
      if (last.timed_out) throw Error(ErrorCode::Timeout, inst.id + " after " + std::to_string(attempt + 1) + " attempts");
      throw Error(ErrorCode::BackendFailure, inst.id + ": " + (last.status ? "HTTP " + std::to_string(last.status) : last.error));
    }
    double u = 0.0;
    {
      std::lock_guard<std::mutex> lock(jitter_mutex_);
      std::mt19937_64 rng(jitter_state_);
      jitter_state_ = rng();
      u = static_cast<double>(jitter_state_ >> 11) * 0x1.0p-53;
    }
    sleeper_(backoff_delay(config_.base_delay_s, attempt, u));
  }
  const auto text = extract_reply_text(last.body);
  if (!text) throw Error(ErrorCode::BackendFailure, "no text in response for " + inst.id);
  ModelReply reply;
  reply.kind = BackendKind::RemoteHttp;
  reply.text = *text;
  reply.latency_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  reply.raw_exchange = RawExchange{body, last.body, last.status, attempt + 1};
  return reply;
}

// --- rate limiting and dispatch -----------------------------------------------

TokenBucket::TokenBucket(double rate, double burst)
    : rate_(rate), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)), last_(Clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0.0) return;
  std::unique_lock<std::mutex> lock(mutex_);
  for (;;) {
    const auto now = Clock::now();
    tokens_ = std::min(burst_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / rate_;
    // Holding the lock while sleeping keeps waiters in FIFO-ish order.
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
  }
}

DispatchOutcome dispatch(const Backend& backend, const std::vector<const TaskInstance*>& instances,
                         const DispatchConfig& config,
                         const std::function<void(std::size_t, const ModelReply&)>& on_reply) {
  DispatchOutcome outcome;
  const std::size_t n = instances.size();
  if (n == 0) return outcome;
  if (config.concurrency < 1) throw Error(ErrorCode::InvalidConfig, "concurrency must be >= 1");

  TokenBucket bucket(config.rate_per_s, config.burst);
  struct Skipped {};
  using Slot = std::variant<std::monostate, ModelReply, std::exception_ptr, Skipped>;
  std::vector<Slot> slots(n);
  std::mutex m;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      bucket.acquire();
      Slot result;
      if (stop.load()) {
        result = Skipped{};
      } else {
        try {
          result = backend.send(*instances[i]);
        } catch (...) {
          result = std::current_exception();
          stop.store(true);
        }
      }
      {
        std::lock_guard<std::mutex> lock(m);
        slots[i] = std::move(result);
      }
      cv.notify_all();
    }
  };

  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(config.concurrency), n));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);

  for (std::size_t i = 0; i < n; ++i) {
    Slot s;
    {
      std::unique_lock<std::mutex> lock(m);
      cv.wait(lock, [&] { return !std::holds_alternative<std::monostate>(slots[i]) || (stop.load() && next.load() <= i); });
      if (std::holds_alternative<std::monostate>(slots[i]) || std::holds_alternative<Skipped>(slots[i])) {
        // Never sent because another request failed.
        break;
      }
      s = std::move(slots[i]);
    }
    if (auto* err = std::get_if<std::exception_ptr>(&s)) {
      outcome.error = *err;
      outcome.failed_index = i;
      stop.store(true);
      break;
    }
    try {
      on_reply(i, std::get<ModelReply>(s));
    } catch (...) {
      outcome.error = std::current_exception();
      outcome.failed_index = i;
      stop.store(true);
      break;
    }
    ++outcome.delivered;
  }
  stop.store(true);
  for (auto& t : pool) t.join();
  if (!outcome.error && outcome.delivered < n) {
    // Delivery halted on an unstarted slot: report the failure that caused it.
    for (std::size_t i = 0; i < n; ++i) {
      if (auto* err = std::get_if<std::exception_ptr>(&slots[i])) {
        outcome.error = *err;
        outcome.failed_index = i;
        break;
      }
    }
  }
  return outcome;
}

}  // namespace axp
