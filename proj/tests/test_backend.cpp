#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "axp/backend.hpp"
#include "fixtures.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that breaks Eigen headers.
#include <httplib.h>

using namespace axp;

namespace {

const TaskInstance& detection() {
  static const TaskInstance inst = [] {
    const auto e = fixture::chair_entry();
    return make_detection_instance(e, render_entry_views(e), 0, true);
  }();
  return inst;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an axp::Error");
  return ErrorCode::InvalidConfig;
}

std::string chat_reply(const std::string& text) {
  Json j;
  j["choices"] = Json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}});
  return j.dump();
}

// Local chat-completions stand-in driven by a per-request status script.
struct FakeServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::vector<int> statuses;
  std::atomic<int> hits{0};
  std::string last_body;
  std::string last_auth;
  int delay_ms = 0;

  FakeServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = hits++;
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      const int status = n < static_cast<int>(statuses.size()) ? statuses[n] : 200;
      res.status = status;
      res.set_content(status == 200 ? chat_reply("X: [0, 1]") : "{\"error\":\"nope\"}", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

RemoteConfig remote_config(const std::string& url) {
  RemoteConfig c;
  c.endpoint = url;
  c.model = "test-model";
  c.token_env = "AXP_TEST_TOKEN";
  c.timeout_s = 5;
  c.max_retries = 2;
  c.base_delay_s = 0.001;
  return c;
}

class FailingBackend : public Backend {
 public:
  explicit FailingBackend(std::size_t fail_at) : fail_at_(fail_at) {}
  BackendKind kind() const override { return BackendKind::Scripted; }
  std::string name() const override { return "failing"; }
  ModelReply send(const TaskInstance& inst) const override {
    if (std::stoul(inst.id) == fail_at_) throw Error(ErrorCode::BackendFailure, "boom");
    ModelReply r;
    r.text = inst.id;
    return r;
  }

 private:
  std::size_t fail_at_;
};

}  // namespace

TEST_CASE("oracle backend is deterministic and exact without noise") {
  const OracleBackend exact({0.0, 1});
  CHECK(exact.send(detection()).text == format_ground_truth_answer(detection()));
  const OracleBackend noisy({5.0, 3});
  const auto a = noisy.send(detection()).text;
  CHECK(a == noisy.send(detection()).text);
  CHECK(a != exact.send(detection()).text);
  CHECK(a != OracleBackend({5.0, 4}).send(detection()).text);
}

TEST_CASE("scripted backend") {
  const ScriptedBackend s({{detection().id, "X: [0, 1]"}});
  CHECK(s.send(detection()).text == "X: [0, 1]");
  CHECK(code_of([] { ScriptedBackend({}).send(detection()); }) == ErrorCode::MissingFixture);
}

TEST_CASE("backoff delay stays within the jitter band") {
  for (int n = 0; n < 5; ++n) {
    const double nominal = 2.0 * std::pow(2.0, n);
    CHECK(RemoteHttpBackend::backoff_delay(2.0, n, 0.0) == doctest::Approx(0.8 * nominal));
    CHECK(RemoteHttpBackend::backoff_delay(2.0, n, 0.999999) == doctest::Approx(1.2 * nominal).epsilon(1e-5));
  }
}

TEST_CASE("remote backend over a local server") {
  ::setenv("AXP_TEST_TOKEN", "secret-token", 1);
  FakeServer srv;

  SUBCASE("success archives the exact request bytes") {
    const RemoteHttpBackend b(remote_config(srv.url()));
    const auto r = b.send(detection());
    CHECK(r.text == "X: [0, 1]");
    REQUIRE(r.raw_exchange);
    CHECK(r.raw_exchange->request_body == srv.last_body);
    CHECK(r.raw_exchange->request_body == build_remote_request(remote_config(srv.url()), detection()));
    CHECK(r.raw_exchange->attempts == 1);
    CHECK(srv.last_auth == "Bearer secret-token");
    const Json req = parse_json(srv.last_body);
    CHECK(req["model"] == "test-model");
    const auto& content = req["messages"][0]["content"];
    CHECK(content.size() == 2);
    CHECK(content[0]["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,iVBOR", 0) == 0);
    CHECK(content[1]["text"] == detection().prompt);
  }
  SUBCASE("transient failures are retried with backoff") {
    srv.statuses = {503, 429};
    std::vector<double> sleeps;
    const RemoteHttpBackend b(remote_config(srv.url()), httplib_post, [&](double s) { sleeps.push_back(s); });
    const auto r = b.send(detection());
    CHECK(r.raw_exchange->attempts == 3);
    REQUIRE(sleeps.size() == 2);
    CHECK(sleeps[0] >= 0.0008);
    CHECK(sleeps[1] >= 0.0016);
  }
  SUBCASE("401 fails immediately") {
    srv.statuses = {401};
    const RemoteHttpBackend b(remote_config(srv.url()));
    CHECK(code_of([&] { b.send(detection()); }) == ErrorCode::AuthFailure);
    CHECK(srv.hits == 1);
  }
  SUBCASE("other 4xx is not retried") {
    srv.statuses = {400};
    const RemoteHttpBackend b(remote_config(srv.url()));
    CHECK(code_of([&] { b.send(detection()); }) == ErrorCode::BackendFailure);
    CHECK(srv.hits == 1);
  }
  SUBCASE("429 exhaustion") {
    srv.statuses = {429, 429, 429, 429};
    const RemoteHttpBackend b(remote_config(srv.url()));
    CHECK(code_of([&] { b.send(detection()); }) == ErrorCode::RateLimited);
    CHECK(srv.hits == 3);
  }
  SUBCASE("timeout") {
    srv.delay_ms = 600;
    auto cfg = remote_config(srv.url());
    cfg.timeout_s = 0.2;
    cfg.max_retries = 0;
    const RemoteHttpBackend b(cfg);
    CHECK(code_of([&] { b.send(detection()); }) == ErrorCode::Timeout);
  }
  SUBCASE("missing token") {
    ::unsetenv("AXP_TEST_TOKEN");
    const RemoteHttpBackend b(remote_config(srv.url()));
    CHECK(code_of([&] { b.send(detection()); }) == ErrorCode::AuthFailure);
    CHECK(srv.hits == 0);
  }
  SUBCASE("connection refused") {
    auto cfg = remote_config("http://127.0.0.1:1/v1/chat/completions");
    cfg.max_retries = 1;
    const RemoteHttpBackend b(cfg);
    CHECK(code_of([&] { b.send(detection()); }) == ErrorCode::BackendFailure);
  }
}

TEST_CASE("remote config validation and reply extraction") {
  RemoteConfig c;
  CHECK(code_of([&] { validate_remote_config(c); }) == ErrorCode::InvalidConfig);
  c.endpoint = "http://x/";
  c.model = "m";
  CHECK_NOTHROW(validate_remote_config(c));
  c.timeout_s = 0;
  CHECK(code_of([&] { validate_remote_config(c); }) == ErrorCode::InvalidConfig);
  CHECK(extract_reply_text(chat_reply("hi")) == "hi");
  CHECK(extract_reply_text("{\"output\":[{\"text\":\"yo\"}]}") == "yo");
  CHECK_FALSE(extract_reply_text("not json").has_value());
  CHECK(base64_encode({'M', 'a', 'n'}) == "TWFu");
  CHECK(base64_encode({'M', 'a'}) == "TWE=");
  CHECK(base64_encode({}) == "");
}

TEST_CASE("dispatch delivers in order and stops at the first failure") {
  std::vector<TaskInstance> insts(20);
  for (std::size_t i = 0; i < insts.size(); ++i) insts[i].id = std::to_string(i);
  std::vector<const TaskInstance*> ptrs;
  for (const auto& i : insts) ptrs.push_back(&i);

  for (int conc : {1, 4}) {
    std::vector<std::size_t> seen;
    const auto ok = dispatch(FailingBackend(999), ptrs, {conc, 0.0, 1.0},
                             [&](std::size_t i, const ModelReply& r) {
                               CHECK(r.text == insts[i].id);
                               seen.push_back(i);
                             });
    CHECK_FALSE(ok.error);
    CHECK(ok.delivered == 20);
    for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i);

    seen.clear();
    const auto bad = dispatch(FailingBackend(7), ptrs, {conc, 0.0, 1.0},
                              [&](std::size_t i, const ModelReply&) { seen.push_back(i); });
    REQUIRE(bad.error);
    CHECK(bad.failed_index == 7);
    CHECK(bad.delivered == 7);
    CHECK(seen.size() == 7);
    try {
      std::rethrow_exception(bad.error);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BackendFailure);
    }
  }
}

TEST_CASE("token bucket paces requests") {
  TokenBucket bucket(20.0, 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 5; ++i) bucket.acquire();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(elapsed >= 0.18);
  TokenBucket off(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) off.acquire();
}
