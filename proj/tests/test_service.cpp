#include <doctest.h>

#include <thread>

#include "axp/annotation_service.hpp"
#include "axp/raster.hpp"
#include "fixtures.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that breaks Eigen headers.
#include <httplib.h>

using namespace axp;
namespace fs = std::filesystem;

namespace {

struct Running {
  fs::path root;
  std::unique_ptr<AnnotationService> service;
  std::thread thread;
  std::unique_ptr<httplib::Client> client;

  explicit Running(fs::path images) : root(std::move(images)) {
    ServiceConfig cfg;
    cfg.images_dir = root;
    cfg.port = 0;
    service = std::make_unique<AnnotationService>(cfg);
    REQUIRE(service->bind());
    thread = std::thread([this] { service->serve(); });
    client = std::make_unique<httplib::Client>("127.0.0.1", service->port());
    for (int i = 0; i < 200 && !client->Get("/api/health"); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~Running() {
    service->stop();
    thread.join();
  }
  Json get(const std::string& path, int expect = 200) {
    auto r = client->Get(path);
    REQUIRE(r);
    CHECK(r->status == expect);
    return parse_json(r->body);
  }
  httplib::Result post(const std::string& path, const Json& body) {
    return client->Post(path, body.dump(), "application/json");
  }
};

Json draft(const std::string& id) {
  return {{"image_id", id},
          {"origin_px", {320, 400}},
          {"axis_px", Json::array({{440, 400}, {320, 300}})},
          {"unit_length", 10},
          {"ticks_per_direction", 4}};
}

fs::path image_root() {
  const auto root = fixture::temp_dir("svc");
  fs::create_directories(root / "sub");
  write_png(root / "a.png", Image(640, 480, {200, 200, 200}));
  write_png(root / "b.png", Image(640, 480, {180, 190, 200}));
  write_png(root / "sub" / "c.png", Image(320, 240, {10, 20, 30}));
  std::ofstream(root / "notes.txt") << "not an image";
  std::ofstream(root / "fake.png") << "not a png";
  return root;
}

}  // namespace

TEST_CASE("health and image listing") {
  const auto root = image_root();
  Running svc(root);
  const auto health = svc.get("/api/health");
  CHECK(health["status"] == "ok");
  CHECK(health.contains("validation"));

  auto list = svc.get("/api/images");
  REQUIRE(list.size() == 3);
  CHECK(list[0]["id"] == "a");
  CHECK(list[2]["id"] == "sub/c");
  CHECK(list[2]["width"] == 320);
  for (const auto& i : list) CHECK(i["has_annotation"] == false);

  auto r = svc.post("/api/annotations", draft("b"));
  REQUIRE(r);
  CHECK(r->status == 200);
  list = svc.get("/api/images");
  CHECK(list[0]["has_annotation"] == false);
  CHECK(list[1]["has_annotation"] == true);

  auto img = svc.client->Get("/api/images/a");
  REQUIRE(img);
  CHECK(img->status == 200);
  CHECK(img->body.rfind("\x89PNG", 0) == 0);
  CHECK(svc.client->Get("/api/images/..%2Fetc%2Fpasswd")->status == 404);
  CHECK(svc.client->Get("/api/images/nope")->status == 404);
  CHECK(svc.client->Get("/")->status == 200);
  fs::remove_all(root);
}

TEST_CASE("empty image root lists nothing") {
  const auto root = fixture::temp_dir("svc_empty");
  Running svc(root);
  CHECK(svc.get("/api/images").empty());
  fs::remove_all(root);
}

TEST_CASE("preview is deterministic, matches the CLI path and reports field errors") {
  const auto root = image_root();
  Running svc(root);
  auto a = svc.post("/api/preview", draft("a"));
  auto b = svc.post("/api/preview", draft("a"));
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->status == 200);
  CHECK(a->get_header_value("Content-Type") == "image/png");
  CHECK(a->body == b->body);

  std::vector<FieldError> errors;
  const Json dj = draft("a");
  const auto d = draft_from_json(dj, errors);
  REQUIRE(errors.empty());
  const auto bytes = render_draft_png(root / "a.png", d, errors);
  REQUIRE(bytes);
  CHECK(std::string(bytes->begin(), bytes->end()) == a->body);
  CHECK_FALSE(decode_png(*bytes) == read_png(root / "a.png"));

  Json bad = draft("a");
  bad["origin_px"] = {5000, 10};
  bad["unit_length"] = -1;
  auto r = svc.post("/api/preview", bad);
  REQUIRE(r);
  CHECK(r->status == 422);
  const auto errs = parse_json(r->body)["errors"];
  std::set<std::string> fields;
  for (const auto& e : errs) fields.insert(e["field"]);
  CHECK(fields.count("origin_px") == 1);
  CHECK(fields.count("unit_length") == 1);

  bad = draft("a");
  bad["axis_px"][0] = {322, 401};
  r = svc.post("/api/preview", bad);
  CHECK(r->status == 422);
  CHECK(svc.client->Post("/api/preview", "{oops", "application/json")->status == 422);
  fs::remove_all(root);
}

TEST_CASE("save, fetch, versioning and conflicts") {
  const auto root = image_root();
  {
    Running svc(root);
    auto r = svc.post("/api/annotations", draft("sub/c"));
    REQUIRE(r);
    CHECK(r->status == 422);  // origin outside a 320x240 image

    Json d = draft("a");
    r = svc.post("/api/annotations", d);
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(parse_json(r->body)["version"] == 1);

    const auto rec = svc.get("/api/annotations/a");
    CHECK(rec["version"] == 1);
    CHECK(rec["camera_source"] == "default");
    const ViewRecord view = view_from_json(rec["view"]);
    CHECK(view.frame.unit_length == 10);
    // The lifted origin projects back onto the clicked pixel.
    const Pixel o = project(view.camera, view.frame.origin_world);
    CHECK(o.u == doctest::Approx(320).epsilon(1e-9));
    CHECK(o.v == doctest::Approx(400).epsilon(1e-9));

    // Stale base version.
    r = svc.post("/api/annotations", d);
    CHECK(r->status == 409);
    CHECK(parse_json(r->body)["current_version"] == 1);
    d["base_version"] = 1;
    d["unit_length"] = 5;
    r = svc.post("/api/annotations", d);
    CHECK(r->status == 200);
    CHECK(svc.get("/api/annotations/a")["draft"]["unit_length"] == 5);
    CHECK(svc.get("/api/annotations/a?version=1")["draft"]["unit_length"] == 10);
    svc.get("/api/annotations/b", 404);

    // Two concurrent saves from the same base: exactly one wins.
    Json c = draft("b");
    std::vector<int> statuses(2);
    std::vector<std::thread> ts;
    for (int i = 0; i < 2; ++i) {
      ts.emplace_back([&, i] {
        httplib::Client cl("127.0.0.1", svc.service->port());
        auto res = cl.Post("/api/annotations", c.dump(), "application/json");
        statuses[i] = res ? res->status : 0;
      });
    }
    for (auto& t : ts) t.join();
    std::sort(statuses.begin(), statuses.end());
    CHECK(statuses == std::vector<int>{200, 409});
  }
  // Stopped: everything acknowledged is on disk.
  AnnotationStore store(root, root / ".annotations");
  CHECK(store.latest_version("a") == 2);
  CHECK(store.latest_version("b") == 1);
  CHECK(store.load("a", 1).has_value());
  fs::remove_all(root);
}

TEST_CASE("dataset views use their recorded camera") {
  const auto root = fixture::temp_dir("svc_ds");
  DatasetConfig cfg;
  cfg.per_category = 1;
  cfg.views_per_entry = 2;
  cfg.out_dir = root;
  const auto m = generate_dataset(cfg);
  const auto png = root / fs::path(m.entries[0].annotation).parent_path() / "view_0.png";
  const auto cam = camera_for_image(png, 640, 480, "auto");
  CHECK(cam.source == "dataset");
  CHECK(camera_for_image(png, 640, 480, "default").source == "default");
  CHECK(camera_for_image(png, 320, 240, "auto").source == "default");
  fs::remove_all(root);
}
