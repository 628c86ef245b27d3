#include <doctest.h>

#include "axp/scenegen.hpp"
#include "axp/schema.hpp"
#include "fixtures.hpp"

using namespace axp;
namespace fs = std::filesystem;

namespace {

bool on_part_surface(const SceneObject& o, const Vec3& p) {
  for (const auto& b : o.parts) {
    if (!b.contains(p, 1e-12)) continue;
    for (int i = 0; i < 3; ++i) {
      if (p[i] == b.min_corner[i] || p[i] == b.max_corner[i]) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("generate_object is deterministic and well-formed") {
  for (Category c : kAllCategories) {
    for (std::uint64_t seed : {1ULL, 7ULL, 12345ULL}) {
      const auto a = generate_object(c, seed);
      const auto b = generate_object(c, seed);
      CHECK(entry_to_json({"x", a, {}, seed}) == entry_to_json({"x", b, {}, seed}));
      REQUIRE(a.gt_keypoints.size() == 8);
      CHECK(a.gt_keypoints[0].label == "A");
      CHECK(a.gt_keypoints[0].position_frame == Vec3::Zero());
      for (const auto& k : a.gt_keypoints) CHECK(on_part_surface(a, k.position_frame));
      for (const auto& p : a.parts) {
        CHECK(a.gt_box.contains(p.min_corner));
        CHECK(a.gt_box.contains(p.max_corner));
      }
      CHECK(keypoint_descriptions(c).size() == a.gt_keypoints.size());
    }
  }
}

TEST_CASE("chair dimensions and leg-top keypoint") {
  const auto chair = generate_object(Category::Chair, 7);
  const double leg = dimension(chair.dims, "leg_height");
  CHECK(leg >= 35);
  CHECK(leg <= 50);
  CHECK(chair.gt_keypoints[4].label == "E");
  CHECK(chair.gt_keypoints[4].position_frame.z() == leg);
  CHECK_THROWS_AS(dimension(chair.dims, "wingspan"), Error);
}

TEST_CASE("gt_box equals brute-force corner enumeration") {
  for (Category c : kAllCategories) {
    const auto o = generate_object(c, 99);
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    for (const auto& p : o.parts) {
      for (const auto& corner : p.corners()) {
        for (int i = 0; i < 3; ++i) {
          lo[i] = std::min(lo[i], corner[i]);
          hi[i] = std::max(hi[i], corner[i]);
        }
      }
    }
    CHECK(o.gt_box.min_corner == lo);
    CHECK(o.gt_box.max_corner == hi);
  }
}

TEST_CASE("every keypoint projects inside every generated view") {
  for (Category c : kAllCategories) {
    for (int i = 0; i < 3; ++i) {
      const auto e = make_entry(c, i, 42, 4);
      CHECK(e.views.size() == 4);
      for (const auto& v : e.views) {
        for (const auto& k : e.object.gt_keypoints) {
          const Pixel p = project(v.camera, frame_to_world(v.frame, k.position_frame));
          CHECK(p.u >= 0);
          CHECK(p.v >= 0);
          CHECK(p.u <= v.camera.image_width - 1);
          CHECK(p.v <= v.camera.image_height - 1);
        }
      }
    }
  }
}

TEST_CASE("render_view") {
  const auto e = fixture::chair_entry();
  const auto& v = e.views[0];
  const Image a = render_view(e.object, v.camera, v.frame, 640, 480);
  CHECK(a == render_view(e.object, v.camera, v.frame, 640, 480));

  SceneObject empty;
  const Image bg = render_view(empty, v.camera, v.frame, 64, 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) CHECK(bg.at(x, y) == kBackground);
  }

  // Camera high on the diagonal of the positive octant, looking down.
  SceneObject cube;
  cube.parts = {{Vec3::Zero(), Vec3(10, 10, 10)}};
  cube.gt_box = cube.parts[0];
  const auto cam = look_at(Vec3(60, 60, 80), Vec3(5, 5, 5), Vec3::UnitZ(), 400, 400, 320, 240, 640, 480);
  for (const auto& corner : cube.gt_box.corners()) {
    const Pixel p = project(cam, corner);
    CHECK(p.u >= 0);
    CHECK(p.u < 640);
    CHECK(p.v >= 0);
    CHECK(p.v < 480);
  }
  const Image img = render_view(cube, cam, v.frame, 640, 480);
  CHECK_FALSE(img.at(320, 240) == kBackground);

  const auto behind = look_at(Vec3(5, 5, 5), Vec3(5, 5, 100), Vec3::UnitX(), 400, 400, 320, 240, 640, 480);
  try {
    render_view(cube, behind, v.frame, 640, 480);
    FAIL("expected ObjectBehindCamera");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::ObjectBehindCamera);
  }
}

TEST_CASE("generate_dataset layout, determinism and round trip") {
  const fs::path d1 = fixture::temp_dir("ds1"), d2 = fixture::temp_dir("ds2");
  DatasetConfig cfg;
  cfg.per_category = 2;
  cfg.views_per_entry = 3;
  cfg.seed = 5;
  cfg.out_dir = d1;
  const Manifest m = generate_dataset(cfg);
  CHECK(m.entries.size() == 8);
  int pngs = 0;
  for (const auto& p : fs::recursive_directory_iterator(d1)) pngs += p.path().extension() == ".png";
  CHECK(pngs == 24);

  cfg.out_dir = d2;
  generate_dataset(cfg);
  for (const auto& p : fs::recursive_directory_iterator(d1)) {
    if (!p.is_regular_file()) continue;
    const auto rel = fs::relative(p.path(), d1);
    CHECK(read_file_bytes(p.path()) == read_file_bytes(d2 / rel));
  }

  for (const auto& me : m.entries) {
    const std::string text = read_text_file(d1 / me.annotation);
    const DatasetEntry e = entry_from_json(parse_json(text));
    CHECK(dump_json(entry_to_json(e)) == text);
    CHECK(e.views.size() == 3);
    for (const auto& v : e.views) CHECK(v.frame.origin_world == e.views[0].frame.origin_world);
  }
  const auto loaded = load_manifest(d1);
  CHECK(loaded.entries.size() == 8);
  CHECK(load_dataset(d1).size() == 8);

  // Non-empty directory without force.
  try {
    cfg.out_dir = d1;
    generate_dataset(cfg);
    FAIL("expected IoFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoFailure);
  }
  cfg.force = true;
  CHECK_NOTHROW(generate_dataset(cfg));

  cfg.views_per_entry = 1;
  CHECK_THROWS_AS(generate_dataset(cfg), Error);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("schema rejects malformed records") {
  CHECK_THROWS_AS(parse_json("{not json"), Error);
  Json cam = camera_to_json(fixture::chair_entry().views[0].camera);
  cam["fx"] = -1.0;
  CHECK_THROWS_AS(camera_from_json(cam), Error);
  Json frame = frame_to_json(fixture::chair_entry().views[0].frame);
  frame["handedness"] = "left";
  CHECK_THROWS_AS(frame_from_json(frame), Error);
  frame.erase("unit_length");
  CHECK_THROWS_AS(frame_from_json(frame), Error);
}
