#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "axp/overlay.hpp"
#include "axp/scenegen.hpp"

namespace fixture {

/// The worked chair example: chair_000 of seed 1 with three views.
inline axp::DatasetEntry chair_entry() { return axp::make_entry(axp::Category::Chair, 0, 1, 3); }

/// View `view` of the chair with its dataset frame and style.
inline axp::AnnotatedImage chair_view(int view = 0) {
  const auto e = chair_entry();
  const auto& v = e.views[view];
  axp::AnnotatedImage a;
  a.image = axp::render_view(e.object, v.camera, v.frame, v.camera.image_width, v.camera.image_height);
  a.camera = v.camera;
  a.frame = v.frame;
  a.style = v.style;
  return a;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  static std::mt19937_64 rng(std::random_device{}());
  const auto p = std::filesystem::temp_directory_path() / ("axp_" + name + "_" + std::to_string(rng() % 1000000000));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::filesystem::path data_dir() { return AXP_TEST_DATA; }

}  // namespace fixture
