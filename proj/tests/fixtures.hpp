#pragma once

#include <filesystem>
#include <string>

#include "irisforge/toydata.hpp"

namespace fixtures {

namespace fs = std::filesystem;

inline fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("irisforge_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Small toy set rendered once per process.
inline const irisforge::Manifest& toy(int ids = 6, int styles = 4) {
  static const irisforge::Manifest m = [&] {
    const auto dir = scratch("toy_" + std::to_string(ids) + "x" + std::to_string(styles));
    return irisforge::build_toy_dataset(ids, styles, 64, 11, dir);
  }();
  return m;
}

}  // namespace fixtures
