#pragma once

#include <filesystem>
#include <string>

#include "storyframe/io.hpp"
#include "storyframe/story_model.hpp"

namespace storyframe::fixtures {

inline std::filesystem::path data_dir() { return STORYFRAME_TEST_DATA; }

inline std::string read(const std::string& name) { return read_file(data_dir() / name); }

inline Json read_json(const std::string& name) { return Json::parse(read(name)); }

inline std::string golden_bytes() { return read("picture_composition.frame.json"); }

inline Json picture_ops() { return read_json("picture_composition.ops.json"); }

// Fresh scratch directory under the build tree, emptied on each call.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(STORYFRAME_TEST_SCRATCH) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace storyframe::fixtures
