#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace storyframe {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, flushes it to disk and renames it over
// `path`, so readers see either the old or the new contents.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace storyframe
