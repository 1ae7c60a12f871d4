#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace biastrace {

/// Writes to a sibling temp file and renames it over `path`, so readers never
/// observe a partially written file. Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace biastrace
