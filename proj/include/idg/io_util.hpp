#pragma once

#include <filesystem>
#include <string>

namespace idg {

/// Writes content to a temporary file in the target directory, then renames
/// it over the destination.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace idg
