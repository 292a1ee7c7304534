#pragma once

#include <filesystem>

#include "skillopt/skill_package.hpp"

namespace skillopt {

// Reads every regular file under dir (recursively) into a snapshot keyed by
// the '/'-separated path relative to dir. Throws Error(io_error) when dir is
// missing or unreadable.
DirectorySnapshot read_directory(const std::filesystem::path& dir);

// Writes a snapshot under dir, creating parent directories as needed.
void write_directory(const std::filesystem::path& dir, const DirectorySnapshot& snapshot);

std::string read_file(const std::filesystem::path& file);
void write_file(const std::filesystem::path& file, std::string_view content);

}  // namespace skillopt
