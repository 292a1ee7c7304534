#include "skillopt/package_io.hpp"

#include <fstream>
#include <sstream>

#include "skillopt/errors.hpp"

namespace skillopt {

namespace fs = std::filesystem;

DirectorySnapshot read_directory(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    raise(errc::io_error, "not a directory: " + dir.string());
  }
  DirectorySnapshot snap;
  for (auto it = fs::recursive_directory_iterator(dir, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) raise(errc::io_error, "cannot traverse " + dir.string() + ": " + ec.message());
    if (!it->is_regular_file()) continue;
    const fs::path rel = fs::relative(it->path(), dir);
    snap[rel.generic_string()] = read_file(it->path());
  }
  return snap;
}

void write_directory(const fs::path& dir, const DirectorySnapshot& snapshot) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& [rel, content] : snapshot) {
    const fs::path target = dir / fs::path(rel);
    fs::create_directories(target.parent_path(), ec);
    write_file(target, content);
  }
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) raise(errc::io_error, "cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& file, std::string_view content) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) raise(errc::io_error, "cannot write " + file.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) raise(errc::io_error, "short write to " + file.string());
}

}  // namespace skillopt
