#include "vicsim/assets.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vicsim/error.hpp"

#ifndef VICSIM_DEFAULT_ASSET_DIR
#define VICSIM_DEFAULT_ASSET_DIR "assets"
#endif

namespace vicsim {

std::filesystem::path asset_dir() {
  if (const char* env = std::getenv("VICSIM_ASSET_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return VICSIM_DEFAULT_ASSET_DIR;
}

std::filesystem::path asset_path(const std::string& relative) { return asset_dir() / relative; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace vicsim
