#pragma once

#include <filesystem>
#include <string>

namespace vicsim {

// Directory holding templates, lexicons and registries. VICSIM_ASSET_DIR in
// the environment overrides the compiled-in default.
std::filesystem::path asset_dir();
std::filesystem::path asset_path(const std::string& relative);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace vicsim
