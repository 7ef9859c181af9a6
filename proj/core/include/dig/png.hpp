#pragma once

#include <filesystem>
#include <string>

#include "dig/render.hpp"

namespace dig {

// Minimal 8-bit RGB PNG encoder (no alpha, no interlace). Deterministic.
std::string encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace dig
