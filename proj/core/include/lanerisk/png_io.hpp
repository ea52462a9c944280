#pragma once

#include <filesystem>

#include "lanerisk/image.hpp"

namespace lanerisk {

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace lanerisk
