#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace egopose {

/// Minimal chart rendering to 24-bit BMP, for loss curves and per-joint error
/// bars. Zero dependencies; intended for quick visual inspection only.
void plot_line_bmp(const std::filesystem::path& path, const std::vector<double>& values,
                   int width = 640, int height = 360);
void plot_bars_bmp(const std::filesystem::path& path, const std::vector<double>& values,
                   int width = 640, int height = 360);

}  // namespace egopose
