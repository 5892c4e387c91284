#include "egopose/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "egopose/check.hpp"

namespace egopose {

namespace {

struct Canvas {
  int width, height;
  std::vector<uint8_t> rgb;  // row-major, top-down

  Canvas(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 255) {}

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || x >= width || y < 0 || y >= height) return;
    uint8_t* px = rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
    px[0] = r;
    px[1] = g;
    px[2] = b;
  }

  void line(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

void write_bmp(const std::filesystem::path& path, const Canvas& canvas) {
  const int w = canvas.width, h = canvas.height;
  const int row_bytes = (w * 3 + 3) & ~3;
  const uint32_t pixel_bytes = static_cast<uint32_t>(row_bytes) * h;
  const uint32_t file_size = 54 + pixel_bytes;

  std::ofstream out(path, std::ios::binary);
  EGOPOSE_CHECK(out.good(), "plot: cannot open " + path.string());
  auto w16 = [&](uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  auto w32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  out.put('B');
  out.put('M');
  w32(file_size);
  w32(0);
  w32(54);
  w32(40);  // BITMAPINFOHEADER
  w32(static_cast<uint32_t>(w));
  w32(static_cast<uint32_t>(h));
  w16(1);
  w16(24);
  w32(0);
  w32(pixel_bytes);
  w32(2835);
  w32(2835);
  w32(0);
  w32(0);

  std::vector<uint8_t> row(static_cast<size_t>(row_bytes), 0);
  for (int y = h - 1; y >= 0; --y) {  // BMP stores bottom-up
    for (int x = 0; x < w; ++x) {
      const uint8_t* px = canvas.rgb.data() + (static_cast<size_t>(y) * w + x) * 3;
      row[static_cast<size_t>(x) * 3 + 0] = px[2];  // BGR
      row[static_cast<size_t>(x) * 3 + 1] = px[1];
      row[static_cast<size_t>(x) * 3 + 2] = px[0];
    }
    out.write(reinterpret_cast<const char*>(row.data()), row_bytes);
  }
}

struct Range {
  double lo, hi;
};

Range value_range(const std::vector<double>& values) {
  double lo = 0.0, hi = 1.0;
  if (!values.empty()) {
    lo = *std::min_element(values.begin(), values.end());
    hi = *std::max_element(values.begin(), values.end());
  }
  lo = std::min(lo, 0.0);
  if (hi <= lo) hi = lo + 1.0;
  return {lo, hi};
}

constexpr int kMargin = 30;

void draw_axes(Canvas& canvas) {
  canvas.line(kMargin, kMargin, kMargin, canvas.height - kMargin, 0, 0, 0);
  canvas.line(kMargin, canvas.height - kMargin, canvas.width - kMargin,
              canvas.height - kMargin, 0, 0, 0);
}

}  // namespace

void plot_line_bmp(const std::filesystem::path& path, const std::vector<double>& values,
                   int width, int height) {
  Canvas canvas(width, height);
  draw_axes(canvas);
  if (values.size() >= 2) {
    const Range r = value_range(values);
    const double span_x = width - 2 * kMargin;
    const double span_y = height - 2 * kMargin;
    auto px = [&](size_t i) {
      return kMargin + static_cast<int>(span_x * static_cast<double>(i) / (values.size() - 1));
    };
    auto py = [&](double v) {
      return height - kMargin - static_cast<int>(span_y * (v - r.lo) / (r.hi - r.lo));
    };
    for (size_t i = 0; i + 1 < values.size(); ++i) {
      canvas.line(px(i), py(values[i]), px(i + 1), py(values[i + 1]), 40, 80, 200);
    }
  }
  write_bmp(path, canvas);
}

void plot_bars_bmp(const std::filesystem::path& path, const std::vector<double>& values,
                   int width, int height) {
  Canvas canvas(width, height);
  draw_axes(canvas);
  if (!values.empty()) {
    const Range r = value_range(values);
    const double span_x = width - 2 * kMargin;
    const double span_y = height - 2 * kMargin;
    const int bar_w = std::max(2, static_cast<int>(span_x / values.size()) - 4);
    for (size_t i = 0; i < values.size(); ++i) {
      const int x0 = kMargin + 2 + static_cast<int>(span_x * static_cast<double>(i) / values.size());
      const int top = height - kMargin -
                      static_cast<int>(span_y * (values[i] - r.lo) / (r.hi - r.lo));
      for (int x = x0; x < x0 + bar_w; ++x) {
        canvas.line(x, top, x, height - kMargin - 1, 200, 90, 40);
      }
    }
  }
  write_bmp(path, canvas);
}

}  // namespace egopose
