#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "uptrack/errors.hpp"

namespace uptrack {

// Grayscale frame, intensities in [0, 1], row-major.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<float> px;

  float& at(int y, int x) { return px[static_cast<std::size_t>(y) * w + x]; }
  float at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
};

inline Image make_image(int h, int w, float fill = 0.0f) {
  if (h <= 0 || w <= 0)
    throw shape_error("make_image: dimensions must be positive, got " + std::to_string(h) + "x" +
                      std::to_string(w));
  Image im;
  im.h = h;
  im.w = w;
  im.px.assign(static_cast<std::size_t>(h) * w, fill);
  return im;
}

inline double mean_intensity(const Image& im) {
  double acc = 0.0;
  for (float v : im.px) acc += v;
  return im.px.empty() ? 0.0 : acc / static_cast<double>(im.px.size());
}

// Binary PGM (P5), maxval 255. Intensities quantize with round-half-up and
// read back as v/255, so write/read round-trips to within 1/510.
inline void write_pgm(const std::filesystem::path& path, const Image& im) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("write_pgm: cannot open " + path.string());
  f << "P5\n" << im.w << " " << im.h << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(im.w));
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w; ++x) {
      const float v = std::clamp(im.at(y, x), 0.0f, 1.0f);
      row[static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw io_error("write_pgm: short write to " + path.string());
}

inline Image read_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("read_pgm: cannot open " + path.string());
  std::string magic;
  f >> magic;
  if (magic != "P5") throw io_error("read_pgm: " + path.string() + " is not binary PGM");
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (!f || w <= 0 || h <= 0) throw io_error("read_pgm: bad header in " + path.string());
  if (maxval != 255) throw io_error("read_pgm: unsupported maxval in " + path.string());
  f.get();  // single whitespace after header
  Image im = make_image(h, w);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    throw io_error("read_pgm: truncated pixel data in " + path.string());
  for (std::size_t i = 0; i < buf.size(); ++i) im.px[i] = static_cast<float>(buf[i]) / 255.0f;
  return im;
}

}  // namespace uptrack
