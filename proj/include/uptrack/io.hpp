#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uptrack/errors.hpp"
#include "uptrack/tensor.hpp"

namespace uptrack {

// ---- little-endian primitives (explicit byte order, host-independent) ----

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& ctx) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw io_error(ctx + ": truncated while reading u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(os, v);
}

inline float get_f32(std::istream& is, const std::string& ctx) {
  const std::uint32_t v = get_u32(is, ctx);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

inline void put_f32_block(std::ostream& os, const std::vector<float>& vals) {
  std::vector<char> buf(vals.size() * 4);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    std::uint32_t v;
    std::memcpy(&v, &vals[i], 4);
    buf[4 * i + 0] = static_cast<char>(v & 0xff);
    buf[4 * i + 1] = static_cast<char>((v >> 8) & 0xff);
    buf[4 * i + 2] = static_cast<char>((v >> 16) & 0xff);
    buf[4 * i + 3] = static_cast<char>((v >> 24) & 0xff);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void get_f32_block(std::istream& is, std::vector<float>& vals, const std::string& ctx) {
  std::vector<unsigned char> buf(vals.size() * 4);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (is.gcount() != static_cast<std::streamsize>(buf.size()))
    throw io_error(ctx + ": truncated float payload");
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const std::uint32_t v = static_cast<std::uint32_t>(buf[4 * i + 0]) |
                            (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                            (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                            (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
    std::memcpy(&vals[i], &v, 4);
  }
}

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& ctx) {
  char got[4];
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0)
    throw io_error(ctx + ": bad magic, expected \"" + magic + "\"");
}

// ---- tensor container: "TTNS", version 1, h/w/c u32, float32 payload ----

inline constexpr std::uint32_t kTensorFormatVersion = 1;

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("write_tensor: cannot open " + path.string());
  f.write("TTNS", 4);
  put_u32(f, kTensorFormatVersion);
  put_u32(f, static_cast<std::uint32_t>(t.h));
  put_u32(f, static_cast<std::uint32_t>(t.w));
  put_u32(f, static_cast<std::uint32_t>(t.c));
  put_f32_block(f, t.data);
  if (!f) throw io_error("write_tensor: short write to " + path.string());
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("read_tensor: cannot open " + path.string());
  const std::string ctx = "read_tensor(" + path.string() + ")";
  expect_magic(f, "TTNS", ctx);
  const std::uint32_t version = get_u32(f, ctx);
  if (version != kTensorFormatVersion)
    throw io_error(ctx + ": unsupported version " + std::to_string(version));
  const std::uint32_t h = get_u32(f, ctx);
  const std::uint32_t w = get_u32(f, ctx);
  const std::uint32_t c = get_u32(f, ctx);
  if (h == 0 || w == 0 || c == 0 || static_cast<std::uint64_t>(h) * w * c > (1u << 28))
    throw io_error(ctx + ": implausible shape");
  Tensor t = make_tensor(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  get_f32_block(f, t.data, ctx);
  return t;
}

// ---- text helpers ----

// Shortest decimal that round-trips the value class: 9 significant digits
// for data that lived as float32, 17 for native doubles. Keeps CSV output
// byte-stable across runs.
inline std::string fmt_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("read_text_file: cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("write_text_file: cannot open " + path.string());
  f << text;
  if (!f) throw io_error("write_text_file: short write to " + path.string());
}

}  // namespace uptrack
