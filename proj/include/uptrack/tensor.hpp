#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <string>
#include <vector>

#include "uptrack/errors.hpp"

namespace uptrack {

// Dense float32 tensor, row-major (y, x, channel). Small enough here that
// we keep the layout fixed and run every reduction as one deterministic
// row-major pass, accumulating in double.
struct Tensor {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<float> data;

  float& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  float at(int y, int x, int ch) const {
    return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Tensor& o) const { return h == o.h && w == o.w && c == o.c; }
};

inline Tensor make_tensor(int h, int w, int c, float fill = 0.0f) {
  if (h <= 0 || w <= 0 || c <= 0)
    throw shape_error("make_tensor: dimensions must be positive, got " + std::to_string(h) + "x" +
                      std::to_string(w) + "x" + std::to_string(c));
  Tensor t;
  t.h = h;
  t.w = w;
  t.c = c;
  t.data.assign(static_cast<std::size_t>(h) * w * c, fill);
  return t;
}

inline Tensor new_tensor(int h, int w, int c, std::vector<float> data) {
  Tensor t = make_tensor(h, w, c);
  if (data.size() != t.data.size())
    throw shape_error("new_tensor: got " + std::to_string(data.size()) + " values for shape " +
                      std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c));
  for (float v : data)
    if (!std::isfinite(v)) throw validation_error("new_tensor: non-finite value");
  t.data = std::move(data);
  return t;
}

inline std::string shape_string(const Tensor& t) {
  return std::to_string(t.h) + "x" + std::to_string(t.w) + "x" + std::to_string(t.c);
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw shape_error(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                      shape_string(b));
}

// a*X + b*Y elementwise in float. This is the single blend kernel the
// update strategies are built on, so algebraically equal strategies stay
// bit-equal.
inline Tensor combine(float a, const Tensor& X, float b, const Tensor& Y) {
  require_same_shape(X, Y, "combine");
  Tensor out = X;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a * X.data[i] + b * Y.data[i];
  return out;
}

inline double sum_squared_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sum_squared_diff");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    acc += d * d;
  }
  return acc;
}

inline double l2_distance(const Tensor& a, const Tensor& b) {
  return std::sqrt(sum_squared_diff(a, b));
}

inline double mean_squared_diff(const Tensor& a, const Tensor& b) {
  return sum_squared_diff(a, b) / static_cast<double>(a.size());
}

inline double mean_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mean_abs_diff");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    acc += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
  return acc / static_cast<double>(a.size());
}

inline double max_abs(const Tensor& t) {
  double m = 0.0;
  for (float v : t.data) m = std::max(m, static_cast<double>(std::abs(v)));
  return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

// 2D score map produced by correlation.
struct ResponseMap {
  int h = 0;
  int w = 0;
  std::vector<float> v;

  float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Valid-mode cross-correlation of the template over the search feature
// map, summed over channels (accumulated in double, stored as float).
// Output is (sh-th+1) x (sw-tw+1).
inline ResponseMap cross_correlate(const Tensor& templ, const Tensor& search) {
  if (search.c != templ.c)
    throw shape_error("cross_correlate: channel mismatch " + shape_string(templ) + " vs " +
                      shape_string(search));
  if (templ.h > search.h || templ.w > search.w)
    throw shape_error("cross_correlate: template " + shape_string(templ) +
                      " larger than search " + shape_string(search));
  ResponseMap r;
  r.h = search.h - templ.h + 1;
  r.w = search.w - templ.w + 1;
  r.v.assign(static_cast<std::size_t>(r.h) * r.w, 0.0f);
  for (int dy = 0; dy < r.h; ++dy) {
    for (int dx = 0; dx < r.w; ++dx) {
      double acc = 0.0;
      for (int ty = 0; ty < templ.h; ++ty) {
        const float* srow = search.data.data() +
                            (static_cast<std::size_t>(dy + ty) * search.w + dx) * search.c;
        const float* trow = templ.data.data() + static_cast<std::size_t>(ty) * templ.w * templ.c;
        const int n = templ.w * templ.c;
        for (int k = 0; k < n; ++k) acc += static_cast<double>(srow[k]) * trow[k];
      }
      r.at(dy, dx) = static_cast<float>(acc);
    }
  }
  return r;
}

struct Peak {
  int y = 0;
  int x = 0;
  float value = 0.0f;
};

// Ties break to the smallest row, then smallest column (first maximum in a
// row-major scan).
inline Peak argmax_response(const ResponseMap& r) {
  if (r.v.empty()) throw validation_error("argmax_response: empty response");
  Peak p{0, 0, r.v[0]};
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      if (r.at(y, x) > p.value) p = Peak{y, x, r.at(y, x)};
  return p;
}

inline Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw shape_error("concat_channels: no inputs");
  int total_c = 0;
  for (const Tensor* p : parts) {
    if (p->h != parts[0]->h || p->w != parts[0]->w)
      throw shape_error("concat_channels: spatial mismatch " + shape_string(*parts[0]) + " vs " +
                        shape_string(*p));
    total_c += p->c;
  }
  Tensor out = make_tensor(parts[0]->h, parts[0]->w, total_c);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      int ch = 0;
      for (const Tensor* p : parts)
        for (int k = 0; k < p->c; ++k) out.at(y, x, ch++) = p->at(y, x, k);
    }
  }
  return out;
}

inline Tensor concat_channels(const Tensor& x, const Tensor& y, const Tensor& z) {
  return concat_channels({&x, &y, &z});
}

// Channels [c0, c1) as a new tensor.
inline Tensor slice_channels(const Tensor& t, int c0, int c1) {
  if (c0 < 0 || c1 > t.c || c0 >= c1)
    throw shape_error("slice_channels: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                      ") out of " + std::to_string(t.c) + " channels");
  Tensor out = make_tensor(t.h, t.w, c1 - c0);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x)
      for (int ch = c0; ch < c1; ++ch) out.at(y, x, ch - c0) = t.at(y, x, ch);
  return out;
}

}  // namespace uptrack
