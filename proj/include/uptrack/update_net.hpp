#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "uptrack/errors.hpp"
#include "uptrack/io.hpp"
#include "uptrack/rng.hpp"
#include "uptrack/tensor.hpp"

namespace uptrack {

// Two 1x1 convolutions with a ReLU between them: per spatial position, a
// dense 3C -> hidden -> C perceptron over channels.
struct UpdateNetParams {
  int in_channels = 0;  // 3C
  int hidden = 0;
  int out_channels = 0;  // C
  std::vector<float> w1;  // hidden x in_channels, row-major
  std::vector<float> b1;  // hidden
  std::vector<float> w2;  // out_channels x hidden, row-major
  std::vector<float> b2;  // out_channels
};

inline void validate(const UpdateNetParams& p) {
  if (p.in_channels < 1 || p.hidden < 1 || p.out_channels < 1)
    throw shape_error("update net params: non-positive dimension");
  if (p.w1.size() != static_cast<std::size_t>(p.hidden) * p.in_channels ||
      p.b1.size() != static_cast<std::size_t>(p.hidden) ||
      p.w2.size() != static_cast<std::size_t>(p.out_channels) * p.hidden ||
      p.b2.size() != static_cast<std::size_t>(p.out_channels))
    throw shape_error("update net params: field sizes inconsistent with dimensions");
}

inline std::size_t param_count(const UpdateNetParams& p) {
  return p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size();
}

enum class InitScheme { zeros, scaled_uniform };

inline UpdateNetParams init_params(int c, int hidden, InitScheme scheme,
                                   std::uint64_t seed = 0) {
  if (c < 1 || hidden < 1) throw shape_error("init_params: c and hidden must be >= 1");
  UpdateNetParams p;
  p.in_channels = 3 * c;
  p.hidden = hidden;
  p.out_channels = c;
  p.w1.assign(static_cast<std::size_t>(hidden) * p.in_channels, 0.0f);
  p.b1.assign(static_cast<std::size_t>(hidden), 0.0f);
  p.w2.assign(static_cast<std::size_t>(c) * hidden, 0.0f);
  p.b2.assign(static_cast<std::size_t>(c), 0.0f);
  if (scheme == InitScheme::scaled_uniform) {
    SplitMix64 g(seed);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(p.in_channels));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (float& v : p.w1) v = static_cast<float>(g.uniform(-s1, s1));
    for (float& v : p.b1) v = static_cast<float>(g.uniform(-s1, s1));
    for (float& v : p.w2) v = static_cast<float>(g.uniform(-s2, s2));
    for (float& v : p.b2) v = static_cast<float>(g.uniform(-s2, s2));
  }
  return p;
}

struct ForwardCache {
  Tensor input;        // H x W x 3C
  Tensor hidden_pre;   // H x W x hidden
  Tensor hidden_post;  // H x W x hidden (ReLU applied)
};

// Dot products accumulate in double; activations are stored back as float.
inline Tensor forward(const UpdateNetParams& p, const Tensor& x, ForwardCache* cache = nullptr) {
  validate(p);
  if (x.c != p.in_channels)
    throw shape_error("forward: input has " + std::to_string(x.c) + " channels, params expect " +
                      std::to_string(p.in_channels));
  Tensor out = make_tensor(x.h, x.w, p.out_channels);
  Tensor hpre = make_tensor(x.h, x.w, p.hidden);
  Tensor hpost = make_tensor(x.h, x.w, p.hidden);
  const int positions = x.h * x.w;
  for (int pos = 0; pos < positions; ++pos) {
    const float* xv = x.data.data() + static_cast<std::size_t>(pos) * p.in_channels;
    float* pre = hpre.data.data() + static_cast<std::size_t>(pos) * p.hidden;
    float* post = hpost.data.data() + static_cast<std::size_t>(pos) * p.hidden;
    for (int h = 0; h < p.hidden; ++h) {
      const float* row = p.w1.data() + static_cast<std::size_t>(h) * p.in_channels;
      double acc = p.b1[static_cast<std::size_t>(h)];
      for (int i = 0; i < p.in_channels; ++i) acc += static_cast<double>(row[i]) * xv[i];
      pre[h] = static_cast<float>(acc);
      post[h] = pre[h] > 0.0f ? pre[h] : 0.0f;
    }
    float* ov = out.data.data() + static_cast<std::size_t>(pos) * p.out_channels;
    for (int o = 0; o < p.out_channels; ++o) {
      const float* row = p.w2.data() + static_cast<std::size_t>(o) * p.hidden;
      double acc = p.b2[static_cast<std::size_t>(o)];
      for (int h = 0; h < p.hidden; ++h) acc += static_cast<double>(row[h]) * post[h];
      ov[o] = static_cast<float>(acc);
    }
  }
  if (cache != nullptr) {
    cache->input = x;
    cache->hidden_pre = std::move(hpre);
    cache->hidden_post = std::move(hpost);
  }
  return out;
}

struct ParamGrads {
  std::vector<float> w1, b1, w2, b2;
};

inline ParamGrads make_grads(const UpdateNetParams& p) {
  ParamGrads g;
  g.w1.assign(p.w1.size(), 0.0f);
  g.b1.assign(p.b1.size(), 0.0f);
  g.w2.assign(p.w2.size(), 0.0f);
  g.b2.assign(p.b2.size(), 0.0f);
  return g;
}

// Gradients of the forward map contracted with grad_out. ReLU's subgradient
// at exactly 0 is 0. Accumulation is double, stored back as float.
inline ParamGrads backward(const UpdateNetParams& p, const ForwardCache& cache,
                           const Tensor& grad_out) {
  validate(p);
  if (cache.input.c != p.in_channels || cache.hidden_pre.c != p.hidden ||
      !cache.hidden_pre.same_shape(cache.hidden_post) ||
      cache.hidden_pre.h != cache.input.h || cache.hidden_pre.w != cache.input.w)
    throw shape_error("backward: cache inconsistent with params");
  if (grad_out.h != cache.input.h || grad_out.w != cache.input.w ||
      grad_out.c != p.out_channels)
    throw shape_error("backward: grad_out shape " + shape_string(grad_out) +
                      " inconsistent with cache/params");

  std::vector<double> gw1(p.w1.size(), 0.0), gb1(p.b1.size(), 0.0);
  std::vector<double> gw2(p.w2.size(), 0.0), gb2(p.b2.size(), 0.0);
  std::vector<double> dpost(static_cast<std::size_t>(p.hidden));

  const int positions = grad_out.h * grad_out.w;
  for (int pos = 0; pos < positions; ++pos) {
    const float* go = grad_out.data.data() + static_cast<std::size_t>(pos) * p.out_channels;
    const float* post = cache.hidden_post.data.data() + static_cast<std::size_t>(pos) * p.hidden;
    const float* pre = cache.hidden_pre.data.data() + static_cast<std::size_t>(pos) * p.hidden;
    const float* xv = cache.input.data.data() + static_cast<std::size_t>(pos) * p.in_channels;

    std::fill(dpost.begin(), dpost.end(), 0.0);
    for (int o = 0; o < p.out_channels; ++o) {
      const double g = go[o];
      gb2[static_cast<std::size_t>(o)] += g;
      const float* row = p.w2.data() + static_cast<std::size_t>(o) * p.hidden;
      double* gw2row = gw2.data() + static_cast<std::size_t>(o) * p.hidden;
      for (int h = 0; h < p.hidden; ++h) {
        gw2row[h] += g * post[h];
        dpost[static_cast<std::size_t>(h)] += g * row[h];
      }
    }
    for (int h = 0; h < p.hidden; ++h) {
      if (!(pre[h] > 0.0f)) continue;
      const double d = dpost[static_cast<std::size_t>(h)];
      gb1[static_cast<std::size_t>(h)] += d;
      double* gw1row = gw1.data() + static_cast<std::size_t>(h) * p.in_channels;
      for (int i = 0; i < p.in_channels; ++i) gw1row[i] += d * xv[i];
    }
  }

  ParamGrads g = make_grads(p);
  for (std::size_t i = 0; i < gw1.size(); ++i) g.w1[i] = static_cast<float>(gw1[i]);
  for (std::size_t i = 0; i < gb1.size(); ++i) g.b1[i] = static_cast<float>(gb1[i]);
  for (std::size_t i = 0; i < gw2.size(); ++i) g.w2[i] = static_cast<float>(gw2[i]);
  for (std::size_t i = 0; i < gb2.size(); ++i) g.b2[i] = static_cast<float>(gb2[i]);
  return g;
}

namespace detail {

// Forward + MSE entirely in double registers; used by the finite-difference
// oracle so the difference quotient is not polluted by float32 rounding.
inline double loss_value_f64(const std::vector<double>& w1, const std::vector<double>& b1,
                             const std::vector<double>& w2, const std::vector<double>& b2,
                             int in_channels, int hidden, int out_channels, const Tensor& x,
                             const Tensor& target) {
  const int positions = x.h * x.w;
  std::vector<double> post(static_cast<std::size_t>(hidden));
  double loss = 0.0;
  for (int pos = 0; pos < positions; ++pos) {
    const float* xv = x.data.data() + static_cast<std::size_t>(pos) * in_channels;
    for (int h = 0; h < hidden; ++h) {
      const double* row = w1.data() + static_cast<std::size_t>(h) * in_channels;
      double acc = b1[static_cast<std::size_t>(h)];
      for (int i = 0; i < in_channels; ++i) acc += row[i] * xv[i];
      post[static_cast<std::size_t>(h)] = acc > 0.0 ? acc : 0.0;
    }
    const float* tv = target.data.data() + static_cast<std::size_t>(pos) * out_channels;
    for (int o = 0; o < out_channels; ++o) {
      const double* row = w2.data() + static_cast<std::size_t>(o) * hidden;
      double acc = b2[static_cast<std::size_t>(o)];
      for (int h = 0; h < hidden; ++h) acc += row[h] * post[static_cast<std::size_t>(h)];
      const double d = acc - tv[o];
      loss += d * d;
    }
  }
  return loss / (static_cast<double>(positions) * out_channels);
}

}  // namespace detail

// Scalar objective for the oracle: MSE between the raw network output and
// target (any residual term is constant in the parameters, so its gradient
// contribution is zero; callers fold it into the target instead).
inline double net_mse(const UpdateNetParams& p, const Tensor& x, const Tensor& target) {
  std::vector<double> w1(p.w1.begin(), p.w1.end()), b1(p.b1.begin(), p.b1.end());
  std::vector<double> w2(p.w2.begin(), p.w2.end()), b2(p.b2.begin(), p.b2.end());
  return detail::loss_value_f64(w1, b1, w2, b2, p.in_channels, p.hidden, p.out_channels, x,
                                target);
}

// Central finite differences of net_mse w.r.t. every parameter. Parameters
// are widened to double before perturbing so the step is exactly eps.
inline ParamGrads finite_diff_grad(const UpdateNetParams& p, const Tensor& x,
                                   const Tensor& target, double eps) {
  if (!(eps > 0.0)) throw validation_error("finite_diff_grad: eps must be > 0");
  validate(p);
  if (x.c != p.in_channels || target.c != p.out_channels || target.h != x.h || target.w != x.w)
    throw shape_error("finite_diff_grad: input/target shapes inconsistent with params");
  std::vector<double> w1(p.w1.begin(), p.w1.end()), b1(p.b1.begin(), p.b1.end());
  std::vector<double> w2(p.w2.begin(), p.w2.end()), b2(p.b2.begin(), p.b2.end());

  auto eval = [&]() {
    return detail::loss_value_f64(w1, b1, w2, b2, p.in_channels, p.hidden, p.out_channels, x,
                                  target);
  };
  auto central = [&](std::vector<double>& field, std::size_t i) {
    const double keep = field[i];
    field[i] = keep + eps;
    const double up = eval();
    field[i] = keep - eps;
    const double dn = eval();
    field[i] = keep;
    return (up - dn) / (2.0 * eps);
  };

  ParamGrads g = make_grads(p);
  for (std::size_t i = 0; i < w1.size(); ++i) g.w1[i] = static_cast<float>(central(w1, i));
  for (std::size_t i = 0; i < b1.size(); ++i) g.b1[i] = static_cast<float>(central(b1, i));
  for (std::size_t i = 0; i < w2.size(); ++i) g.w2[i] = static_cast<float>(central(w2, i));
  for (std::size_t i = 0; i < b2.size(); ++i) g.b2[i] = static_cast<float>(central(b2, i));
  return g;
}

// ---- parameter file: "UNET", version 1, dims, then w1 b1 w2 b2 ----

inline constexpr std::uint32_t kParamsFormatVersion = 1;

inline void save_params(const std::filesystem::path& path, const UpdateNetParams& p) {
  validate(p);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("save_params: cannot open " + path.string());
  f.write("UNET", 4);
  put_u32(f, kParamsFormatVersion);
  put_u32(f, static_cast<std::uint32_t>(p.in_channels));
  put_u32(f, static_cast<std::uint32_t>(p.hidden));
  put_u32(f, static_cast<std::uint32_t>(p.out_channels));
  put_f32_block(f, p.w1);
  put_f32_block(f, p.b1);
  put_f32_block(f, p.w2);
  put_f32_block(f, p.b2);
  if (!f) throw io_error("save_params: short write to " + path.string());
}

inline UpdateNetParams load_params(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("load_params: cannot open " + path.string());
  const std::string ctx = "load_params(" + path.string() + ")";
  expect_magic(f, "UNET", ctx);
  const std::uint32_t version = get_u32(f, ctx);
  if (version != kParamsFormatVersion)
    throw io_error(ctx + ": unsupported version " + std::to_string(version));
  UpdateNetParams p;
  p.in_channels = static_cast<int>(get_u32(f, ctx));
  p.hidden = static_cast<int>(get_u32(f, ctx));
  p.out_channels = static_cast<int>(get_u32(f, ctx));
  if (p.in_channels < 1 || p.hidden < 1 || p.out_channels < 1 || p.in_channels > (1 << 20) ||
      p.hidden > (1 << 20) || p.out_channels > (1 << 20))
    throw io_error(ctx + ": implausible dimensions");
  p.w1.assign(static_cast<std::size_t>(p.hidden) * p.in_channels, 0.0f);
  p.b1.assign(static_cast<std::size_t>(p.hidden), 0.0f);
  p.w2.assign(static_cast<std::size_t>(p.out_channels) * p.hidden, 0.0f);
  p.b2.assign(static_cast<std::size_t>(p.out_channels), 0.0f);
  get_f32_block(f, p.w1, ctx);
  get_f32_block(f, p.b1, ctx);
  get_f32_block(f, p.w2, ctx);
  get_f32_block(f, p.b2, ctx);
  return p;
}

}  // namespace uptrack
