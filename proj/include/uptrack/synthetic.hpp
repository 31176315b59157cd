#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "uptrack/errors.hpp"
#include "uptrack/geometry.hpp"
#include "uptrack/image.hpp"
#include "uptrack/io.hpp"
#include "uptrack/rng.hpp"
#include "uptrack/tensor.hpp"

namespace uptrack {

// ---------------------------------------------------------------------------
// Scene description
// ---------------------------------------------------------------------------

enum class EventKind { drift, occlusion, blur, illumination, scale };

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::drift: return "drift";
    case EventKind::occlusion: return "occlusion";
    case EventKind::blur: return "blur";
    case EventKind::illumination: return "illumination";
    case EventKind::scale: return "scale";
  }
  return "?";
}

inline EventKind event_kind_from_string(const std::string& s) {
  if (s == "drift") return EventKind::drift;
  if (s == "occlusion") return EventKind::occlusion;
  if (s == "blur") return EventKind::blur;
  if (s == "illumination") return EventKind::illumination;
  if (s == "scale") return EventKind::scale;
  throw validation_error("appearance_events.kind: unknown kind \"" + s + "\"");
}

struct AppearanceEvent {
  EventKind kind = EventKind::drift;
  int start_frame = 0;
  int end_frame = 0;  // inclusive
  double magnitude = 0.0;
};

struct ObjectSpec {
  int shape_id = 0;  // 0 ellipse, 1 rounded square, 2 diamond
  double base_size = 24.0;
  std::uint64_t pattern_seed = 1;
};

struct MotionSpec {
  double max_speed = 3.0;  // px/frame
};

struct SceneConfig {
  std::string name = "seq";
  int frame_size = 128;  // square frames
  int num_frames = 40;
  ObjectSpec object;
  MotionSpec motion;
  std::vector<AppearanceEvent> events;
  double noise_sigma = 0.0;
  // Sensor glitches: each frame independently suffers a burst of heavy pixel
  // noise (std glitch_sigma) with probability glitch_prob. Unlike the per-frame
  // Gaussian floor this is rare but strong, the way real capture artifacts
  // (compression bursts, rolling-shutter tears) corrupt single frames.
  double glitch_prob = 0.0;
  double glitch_sigma = 0.0;
  std::uint64_t rng_seed = 1;
};

inline void validate(const SceneConfig& cfg) {
  if (cfg.name.empty()) throw validation_error("name: must be non-empty");
  if (cfg.frame_size < 8) throw validation_error("frame_size: must be at least 8");
  if (cfg.num_frames < 1) throw validation_error("num_frames: must be at least 1");
  if (cfg.object.base_size < 4.0) throw validation_error("object.base_size: must be at least 4");
  if (cfg.frame_size < 4.0 * cfg.object.base_size)
    throw validation_error("frame_size: must be at least 4x object.base_size");
  if (cfg.object.shape_id < 0 || cfg.object.shape_id > 2)
    throw validation_error("object.shape_id: must be 0, 1, or 2");
  if (cfg.motion.max_speed < 0.0) throw validation_error("motion.max_speed: must be >= 0");
  if (cfg.noise_sigma < 0.0) throw validation_error("noise_sigma: must be >= 0");
  if (cfg.glitch_prob < 0.0 || cfg.glitch_prob > 1.0)
    throw validation_error("glitch_prob: must be in [0,1]");
  if (cfg.glitch_sigma < 0.0) throw validation_error("glitch_sigma: must be >= 0");
  for (std::size_t i = 0; i < cfg.events.size(); ++i) {
    const AppearanceEvent& e = cfg.events[i];
    const std::string where = "appearance_events[" + std::to_string(i) + "]";
    if (e.start_frame < 0 || e.end_frame >= cfg.num_frames || e.start_frame > e.end_frame)
      throw validation_error(where + ".start_frame/end_frame: must satisfy 0 <= start <= end < " +
                             std::to_string(cfg.num_frames));
    if (e.magnitude < 0.0 || e.magnitude > 1.0)
      throw validation_error(where + ".magnitude: must be in [0,1]");
  }
}

struct SyntheticSequence {
  std::string name;
  std::vector<Image> frames;
  std::vector<Box> gt_boxes;
};

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

// Two low-frequency plane waves over a dim base; static per sequence.
struct BackgroundField {
  double base = 0.30;
  std::array<double, 2> amp{}, kx{}, ky{}, phase{};

  explicit BackgroundField(std::uint64_t seed) {
    SplitMix64 g(fold_seed(seed, 11));
    for (int i = 0; i < 2; ++i) {
      amp[i] = (i == 0) ? 0.06 : 0.05;
      const double k = g.uniform(0.05, 0.25);
      const double ang = g.uniform(0.0, kTwoPi);
      kx[i] = k * std::cos(ang);
      ky[i] = k * std::sin(ang);
      phase[i] = g.uniform(0.0, kTwoPi);
    }
  }

  double at(double x, double y) const {
    double v = base;
    for (int i = 0; i < 2; ++i) v += amp[i] * std::sin(kx[i] * x + ky[i] * y + phase[i]);
    return v;
  }
};

// Object surface pattern: four plane waves in canonical object coordinates,
// so the texture rides along with translation and scaling. Drift advances
// the shared phase, morphing the pattern at a constant per-frame rate.
// The wave amplitudes together outweigh the mean offset above the
// background, so appearance matching keys on the texture rather than on a
// bright silhouette; per-wave drift rates spread wide, so different parts
// of the pattern age at very different speeds.
struct ObjectTexture {
  double base = 0.50;
  std::array<double, 4> amp{}, kx{}, ky{}, phase{}, drift_rate{};

  explicit ObjectTexture(std::uint64_t pattern_seed) {
    SplitMix64 g(fold_seed(pattern_seed, 23));
    for (int i = 0; i < 4; ++i) {
      amp[i] = 0.10 + 0.02 * i;
      const double k = g.uniform(0.25, 0.6);
      const double ang = g.uniform(0.0, kTwoPi);
      kx[i] = k * std::cos(ang);
      ky[i] = k * std::sin(ang);
      phase[i] = g.uniform(0.0, kTwoPi);
      drift_rate[i] = g.uniform(0.1, 1.0);
    }
  }

  // u, v in canonical (unscaled) object-local pixel coordinates
  double at(double u, double v, double drift_phase) const {
    double t = base;
    for (int i = 0; i < 4; ++i)
      t += amp[i] * std::sin(kx[i] * u + ky[i] * v + phase[i] + drift_rate[i] * drift_phase);
    return t;
  }
};

inline double superellipse_exponent(int shape_id) {
  switch (shape_id) {
    case 0: return 2.0;  // ellipse
    case 1: return 4.0;  // rounded square
    default: return 1.0;  // diamond
  }
}

// s <= 1 inside; returns the implicit value for soft-edge coverage
inline double superellipse_value(double u, double v, double a, double b, double n) {
  return std::pow(std::abs(u) / a, n) + std::pow(std::abs(v) / b, n);
}

struct EventSample {
  double magnitude = 0.0;  // 0 when inactive
  double progress = 0.0;   // position within the event, [0,1]
  bool active = false;
};

inline EventSample sample_event(const std::vector<AppearanceEvent>& events, EventKind kind,
                                int frame) {
  EventSample s;
  for (const AppearanceEvent& e : events) {
    if (e.kind != kind || frame < e.start_frame || frame > e.end_frame) continue;
    s.active = true;
    s.magnitude = e.magnitude;
    const int span = e.end_frame - e.start_frame;
    s.progress = span > 0 ? static_cast<double>(frame - e.start_frame) / span : 0.0;
    return s;  // first matching event wins; benchmark configs do not overlap kinds
  }
  return s;
}

inline void box_blur_region(Image& im, int x0, int y0, int x1, int y1, int radius) {
  if (radius <= 0) return;
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(im.w, x1);
  y1 = std::min(im.h, y1);
  if (x0 >= x1 || y0 >= y1) return;
  Image src = im;
  const double inv = 1.0 / ((2 * radius + 1) * (2 * radius + 1));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int sy = std::clamp(y + dy, 0, im.h - 1);
        for (int dx = -radius; dx <= radius; ++dx)
          acc += src.at(sy, std::clamp(x + dx, 0, im.w - 1));
      }
      im.at(y, x) = static_cast<float>(acc * inv);
    }
  }
}

}  // namespace detail

inline SyntheticSequence render_sequence(const SceneConfig& cfg) {
  validate(cfg);
  const detail::BackgroundField bg(cfg.rng_seed);
  const detail::ObjectTexture tex(cfg.object.pattern_seed);
  const double n_exp = detail::superellipse_exponent(cfg.object.shape_id);

  SyntheticSequence seq;
  seq.name = cfg.name;
  seq.frames.reserve(static_cast<std::size_t>(cfg.num_frames));
  seq.gt_boxes.reserve(static_cast<std::size_t>(cfg.num_frames));

  // static background, painted once per frame
  Image background = make_image(cfg.frame_size, cfg.frame_size);
  for (int y = 0; y < cfg.frame_size; ++y)
    for (int x = 0; x < cfg.frame_size; ++x)
      background.at(y, x) = static_cast<float>(bg.at(x, y));

  SplitMix64 motion_rng(fold_seed(cfg.rng_seed, 101));
  double cx = cfg.frame_size / 2.0;
  double cy = cfg.frame_size / 2.0;
  double vx = 0.0, vy = 0.0;
  double drift_phase = 0.0;

  for (int f = 0; f < cfg.num_frames; ++f) {
    const detail::EventSample drift = detail::sample_event(cfg.events, EventKind::drift, f);
    const detail::EventSample occl = detail::sample_event(cfg.events, EventKind::occlusion, f);
    const detail::EventSample blur = detail::sample_event(cfg.events, EventKind::blur, f);
    const detail::EventSample illum = detail::sample_event(cfg.events, EventKind::illumination, f);
    const detail::EventSample scale = detail::sample_event(cfg.events, EventKind::scale, f);

    if (drift.active) drift_phase += 0.35 * drift.magnitude;

    const double size =
        cfg.object.base_size * (1.0 + (scale.active ? 0.5 * scale.magnitude *
                                                          std::sin(kPi * scale.progress)
                                                    : 0.0));
    const double half = size / 2.0;

    if (f > 0) {
      vx = 0.85 * vx + 0.35 * cfg.motion.max_speed * motion_rng.normal();
      vy = 0.85 * vy + 0.35 * cfg.motion.max_speed * motion_rng.normal();
      const double speed = std::sqrt(vx * vx + vy * vy);
      if (speed > cfg.motion.max_speed && speed > 0.0) {
        vx *= cfg.motion.max_speed / speed;
        vy *= cfg.motion.max_speed / speed;
      }
      cx += vx;
      cy += vy;
    }
    // keep the box fully inside the frame; damp velocity into the wall
    const double lo = half + 1.0, hi = cfg.frame_size - half - 1.0;
    if (cx < lo) { cx = lo; vx = std::abs(vx) * 0.5; }
    if (cx > hi) { cx = hi; vx = -std::abs(vx) * 0.5; }
    if (cy < lo) { cy = lo; vy = std::abs(vy) * 0.5; }
    if (cy > hi) { cy = hi; vy = -std::abs(vy) * 0.5; }

    Image frame = background;
    const double gain =
        illum.active ? 1.0 - 0.6 * illum.magnitude * std::sin(kPi * illum.progress) : 1.0;
    const double scale_to_canonical = cfg.object.base_size / size;
    const double edge = std::max(2.0, half * 0.5);

    const int px0 = std::max(0, static_cast<int>(std::floor(cx - half - 2)));
    const int px1 = std::min(cfg.frame_size, static_cast<int>(std::ceil(cx + half + 2)));
    const int py0 = std::max(0, static_cast<int>(std::floor(cy - half - 2)));
    const int py1 = std::min(cfg.frame_size, static_cast<int>(std::ceil(cy + half + 2)));
    for (int y = py0; y < py1; ++y) {
      for (int x = px0; x < px1; ++x) {
        const double u = (x + 0.5) - cx;
        const double v = (y + 0.5) - cy;
        const double s = detail::superellipse_value(u, v, half, half, n_exp);
        const double alpha = std::clamp((1.0 - s) * edge, 0.0, 1.0);
        if (alpha <= 0.0) continue;
        const double t =
            tex.at(u * scale_to_canonical, v * scale_to_canonical, drift_phase) * gain;
        frame.at(y, x) =
            static_cast<float>((1.0 - alpha) * frame.at(y, x) + alpha * t);
      }
    }

    Box box{cx - half, cy - half, size, size};

    if (blur.active) {
      const int radius = static_cast<int>(std::lround(3.0 * blur.magnitude));
      detail::box_blur_region(frame, px0 - radius, py0 - radius, px1 + radius, py1 + radius,
                              radius);
    }

    if (occl.active && occl.magnitude > 0.0) {
      // A textured occluder sweeps across the object over the event window:
      // clear of the left edge at progress 0, dead center at 0.5, clear of the
      // right edge at 1, riding relative to the box so the crossing geometry
      // does not depend on the wander path. Its surface is an independent
      // static pattern, so it reads as a second object passing in front —
      // templates that blend it in during the crossing start matching the
      // occluder instead of the target.
      const detail::ObjectTexture occ_tex(fold_seed(cfg.object.pattern_seed, 977));
      const double ow = occl.magnitude * box.w;
      const double travel = (box.w + ow) / 2.0 + 2.0;
      const double ocx = box.cx() + (2.0 * occl.progress - 1.0) * travel;
      const int ox0 = std::max(0, static_cast<int>(std::floor(ocx - ow / 2.0)));
      const int ox1 = std::min(cfg.frame_size, static_cast<int>(std::ceil(ocx + ow / 2.0)));
      const int oy0 = std::max(0, static_cast<int>(std::floor(box.y - 1.0)));
      const int oy1 = std::min(cfg.frame_size, static_cast<int>(std::ceil(box.y + box.h + 1.0)));
      for (int y = oy0; y < oy1; ++y)
        for (int x = ox0; x < ox1; ++x)
          frame.at(y, x) = static_cast<float>(
              occ_tex.at((x + 0.5) - ocx, (y + 0.5) - box.cy(), 0.0));
    }

    if (cfg.noise_sigma > 0.0) {
      SplitMix64 noise_rng(fold_seed(cfg.rng_seed, 211, static_cast<std::uint64_t>(f)));
      for (float& p : frame.px)
        p = static_cast<float>(p + cfg.noise_sigma * noise_rng.normal());
    }

    if (cfg.glitch_prob > 0.0 && cfg.glitch_sigma > 0.0) {
      // Separate stream, so scenes with glitches disabled render identically
      // to configs that predate the field.
      SplitMix64 glitch_rng(fold_seed(cfg.rng_seed, 499, static_cast<std::uint64_t>(f)));
      if (glitch_rng.uniform() < cfg.glitch_prob)
        for (float& p : frame.px)
          p = static_cast<float>(p + cfg.glitch_sigma * glitch_rng.normal());
    }

    for (float& p : frame.px) p = std::clamp(p, 0.0f, 1.0f);

    seq.frames.push_back(std::move(frame));
    seq.gt_boxes.push_back(box);
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Cropping
// ---------------------------------------------------------------------------

// Square crop of side context_factor * max(w,h) centered on the box center,
// bilinearly resampled to out_size x out_size; samples falling outside the
// frame use the frame's mean intensity.
inline Image crop_patch(const Image& frame, const Box& box, double context_factor, int out_size) {
  if (box_degenerate(box)) throw validation_error("crop_patch: degenerate box");
  if (context_factor < 1.0) throw validation_error("crop_patch: context_factor must be >= 1");
  if (out_size < 1) throw validation_error("crop_patch: out_size must be >= 1");
  const double side = context_factor * std::max(box.w, box.h);
  const double x0 = box.cx() - side / 2.0;
  const double y0 = box.cy() - side / 2.0;
  const double step = side / out_size;
  const float pad = static_cast<float>(mean_intensity(frame));

  Image out = make_image(out_size, out_size);
  auto tap = [&](int px, int py) -> float {
    if (px < 0 || py < 0 || px >= frame.w || py >= frame.h) return pad;
    return frame.at(py, px);
  };
  for (int i = 0; i < out_size; ++i) {
    const double sy = y0 + (i + 0.5) * step - 0.5;
    const int iy = static_cast<int>(std::floor(sy));
    const double fy = sy - iy;
    for (int j = 0; j < out_size; ++j) {
      const double sx = x0 + (j + 0.5) * step - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      const double fx = sx - ix;
      const double v = (1 - fy) * ((1 - fx) * tap(ix, iy) + fx * tap(ix + 1, iy)) +
                       fy * ((1 - fx) * tap(ix, iy + 1) + fx * tap(ix + 1, iy + 1));
      out.at(i, j) = static_cast<float>(v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature extractor
// ---------------------------------------------------------------------------

struct FeatureExtractorConfig {
  int out_spatial = 6;
  int out_channels = 32;
  std::uint64_t filter_bank_seed = 7;
};

// Fixed post-pooling gain. Rectified plane-wave responses mean-pooled over
// feature cells land near 0.02, which leaves the template trainer with a
// badly scaled problem (its bias terms dwarf every feature direction). A
// factor of 6 moves features toward unit scale while the worst-case response
// (L1 norm of an orthonormal zero-mean 5x5 filter, at most 5) stays within
// the documented |v| <= 32 output bound.
inline constexpr float kFeatureGain = 6.0f;

inline void validate(const FeatureExtractorConfig& cfg) {
  if (cfg.out_spatial < 1) throw validation_error("feature.out_spatial: must be >= 1");
  if (cfg.out_channels < 4) throw validation_error("feature.out_channels: must be >= 4");
}

// 5x5 filters stored tap-major (taps[tap][channel]) so the per-pixel filter
// loop vectorizes over channels.
struct FilterBank {
  int channels = 0;
  std::vector<float> taps;  // 25 * channels

  float tap(int t, int c) const { return taps[static_cast<std::size_t>(t) * channels + c]; }
};

namespace detail {

// Six fixed oriented/contrast filters; the rest of the bank is seeded noise.
// Everything is zero-meaned, then Gram-Schmidt orthonormalized in blocks of
// 24 (the zero-mean 5x5 space has rank 24).
inline FilterBank build_filter_bank(int channels, std::uint64_t seed) {
  std::vector<std::array<double, 25>> f(static_cast<std::size_t>(channels));
  SplitMix64 g(fold_seed(seed, 303));
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        const double di = i - 2.0, dj = j - 2.0;
        double v = 0.0;
        switch (c) {
          case 0: v = dj; break;                        // horizontal gradient
          case 1: v = di; break;                        // vertical gradient
          case 2: v = di * dj; break;                   // saddle
          case 3: v = di * di - dj * dj; break;         // orientation contrast
          case 4: v = -(di * di + dj * dj); break;      // center-surround
          case 5: v = ((i + j) % 2 == 0) ? 1.0 : -1.0;  // checker
          default: v = g.normal(); break;
        }
        f[static_cast<std::size_t>(c)][static_cast<std::size_t>(i * 5 + j)] = v;
      }
    }
  }
  for (int c = 0; c < channels; ++c) {
    auto& w = f[static_cast<std::size_t>(c)];
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= 25.0;
    for (double& v : w) v -= mean;
    const int block_start = (c / 24) * 24;
    for (int p = block_start; p < c; ++p) {
      const auto& q = f[static_cast<std::size_t>(p)];
      double dot = 0.0;
      for (int k = 0; k < 25; ++k) dot += w[static_cast<std::size_t>(k)] * q[static_cast<std::size_t>(k)];
      for (int k = 0; k < 25; ++k) w[static_cast<std::size_t>(k)] -= dot * q[static_cast<std::size_t>(k)];
    }
    double norm2 = 0.0;
    for (double v : w) norm2 += v * v;
    while (norm2 < 1e-12) {  // degenerate draw; replace deterministically
      for (double& v : w) v = g.normal();
      double m2 = 0.0;
      for (double v : w) m2 += v;
      m2 /= 25.0;
      for (double& v : w) v -= m2;
      for (int p = block_start; p < c; ++p) {
        const auto& q = f[static_cast<std::size_t>(p)];
        double dot = 0.0;
        for (int k = 0; k < 25; ++k) dot += w[static_cast<std::size_t>(k)] * q[static_cast<std::size_t>(k)];
        for (int k = 0; k < 25; ++k) w[static_cast<std::size_t>(k)] -= dot * q[static_cast<std::size_t>(k)];
      }
      norm2 = 0.0;
      for (double v : w) norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : w) v *= inv;
  }
  FilterBank bank;
  bank.channels = channels;
  bank.taps.assign(25u * static_cast<std::size_t>(channels), 0.0f);
  for (int t = 0; t < 25; ++t)
    for (int c = 0; c < channels; ++c)
      bank.taps[static_cast<std::size_t>(t) * channels + c] =
          static_cast<float>(f[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)]);
  return bank;
}

}  // namespace detail

inline FilterBank make_filter_bank(const FeatureExtractorConfig& cfg) {
  validate(cfg);
  return detail::build_filter_bank(cfg.out_channels, cfg.filter_bank_seed);
}

// Convolve with the bank (clamp-to-edge), rectify, mean-pool onto the
// out_spatial grid.
inline Tensor extract_features(const Image& patch, const FeatureExtractorConfig& cfg,
                               const FilterBank& bank) {
  if (patch.h != patch.w) throw shape_error("extract_features: patch must be square, got " +
                                            std::to_string(patch.h) + "x" +
                                            std::to_string(patch.w));
  if (bank.channels != cfg.out_channels)
    throw shape_error("extract_features: bank/config channel mismatch");
  const int side = patch.h;
  const int S = cfg.out_spatial;
  const int C = cfg.out_channels;
  if (side < S) throw shape_error("extract_features: patch smaller than output grid");

  std::vector<double> pool(static_cast<std::size_t>(S) * S * C, 0.0);
  std::vector<double> counts(static_cast<std::size_t>(S) * S, 0.0);
  std::vector<float> resp(static_cast<std::size_t>(C));

  for (int y = 0; y < side; ++y) {
    const int cy = y * S / side;
    for (int x = 0; x < side; ++x) {
      const int cx = x * S / side;
      std::fill(resp.begin(), resp.end(), 0.0f);
      for (int t = 0; t < 25; ++t) {
        const int dy = t / 5 - 2, dx = t % 5 - 2;
        const int sy = std::clamp(y + dy, 0, side - 1);
        const int sx = std::clamp(x + dx, 0, side - 1);
        const float px = patch.at(sy, sx);
        const float* taps = bank.taps.data() + static_cast<std::size_t>(t) * C;
        for (int c = 0; c < C; ++c) resp[static_cast<std::size_t>(c)] += px * taps[c];
      }
      double* cell = pool.data() + (static_cast<std::size_t>(cy) * S + cx) * C;
      for (int c = 0; c < C; ++c) cell[c] += std::abs(static_cast<double>(resp[static_cast<std::size_t>(c)]));
      counts[static_cast<std::size_t>(cy) * S + cx] += 1.0;
    }
  }

  Tensor out = make_tensor(S, S, C);
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j) {
      const double inv = 1.0 / counts[static_cast<std::size_t>(i) * S + j];
      for (int c = 0; c < C; ++c)
        out.at(i, j, c) = static_cast<float>(
            pool[(static_cast<std::size_t>(i) * S + j) * C + c] * inv * kFeatureGain);
    }
  return out;
}

inline Tensor extract_features(const Image& patch, const FeatureExtractorConfig& cfg) {
  return extract_features(patch, cfg, make_filter_bank(cfg));
}

// ---------------------------------------------------------------------------
// Scene config JSON + sequence directories
// ---------------------------------------------------------------------------

inline nlohmann::json scene_to_json(const SceneConfig& cfg) {
  nlohmann::json events = nlohmann::json::array();
  for (const AppearanceEvent& e : cfg.events)
    events.push_back({{"kind", event_kind_name(e.kind)},
                      {"start_frame", e.start_frame},
                      {"end_frame", e.end_frame},
                      {"magnitude", e.magnitude}});
  return nlohmann::json{{"name", cfg.name},
                        {"frame_size", cfg.frame_size},
                        {"num_frames", cfg.num_frames},
                        {"object",
                         {{"shape_id", cfg.object.shape_id},
                          {"base_size", cfg.object.base_size},
                          {"pattern_seed", cfg.object.pattern_seed}}},
                        {"motion", {{"max_speed", cfg.motion.max_speed}}},
                        {"appearance_events", events},
                        {"noise_sigma", cfg.noise_sigma},
                        {"glitch_prob", cfg.glitch_prob},
                        {"glitch_sigma", cfg.glitch_sigma},
                        {"rng_seed", cfg.rng_seed}};
}

inline SceneConfig scene_from_json(const nlohmann::json& j) {
  SceneConfig cfg;
  try {
    cfg.name = j.value("name", cfg.name);
    cfg.frame_size = j.value("frame_size", cfg.frame_size);
    cfg.num_frames = j.value("num_frames", cfg.num_frames);
    if (j.contains("object")) {
      const auto& o = j.at("object");
      cfg.object.shape_id = o.value("shape_id", cfg.object.shape_id);
      cfg.object.base_size = o.value("base_size", cfg.object.base_size);
      cfg.object.pattern_seed = o.value("pattern_seed", cfg.object.pattern_seed);
    }
    if (j.contains("motion"))
      cfg.motion.max_speed = j.at("motion").value("max_speed", cfg.motion.max_speed);
    if (j.contains("appearance_events")) {
      for (const auto& je : j.at("appearance_events")) {
        AppearanceEvent e;
        e.kind = event_kind_from_string(je.at("kind").get<std::string>());
        e.start_frame = je.at("start_frame").get<int>();
        e.end_frame = je.at("end_frame").get<int>();
        e.magnitude = je.at("magnitude").get<double>();
        cfg.events.push_back(e);
      }
    }
    cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
    cfg.glitch_prob = j.value("glitch_prob", cfg.glitch_prob);
    cfg.glitch_sigma = j.value("glitch_sigma", cfg.glitch_sigma);
    cfg.rng_seed = j.value("rng_seed", cfg.rng_seed);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("scene config JSON: ") + e.what());
  }
  return cfg;
}

inline std::string frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.pgm", index);
  return buf;
}

// Directory layout: zero-padded PGM frames, groundtruth.csv, and the scene
// config for provenance.
inline void save_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq,
                          const SceneConfig* provenance = nullptr) {
  std::filesystem::create_directories(dir);
  if (seq.frames.size() != seq.gt_boxes.size())
    throw validation_error("save_sequence: frame/box count mismatch");
  for (std::size_t i = 0; i < seq.frames.size(); ++i)
    write_pgm(dir / frame_file_name(static_cast<int>(i)), seq.frames[i]);
  std::string csv = "frame,x,y,w,h\n";
  for (std::size_t i = 0; i < seq.gt_boxes.size(); ++i) {
    const Box& b = seq.gt_boxes[i];
    csv += std::to_string(i) + "," + fmt_g17(b.x) + "," + fmt_g17(b.y) + "," + fmt_g17(b.w) +
           "," + fmt_g17(b.h) + "\n";
  }
  write_text_file(dir / "groundtruth.csv", csv);
  if (provenance != nullptr)
    write_text_file(dir / "scene_config.json", scene_to_json(*provenance).dump(2) + "\n");
}

inline SyntheticSequence load_sequence(const std::filesystem::path& dir) {
  SyntheticSequence seq;
  seq.name = dir.filename().string();
  const std::string text = read_text_file(dir / "groundtruth.csv");
  std::stringstream ss(text);
  std::string line;
  bool header = true;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line != "frame,x,y,w,h")
        throw io_error("load_sequence: unexpected groundtruth.csv header in " + dir.string());
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 5) throw io_error("load_sequence: malformed row in " + dir.string());
    Box b{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])};
    seq.gt_boxes.push_back(b);
  }
  for (std::size_t i = 0; i < seq.gt_boxes.size(); ++i)
    seq.frames.push_back(read_pgm(dir / frame_file_name(static_cast<int>(i))));
  if (seq.frames.empty()) throw io_error("load_sequence: no frames in " + dir.string());
  return seq;
}

}  // namespace uptrack
