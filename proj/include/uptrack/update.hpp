#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "uptrack/errors.hpp"
#include "uptrack/io.hpp"
#include "uptrack/tensor.hpp"
#include "uptrack/update_net.hpp"

namespace uptrack {

// ---------------------------------------------------------------------------
// Strategy configurations
// ---------------------------------------------------------------------------

struct LinearUpdateConfig {
  double gamma = 0.0102;
};

inline void validate(const LinearUpdateConfig& cfg) {
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0))
    throw validation_error("linear update: gamma must be in [0,1]");
}

struct FusionWeights {
  double alpha_init = 0.0;
  double alpha_accu = 0.9898;
  double alpha_curr = 0.0102;
};

inline void validate(const FusionWeights& w) {
  if (!std::isfinite(w.alpha_init) || !std::isfinite(w.alpha_accu) ||
      !std::isfinite(w.alpha_curr))
    throw validation_error("fusion weights: must be finite");
}

// Which template is added back onto the network's residual output.
enum class SkipSource { none, current, accumulated, initial };

inline const char* skip_source_name(SkipSource s) {
  switch (s) {
    case SkipSource::none: return "none";
    case SkipSource::current: return "current";
    case SkipSource::accumulated: return "accumulated";
    case SkipSource::initial: return "initial";
  }
  return "?";
}

inline SkipSource skip_source_from_string(const std::string& s) {
  if (s == "none") return SkipSource::none;
  if (s == "current") return SkipSource::current;
  if (s == "accumulated") return SkipSource::accumulated;
  if (s == "initial") return SkipSource::initial;
  throw validation_error("skip source: unknown \"" + s + "\"");
}

struct UpdateNetStrategy {
  UpdateNetParams params;
  SkipSource skip = SkipSource::initial;
};

struct NoUpdate {};

using UpdateStrategy = std::variant<NoUpdate, LinearUpdateConfig, FusionWeights,
                                    UpdateNetStrategy>;

// ---------------------------------------------------------------------------
// Update rules
// ---------------------------------------------------------------------------

inline Tensor linear_update(const Tensor& prev_accum, const Tensor& current,
                            const LinearUpdateConfig& cfg) {
  validate(cfg);
  return combine(static_cast<float>(1.0 - cfg.gamma), prev_accum,
                 static_cast<float>(cfg.gamma), current);
}

// alpha_init*t0 + alpha_accu*prev + alpha_curr*curr, accumulated strictly
// left to right so that weights (0, 1-g, g) reproduce linear_update(g) bit
// for bit.
inline Tensor weighted_fusion(const Tensor& t0, const Tensor& prev_accum, const Tensor& current,
                              const FusionWeights& w) {
  validate(w);
  require_same_shape(t0, prev_accum, "weighted_fusion");
  require_same_shape(t0, current, "weighted_fusion");
  Tensor out = combine(static_cast<float>(w.alpha_init), t0,
                       static_cast<float>(w.alpha_accu), prev_accum);
  const float c = static_cast<float>(w.alpha_curr);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = out.data[i] + c * current.data[i];
  return out;
}

// skip + net(concat(t0, prev, curr)); zero parameters make this the skip
// tensor itself.
inline Tensor updatenet_update(const UpdateNetParams& params, const Tensor& t0,
                               const Tensor& prev_accum, const Tensor& current,
                               SkipSource skip = SkipSource::initial) {
  require_same_shape(t0, prev_accum, "updatenet_update");
  require_same_shape(t0, current, "updatenet_update");
  if (params.out_channels != t0.c || params.in_channels != 3 * t0.c)
    throw shape_error("updatenet_update: params expect C=" +
                      std::to_string(params.out_channels) + ", tensors have C=" +
                      std::to_string(t0.c));
  const Tensor x = concat_channels(t0, prev_accum, current);
  Tensor out = forward(params, x);
  const Tensor* residual = nullptr;
  switch (skip) {
    case SkipSource::none: break;
    case SkipSource::current: residual = &current; break;
    case SkipSource::accumulated: residual = &prev_accum; break;
    case SkipSource::initial: residual = &t0; break;
  }
  if (residual != nullptr)
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = residual->data[i] + out.data[i];
  return out;
}

inline Tensor apply(const UpdateStrategy& strategy, const Tensor& t0, const Tensor& prev_accum,
                    const Tensor& current) {
  return std::visit(
      [&](const auto& s) -> Tensor {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, NoUpdate>) {
          return t0;
        } else if constexpr (std::is_same_v<S, LinearUpdateConfig>) {
          return linear_update(prev_accum, current, s);
        } else if constexpr (std::is_same_v<S, FusionWeights>) {
          return weighted_fusion(t0, prev_accum, current, s);
        } else {
          return updatenet_update(s.params, t0, prev_accum, current, s.skip);
        }
      },
      strategy);
}

// ---------------------------------------------------------------------------
// CLI strategy grammar
// ---------------------------------------------------------------------------

inline constexpr const char* kStrategyGrammar =
    "\"none\" | \"linear:GAMMA\" | \"fusion:A,B,C\" | \"updatenet:PATH[:SKIP]\" "
    "(SKIP one of none|current|accumulated|initial)";

namespace detail {

inline double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw usage_error("strategy spec: cannot parse " + what + " \"" + s + "\"; expected " +
                      kStrategyGrammar);
  }
  if (used != s.size() || !std::isfinite(v))
    throw usage_error("strategy spec: cannot parse " + what + " \"" + s + "\"; expected " +
                      kStrategyGrammar);
  return v;
}

}  // namespace detail

inline UpdateStrategy parse_strategy_spec(const std::string& spec) {
  if (spec == "none") return NoUpdate{};
  if (spec.rfind("linear:", 0) == 0) {
    const double g = detail::parse_number(spec.substr(7), "gamma");
    if (g < 0.0 || g > 1.0)
      throw usage_error("strategy spec: gamma " + spec.substr(7) +
                        " out of range [0,1]; expected " + kStrategyGrammar);
    return LinearUpdateConfig{g};
  }
  if (spec.rfind("fusion:", 0) == 0) {
    const auto cells = split_csv_line(spec.substr(7));
    if (cells.size() != 3)
      throw usage_error("strategy spec: fusion needs three comma-separated weights; expected " +
                        std::string(kStrategyGrammar));
    FusionWeights w;
    w.alpha_init = detail::parse_number(cells[0], "fusion weight");
    w.alpha_accu = detail::parse_number(cells[1], "fusion weight");
    w.alpha_curr = detail::parse_number(cells[2], "fusion weight");
    return w;
  }
  if (spec.rfind("updatenet:", 0) == 0) {
    std::string rest = spec.substr(10);
    if (rest.empty())
      throw usage_error("strategy spec: updatenet needs a parameter file path; expected " +
                        std::string(kStrategyGrammar));
    UpdateNetStrategy s;
    const std::size_t colon = rest.rfind(':');
    if (colon != std::string::npos) {
      const std::string suffix = rest.substr(colon + 1);
      if (suffix == "none" || suffix == "current" || suffix == "accumulated" ||
          suffix == "initial") {
        s.skip = skip_source_from_string(suffix);
        rest = rest.substr(0, colon);
      }
    }
    s.params = load_params(rest);
    return s;
  }
  throw usage_error("strategy spec: unrecognized \"" + spec + "\"; expected " + kStrategyGrammar);
}

inline std::string strategy_name(const UpdateStrategy& strategy) {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, NoUpdate>) {
          return "none";
        } else if constexpr (std::is_same_v<S, LinearUpdateConfig>) {
          return "linear:" + fmt_g9(s.gamma);
        } else if constexpr (std::is_same_v<S, FusionWeights>) {
          return "fusion:" + fmt_g9(s.alpha_init) + "," + fmt_g9(s.alpha_accu) + "," +
                 fmt_g9(s.alpha_curr);
        } else {
          return std::string("updatenet:") + skip_source_name(s.skip);
        }
      },
      strategy);
}

}  // namespace uptrack
