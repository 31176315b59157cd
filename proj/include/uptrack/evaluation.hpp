#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "uptrack/errors.hpp"
#include "uptrack/geometry.hpp"
#include "uptrack/io.hpp"
#include "uptrack/tensor.hpp"
#include "uptrack/tracker.hpp"

namespace uptrack {

// ---------------------------------------------------------------------------
// OPE metrics
// ---------------------------------------------------------------------------

struct OpeMetrics {
  double success_auc = 0.0;
  double precision_at_20px = 0.0;
  double normalized_precision_auc = 0.0;
};

// success: AUC of the fraction of frames whose IoU reaches each threshold
// in {0, 0.01, ..., 1}; precision: fraction with center error <= 20 px;
// normalized precision: center error over the GT diagonal, AUC over
// {0, 0.005, ..., 0.5}. Thresholds are met inclusively, so a perfect run
// scores exactly (1, 1, 1). frame_diag normalizes frames whose GT box is
// degenerate.
inline OpeMetrics ope_metrics(const std::vector<Box>& pred, const std::vector<Box>& gt,
                              double frame_diag) {
  if (pred.size() != gt.size())
    throw validation_error("ope_metrics: prediction/ground-truth length mismatch");
  if (pred.empty()) throw validation_error("ope_metrics: empty result");
  const std::size_t n = pred.size();
  std::vector<double> ious(n), errs(n), nerrs(n);
  for (std::size_t i = 0; i < n; ++i) {
    ious[i] = iou(pred[i], gt[i]);
    errs[i] = center_distance(pred[i], gt[i]);
    const double diag = box_degenerate(gt[i]) ? frame_diag : gt[i].diag();
    nerrs[i] = diag > 0.0 ? errs[i] / diag : 1e9;
  }
  OpeMetrics m;
  double auc = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double t = k / 100.0;
    std::size_t hits = 0;
    for (double v : ious)
      if (v >= t) ++hits;
    auc += static_cast<double>(hits) / static_cast<double>(n);
  }
  m.success_auc = auc / 101.0;

  std::size_t close = 0;
  for (double e : errs)
    if (e <= 20.0) ++close;
  m.precision_at_20px = static_cast<double>(close) / static_cast<double>(n);

  double nauc = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double t = 0.005 * k;
    std::size_t hits = 0;
    for (double v : nerrs)
      if (v <= t) ++hits;
    nauc += static_cast<double>(hits) / static_cast<double>(n);
  }
  m.normalized_precision_auc = nauc / 101.0;
  return m;
}

inline OpeMetrics ope_metrics(const TrackResult& result, const std::vector<Box>& gt,
                              double frame_diag) {
  return ope_metrics(result.boxes, gt, frame_diag);
}

// ---------------------------------------------------------------------------
// VOT metrics
// ---------------------------------------------------------------------------

struct VotMetrics {
  double accuracy_A = 0.0;
  double robustness_R = 0.0;  // failures per 100 frames
  double eao_lite = 0.0;
};

// A: mean overlap over counted (non-skip) frames; R: failures per 100
// frames; eao_lite = A / (1 + mean failures per sequence), a documented
// monotone surrogate used for ordering only.
inline VotMetrics vot_metrics(const std::vector<VotResult>& results) {
  if (results.empty()) throw validation_error("vot_metrics: no results");
  double overlap_sum = 0.0;
  std::size_t counted = 0, total_frames = 0, failures = 0;
  for (const VotResult& r : results) {
    total_frames += r.events.size();
    failures += r.failure_frames.size();
    for (std::size_t i = 0; i < r.events.size(); ++i) {
      if (r.events[i] == FrameEvent::skip) continue;
      overlap_sum += r.overlaps[i];
      ++counted;
    }
  }
  VotMetrics m;
  m.accuracy_A = counted > 0 ? overlap_sum / static_cast<double>(counted) : 0.0;
  m.robustness_R = total_frames > 0
                       ? 100.0 * static_cast<double>(failures) / static_cast<double>(total_frames)
                       : 0.0;
  const double failures_per_seq =
      static_cast<double>(failures) / static_cast<double>(results.size());
  m.eao_lite = m.accuracy_A / (1.0 + failures_per_seq);
  return m;
}

// ---------------------------------------------------------------------------
// Template diagnostics
// ---------------------------------------------------------------------------

struct ChangeRateSeries {
  std::vector<double> deltas;  // delta_i for i in [1, N-1]
  std::string source_tag;
};

inline ChangeRateSeries change_rate(const std::vector<Tensor>& templates,
                                    std::string source_tag = "") {
  if (templates.size() < 2) throw validation_error("change_rate: need at least 2 templates");
  ChangeRateSeries s;
  s.source_tag = std::move(source_tag);
  s.deltas.reserve(templates.size() - 1);
  for (std::size_t i = 1; i < templates.size(); ++i)
    s.deltas.push_back(mean_abs_diff(templates[i], templates[i - 1]));
  return s;
}

struct ChannelDynamics {
  std::vector<double> delta_per_channel;
  std::vector<int> ranking;  // channel indices, most dynamic first
};

// Per-channel temporal mean absolute difference, averaged over consecutive
// frame pairs and spatial area; ranking is descending, ties to the lower
// channel index.
inline ChannelDynamics channel_dynamics(const std::vector<Tensor>& gt_templates) {
  if (gt_templates.size() < 2)
    throw validation_error("channel_dynamics: need at least 2 templates");
  const Tensor& first = gt_templates[0];
  std::vector<double> acc(static_cast<std::size_t>(first.c), 0.0);
  for (std::size_t i = 1; i < gt_templates.size(); ++i) {
    const Tensor& a = gt_templates[i];
    const Tensor& b = gt_templates[i - 1];
    require_same_shape(a, first, "channel_dynamics");
    for (int y = 0; y < a.h; ++y)
      for (int x = 0; x < a.w; ++x)
        for (int c = 0; c < a.c; ++c)
          acc[static_cast<std::size_t>(c)] +=
              std::abs(static_cast<double>(a.at(y, x, c)) - b.at(y, x, c));
  }
  const double norm = static_cast<double>(gt_templates.size() - 1) * first.h * first.w;
  ChannelDynamics cd;
  cd.delta_per_channel.resize(acc.size());
  for (std::size_t c = 0; c < acc.size(); ++c) cd.delta_per_channel[c] = acc[c] / norm;
  cd.ranking.resize(acc.size());
  for (std::size_t c = 0; c < acc.size(); ++c) cd.ranking[c] = static_cast<int>(c);
  std::sort(cd.ranking.begin(), cd.ranking.end(), [&](int a, int b) {
    const double da = cd.delta_per_channel[static_cast<std::size_t>(a)];
    const double db = cd.delta_per_channel[static_cast<std::size_t>(b)];
    return da > db || (da == db && a < b);
  });
  return cd;
}

inline std::vector<int> top_channels(const ChannelDynamics& cd, int k = 4) {
  const std::size_t n = std::min<std::size_t>(cd.ranking.size(), static_cast<std::size_t>(k));
  return std::vector<int>(cd.ranking.begin(), cd.ranking.begin() + static_cast<std::ptrdiff_t>(n));
}

// ---------------------------------------------------------------------------
// Gamma sweep
// ---------------------------------------------------------------------------

inline std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(i / 100.0);
  return g;
}

struct GammaSweepResult {
  double best_gamma = 0.0;
  std::vector<std::pair<double, double>> curve;  // (gamma, eao_lite), sorted by gamma
};

// Runs the reset protocol with linear(gamma) for every grid point. The
// returned curve is sorted by gamma so it does not depend on grid order;
// ties for the best score go to the smaller gamma.
inline GammaSweepResult gamma_sweep(const std::vector<SyntheticSequence>& sequences,
                                    const TrackerConfig& cfg, std::vector<double> grid,
                                    double fail_threshold = 0.0) {
  if (grid.empty()) throw validation_error("gamma_sweep: empty grid");
  for (double g : grid)
    if (!(g >= 0.0 && g <= 1.0)) throw validation_error("gamma_sweep: gamma out of [0,1]");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  GammaSweepResult result;
  bool have_best = false;
  double best_score = 0.0;
  for (double g : grid) {
    std::vector<VotResult> runs;
    runs.reserve(sequences.size());
    for (const SyntheticSequence& seq : sequences)
      runs.push_back(vot_run(seq, LinearUpdateConfig{g}, cfg, fail_threshold));
    const VotMetrics m = vot_metrics(runs);
    result.curve.emplace_back(g, m.eao_lite);
    if (!have_best || m.eao_lite > best_score) {
      have_best = true;
      best_score = m.eao_lite;
      result.best_gamma = g;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Next-frame template error
// ---------------------------------------------------------------------------

// Mean L2 distance between the accumulated template after frame i and the
// ground-truth template of frame i+1, pooled over i in [1, N-2] and all
// sequences — the training objective turned into an evaluation metric.
// The series_fn variant lets tests inject oracle template series.
inline double next_frame_template_error_with(
    const std::vector<SyntheticSequence>& sequences, const TrackerConfig& cfg,
    const std::function<std::vector<Tensor>(const SyntheticSequence&)>& series_fn) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const SyntheticSequence& seq : sequences) {
    const std::vector<Tensor> accum = series_fn(seq);
    const std::vector<Tensor> gt = gt_templates(seq, cfg);
    if (accum.size() != gt.size())
      throw validation_error("next_frame_template_error: series length mismatch");
    if (gt.size() < 3) continue;
    for (std::size_t i = 1; i + 1 < gt.size(); ++i) {
      sum += l2_distance(accum[i], gt[i + 1]);
      ++count;
    }
  }
  if (count == 0) throw validation_error("next_frame_template_error: no scorable frames");
  return sum / static_cast<double>(count);
}

inline double next_frame_template_error(const UpdateStrategy& strategy,
                                        const std::vector<SyntheticSequence>& sequences,
                                        const TrackerConfig& cfg) {
  return next_frame_template_error_with(
      sequences, cfg, [&](const SyntheticSequence& seq) {
        return track_sequence(seq, strategy, cfg, /*keep_templates=*/true).accum_history;
      });
}

// ---------------------------------------------------------------------------
// Small statistics helpers
// ---------------------------------------------------------------------------

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw validation_error("pearson: need two equal-length series of size >= 2");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;  // constant series carry no correlation
  return sxy / std::sqrt(sxx * syy);
}

// Elementwise mean of equally long series (frame-aligned averaging across
// sequences).
inline std::vector<double> average_series(const std::vector<std::vector<double>>& series) {
  if (series.empty()) throw validation_error("average_series: no input");
  const std::size_t n = series[0].size();
  for (const auto& s : series)
    if (s.size() != n) throw validation_error("average_series: length mismatch");
  std::vector<double> out(n, 0.0);
  for (const auto& s : series)
    for (std::size_t i = 0; i < n; ++i) out[i] += s[i];
  for (double& v : out) v /= static_cast<double>(series.size());
  return out;
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw validation_error("mean_of: empty series");
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct StrategyReport {
  std::string strategy;
  double A = 0.0;
  double R = 0.0;
  double eao_lite = 0.0;
  double success_auc = 0.0;
  double precision = 0.0;
  double norm_precision = 0.0;
  double next_frame_error = 0.0;
};

inline nlohmann::json report_to_json(const std::vector<StrategyReport>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const StrategyReport& r : rows)
    arr.push_back({{"strategy", r.strategy},
                   {"A", r.A},
                   {"R", r.R},
                   {"eao_lite", r.eao_lite},
                   {"success_auc", r.success_auc},
                   {"precision", r.precision},
                   {"norm_precision", r.norm_precision},
                   {"next_frame_error", r.next_frame_error}});
  return arr;
}

inline std::string report_to_csv(const std::vector<StrategyReport>& rows) {
  std::string csv =
      "strategy,A,R,eao_lite,success_auc,precision,norm_precision,next_frame_error\n";
  for (const StrategyReport& r : rows)
    csv += r.strategy + "," + fmt_g17(r.A) + "," + fmt_g17(r.R) + "," + fmt_g17(r.eao_lite) +
           "," + fmt_g17(r.success_auc) + "," + fmt_g17(r.precision) + "," +
           fmt_g17(r.norm_precision) + "," + fmt_g17(r.next_frame_error) + "\n";
  return csv;
}

}  // namespace uptrack
