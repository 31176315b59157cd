#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "uptrack/errors.hpp"
#include "uptrack/geometry.hpp"
#include "uptrack/image.hpp"
#include "uptrack/io.hpp"
#include "uptrack/synthetic.hpp"
#include "uptrack/tensor.hpp"
#include "uptrack/update.hpp"

namespace uptrack {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TrackerConfig {
  FeatureExtractorConfig feature;
  double exemplar_context = 2.0;
  double search_context = 4.0;
  int exemplar_px = 48;
  int search_px = 96;
  double cosine_window_weight = 0.3;
  int scale_steps = 1;
};

inline int feature_cell_px(const TrackerConfig& cfg) {
  return cfg.exemplar_px / cfg.feature.out_spatial;
}

inline int search_spatial(const TrackerConfig& cfg) {
  return cfg.search_px / feature_cell_px(cfg);
}

inline void validate(const TrackerConfig& cfg) {
  validate(cfg.feature);
  if (cfg.exemplar_context < 1.0)
    throw validation_error("tracker.exemplar_context: must be >= 1");
  if (!(cfg.search_context > cfg.exemplar_context))
    throw validation_error("tracker.search_context: must exceed exemplar_context");
  if (cfg.cosine_window_weight < 0.0 || cfg.cosine_window_weight > 1.0)
    throw validation_error("tracker.cosine_window_weight: must be in [0,1]");
  if (cfg.scale_steps != 1)
    throw validation_error("tracker.scale_steps: only single-scale (1) is supported");
  if (cfg.exemplar_px < cfg.feature.out_spatial ||
      cfg.exemplar_px % cfg.feature.out_spatial != 0)
    throw validation_error("tracker.exemplar_px: must be a multiple of feature.out_spatial");
  const int cell = feature_cell_px(cfg);
  if (cfg.search_px <= cfg.exemplar_px || cfg.search_px % cell != 0)
    throw validation_error(
        "tracker.search_px: must exceed exemplar_px and be a multiple of the feature cell");
  if ((search_spatial(cfg) - cfg.feature.out_spatial) % 2 != 0)
    throw validation_error(
        "tracker.search_px: response map must have a center cell "
        "(search and exemplar feature sides must share parity)");
}

// Validated config plus the filter bank, built once per run.
struct TrackerRuntime {
  TrackerConfig cfg;
  FilterBank bank;
  FeatureExtractorConfig exemplar_feat;
  FeatureExtractorConfig search_feat;
};

inline TrackerRuntime make_runtime(const TrackerConfig& cfg) {
  validate(cfg);
  TrackerRuntime rt;
  rt.cfg = cfg;
  rt.bank = make_filter_bank(cfg.feature);
  rt.exemplar_feat = cfg.feature;
  rt.search_feat = cfg.feature;
  rt.search_feat.out_spatial = search_spatial(cfg);
  return rt;
}

// ---------------------------------------------------------------------------
// State and results
// ---------------------------------------------------------------------------

struct TrackerState {
  Tensor t0_gt;
  Tensor accum;
  Box last_box;
  int frame_index = 0;
};

enum class FrameEvent { ok, fail, skip, reinit };

inline const char* frame_event_name(FrameEvent e) {
  switch (e) {
    case FrameEvent::ok: return "ok";
    case FrameEvent::fail: return "fail";
    case FrameEvent::skip: return "skip";
    case FrameEvent::reinit: return "reinit";
  }
  return "?";
}

inline FrameEvent frame_event_from_string(const std::string& s) {
  if (s == "ok") return FrameEvent::ok;
  if (s == "fail") return FrameEvent::fail;
  if (s == "skip") return FrameEvent::skip;
  if (s == "reinit") return FrameEvent::reinit;
  throw io_error("trajectory: unknown event \"" + s + "\"");
}

struct TrackResult {
  std::vector<Box> boxes;
  std::vector<double> overlaps;
  std::vector<double> deltas;    // mean abs change of accum per frame
  std::vector<double> frame_ms;  // wall time, never serialized
  std::vector<Tensor> accum_history;  // filled only when requested
};

struct VotResult {
  std::vector<Box> boxes;
  std::vector<double> overlaps;  // 0 on skip frames; excluded via events
  std::vector<FrameEvent> events;
  std::vector<int> failure_frames;
  std::vector<int> reinit_frames;
};

// ---------------------------------------------------------------------------
// Core steps
// ---------------------------------------------------------------------------

inline Tensor exemplar_features(const Image& frame, const Box& box, const TrackerRuntime& rt) {
  const Image patch = crop_patch(frame, box, rt.cfg.exemplar_context, rt.cfg.exemplar_px);
  return extract_features(patch, rt.exemplar_feat, rt.bank);
}

inline TrackerState init_state(const SyntheticSequence& seq, const TrackerRuntime& rt) {
  if (seq.frames.empty() || seq.gt_boxes.empty())
    throw validation_error("init_state: sequence needs at least one annotated frame");
  TrackerState st;
  st.t0_gt = exemplar_features(seq.frames[0], seq.gt_boxes[0], rt);
  st.accum = st.t0_gt;
  st.last_box = seq.gt_boxes[0];
  st.frame_index = 0;
  return st;
}

inline TrackerState init_state(const SyntheticSequence& seq, const TrackerConfig& cfg) {
  return init_state(seq, make_runtime(cfg));
}

struct LocateResult {
  double dx = 0.0;  // offset from search center, in search-image pixels
  double dy = 0.0;
  ResponseMap response;
  Peak peak;
};

inline double hann_weight(int i, int n) {
  if (n <= 1) return 1.0;
  return 0.5 * (1.0 - std::cos(kTwoPi * i / (n - 1)));
}

// Correlate, blend with the cosine window, convert the peak cell to a pixel
// offset from the search center at the feature-to-pixel stride.
inline LocateResult locate(const Tensor& accum, const Tensor& search_feats,
                           const TrackerConfig& cfg) {
  LocateResult lr;
  lr.response = cross_correlate(accum, search_feats);
  const double w = cfg.cosine_window_weight;
  for (int y = 0; y < lr.response.h; ++y)
    for (int x = 0; x < lr.response.w; ++x) {
      const double win = hann_weight(y, lr.response.h) * hann_weight(x, lr.response.w);
      lr.response.at(y, x) =
          static_cast<float>((1.0 - w) * lr.response.at(y, x) + w * win * lr.response.at(y, x));
    }
  lr.peak = argmax_response(lr.response);
  const int stride = cfg.search_px / search_feats.w;
  const int cy = (lr.response.h - 1) / 2;
  const int cx = (lr.response.w - 1) / 2;
  lr.dx = static_cast<double>(lr.peak.x - cx) * stride;
  lr.dy = static_cast<double>(lr.peak.y - cy) * stride;
  return lr;
}

// One tracking step: search around last_box, localize with accum, extract
// the exemplar at the predicted box, then update accum. Ground truth is
// never an input here; callers use it only for logging and resets.
// current_out, when given, receives the exemplar features of this frame
// (the training collector records them).
inline Box step(TrackerState& st, const Image& frame, const UpdateStrategy& strategy,
                const TrackerRuntime& rt, Tensor* current_out = nullptr) {
  const Image search_patch =
      crop_patch(frame, st.last_box, rt.cfg.search_context, rt.cfg.search_px);
  const Tensor search_feats = extract_features(search_patch, rt.search_feat, rt.bank);
  const LocateResult lr = locate(st.accum, search_feats, rt.cfg);
  const double side_src = rt.cfg.search_context * std::max(st.last_box.w, st.last_box.h);
  const double to_source = side_src / rt.cfg.search_px;
  Box predicted = st.last_box;
  predicted.x += lr.dx * to_source;
  predicted.y += lr.dy * to_source;

  const Tensor current = exemplar_features(frame, predicted, rt);
  st.accum = apply(strategy, st.t0_gt, st.accum, current);
  st.last_box = predicted;
  st.frame_index += 1;
  if (current_out != nullptr) *current_out = current;
  return predicted;
}

inline Box step(TrackerState& st, const Image& frame, const UpdateStrategy& strategy,
                const TrackerConfig& cfg) {
  return step(st, frame, strategy, make_runtime(cfg));
}

// ---------------------------------------------------------------------------
// Protocol drivers
// ---------------------------------------------------------------------------

inline TrackResult track_sequence(const SyntheticSequence& seq, const UpdateStrategy& strategy,
                                  const TrackerConfig& cfg, bool keep_templates = false) {
  const TrackerRuntime rt = make_runtime(cfg);
  TrackerState st = init_state(seq, rt);
  TrackResult res;
  const std::size_t n = seq.frames.size();
  res.boxes.reserve(n);
  res.overlaps.reserve(n);
  res.deltas.reserve(n);
  res.frame_ms.reserve(n);
  res.boxes.push_back(st.last_box);
  res.overlaps.push_back(iou(st.last_box, seq.gt_boxes[0]));
  res.deltas.push_back(0.0);
  res.frame_ms.push_back(0.0);
  if (keep_templates) res.accum_history.push_back(st.accum);
  for (std::size_t f = 1; f < n; ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor before = st.accum;
    const Box pred = step(st, seq.frames[f], strategy, rt);
    const auto t1 = std::chrono::steady_clock::now();
    res.boxes.push_back(pred);
    res.overlaps.push_back(iou(pred, seq.gt_boxes[f]));
    res.deltas.push_back(mean_abs_diff(st.accum, before));
    res.frame_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    if (keep_templates) res.accum_history.push_back(st.accum);
  }
  return res;
}

// Reset protocol: a failure at frame f (overlap <= fail_threshold) skips
// frames f+1..f+4 and re-initializes from ground truth at f+5; if the
// sequence ends first, the tail is skipped and no reinit happens.
inline VotResult vot_run(const SyntheticSequence& seq, const UpdateStrategy& strategy,
                         const TrackerConfig& cfg, double fail_threshold = 0.0) {
  if (fail_threshold < 0.0 || fail_threshold >= 1.0)
    throw validation_error("vot_run: fail_threshold must be in [0,1)");
  const TrackerRuntime rt = make_runtime(cfg);
  const int n = static_cast<int>(seq.frames.size());
  VotResult res;
  res.boxes.reserve(static_cast<std::size_t>(n));
  res.overlaps.reserve(static_cast<std::size_t>(n));
  res.events.reserve(static_cast<std::size_t>(n));

  TrackerState st = init_state(seq, rt);
  res.boxes.push_back(st.last_box);
  res.overlaps.push_back(iou(st.last_box, seq.gt_boxes[0]));
  res.events.push_back(FrameEvent::reinit);

  int reinit_at = -1;  // frame index of the pending re-initialization
  for (int f = 1; f < n; ++f) {
    if (reinit_at >= 0 && f < reinit_at) {
      res.boxes.push_back(Box{});
      res.overlaps.push_back(0.0);
      res.events.push_back(FrameEvent::skip);
      continue;
    }
    if (reinit_at == f) {
      st.t0_gt = exemplar_features(seq.frames[static_cast<std::size_t>(f)],
                                   seq.gt_boxes[static_cast<std::size_t>(f)], rt);
      st.accum = st.t0_gt;
      st.last_box = seq.gt_boxes[static_cast<std::size_t>(f)];
      st.frame_index = f;
      res.boxes.push_back(st.last_box);
      res.overlaps.push_back(iou(st.last_box, seq.gt_boxes[static_cast<std::size_t>(f)]));
      res.events.push_back(FrameEvent::reinit);
      res.reinit_frames.push_back(f);
      reinit_at = -1;
      continue;
    }
    const Box pred = step(st, seq.frames[static_cast<std::size_t>(f)], strategy, rt);
    const double ov = iou(pred, seq.gt_boxes[static_cast<std::size_t>(f)]);
    res.boxes.push_back(pred);
    res.overlaps.push_back(ov);
    if (ov <= fail_threshold) {
      res.events.push_back(FrameEvent::fail);
      res.failure_frames.push_back(f);
      if (f + 5 <= n - 1) reinit_at = f + 5;
      else reinit_at = n;  // skip the remaining frames, no reinit
    } else {
      res.events.push_back(FrameEvent::ok);
    }
  }
  return res;
}

// Accumulate templates along the ground-truth trajectory (no localization):
// the reference series for change-rate and channel-dynamics analyses.
inline std::vector<Tensor> gt_driven_templates(const SyntheticSequence& seq,
                                               const UpdateStrategy& strategy,
                                               const TrackerConfig& cfg) {
  const TrackerRuntime rt = make_runtime(cfg);
  TrackerState st = init_state(seq, rt);
  std::vector<Tensor> out;
  out.reserve(seq.frames.size());
  out.push_back(st.accum);
  for (std::size_t f = 1; f < seq.frames.size(); ++f) {
    const Tensor current = exemplar_features(seq.frames[f], seq.gt_boxes[f], rt);
    st.accum = apply(strategy, st.t0_gt, st.accum, current);
    out.push_back(st.accum);
  }
  return out;
}

// Per-frame exemplar features at the ground-truth boxes themselves.
inline std::vector<Tensor> gt_templates(const SyntheticSequence& seq, const TrackerConfig& cfg) {
  const TrackerRuntime rt = make_runtime(cfg);
  std::vector<Tensor> out;
  out.reserve(seq.frames.size());
  for (std::size_t f = 0; f < seq.frames.size(); ++f)
    out.push_back(exemplar_features(seq.frames[f], seq.gt_boxes[f], rt));
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory files
// ---------------------------------------------------------------------------

struct TrajectoryRow {
  int frame = 0;
  Box box;
  double overlap = 0.0;
  FrameEvent event = FrameEvent::ok;
};

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const std::vector<TrajectoryRow>& rows) {
  std::string csv = "frame,x,y,w,h,overlap,event\n";
  for (const TrajectoryRow& r : rows)
    csv += std::to_string(r.frame) + "," + fmt_g17(r.box.x) + "," + fmt_g17(r.box.y) + "," +
           fmt_g17(r.box.w) + "," + fmt_g17(r.box.h) + "," + fmt_g17(r.overlap) + "," +
           frame_event_name(r.event) + "\n";
  write_text_file(path, csv);
}

inline std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<TrajectoryRow> rows;
  std::stringstream ss(text);
  std::string line;
  bool header = true;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line != "frame,x,y,w,h,overlap,event")
        throw io_error("trajectory: unexpected header in " + path.string());
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 7) throw io_error("trajectory: malformed row in " + path.string());
    TrajectoryRow r;
    r.frame = std::stoi(cells[0]);
    r.box = Box{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                std::stod(cells[4])};
    r.overlap = std::stod(cells[5]);
    r.event = frame_event_from_string(cells[6]);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<TrajectoryRow> ope_trajectory(const TrackResult& res) {
  std::vector<TrajectoryRow> rows(res.boxes.size());
  for (std::size_t i = 0; i < res.boxes.size(); ++i)
    rows[i] = TrajectoryRow{static_cast<int>(i), res.boxes[i], res.overlaps[i],
                            i == 0 ? FrameEvent::reinit : FrameEvent::ok};
  return rows;
}

inline std::vector<TrajectoryRow> vot_trajectory(const VotResult& res) {
  std::vector<TrajectoryRow> rows(res.boxes.size());
  for (std::size_t i = 0; i < res.boxes.size(); ++i)
    rows[i] = TrajectoryRow{static_cast<int>(i), res.boxes[i], res.overlaps[i], res.events[i]};
  return rows;
}

}  // namespace uptrack
