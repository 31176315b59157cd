#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"
#include "uptrack/errors.hpp"
#include "uptrack/io.hpp"
#include "uptrack/rng.hpp"
#include "uptrack/tensor.hpp"
#include "uptrack/tracker.hpp"
#include "uptrack/update.hpp"
#include "uptrack/update_net.hpp"

namespace uptrack {

// ---------------------------------------------------------------------------
// Tuples and stores
// ---------------------------------------------------------------------------

struct TrainingTuple {
  Tensor t0_gt;
  Tensor prev_accum;
  Tensor current;
  Tensor next_gt;
  std::string sequence_id;
  int frame_index = 1;
};

struct TupleStore {
  int stage = 0;
  std::vector<TrainingTuple> tuples;
};

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct StageLr {
  double lr_start = 0.0;
  double lr_end = 0.0;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int stage_count = 3;
  int hidden = 96;
  double collect_gamma = 0.0102;  // linear rate of the stage-0 collector
  SkipSource skip = SkipSource::initial;
  std::vector<StageLr> stage_lr;  // per stage, 0-indexed; empty entries use defaults
  std::uint64_t rng_seed = 1;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw validation_error("train.epochs: must be >= 1");
  if (cfg.batch_size < 1) throw validation_error("train.batch_size: must be >= 1");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw validation_error("train.momentum: must be in [0,1)");
  if (cfg.weight_decay < 0.0) throw validation_error("train.weight_decay: must be >= 0");
  if (cfg.stage_count < 1) throw validation_error("train.stage_count: must be >= 1");
  if (cfg.hidden < 1) throw validation_error("train.hidden: must be >= 1");
  if (cfg.collect_gamma < 0.0 || cfg.collect_gamma > 1.0)
    throw validation_error("train.collect_gamma: must be in [0,1]");
  for (std::size_t i = 0; i < cfg.stage_lr.size(); ++i)
    if (!(cfg.stage_lr[i].lr_start >= cfg.stage_lr[i].lr_end && cfg.stage_lr[i].lr_end > 0.0))
      throw validation_error("train.stage_lr[" + std::to_string(i) +
                             "]: need lr_start >= lr_end > 0");
}

// Geometric interpolation from lr_start to lr_end across the epochs.
inline double lr_interp(double lr_start, double lr_end, int epoch, int total_epochs) {
  if (total_epochs < 2) return lr_start;
  const double t = static_cast<double>(epoch) / (total_epochs - 1);
  return lr_start * std::pow(lr_end / lr_start, t);
}

inline StageLr default_stage_lr(int stage) {
  return stage <= 1 ? StageLr{1e-6, 1e-7} : StageLr{1e-7, 1e-8};
}

inline double lr_schedule(int stage, int epoch, int total_epochs) {
  if (total_epochs < 2) throw validation_error("lr_schedule: total_epochs must be >= 2");
  if (epoch < 0 || epoch >= total_epochs)
    throw validation_error("lr_schedule: epoch out of range");
  const StageLr lr = default_stage_lr(stage);
  return lr_interp(lr.lr_start, lr.lr_end, epoch, total_epochs);
}

inline StageLr stage_lr_for(const TrainConfig& cfg, int stage) {
  const std::size_t idx = static_cast<std::size_t>(stage - 1);
  if (idx < cfg.stage_lr.size()) return cfg.stage_lr[idx];
  return default_stage_lr(stage);
}

// ---------------------------------------------------------------------------
// Loss and gradients
// ---------------------------------------------------------------------------

inline void require_tuple_shapes(const TrainingTuple& t) {
  require_same_shape(t.t0_gt, t.prev_accum, "training tuple");
  require_same_shape(t.t0_gt, t.current, "training tuple");
  require_same_shape(t.t0_gt, t.next_gt, "training tuple");
}

// Mean squared error of the full update (network output plus skip) against
// the next ground-truth template.
inline double loss(const UpdateNetParams& params, const TrainingTuple& t,
                   SkipSource skip = SkipSource::initial) {
  require_tuple_shapes(t);
  const Tensor updated = updatenet_update(params, t.t0_gt, t.prev_accum, t.current, skip);
  return mean_squared_diff(updated, t.next_gt);
}

struct SampleLoss {
  double mse = 0.0;
  double l2 = 0.0;
};

// Forward + backward for one tuple; returns the analytic gradient and the
// loss values from the same forward pass.
inline SampleLoss tuple_grad(const UpdateNetParams& params, const TrainingTuple& t,
                             SkipSource skip, ParamGrads& out) {
  require_tuple_shapes(t);
  const Tensor x = concat_channels(t.t0_gt, t.prev_accum, t.current);
  ForwardCache cache;
  Tensor updated = forward(params, x, &cache);
  const Tensor* residual = nullptr;
  switch (skip) {
    case SkipSource::none: break;
    case SkipSource::current: residual = &t.current; break;
    case SkipSource::accumulated: residual = &t.prev_accum; break;
    case SkipSource::initial: residual = &t.t0_gt; break;
  }
  if (residual != nullptr)
    for (std::size_t i = 0; i < updated.data.size(); ++i)
      updated.data[i] = residual->data[i] + updated.data[i];

  const double e = static_cast<double>(updated.size());
  double ssd = 0.0;
  Tensor grad_out = make_tensor(updated.h, updated.w, updated.c);
  for (std::size_t i = 0; i < updated.data.size(); ++i) {
    const double d = static_cast<double>(updated.data[i]) - t.next_gt.data[i];
    ssd += d * d;
    grad_out.data[i] = static_cast<float>(2.0 * d / e);
  }
  out = backward(params, cache, grad_out);
  return SampleLoss{ssd / e, std::sqrt(ssd)};
}

// Mean of per-sample gradients over the given tuples, accumulated in a
// fixed order in double.
inline ParamGrads batch_grad(const UpdateNetParams& params,
                             const std::vector<const TrainingTuple*>& batch, SkipSource skip,
                             double* mean_mse = nullptr, double* mean_l2 = nullptr) {
  if (batch.empty()) throw validation_error("batch_grad: empty batch");
  std::vector<double> aw1(params.w1.size(), 0.0), ab1(params.b1.size(), 0.0);
  std::vector<double> aw2(params.w2.size(), 0.0), ab2(params.b2.size(), 0.0);
  double mse = 0.0, l2 = 0.0;
  ParamGrads g;
  for (const TrainingTuple* t : batch) {
    const SampleLoss sl = tuple_grad(params, *t, skip, g);
    mse += sl.mse;
    l2 += sl.l2;
    for (std::size_t i = 0; i < g.w1.size(); ++i) aw1[i] += g.w1[i];
    for (std::size_t i = 0; i < g.b1.size(); ++i) ab1[i] += g.b1[i];
    for (std::size_t i = 0; i < g.w2.size(); ++i) aw2[i] += g.w2[i];
    for (std::size_t i = 0; i < g.b2.size(); ++i) ab2[i] += g.b2[i];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  ParamGrads mean = make_grads(params);
  for (std::size_t i = 0; i < mean.w1.size(); ++i) mean.w1[i] = static_cast<float>(aw1[i] * inv);
  for (std::size_t i = 0; i < mean.b1.size(); ++i) mean.b1[i] = static_cast<float>(ab1[i] * inv);
  for (std::size_t i = 0; i < mean.w2.size(); ++i) mean.w2[i] = static_cast<float>(aw2[i] * inv);
  for (std::size_t i = 0; i < mean.b2.size(); ++i) mean.b2[i] = static_cast<float>(ab2[i] * inv);
  if (mean_mse != nullptr) *mean_mse = mse * inv;
  if (mean_l2 != nullptr) *mean_l2 = l2 * inv;
  return mean;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct OptimizerState {
  std::vector<float> w1, b1, w2, b2;
};

inline OptimizerState make_optimizer_state(const UpdateNetParams& p) {
  OptimizerState s;
  s.w1.assign(p.w1.size(), 0.0f);
  s.b1.assign(p.b1.size(), 0.0f);
  s.w2.assign(p.w2.size(), 0.0f);
  s.b2.assign(p.b2.size(), 0.0f);
  return s;
}

namespace detail {

inline void sgd_field(std::vector<float>& param, const std::vector<float>& grad,
                      std::vector<float>& vel, float lr, float momentum, float wd) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    if (!std::isfinite(grad[i])) throw numeric_error("sgd_step: non-finite gradient");
    vel[i] = momentum * vel[i] + (grad[i] + wd * param[i]);
    param[i] = param[i] - lr * vel[i];
  }
}

}  // namespace detail

// Classical momentum with coupled L2 decay:
//   v <- momentum*v + (grad + wd*param);  param <- param - lr*v
inline void sgd_step(UpdateNetParams& params, const ParamGrads& grads, OptimizerState& state,
                     double lr, double momentum, double weight_decay) {
  if (!(lr > 0.0)) throw validation_error("sgd_step: lr must be > 0");
  const float flr = static_cast<float>(lr);
  const float fm = static_cast<float>(momentum);
  const float fwd = static_cast<float>(weight_decay);
  detail::sgd_field(params.w1, grads.w1, state.w1, flr, fm, fwd);
  detail::sgd_field(params.b1, grads.b1, state.b1, flr, fm, fwd);
  detail::sgd_field(params.w2, grads.w2, state.w2, flr, fm, fwd);
  detail::sgd_field(params.b2, grads.b2, state.b2, flr, fm, fwd);
}

// ---------------------------------------------------------------------------
// Tuple collection
// ---------------------------------------------------------------------------

// Runs the tracker with the given strategy and records, for every frame i
// in [1, N-2], the tuple (T0_gt, accum_{i-1}, T_i, gt-template_{i+1}).
// Templates and locations come from the real tracking run; only the initial
// and the next-frame templates use ground truth.
inline TupleStore collect_with_strategy(const std::vector<SyntheticSequence>& sequences,
                                        const TrackerConfig& tracker_cfg,
                                        const UpdateStrategy& strategy, int stage_tag) {
  TupleStore store;
  store.stage = stage_tag;
  const TrackerRuntime rt = make_runtime(tracker_cfg);
  for (const SyntheticSequence& seq : sequences) {
    const int n = static_cast<int>(seq.frames.size());
    if (n < 3) continue;  // needs a predecessor and a ground-truth successor
    TrackerState st = init_state(seq, rt);
    for (int f = 1; f <= n - 2; ++f) {
      TrainingTuple t;
      t.sequence_id = seq.name;
      t.frame_index = f;
      t.t0_gt = st.t0_gt;
      t.prev_accum = st.accum;
      step(st, seq.frames[static_cast<std::size_t>(f)], strategy, rt, &t.current);
      t.next_gt = exemplar_features(seq.frames[static_cast<std::size_t>(f) + 1],
                                    seq.gt_boxes[static_cast<std::size_t>(f) + 1], rt);
      store.tuples.push_back(std::move(t));
    }
  }
  return store;
}

inline TupleStore collect_stage0(const std::vector<SyntheticSequence>& sequences,
                                 const TrackerConfig& tracker_cfg, double gamma) {
  return collect_with_strategy(sequences, tracker_cfg, LinearUpdateConfig{gamma}, 0);
}

inline TupleStore collect_stagek(const std::vector<SyntheticSequence>& sequences,
                                 const TrackerConfig& tracker_cfg,
                                 const UpdateNetParams& params_prev, int k,
                                 SkipSource skip = SkipSource::initial) {
  if (k < 1) throw validation_error("collect_stagek: k must be >= 1");
  return collect_with_strategy(sequences, tracker_cfg, UpdateNetStrategy{params_prev, skip}, k);
}

// ---------------------------------------------------------------------------
// Store persistence: root/index.json + {seq}_{frame}_{role}.ttns
// ---------------------------------------------------------------------------

inline void save_tuple_store(const std::filesystem::path& root, const TupleStore& store) {
  std::filesystem::create_directories(root);
  nlohmann::json index = nlohmann::json::array();
  for (const TrainingTuple& t : store.tuples) {
    const std::string base = t.sequence_id + "_" + std::to_string(t.frame_index) + "_";
    nlohmann::json files;
    files["t0"] = base + "t0.ttns";
    files["accum"] = base + "accum.ttns";
    files["curr"] = base + "curr.ttns";
    files["nextgt"] = base + "nextgt.ttns";
    write_tensor(root / (base + "t0.ttns"), t.t0_gt);
    write_tensor(root / (base + "accum.ttns"), t.prev_accum);
    write_tensor(root / (base + "curr.ttns"), t.current);
    write_tensor(root / (base + "nextgt.ttns"), t.next_gt);
    index.push_back({{"seq", t.sequence_id},
                     {"frame", t.frame_index},
                     {"stage", store.stage},
                     {"files", files}});
  }
  write_text_file(root / "index.json", index.dump(2) + "\n");
}

inline TupleStore load_tuple_store(const std::filesystem::path& root) {
  TupleStore store;
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_text_file(root / "index.json"));
  } catch (const nlohmann::json::exception& e) {
    throw io_error("load_tuple_store: bad index.json in " + root.string() + ": " + e.what());
  }
  if (!index.is_array()) throw io_error("load_tuple_store: index.json must be an array");
  for (const auto& entry : index) {
    TrainingTuple t;
    try {
      t.sequence_id = entry.at("seq").get<std::string>();
      t.frame_index = entry.at("frame").get<int>();
      store.stage = entry.value("stage", store.stage);
      const auto& files = entry.at("files");
      t.t0_gt = read_tensor(root / files.at("t0").get<std::string>());
      t.prev_accum = read_tensor(root / files.at("accum").get<std::string>());
      t.current = read_tensor(root / files.at("curr").get<std::string>());
      t.next_gt = read_tensor(root / files.at("nextgt").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw io_error("load_tuple_store: malformed entry in " + root.string() + ": " + e.what());
    }
    require_tuple_shapes(t);
    store.tuples.push_back(std::move(t));
  }
  return store;
}

// ---------------------------------------------------------------------------
// Stage training
// ---------------------------------------------------------------------------

struct LossRow {
  int stage = 0;
  int epoch = 0;
  double mean_mse = 0.0;
  double mean_l2 = 0.0;
  double lr = 0.0;
};

inline std::string loss_history_csv(const std::vector<LossRow>& rows) {
  std::string csv = "stage,epoch,mean_mse,mean_l2,lr\n";
  for (const LossRow& r : rows)
    csv += std::to_string(r.stage) + "," + std::to_string(r.epoch) + "," + fmt_g17(r.mean_mse) +
           "," + fmt_g17(r.mean_l2) + "," + fmt_g17(r.lr) + "\n";
  return csv;
}

struct TrainStageResult {
  UpdateNetParams best_params;
  std::vector<LossRow> history;
  int best_epoch = 0;
};

// Mini-batch SGD with seeded per-epoch shuffling. The per-epoch loss is the
// mean over samples as visited (each sample measured against the params its
// batch saw); "best" is the epoch with the lowest such mean, and the
// returned parameters are the snapshot at the end of that epoch.
inline TrainStageResult train_stage(const TupleStore& store, const UpdateNetParams& params_init,
                                    const TrainConfig& cfg, int stage) {
  validate(cfg);
  if (store.tuples.empty()) throw validation_error("train_stage: empty tuple store");
  validate(params_init);

  UpdateNetParams params = params_init;
  OptimizerState opt = make_optimizer_state(params);
  const StageLr lr = stage_lr_for(cfg, stage);

  TrainStageResult result;
  result.best_params = params;
  double best_loss = 0.0;
  bool have_best = false;

  std::vector<std::size_t> order(store.tuples.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double epoch_lr = lr_interp(lr.lr_start, lr.lr_end, epoch, cfg.epochs);
    std::iota(order.begin(), order.end(), std::size_t{0});
    seeded_shuffle(order, fold_seed(cfg.rng_seed, static_cast<std::uint64_t>(stage),
                                    static_cast<std::uint64_t>(epoch)));
    double mse_sum = 0.0, l2_sum = 0.0;
    std::vector<const TrainingTuple*> batch;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < end; ++i) batch.push_back(&store.tuples[order[i]]);
      double bm = 0.0, bl = 0.0;
      const ParamGrads g = batch_grad(params, batch, cfg.skip, &bm, &bl);
      mse_sum += bm * static_cast<double>(batch.size());
      l2_sum += bl * static_cast<double>(batch.size());
      sgd_step(params, g, opt, epoch_lr, cfg.momentum, cfg.weight_decay);
    }
    const double n = static_cast<double>(order.size());
    const LossRow row{stage, epoch, mse_sum / n, l2_sum / n, epoch_lr};
    result.history.push_back(row);
    if (!have_best || row.mean_mse < best_loss) {
      have_best = true;
      best_loss = row.mean_mse;
      result.best_params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Fusion-weight training
// ---------------------------------------------------------------------------

// Fits the three fusion coefficients to the same tuples by SGD with the same
// shuffle / batch / momentum machinery as the network trainer. The weights
// are plain doubles, so no weight decay is applied.
inline FusionWeights train_fusion(const TupleStore& store, FusionWeights init,
                                  const TrainConfig& cfg, StageLr lr) {
  validate(cfg);
  validate(init);
  if (store.tuples.empty()) throw validation_error("train_fusion: empty tuple store");
  for (const TrainingTuple& t : store.tuples) require_tuple_shapes(t);
  if (!(lr.lr_start > 0.0) || !(lr.lr_end > 0.0))
    throw validation_error("train_fusion: learning rates must be positive");

  double w[3] = {init.alpha_init, init.alpha_accu, init.alpha_curr};
  double vel[3] = {0.0, 0.0, 0.0};
  double best_loss = 0.0;
  double best_w[3] = {w[0], w[1], w[2]};
  bool have_best = false;

  std::vector<std::size_t> order(store.tuples.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double epoch_lr = lr_interp(lr.lr_start, lr.lr_end, epoch, cfg.epochs);
    std::iota(order.begin(), order.end(), std::size_t{0});
    seeded_shuffle(order, fold_seed(cfg.rng_seed, 0, static_cast<std::uint64_t>(epoch)));
    double mse_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      double g[3] = {0.0, 0.0, 0.0};
      double batch_mse = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const TrainingTuple& t = store.tuples[order[i]];
        const std::size_t n = t.next_gt.data.size();
        double ga = 0.0, gb = 0.0, gc = 0.0, ssd = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double a = t.t0_gt.data[k];
          const double b = t.prev_accum.data[k];
          const double c = t.current.data[k];
          const double d = w[0] * a + w[1] * b + w[2] * c -
                           static_cast<double>(t.next_gt.data[k]);
          ssd += d * d;
          ga += d * a;
          gb += d * b;
          gc += d * c;
        }
        const double inv = 1.0 / static_cast<double>(n);
        g[0] += 2.0 * ga * inv;
        g[1] += 2.0 * gb * inv;
        g[2] += 2.0 * gc * inv;
        batch_mse += ssd * inv;
      }
      const double bn = static_cast<double>(end - start);
      for (int k = 0; k < 3; ++k) {
        vel[k] = cfg.momentum * vel[k] + g[k] / bn;
        w[k] -= epoch_lr * vel[k];
        if (!std::isfinite(w[k])) throw numeric_error("train_fusion: diverged");
      }
      mse_sum += batch_mse;
    }
    const double epoch_mse = mse_sum / static_cast<double>(order.size());
    if (!have_best || epoch_mse < best_loss) {
      have_best = true;
      best_loss = epoch_mse;
      best_w[0] = w[0];
      best_w[1] = w[1];
      best_w[2] = w[2];
    }
  }
  return FusionWeights{best_w[0], best_w[1], best_w[2]};
}

// ---------------------------------------------------------------------------
// Multi-stage driver
// ---------------------------------------------------------------------------

struct StageOutput {
  int stage = 1;
  UpdateNetParams params;
  std::vector<LossRow> history;
};

// Stage 1 trains from scratch on data collected with the linear tracker;
// stage k >= 2 re-collects with the previous stage's model and continues
// from its parameters. With out_dir set, stage k writes stage{k}.unet.
inline std::vector<StageOutput> run_multistage(const std::vector<SyntheticSequence>& sequences,
                                               const TrackerConfig& tracker_cfg,
                                               const TrainConfig& cfg,
                                               const std::filesystem::path* out_dir = nullptr) {
  validate(cfg);
  validate(tracker_cfg);
  std::vector<StageOutput> outputs;
  UpdateNetParams prev;
  for (int stage = 1; stage <= cfg.stage_count; ++stage) {
    TupleStore store;
    UpdateNetParams init;
    if (stage == 1) {
      store = collect_stage0(sequences, tracker_cfg, cfg.collect_gamma);
      init = init_params(tracker_cfg.feature.out_channels, cfg.hidden,
                         InitScheme::scaled_uniform, fold_seed(cfg.rng_seed, 777));
    } else {
      store = collect_stagek(sequences, tracker_cfg, prev, stage - 1, cfg.skip);
      init = prev;
    }
    TrainStageResult r = train_stage(store, init, cfg, stage);
    prev = r.best_params;
    if (out_dir != nullptr)
      save_params(*out_dir / ("stage" + std::to_string(stage) + ".unet"), r.best_params);
    outputs.push_back(StageOutput{stage, std::move(r.best_params), std::move(r.history)});
  }
  return outputs;
}

}  // namespace uptrack
