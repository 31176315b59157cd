#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "uptrack/benchmark.hpp"
#include "uptrack/errors.hpp"
#include "uptrack/evaluation.hpp"
#include "uptrack/io.hpp"
#include "uptrack/rng.hpp"
#include "uptrack/synthetic.hpp"
#include "uptrack/tracker.hpp"
#include "uptrack/training.hpp"
#include "uptrack/update.hpp"

namespace uptrack {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kWorkspaceEnvVar = "UPTRACK_WORKSPACE";

// ---------------------------------------------------------------------------
// Config hashing
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Config sections <-> JSON
// ---------------------------------------------------------------------------

namespace detail {

// Typo guard: every recognized key must be listed, anything else is an error.
inline void reject_unknown_keys(const nlohmann::json& j, const char* section,
                                std::initializer_list<const char*> known) {
  if (!j.is_object()) throw validation_error(std::string(section) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw validation_error(std::string(section) + ": unknown field \"" + item.key() + "\"");
  }
}

}  // namespace detail

inline nlohmann::json tracker_to_json(const TrackerConfig& cfg) {
  return nlohmann::json{
      {"feature",
       {{"out_spatial", cfg.feature.out_spatial},
        {"out_channels", cfg.feature.out_channels},
        {"filter_bank_seed", cfg.feature.filter_bank_seed}}},
      {"exemplar_context", cfg.exemplar_context},
      {"search_context", cfg.search_context},
      {"exemplar_px", cfg.exemplar_px},
      {"search_px", cfg.search_px},
      {"cosine_window_weight", cfg.cosine_window_weight},
      {"scale_steps", cfg.scale_steps}};
}

inline TrackerConfig tracker_from_json(const nlohmann::json& j) {
  TrackerConfig cfg;
  try {
    detail::reject_unknown_keys(j, "tracker",
                                {"feature", "exemplar_context", "search_context", "exemplar_px",
                                 "search_px", "cosine_window_weight", "scale_steps"});
    if (j.contains("feature")) {
      const auto& f = j.at("feature");
      detail::reject_unknown_keys(f, "tracker.feature",
                                  {"out_spatial", "out_channels", "filter_bank_seed"});
      cfg.feature.out_spatial = f.value("out_spatial", cfg.feature.out_spatial);
      cfg.feature.out_channels = f.value("out_channels", cfg.feature.out_channels);
      cfg.feature.filter_bank_seed = f.value("filter_bank_seed", cfg.feature.filter_bank_seed);
    }
    cfg.exemplar_context = j.value("exemplar_context", cfg.exemplar_context);
    cfg.search_context = j.value("search_context", cfg.search_context);
    cfg.exemplar_px = j.value("exemplar_px", cfg.exemplar_px);
    cfg.search_px = j.value("search_px", cfg.search_px);
    cfg.cosine_window_weight = j.value("cosine_window_weight", cfg.cosine_window_weight);
    cfg.scale_steps = j.value("scale_steps", cfg.scale_steps);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("tracker config JSON: ") + e.what());
  }
  return cfg;
}

inline nlohmann::json train_to_json(const TrainConfig& cfg) {
  nlohmann::json lrs = nlohmann::json::array();
  for (const StageLr& s : cfg.stage_lr) lrs.push_back({s.lr_start, s.lr_end});
  return nlohmann::json{{"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"momentum", cfg.momentum},
                        {"weight_decay", cfg.weight_decay},
                        {"stages", cfg.stage_count},
                        {"hidden", cfg.hidden},
                        {"collect_gamma", cfg.collect_gamma},
                        {"skip", skip_source_name(cfg.skip)},
                        {"stage_lr", lrs},
                        {"seed", cfg.rng_seed}};
}

inline TrainConfig train_from_json(const nlohmann::json& j, std::uint64_t fallback_seed) {
  TrainConfig cfg;
  cfg.rng_seed = fallback_seed;
  try {
    detail::reject_unknown_keys(j, "train",
                                {"epochs", "batch_size", "momentum", "weight_decay", "stages",
                                 "hidden", "collect_gamma", "skip", "stage_lr", "seed"});
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.stage_count = j.value("stages", cfg.stage_count);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.collect_gamma = j.value("collect_gamma", cfg.collect_gamma);
    if (j.contains("skip")) cfg.skip = skip_source_from_string(j.at("skip").get<std::string>());
    if (j.contains("stage_lr")) {
      for (const auto& pair : j.at("stage_lr")) {
        if (!pair.is_array() || pair.size() != 2)
          throw validation_error("train.stage_lr: each entry must be [lr_start, lr_end]");
        cfg.stage_lr.push_back(StageLr{pair.at(0).get<double>(), pair.at(1).get<double>()});
      }
    }
    cfg.rng_seed = j.value("seed", cfg.rng_seed);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("train config JSON: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Experiment config
// ---------------------------------------------------------------------------

struct MetricOptions {
  double fail_threshold = 0.0;
};

struct ExperimentConfig {
  std::string workspace = ".";
  std::uint64_t seed = 1;
  std::vector<SceneConfig> scenes;
  TrackerConfig tracker;
  TrainConfig train;
  MetricOptions metrics;
  std::vector<std::string> strategies;
};

// Canonical effective form: everything resolved, defaults filled in. The
// config hash is taken over this dump, so two configs that resolve to the
// same effective settings share a hash.
inline nlohmann::json experiment_to_json(const ExperimentConfig& cfg) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const SceneConfig& s : cfg.scenes) scenes.push_back(scene_to_json(s));
  return nlohmann::json{{"workspace", cfg.workspace},
                        {"seed", cfg.seed},
                        {"scenes", scenes},
                        {"tracker", tracker_to_json(cfg.tracker)},
                        {"train", train_to_json(cfg.train)},
                        {"metrics", {{"fail_threshold", cfg.metrics.fail_threshold}}},
                        {"strategies", cfg.strategies}};
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  return hex64(fnv1a64(experiment_to_json(cfg).dump()));
}

// Assembles the effective config. Seeds cascade from the global seed: the
// trainer and any scene that does not pin its own rng_seed get deterministic
// folds of it, so one --seed flag reshuffles the whole experiment. A
// "benchmark" section generates the built-in drift scene family instead of
// (or in addition to) explicit scene entries.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                             const std::uint64_t* seed_override = nullptr) {
  ExperimentConfig cfg;
  try {
    detail::reject_unknown_keys(j, "config",
                                {"workspace", "seed", "scenes", "benchmark", "tracker", "train",
                                 "metrics", "strategies"});
    if (const char* env = std::getenv(kWorkspaceEnvVar); env != nullptr && *env != '\0')
      cfg.workspace = env;
    cfg.workspace = j.value("workspace", cfg.workspace);
    cfg.seed = j.value("seed", cfg.seed);
    if (seed_override != nullptr) cfg.seed = *seed_override;

    if (j.contains("scenes")) {
      int idx = 0;
      for (const auto& js : j.at("scenes")) {
        SceneConfig sc = scene_from_json(js);
        if (!js.contains("rng_seed"))
          sc.rng_seed = fold_seed(cfg.seed, 3, static_cast<std::uint64_t>(idx));
        cfg.scenes.push_back(std::move(sc));
        ++idx;
      }
    }
    if (j.contains("benchmark")) {
      const auto& b = j.at("benchmark");
      detail::reject_unknown_keys(b, "benchmark", {"count", "base_seed", "prefix"});
      const int count = b.value("count", 20);
      const std::uint64_t base =
          b.contains("base_seed") ? b.at("base_seed").get<std::uint64_t>() : fold_seed(cfg.seed, 2);
      const std::string prefix = b.value("prefix", std::string("drift"));
      for (SceneConfig& sc : drift_benchmark(count, base, prefix))
        cfg.scenes.push_back(std::move(sc));
    }
    if (j.contains("tracker")) cfg.tracker = tracker_from_json(j.at("tracker"));
    cfg.train = train_from_json(j.contains("train") ? j.at("train") : nlohmann::json::object(),
                                fold_seed(cfg.seed, 1));
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      detail::reject_unknown_keys(m, "metrics", {"fail_threshold"});
      cfg.metrics.fail_threshold = m.value("fail_threshold", cfg.metrics.fail_threshold);
    }
    if (j.contains("strategies"))
      for (const auto& s : j.at("strategies")) cfg.strategies.push_back(s.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("experiment config JSON: ") + e.what());
  }

  validate(cfg.tracker);
  validate(cfg.train);
  if (!(cfg.metrics.fail_threshold >= 0.0 && cfg.metrics.fail_threshold < 1.0))
    throw validation_error("metrics.fail_threshold: must be in [0,1)");
  for (const SceneConfig& s : cfg.scenes) validate(s);
  std::set<std::string> names;
  for (const SceneConfig& s : cfg.scenes)
    if (!names.insert(s.name).second)
      throw validation_error("scenes: duplicate name \"" + s.name + "\"");
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                               const std::uint64_t* seed_override = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw validation_error("config " + path.string() + ": " + e.what());
  }
  return experiment_from_json(j, seed_override);
}

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::string timestamp;
  std::vector<std::string> outputs;  // paths relative to the manifest's directory
};

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Verifies that every listed output actually exists, then writes
// manifest.json. Outputs are sorted so reruns differ only in the timestamp.
inline void write_manifest(const std::filesystem::path& out_dir, RunManifest m) {
  std::sort(m.outputs.begin(), m.outputs.end());
  for (const std::string& rel : m.outputs)
    if (!std::filesystem::exists(out_dir / rel))
      throw io_error("manifest: declared output missing: " + (out_dir / rel).string());
  if (m.timestamp.empty()) m.timestamp = utc_timestamp();
  nlohmann::json j{{"command", m.command},
                   {"config_hash", m.config_hash},
                   {"tool_version", m.tool_version},
                   {"timestamp", m.timestamp},
                   {"outputs", m.outputs}};
  write_text_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Shared command helpers
// ---------------------------------------------------------------------------

// Relative output paths land under the workspace; absolute ones are taken
// as-is. Input paths (--data, --in) are always resolved against the cwd.
inline std::filesystem::path resolve_out(const ExperimentConfig& cfg,
                                         const std::filesystem::path& out) {
  if (out.is_absolute() || cfg.workspace == "." || cfg.workspace.empty()) return out;
  return std::filesystem::path(cfg.workspace) / out;
}

inline std::vector<SyntheticSequence> load_data_dir(const std::filesystem::path& data_dir) {
  if (!std::filesystem::is_directory(data_dir))
    throw io_error("data dir not found: " + data_dir.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "groundtruth.csv"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<SyntheticSequence> seqs;
  seqs.reserve(dirs.size());
  for (const auto& d : dirs) seqs.push_back(load_sequence(d));
  if (seqs.empty()) throw io_error("no sequences under " + data_dir.string());
  return seqs;
}

namespace detail {

inline std::string dump_tensor_name(const std::string& seq, int frame) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_%06d_accum.ttns", frame);
  return seq + buf;
}

inline std::string dump_channel_name(const std::string& seq, int frame, int channel) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_%06d_ch%02d.pgm", frame, channel);
  return seq + buf;
}

// One template channel as an 8x-nearest-upscaled PGM, normalized by the
// channel's min/max over the whole series so frames are comparable.
inline Image channel_image(const Tensor& t, int channel, float lo, float hi) {
  const int scale = 8;
  Image im = make_image(t.h * scale, t.w * scale);
  const float span = hi > lo ? hi - lo : 1.0f;
  for (int y = 0; y < im.h; ++y)
    for (int x = 0; x < im.w; ++x)
      im.at(y, x) = (t.at(y / scale, x / scale, channel) - lo) / span;
  return im;
}

inline nlohmann::json read_run_json(const std::filesystem::path& run_dir) {
  const std::filesystem::path p = run_dir / "run.json";
  if (!std::filesystem::exists(p)) throw io_error("missing run.json under " + run_dir.string());
  try {
    return nlohmann::json::parse(read_text_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw io_error("run.json " + p.string() + ": " + e.what());
  }
}

// A tracking-output directory either is a single run (has run.json) or holds
// one subdirectory per run.
inline std::vector<std::filesystem::path> find_run_dirs(const std::filesystem::path& in_dir) {
  if (std::filesystem::exists(in_dir / "run.json")) return {in_dir};
  std::vector<std::filesystem::path> dirs;
  if (std::filesystem::is_directory(in_dir))
    for (const auto& entry : std::filesystem::directory_iterator(in_dir))
      if (entry.is_directory() && std::filesystem::exists(entry.path() / "run.json"))
        dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw io_error("no tracking runs (run.json) under " + in_dir.string());
  return dirs;
}

inline VotResult vot_result_from_rows(const std::vector<TrajectoryRow>& rows) {
  VotResult r;
  for (const TrajectoryRow& row : rows) {
    r.boxes.push_back(row.box);
    r.overlaps.push_back(row.overlap);
    r.events.push_back(row.event);
    if (row.event == FrameEvent::fail) r.failure_frames.push_back(row.frame);
    if (row.event == FrameEvent::reinit) r.reinit_frames.push_back(row.frame);
  }
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

inline void cmd_gen(const ExperimentConfig& cfg, const std::filesystem::path& out_arg) {
  if (cfg.scenes.empty())
    throw validation_error("gen: config declares no scenes (add \"scenes\" or \"benchmark\")");
  for (const SceneConfig& s : cfg.scenes) validate(s);
  const std::filesystem::path out_dir = resolve_out(cfg, out_arg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw io_error("gen: cannot create output dir " + out_dir.string());

  RunManifest m;
  m.command = "gen";
  m.config_hash = config_hash(cfg);
  for (const SceneConfig& s : cfg.scenes) {
    const SyntheticSequence seq = render_sequence(s);
    save_sequence(out_dir / s.name, seq, &s);
    for (std::size_t i = 0; i < seq.frames.size(); ++i)
      m.outputs.push_back(s.name + "/" + frame_file_name(static_cast<int>(i)));
    m.outputs.push_back(s.name + "/groundtruth.csv");
    m.outputs.push_back(s.name + "/scene_config.json");
  }
  write_manifest(out_dir, std::move(m));
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

inline void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                      int stages, const std::filesystem::path& out_arg) {
  TrainConfig tc = cfg.train;
  if (stages > 0) tc.stage_count = stages;
  validate(tc);
  const std::vector<SyntheticSequence> seqs = load_data_dir(data_dir);
  const std::filesystem::path out_dir = resolve_out(cfg, out_arg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw io_error("train: cannot create output dir " + out_dir.string());

  try {
    const std::vector<StageOutput> stages_out = run_multistage(seqs, cfg.tracker, tc, &out_dir);
    std::vector<LossRow> all_rows;
    for (const StageOutput& s : stages_out)
      all_rows.insert(all_rows.end(), s.history.begin(), s.history.end());
    write_text_file(out_dir / "loss_history.csv", loss_history_csv(all_rows));

    RunManifest m;
    m.command = "train";
    m.config_hash = config_hash(cfg);
    for (const StageOutput& s : stages_out)
      m.outputs.push_back("stage" + std::to_string(s.stage) + ".unet");
    m.outputs.push_back("loss_history.csv");
    write_manifest(out_dir, std::move(m));
  } catch (...) {
    // A failed run leaves no half-written artifacts behind.
    for (int k = 1; k <= tc.stage_count; ++k) {
      std::error_code ignore;
      std::filesystem::remove(out_dir / ("stage" + std::to_string(k) + ".unet"), ignore);
    }
    std::error_code ignore;
    std::filesystem::remove(out_dir / "loss_history.csv", ignore);
    std::filesystem::remove(out_dir / "manifest.json", ignore);
    throw;
  }
}

// ---------------------------------------------------------------------------
// track
// ---------------------------------------------------------------------------

inline void cmd_track(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                      const std::string& strategy_spec, bool dump_templates,
                      const std::filesystem::path& out_arg) {
  const UpdateStrategy strategy = parse_strategy_spec(strategy_spec);
  const std::vector<SyntheticSequence> seqs = load_data_dir(data_dir);
  const std::filesystem::path out_dir = resolve_out(cfg, out_arg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw io_error("track: cannot create output dir " + out_dir.string());

  RunManifest m;
  m.command = "track";
  m.config_hash = config_hash(cfg);

  std::map<std::string, std::vector<Tensor>> histories;
  std::vector<std::string> names;
  for (const SyntheticSequence& seq : seqs) {
    const TrackResult res = track_sequence(seq, strategy, cfg.tracker, /*keep_templates=*/true);
    const VotResult vot = vot_run(seq, strategy, cfg.tracker, cfg.metrics.fail_threshold);
    write_trajectory_csv(out_dir / (seq.name + "_ope.csv"), ope_trajectory(res));
    write_trajectory_csv(out_dir / (seq.name + "_vot.csv"), vot_trajectory(vot));
    m.outputs.push_back(seq.name + "_ope.csv");
    m.outputs.push_back(seq.name + "_vot.csv");
    names.push_back(seq.name);

    if (dump_templates) {
      const std::vector<Tensor>& hist = res.accum_history;
      for (std::size_t f = 0; f < hist.size(); ++f) {
        const std::string fname = detail::dump_tensor_name(seq.name, static_cast<int>(f));
        write_tensor(out_dir / fname, hist[f]);
        m.outputs.push_back(fname);
      }
      const ChannelDynamics cd = channel_dynamics(gt_templates(seq, cfg.tracker));
      for (int ch : top_channels(cd, 4)) {
        float lo = 0.0f, hi = 0.0f;
        bool first = true;
        for (const Tensor& t : hist)
          for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) {
              const float v = t.at(y, x, ch);
              lo = first ? v : std::min(lo, v);
              hi = first ? v : std::max(hi, v);
              first = false;
            }
        for (std::size_t f = 0; f < hist.size(); ++f) {
          const std::string fname =
              detail::dump_channel_name(seq.name, static_cast<int>(f), ch);
          write_pgm(out_dir / fname, detail::channel_image(hist[f], ch, lo, hi));
          m.outputs.push_back(fname);
        }
      }
    }
    histories[seq.name] = std::move(res.accum_history);
  }

  // The training objective as a tracking metric; undefined for sequences too
  // short to score (stored as null, reported as absent).
  nlohmann::json nfe = nullptr;
  bool scorable = false;
  for (const SyntheticSequence& seq : seqs) scorable = scorable || seq.frames.size() >= 3;
  if (scorable)
    nfe = next_frame_template_error_with(
        seqs, cfg.tracker,
        [&](const SyntheticSequence& seq) { return histories.at(seq.name); });

  nlohmann::json run{{"data_dir", data_dir.string()},
                     {"strategy_spec", strategy_spec},
                     {"strategy", strategy_name(strategy)},
                     {"fail_threshold", cfg.metrics.fail_threshold},
                     {"config_hash", config_hash(cfg)},
                     {"tool_version", kToolVersion},
                     {"sequences", names},
                     {"next_frame_error", nfe},
                     {"tracker", tracker_to_json(cfg.tracker)}};
  write_text_file(out_dir / "run.json", run.dump(2) + "\n");
  m.outputs.push_back("run.json");
  write_manifest(out_dir, std::move(m));
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

// One report row per tracking run found under in_dir. The protocol picks the
// trajectories read and the sort key: "vot" ranks by eao_lite, "ope" by
// success AUC. OPE rows repurpose A as the plain mean overlap (no resets, so
// R is 0 and eao_lite equals A).
inline std::vector<StrategyReport> eval_runs(const std::filesystem::path& in_dir,
                                             const std::string& protocol) {
  if (protocol != "ope" && protocol != "vot")
    throw usage_error("eval: protocol must be ope or vot");
  std::vector<StrategyReport> rows;
  for (const std::filesystem::path& run_dir : detail::find_run_dirs(in_dir)) {
    const nlohmann::json run = detail::read_run_json(run_dir);
    StrategyReport row;
    try {
      row.strategy = run.at("strategy").get<std::string>();
      if (run.contains("next_frame_error") && run.at("next_frame_error").is_number())
        row.next_frame_error = run.at("next_frame_error").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw io_error("run.json " + run_dir.string() + ": " + e.what());
    }
    const std::filesystem::path data_dir =
        std::filesystem::path(run.at("data_dir").get<std::string>());
    const std::vector<SyntheticSequence> seqs = load_data_dir(data_dir);

    if (protocol == "ope") {
      double auc = 0.0, prec = 0.0, nprec = 0.0;
      double overlap_sum = 0.0;
      std::size_t overlap_n = 0;
      for (const SyntheticSequence& seq : seqs) {
        const auto rows_csv = read_trajectory_csv(run_dir / (seq.name + "_ope.csv"));
        if (rows_csv.size() != seq.gt_boxes.size())
          throw io_error("eval: trajectory length mismatch for " + seq.name);
        std::vector<Box> pred;
        pred.reserve(rows_csv.size());
        for (const TrajectoryRow& r : rows_csv) pred.push_back(r.box);
        const double diag = std::sqrt(static_cast<double>(seq.frames[0].h) * seq.frames[0].h +
                                      static_cast<double>(seq.frames[0].w) * seq.frames[0].w);
        const OpeMetrics om = ope_metrics(pred, seq.gt_boxes, diag);
        auc += om.success_auc;
        prec += om.precision_at_20px;
        nprec += om.normalized_precision_auc;
        for (std::size_t i = 0; i < pred.size(); ++i) {
          overlap_sum += iou(pred[i], seq.gt_boxes[i]);
          ++overlap_n;
        }
      }
      const double ns = static_cast<double>(seqs.size());
      row.success_auc = auc / ns;
      row.precision = prec / ns;
      row.norm_precision = nprec / ns;
      row.A = overlap_n > 0 ? overlap_sum / static_cast<double>(overlap_n) : 0.0;
      row.R = 0.0;
      row.eao_lite = row.A;
    } else {
      std::vector<VotResult> runs;
      for (const SyntheticSequence& seq : seqs)
        runs.push_back(detail::vot_result_from_rows(
            read_trajectory_csv(run_dir / (seq.name + "_vot.csv"))));
      const VotMetrics vm = vot_metrics(runs);
      row.A = vm.accuracy_A;
      row.R = vm.robustness_R;
      row.eao_lite = vm.eao_lite;
      // The no-reset metrics ride along when the OPE trajectories exist.
      bool have_ope = true;
      for (const SyntheticSequence& seq : seqs)
        have_ope = have_ope && std::filesystem::exists(run_dir / (seq.name + "_ope.csv"));
      if (have_ope) {
        double auc = 0.0, prec = 0.0, nprec = 0.0;
        for (const SyntheticSequence& seq : seqs) {
          const auto rows_csv = read_trajectory_csv(run_dir / (seq.name + "_ope.csv"));
          std::vector<Box> pred;
          pred.reserve(rows_csv.size());
          for (const TrajectoryRow& r : rows_csv) pred.push_back(r.box);
          const double diag = std::sqrt(static_cast<double>(seq.frames[0].h) * seq.frames[0].h +
                                        static_cast<double>(seq.frames[0].w) * seq.frames[0].w);
          const OpeMetrics om = ope_metrics(pred, seq.gt_boxes, diag);
          auc += om.success_auc;
          prec += om.precision_at_20px;
          nprec += om.normalized_precision_auc;
        }
        const double ns = static_cast<double>(seqs.size());
        row.success_auc = auc / ns;
        row.precision = prec / ns;
        row.norm_precision = nprec / ns;
      }
    }
    rows.push_back(std::move(row));
  }

  std::sort(rows.begin(), rows.end(), [&](const StrategyReport& a, const StrategyReport& b) {
    const double ka = protocol == "vot" ? a.eao_lite : a.success_auc;
    const double kb = protocol == "vot" ? b.eao_lite : b.success_auc;
    if (ka != kb) return ka > kb;
    return a.strategy < b.strategy;
  });
  return rows;
}

inline void cmd_eval(const ExperimentConfig& cfg, const std::string& protocol,
                     const std::filesystem::path& in_dir, const std::filesystem::path& out_arg) {
  const std::vector<StrategyReport> rows = eval_runs(in_dir, protocol);
  std::filesystem::path out_json = resolve_out(cfg, out_arg);
  if (out_json.extension() != ".json") out_json += ".json";
  std::filesystem::path out_csv = out_json;
  out_csv.replace_extension(".csv");
  if (out_json.has_parent_path()) std::filesystem::create_directories(out_json.parent_path());
  write_text_file(out_json, report_to_json(rows).dump(2) + "\n");
  write_text_file(out_csv, report_to_csv(rows));
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

namespace detail {

// channels / gamma-sweep accept either a raw data directory or a tracking
// run directory (whose run.json then supplies data location + tracker).
struct AnalyzeSource {
  std::vector<SyntheticSequence> sequences;
  TrackerConfig tracker;
};

inline AnalyzeSource resolve_analyze_source(const std::filesystem::path& in,
                                            const TrackerConfig& fallback) {
  AnalyzeSource src;
  if (std::filesystem::exists(in / "run.json")) {
    const nlohmann::json run = read_run_json(in);
    src.tracker = tracker_from_json(run.at("tracker"));
    src.sequences = load_data_dir(run.at("data_dir").get<std::string>());
  } else {
    src.tracker = fallback;
    src.sequences = load_data_dir(in);
  }
  return src;
}

}  // namespace detail

inline void cmd_analyze(const ExperimentConfig& cfg, const std::string& kind,
                        const std::vector<std::filesystem::path>& inputs,
                        const std::filesystem::path& out_arg) {
  if (kind != "change-rate" && kind != "channels" && kind != "gamma-sweep")
    throw usage_error("analyze: kind must be change-rate, channels, or gamma-sweep");
  if (inputs.empty()) throw usage_error("analyze: at least one --in required");
  const std::filesystem::path out_file = resolve_out(cfg, out_arg);
  if (out_file.has_parent_path()) std::filesystem::create_directories(out_file.parent_path());

  if (kind == "change-rate") {
    // Frame-aligned mean change rate: ground truth first, then one column per
    // tracking run (requires runs made with --dump-templates).
    std::vector<std::pair<std::string, std::vector<double>>> columns;
    std::vector<SyntheticSequence> gt_seqs;
    TrackerConfig tracker;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const std::filesystem::path& run_dir = inputs[k];
      const nlohmann::json run = detail::read_run_json(run_dir);
      if (k == 0) {
        tracker = tracker_from_json(run.at("tracker"));
        gt_seqs = load_data_dir(run.at("data_dir").get<std::string>());
      }
      std::vector<std::vector<double>> per_seq;
      for (const auto& jname : run.at("sequences")) {
        const std::string name = jname.get<std::string>();
        std::vector<Tensor> series;
        for (int f = 0;; ++f) {
          const std::filesystem::path p = run_dir / detail::dump_tensor_name(name, f);
          if (!std::filesystem::exists(p)) break;
          series.push_back(read_tensor(p));
        }
        if (series.size() < 2)
          throw usage_error("analyze change-rate: no template dumps for \"" + name + "\" in " +
                            run_dir.string() + " (re-run track with --dump-templates)");
        per_seq.push_back(change_rate(series).deltas);
      }
      std::string label = run.at("strategy").get<std::string>();
      for (const auto& c : columns)
        if (c.first == label) label += "_" + std::to_string(k + 1);
      columns.emplace_back(label, average_series(per_seq));
    }
    std::vector<std::vector<double>> gt_per_seq;
    for (const SyntheticSequence& seq : gt_seqs)
      gt_per_seq.push_back(change_rate(gt_templates(seq, tracker)).deltas);
    const std::vector<double> gt_col = average_series(gt_per_seq);
    for (const auto& c : columns)
      if (c.second.size() != gt_col.size())
        throw validation_error("analyze change-rate: series lengths differ between runs");

    std::string csv = "frame,gt";
    for (const auto& c : columns) csv += "," + c.first;
    csv += "\n";
    for (std::size_t i = 0; i < gt_col.size(); ++i) {
      csv += std::to_string(i + 1) + "," + fmt_g17(gt_col[i]);
      for (const auto& c : columns) csv += "," + fmt_g17(c.second[i]);
      csv += "\n";
    }
    write_text_file(out_file, csv);
    return;
  }

  if (inputs.size() != 1)
    throw usage_error("analyze " + kind + ": expects exactly one --in directory");
  const detail::AnalyzeSource src = detail::resolve_analyze_source(inputs[0], cfg.tracker);

  if (kind == "channels") {
    // Mean per-channel temporal dynamics across sequences, ranked descending.
    const int channels = src.tracker.feature.out_channels;
    std::vector<double> mean_delta(static_cast<std::size_t>(channels), 0.0);
    for (const SyntheticSequence& seq : src.sequences) {
      const ChannelDynamics cd = channel_dynamics(gt_templates(seq, src.tracker));
      if (static_cast<int>(cd.delta_per_channel.size()) != channels)
        throw validation_error("analyze channels: channel count mismatch");
      for (int c = 0; c < channels; ++c) mean_delta[c] += cd.delta_per_channel[c];
    }
    for (double& v : mean_delta) v /= static_cast<double>(src.sequences.size());
    std::vector<int> order(static_cast<std::size_t>(channels));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double da = mean_delta[a], db = mean_delta[b];
      return da > db || (da == db && a < b);
    });
    std::string csv = "rank,channel,delta\n";
    for (int r = 0; r < channels; ++r)
      csv += std::to_string(r + 1) + "," + std::to_string(order[r]) + "," +
             fmt_g17(mean_delta[order[r]]) + "\n";
    write_text_file(out_file, csv);
    return;
  }

  // gamma-sweep
  const GammaSweepResult sweep = gamma_sweep(src.sequences, src.tracker, default_gamma_grid(),
                                             cfg.metrics.fail_threshold);
  std::string csv = "gamma,eao_lite\n";
  for (const auto& [g, e] : sweep.curve) csv += fmt_g9(g) + "," + fmt_g17(e) + "\n";
  write_text_file(out_file, csv);
}

}  // namespace uptrack
