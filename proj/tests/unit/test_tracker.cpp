#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "uptrack/tracker.hpp"

namespace up = uptrack;
using testutil::TempDir;

namespace {

up::TrackerConfig small_tracker() {
  up::TrackerConfig cfg;
  cfg.feature.out_spatial = 6;
  cfg.feature.out_channels = 8;  // light for unit tests
  return cfg;
}

up::SceneConfig gentle_scene(std::uint64_t seed, int frames = 12) {
  up::SceneConfig cfg;
  cfg.name = "track_unit";
  cfg.frame_size = 96;
  cfg.num_frames = frames;
  cfg.object.base_size = 20.0;
  cfg.object.pattern_seed = 77;
  cfg.motion.max_speed = 0.4;
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace

TEST(TrackerConfig, GeometryHelpers) {
  const up::TrackerConfig cfg = small_tracker();
  EXPECT_EQ(up::feature_cell_px(cfg), 8);
  EXPECT_EQ(up::search_spatial(cfg), 12);
  EXPECT_NO_THROW(up::validate(cfg));
}

TEST(TrackerConfig, ValidationCatchesBadGeometry) {
  up::TrackerConfig cfg = small_tracker();
  cfg.scale_steps = 3;
  EXPECT_THROW(up::validate(cfg), up::validation_error);

  cfg = small_tracker();
  cfg.search_context = 1.5;  // must exceed exemplar context
  EXPECT_THROW(up::validate(cfg), up::validation_error);

  cfg = small_tracker();
  cfg.exemplar_px = 50;  // not a multiple of out_spatial
  EXPECT_THROW(up::validate(cfg), up::validation_error);

  cfg = small_tracker();
  cfg.search_px = 104;  // 13 cells: response loses its center cell
  EXPECT_THROW(up::validate(cfg), up::validation_error);
}

TEST(Locate, CenteredTemplateGivesZeroOffset) {
  // Search features with a bright spot in the center cell; template equals
  // the center crop, so the peak lands at the center and the offset is zero.
  up::SplitMix64 g(5);
  up::Tensor search = up::make_tensor(12, 12, 4);
  for (float& v : search.data) v = static_cast<float>(g.uniform(0.0, 0.1));
  for (int c = 0; c < 4; ++c) search.at(6, 6, c) = 5.0f;

  up::Tensor tpl = up::make_tensor(6, 6, 4);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 4; ++c) tpl.at(y, x, c) = search.at(y + 3, x + 3, c);

  const up::TrackerConfig cfg = small_tracker();
  const up::LocateResult lr = up::locate(tpl, search, cfg);
  EXPECT_EQ(lr.response.h, 7);
  EXPECT_EQ(lr.response.w, 7);
  EXPECT_DOUBLE_EQ(lr.dx, 0.0);
  EXPECT_DOUBLE_EQ(lr.dy, 0.0);
}

TEST(Locate, OffsetScalesWithStride) {
  up::Tensor search = up::make_tensor(12, 12, 2, 0.01f);
  for (int c = 0; c < 2; ++c) search.at(4, 8, c) = 3.0f;  // peak off center
  up::Tensor tpl = up::make_tensor(6, 6, 2, 0.0f);
  for (int c = 0; c < 2; ++c) tpl.at(3, 3, c) = 1.0f;  // matcher for the spot

  const up::TrackerConfig cfg = small_tracker();  // stride 96/12 = 8 px
  const up::LocateResult lr = up::locate(tpl, search, cfg);
  // Peak at response cell (1,5); center is (3,3) -> offset (+2,-2) cells.
  EXPECT_DOUBLE_EQ(lr.dx, 2 * 8.0);
  EXPECT_DOUBLE_EQ(lr.dy, -2 * 8.0);
}

TEST(HannWeight, EndpointsAndCenter) {
  EXPECT_DOUBLE_EQ(up::hann_weight(0, 7), 0.0);
  EXPECT_DOUBLE_EQ(up::hann_weight(6, 7), 0.0);
  EXPECT_NEAR(up::hann_weight(3, 7), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(up::hann_weight(0, 1), 1.0);
}

TEST(InitState, UsesFirstFrameGroundTruth) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(1));
  const up::TrackerConfig cfg = small_tracker();
  const up::TrackerState st = up::init_state(seq, cfg);
  EXPECT_EQ(st.frame_index, 0);
  EXPECT_DOUBLE_EQ(st.last_box.x, seq.gt_boxes[0].x);
  EXPECT_TRUE(up::bitwise_equal(st.t0_gt, st.accum));
  EXPECT_EQ(st.t0_gt.c, cfg.feature.out_channels);
}

TEST(TrackSequence, StaysOnSlowTarget) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(3));
  const up::TrackerConfig cfg = small_tracker();
  const up::TrackResult res =
      up::track_sequence(seq, up::LinearUpdateConfig{0.0102}, cfg);
  ASSERT_EQ(res.boxes.size(), seq.frames.size());
  EXPECT_DOUBLE_EQ(res.overlaps[0], 1.0);
  for (std::size_t f = 1; f < res.overlaps.size(); ++f)
    EXPECT_GT(res.overlaps[f], 0.35) << "frame " << f;
}

TEST(TrackSequence, FirstFrameRowIsGroundTruth) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(5));
  const up::TrackResult res =
      up::track_sequence(seq, up::UpdateStrategy{up::NoUpdate{}}, small_tracker());
  EXPECT_DOUBLE_EQ(res.boxes[0].x, seq.gt_boxes[0].x);
  EXPECT_DOUBLE_EQ(res.deltas[0], 0.0);
}

TEST(TrackSequence, NoUpdateKeepsTemplateFrozen) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(7));
  const up::TrackResult res = up::track_sequence(seq, up::UpdateStrategy{up::NoUpdate{}},
                                                 small_tracker(), /*keep_templates=*/true);
  ASSERT_EQ(res.accum_history.size(), seq.frames.size());
  for (std::size_t f = 1; f < res.accum_history.size(); ++f) {
    EXPECT_TRUE(up::bitwise_equal(res.accum_history[f], res.accum_history[0]));
    EXPECT_DOUBLE_EQ(res.deltas[f], 0.0);
  }
}

TEST(TrackSequence, DeterministicRerun) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(9));
  const up::TrackerConfig cfg = small_tracker();
  const up::TrackResult a = up::track_sequence(seq, up::LinearUpdateConfig{0.05}, cfg, true);
  const up::TrackResult b = up::track_sequence(seq, up::LinearUpdateConfig{0.05}, cfg, true);
  for (std::size_t f = 0; f < a.boxes.size(); ++f) {
    EXPECT_DOUBLE_EQ(a.boxes[f].x, b.boxes[f].x);
    EXPECT_DOUBLE_EQ(a.boxes[f].y, b.boxes[f].y);
    EXPECT_TRUE(up::bitwise_equal(a.accum_history[f], b.accum_history[f]));
  }
}

TEST(TrackSequence, PredictionIgnoresGroundTruthPerturbation) {
  // Poisoning every ground-truth box after frame 0 must not change any
  // predicted box: localization never reads the annotations.
  up::SyntheticSequence seq = up::render_sequence(gentle_scene(11));
  const up::TrackerConfig cfg = small_tracker();
  const up::TrackResult clean = up::track_sequence(seq, up::LinearUpdateConfig{0.0102}, cfg);

  up::SyntheticSequence poisoned = seq;
  for (std::size_t f = 1; f < poisoned.gt_boxes.size(); ++f) {
    poisoned.gt_boxes[f].x = 1.0;
    poisoned.gt_boxes[f].y = 1.0;
  }
  const up::TrackResult dirty = up::track_sequence(poisoned, up::LinearUpdateConfig{0.0102}, cfg);
  for (std::size_t f = 0; f < clean.boxes.size(); ++f) {
    EXPECT_DOUBLE_EQ(clean.boxes[f].x, dirty.boxes[f].x) << "frame " << f;
    EXPECT_DOUBLE_EQ(clean.boxes[f].y, dirty.boxes[f].y) << "frame " << f;
  }
}

// --- reset protocol ----------------------------------------------------------

TEST(VotRun, PerfectTrackingProducesNoFailures) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(13));
  const up::VotResult res =
      up::vot_run(seq, up::LinearUpdateConfig{0.0102}, small_tracker(), 0.0);
  ASSERT_EQ(res.events.size(), seq.frames.size());
  EXPECT_EQ(res.events[0], up::FrameEvent::reinit);
  EXPECT_TRUE(res.failure_frames.empty());
  EXPECT_TRUE(res.reinit_frames.empty());
  for (std::size_t f = 1; f < res.events.size(); ++f)
    EXPECT_EQ(res.events[f], up::FrameEvent::ok);
}

TEST(VotRun, HandTracedScheduleWithMidSequenceFailures) {
  // With the threshold just under 1 every tracked frame fails (the tracker
  // can't produce overlap > 0.95 on a moving target), so the schedule is
  // fully determined: fail at f, skip f+1..f+4, reinit at f+5.
  up::SceneConfig sc = gentle_scene(15, 14);
  sc.motion.max_speed = 2.5;
  const up::SyntheticSequence seq = up::render_sequence(sc);
  const up::VotResult res =
      up::vot_run(seq, up::UpdateStrategy{up::NoUpdate{}}, small_tracker(), 0.95);

  ASSERT_EQ(static_cast<int>(res.events.size()), 14);
  const std::vector<up::FrameEvent> want = {
      up::FrameEvent::reinit,  // 0
      up::FrameEvent::fail,    // 1
      up::FrameEvent::skip,    // 2
      up::FrameEvent::skip,    // 3
      up::FrameEvent::skip,    // 4
      up::FrameEvent::skip,    // 5
      up::FrameEvent::reinit,  // 6
      up::FrameEvent::fail,    // 7
      up::FrameEvent::skip,    // 8
      up::FrameEvent::skip,    // 9
      up::FrameEvent::skip,    // 10
      up::FrameEvent::skip,    // 11
      up::FrameEvent::reinit,  // 12
      up::FrameEvent::fail,    // 13
  };
  for (std::size_t f = 0; f < want.size(); ++f)
    EXPECT_EQ(res.events[f], want[f]) << "frame " << f;
  EXPECT_EQ(res.failure_frames, (std::vector<int>{1, 7, 13}));
  EXPECT_EQ(res.reinit_frames, (std::vector<int>{6, 12}));
}

TEST(VotRun, HandTracedTailSkipWhenReinitWouldOverrun) {
  // Failure at frame 7 of 9 frames: 7+5 = 12 > 8, so the tail is skipped and
  // no reinit happens.
  up::SceneConfig sc = gentle_scene(17, 9);
  sc.motion.max_speed = 2.5;
  const up::SyntheticSequence seq = up::render_sequence(sc);
  const up::VotResult res =
      up::vot_run(seq, up::UpdateStrategy{up::NoUpdate{}}, small_tracker(), 0.95);

  ASSERT_EQ(static_cast<int>(res.events.size()), 9);
  const std::vector<up::FrameEvent> want = {
      up::FrameEvent::reinit, up::FrameEvent::fail, up::FrameEvent::skip,
      up::FrameEvent::skip,   up::FrameEvent::skip, up::FrameEvent::skip,
      up::FrameEvent::reinit, up::FrameEvent::fail, up::FrameEvent::skip,
  };
  for (std::size_t f = 0; f < want.size(); ++f)
    EXPECT_EQ(res.events[f], want[f]) << "frame " << f;
  EXPECT_EQ(res.failure_frames, (std::vector<int>{1, 7}));
  EXPECT_EQ(res.reinit_frames, (std::vector<int>{6}));
}

TEST(VotRun, EveryReinitIsFailurePlusFive) {
  up::SceneConfig sc = gentle_scene(19, 25);
  sc.motion.max_speed = 2.0;
  const up::SyntheticSequence seq = up::render_sequence(sc);
  const up::VotResult res =
      up::vot_run(seq, up::LinearUpdateConfig{0.0102}, small_tracker(), 0.6);
  for (int r : res.reinit_frames) {
    const bool matched =
        std::find(res.failure_frames.begin(), res.failure_frames.end(), r - 5) !=
        res.failure_frames.end();
    EXPECT_TRUE(matched) << "reinit " << r << " has no failure 5 frames earlier";
  }
}

TEST(VotRun, ThresholdRangeValidated) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(21, 6));
  EXPECT_THROW(up::vot_run(seq, up::UpdateStrategy{up::NoUpdate{}}, small_tracker(), 1.0),
               up::validation_error);
  EXPECT_THROW(up::vot_run(seq, up::UpdateStrategy{up::NoUpdate{}}, small_tracker(), -0.1),
               up::validation_error);
}

// --- template series helpers --------------------------------------------------

TEST(GtDrivenTemplates, FollowsAnnotations) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(23, 8));
  const up::TrackerConfig cfg = small_tracker();
  const auto series = up::gt_driven_templates(seq, up::LinearUpdateConfig{0.5}, cfg);
  ASSERT_EQ(series.size(), seq.frames.size());
  // First entry is the initial template; the rest evolve.
  const auto gt = up::gt_templates(seq, cfg);
  EXPECT_TRUE(up::bitwise_equal(series[0], gt[0]));
  EXPECT_GT(up::l2_distance(series[3], series[0]), 0.0);
}

TEST(GtTemplates, OnePerFrame) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(25, 7));
  const auto gt = up::gt_templates(seq, small_tracker());
  ASSERT_EQ(gt.size(), 7u);
  for (const up::Tensor& t : gt) {
    EXPECT_EQ(t.h, 6);
    EXPECT_EQ(t.c, 8);
  }
}

// --- trajectory CSV -----------------------------------------------------------

TEST(TrajectoryCsv, RoundTripExact) {
  TempDir tmp;
  std::vector<up::TrajectoryRow> rows;
  rows.push_back({0, up::Box{1.5, 2.25, 20, 22}, 1.0, up::FrameEvent::reinit});
  rows.push_back({1, up::Box{2.125, 3.0, 20, 22}, 0.73125, up::FrameEvent::ok});
  rows.push_back({2, up::Box{}, 0.0, up::FrameEvent::skip});
  up::write_trajectory_csv(tmp / "t.csv", rows);
  const auto back = up::read_trajectory_csv(tmp / "t.csv");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].frame, rows[i].frame);
    EXPECT_DOUBLE_EQ(back[i].box.x, rows[i].box.x);
    EXPECT_DOUBLE_EQ(back[i].box.w, rows[i].box.w);
    EXPECT_DOUBLE_EQ(back[i].overlap, rows[i].overlap);
    EXPECT_EQ(back[i].event, rows[i].event);
  }
}

TEST(TrajectoryCsv, HeaderEnforced) {
  TempDir tmp;
  up::write_text_file(tmp / "bad.csv", "frame,x,y\n0,1,2\n");
  EXPECT_THROW(up::read_trajectory_csv(tmp / "bad.csv"), up::io_error);
}

TEST(TrajectoryViews, OpeAndVotShapes) {
  const up::SyntheticSequence seq = up::render_sequence(gentle_scene(27, 6));
  const up::TrackerConfig cfg = small_tracker();
  const auto ope = up::ope_trajectory(up::track_sequence(seq, up::LinearUpdateConfig{0.1}, cfg));
  ASSERT_EQ(ope.size(), 6u);
  EXPECT_EQ(ope[0].event, up::FrameEvent::reinit);
  EXPECT_EQ(ope[1].event, up::FrameEvent::ok);

  const auto vot =
      up::vot_trajectory(up::vot_run(seq, up::LinearUpdateConfig{0.1}, cfg, 0.0));
  ASSERT_EQ(vot.size(), 6u);
  EXPECT_EQ(vot[0].frame, 0);
}
