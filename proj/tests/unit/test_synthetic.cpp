#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_util.hpp"
#include "uptrack/synthetic.hpp"

namespace up = uptrack;
using testutil::TempDir;

namespace {

up::SceneConfig small_scene(std::uint64_t seed = 1) {
  up::SceneConfig cfg;
  cfg.name = "unit";
  cfg.frame_size = 96;
  cfg.num_frames = 8;
  cfg.object.shape_id = 0;
  cfg.object.base_size = 20.0;
  cfg.object.pattern_seed = 5;
  cfg.motion.max_speed = 2.0;
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace

TEST(SceneValidate, NamesTheOffendingField) {
  up::SceneConfig cfg = small_scene();
  cfg.num_frames = 0;
  try {
    up::validate(cfg);
    FAIL() << "expected validation_error";
  } catch (const up::validation_error& e) {
    EXPECT_NE(std::string(e.what()).find("num_frames"), std::string::npos);
  }

  cfg = small_scene();
  cfg.events.push_back(up::AppearanceEvent{up::EventKind::drift, 5, 99, 0.5});
  try {
    up::validate(cfg);
    FAIL() << "expected validation_error";
  } catch (const up::validation_error& e) {
    EXPECT_NE(std::string(e.what()).find("end_frame"), std::string::npos);
  }

  cfg = small_scene();
  cfg.events.push_back(up::AppearanceEvent{up::EventKind::blur, 1, 3, 1.5});
  EXPECT_THROW(up::validate(cfg), up::validation_error);

  cfg = small_scene();
  cfg.frame_size = 60;  // under 4x base_size
  EXPECT_THROW(up::validate(cfg), up::validation_error);
}

TEST(EventKind, NameRoundTrip) {
  for (const up::EventKind k :
       {up::EventKind::drift, up::EventKind::occlusion, up::EventKind::blur,
        up::EventKind::illumination, up::EventKind::scale})
    EXPECT_EQ(up::event_kind_from_string(up::event_kind_name(k)), k);
  EXPECT_THROW(up::event_kind_from_string("wobble"), up::validation_error);
}

TEST(RenderSequence, DeterministicPerSeed) {
  const up::SceneConfig cfg = small_scene(11);
  const up::SyntheticSequence a = up::render_sequence(cfg);
  const up::SyntheticSequence b = up::render_sequence(cfg);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t f = 0; f < a.frames.size(); ++f)
    EXPECT_EQ(a.frames[f].px, b.frames[f].px) << "frame " << f;
  for (std::size_t f = 0; f < a.gt_boxes.size(); ++f) {
    EXPECT_DOUBLE_EQ(a.gt_boxes[f].x, b.gt_boxes[f].x);
    EXPECT_DOUBLE_EQ(a.gt_boxes[f].y, b.gt_boxes[f].y);
  }

  up::SceneConfig other = small_scene(12);
  const up::SyntheticSequence c = up::render_sequence(other);
  bool any_diff = false;
  for (std::size_t f = 0; f < a.frames.size() && !any_diff; ++f)
    any_diff = a.frames[f].px != c.frames[f].px;
  EXPECT_TRUE(any_diff);
}

TEST(RenderSequence, FramesInRangeBoxesInside) {
  const up::SceneConfig cfg = small_scene(3);
  const up::SyntheticSequence seq = up::render_sequence(cfg);
  ASSERT_EQ(static_cast<int>(seq.frames.size()), cfg.num_frames);
  ASSERT_EQ(seq.frames.size(), seq.gt_boxes.size());
  for (const up::Image& im : seq.frames) {
    EXPECT_EQ(im.h, cfg.frame_size);
    EXPECT_EQ(im.w, cfg.frame_size);
    for (float v : im.px) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
  for (const up::Box& b : seq.gt_boxes) {
    EXPECT_GE(b.x, 0.0);
    EXPECT_GE(b.y, 0.0);
    EXPECT_LE(b.x + b.w, cfg.frame_size);
    EXPECT_LE(b.y + b.h, cfg.frame_size);
    EXPECT_GT(b.w, 0.0);
    EXPECT_GT(b.h, 0.0);
  }
}

TEST(RenderSequence, ObjectIsVisibleAgainstBackground) {
  const up::SceneConfig cfg = small_scene(5);
  const up::SyntheticSequence seq = up::render_sequence(cfg);
  const up::Box& b = seq.gt_boxes[0];
  const up::Image& im = seq.frames[0];
  // Object texture is substantially brighter than the background field.
  const float center = im.at(static_cast<int>(b.cy()), static_cast<int>(b.cx()));
  EXPECT_GT(center, 0.45f);
}

TEST(RenderSequence, NoiseChangesPerFrameWhenEnabled) {
  up::SceneConfig cfg = small_scene(7);
  cfg.motion.max_speed = 0.0;  // keep geometry still so only noise differs
  cfg.noise_sigma = 0.02;
  const up::SyntheticSequence seq = up::render_sequence(cfg);
  EXPECT_NE(seq.frames[1].px, seq.frames[2].px);
}

TEST(RenderSequence, ScaleEventGrowsTheBox) {
  up::SceneConfig cfg = small_scene(9);
  cfg.num_frames = 11;
  cfg.events.push_back(up::AppearanceEvent{up::EventKind::scale, 0, 10, 1.0});
  const up::SyntheticSequence seq = up::render_sequence(cfg);
  // Midway through, sin(pi*progress) peaks: the box should be visibly larger.
  EXPECT_GT(seq.gt_boxes[5].w, seq.gt_boxes[0].w * 1.2);
}

TEST(RenderSequence, OccluderCoversTheBoxOnlyMidCrossing) {
  up::SceneConfig cfg = small_scene(13);
  cfg.num_frames = 6;
  cfg.motion.max_speed = 0.0;
  const up::SceneConfig clean = cfg;
  cfg.events.push_back(up::AppearanceEvent{up::EventKind::occlusion, 1, 5, 0.9});
  const up::SyntheticSequence seq = up::render_sequence(cfg);
  const up::SyntheticSequence ref = up::render_sequence(clean);

  const up::Box& b = seq.gt_boxes[3];  // progress 0.5: occluder centered on the box
  double diff_sum = 0.0;
  int n = 0;
  for (int y = static_cast<int>(b.y) + 1; y < static_cast<int>(b.y + b.h) - 1; ++y)
    for (int x = static_cast<int>(b.x) + 1; x < static_cast<int>(b.x + b.w) - 1; ++x) {
      diff_sum += std::fabs(seq.frames[3].at(y, x) - ref.frames[3].at(y, x));
      ++n;
    }
  EXPECT_GT(diff_sum / n, 0.05);  // interior replaced by the occluder's pattern

  // At progress 0 the occluder has not reached the box yet: identical pixels.
  const int yc = static_cast<int>(b.cy());
  const int xc = static_cast<int>(b.cx());
  EXPECT_FLOAT_EQ(seq.frames[1].at(yc, xc), ref.frames[1].at(yc, xc));
}

// --- patch cropping ---------------------------------------------------------

TEST(CropPatch, ConstantImageStaysConstant) {
  up::Image im = up::make_image(50, 50);
  for (float& v : im.px) v = 0.625f;
  const up::Box box{10, 12, 16, 16};
  const up::Image patch = up::crop_patch(im, box, 2.0, 32);
  ASSERT_EQ(patch.h, 32);
  ASSERT_EQ(patch.w, 32);
  for (float v : patch.px) EXPECT_NEAR(v, 0.625f, 1e-6);
}

TEST(CropPatch, OutOfFrameTapsUseFrameMean) {
  up::Image im = up::make_image(20, 20);
  for (float& v : im.px) v = 1.0f;
  // Box near the corner with a big context: many taps fall outside.
  const up::Image patch = up::crop_patch(im, up::Box{0, 0, 8, 8}, 4.0, 16);
  bool has_fill = false;
  for (float v : patch.px) has_fill = has_fill || std::fabs(v - 1.0f) < 1e-6;
  EXPECT_TRUE(has_fill);
  // Mean of an all-ones image is 1, so even outside taps read 1 here.
  for (float v : patch.px) EXPECT_NEAR(v, 1.0f, 1e-6);
}

TEST(CropPatch, DegenerateBoxThrows) {
  up::Image im = up::make_image(20, 20);
  EXPECT_THROW(up::crop_patch(im, up::Box{5, 5, 0, 4}, 2.0, 8), up::validation_error);
  EXPECT_THROW(up::crop_patch(im, up::Box{5, 5, 4, 4}, 0.5, 8), up::validation_error);
}

TEST(CropPatch, ResamplesAtPixelCenters) {
  // 2x2 checker upsampled 2x: interior samples hit exact source pixels.
  up::Image im = up::make_image(2, 2);
  im.px = {0.0f, 1.0f, 1.0f, 0.0f};
  const up::Image patch = up::crop_patch(im, up::Box{0, 0, 2, 2}, 1.0, 4);
  ASSERT_EQ(patch.h, 4);
  // Sample centers land at source coords {0, .5, 1, 1.5} - .25... verify the
  // corners, which are nearest the original pixel centers.
  EXPECT_LT(patch.at(0, 0), 0.5f);
  EXPECT_GT(patch.at(0, 3), 0.5f);
  EXPECT_GT(patch.at(3, 0), 0.5f);
  EXPECT_LT(patch.at(3, 3), 0.5f);
}

// --- feature extraction ------------------------------------------------------

TEST(FilterBank, ZeroMeanOrthonormalTaps) {
  up::FeatureExtractorConfig cfg;
  cfg.out_channels = 32;
  cfg.filter_bank_seed = 7;
  const up::FilterBank bank = up::make_filter_bank(cfg);
  ASSERT_EQ(bank.channels, 32);
  for (int c = 0; c < bank.channels; ++c) {
    double sum = 0.0, norm2 = 0.0;
    for (int t = 0; t < 25; ++t) {
      sum += bank.tap(t, c);
      norm2 += static_cast<double>(bank.tap(t, c)) * bank.tap(t, c);
    }
    EXPECT_NEAR(sum, 0.0, 1e-4) << "channel " << c;
    EXPECT_NEAR(norm2, 1.0, 1e-4) << "channel " << c;
  }
  // Orthogonality within each Gram-Schmidt block of 24.
  for (int a = 0; a < 24; ++a)
    for (int b = a + 1; b < 24; ++b) {
      double dot = 0.0;
      for (int t = 0; t < 25; ++t)
        dot += static_cast<double>(bank.tap(t, a)) * bank.tap(t, b);
      EXPECT_NEAR(dot, 0.0, 1e-4) << a << " vs " << b;
    }
}

TEST(ExtractFeatures, ShapeAndDeterminism) {
  up::FeatureExtractorConfig cfg;
  cfg.out_spatial = 6;
  cfg.out_channels = 16;
  up::Image patch = up::make_image(48, 48);
  up::SplitMix64 g(3);
  for (float& v : patch.px) v = static_cast<float>(g.uniform());
  const up::Tensor f1 = up::extract_features(patch, cfg);
  const up::Tensor f2 = up::extract_features(patch, cfg);
  EXPECT_EQ(f1.h, 6);
  EXPECT_EQ(f1.w, 6);
  EXPECT_EQ(f1.c, 16);
  EXPECT_TRUE(up::bitwise_equal(f1, f2));
  for (float v : f1.data) EXPECT_GE(v, 0.0f);  // rectified
}

TEST(ExtractFeatures, ConstantPatchGivesZeroResponse) {
  up::FeatureExtractorConfig cfg;
  cfg.out_spatial = 4;
  cfg.out_channels = 8;
  up::Image patch = up::make_image(32, 32);
  for (float& v : patch.px) v = 0.7f;
  const up::Tensor f = up::extract_features(patch, cfg);
  for (float v : f.data) EXPECT_NEAR(v, 0.0f, 1e-5);  // zero-mean filters
}

TEST(ExtractFeatures, DistinguishesPatterns) {
  up::FeatureExtractorConfig cfg;
  cfg.out_spatial = 4;
  cfg.out_channels = 8;
  up::Image a = up::make_image(32, 32), b = up::make_image(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      a.at(y, x) = (x / 4) % 2 == 0 ? 0.2f : 0.8f;
      b.at(y, x) = (y / 4) % 2 == 0 ? 0.2f : 0.8f;
    }
  const up::Tensor fa = up::extract_features(a, cfg);
  const up::Tensor fb = up::extract_features(b, cfg);
  EXPECT_GT(up::l2_distance(fa, fb), 0.01);
}

TEST(ExtractFeatures, RejectsBadInputs) {
  up::FeatureExtractorConfig cfg;
  cfg.out_spatial = 6;
  cfg.out_channels = 8;
  EXPECT_THROW(up::extract_features(up::make_image(48, 32), cfg), up::shape_error);
  EXPECT_THROW(up::extract_features(up::make_image(4, 4), cfg), up::shape_error);
}

// --- persistence -------------------------------------------------------------

TEST(SceneJson, RoundTrip) {
  up::SceneConfig cfg = small_scene(21);
  cfg.events.push_back(up::AppearanceEvent{up::EventKind::drift, 1, 5, 0.25});
  cfg.noise_sigma = 0.01;
  const up::SceneConfig back = up::scene_from_json(up::scene_to_json(cfg));
  EXPECT_EQ(back.name, cfg.name);
  EXPECT_EQ(back.frame_size, cfg.frame_size);
  EXPECT_EQ(back.num_frames, cfg.num_frames);
  EXPECT_EQ(back.object.shape_id, cfg.object.shape_id);
  EXPECT_DOUBLE_EQ(back.object.base_size, cfg.object.base_size);
  EXPECT_EQ(back.object.pattern_seed, cfg.object.pattern_seed);
  EXPECT_DOUBLE_EQ(back.motion.max_speed, cfg.motion.max_speed);
  ASSERT_EQ(back.events.size(), 1u);
  EXPECT_EQ(back.events[0].kind, up::EventKind::drift);
  EXPECT_EQ(back.events[0].start_frame, 1);
  EXPECT_EQ(back.events[0].end_frame, 5);
  EXPECT_DOUBLE_EQ(back.events[0].magnitude, 0.25);
  EXPECT_DOUBLE_EQ(back.noise_sigma, cfg.noise_sigma);
  EXPECT_EQ(back.rng_seed, cfg.rng_seed);
}

TEST(SceneJson, BadKindReported) {
  nlohmann::json j = up::scene_to_json(small_scene());
  j["appearance_events"] = nlohmann::json::array();
  j["appearance_events"].push_back(
      {{"kind", "nope"}, {"start_frame", 0}, {"end_frame", 1}, {"magnitude", 0.5}});
  EXPECT_THROW(up::scene_from_json(j), up::validation_error);
}

TEST(SequenceDir, SaveLoadRoundTrip) {
  TempDir tmp;
  const up::SceneConfig cfg = small_scene(31);
  const up::SyntheticSequence seq = up::render_sequence(cfg);
  up::save_sequence(tmp / "unit", seq, &cfg);

  EXPECT_TRUE(std::filesystem::exists(tmp / "unit" / "000000.pgm"));
  EXPECT_TRUE(std::filesystem::exists(tmp / "unit" / "groundtruth.csv"));
  EXPECT_TRUE(std::filesystem::exists(tmp / "unit" / "scene_config.json"));

  const up::SyntheticSequence back = up::load_sequence(tmp / "unit");
  ASSERT_EQ(back.frames.size(), seq.frames.size());
  EXPECT_EQ(back.name, "unit");
  for (std::size_t f = 0; f < seq.frames.size(); ++f)
    for (std::size_t i = 0; i < seq.frames[f].px.size(); ++i)
      ASSERT_NEAR(back.frames[f].px[i], seq.frames[f].px[i], 0.5 / 255.0 + 1e-6);
  for (std::size_t f = 0; f < seq.gt_boxes.size(); ++f) {
    // Boxes are serialized with 17 significant digits: exact round trip.
    EXPECT_DOUBLE_EQ(back.gt_boxes[f].x, seq.gt_boxes[f].x);
    EXPECT_DOUBLE_EQ(back.gt_boxes[f].y, seq.gt_boxes[f].y);
    EXPECT_DOUBLE_EQ(back.gt_boxes[f].w, seq.gt_boxes[f].w);
    EXPECT_DOUBLE_EQ(back.gt_boxes[f].h, seq.gt_boxes[f].h);
  }
}

TEST(SequenceDir, FrameNamesZeroPadded) {
  EXPECT_EQ(up::frame_file_name(0), "000000.pgm");
  EXPECT_EQ(up::frame_file_name(1234), "001234.pgm");
}
