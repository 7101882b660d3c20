#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "biastransfer/checkpoint.hpp"
#include "biastransfer/errors.hpp"
#include "biastransfer/full_resolution.hpp"
#include "biastransfer/selection.hpp"
#include "biastransfer/training.hpp"
#include "test_support.hpp"

using namespace bt;
using bt::testing::random_image;
using bt::testing::smooth_image;
using bt::testing::TempDir;

namespace {

constexpr int kSide = 32;

// Domain 1 is domain 0 with a red offset; both symmetric range.
TrainingData toy_data(int per_split, std::uint64_t seed) {
  TrainingData d;
  d.domain_names = {"NEW", "TAR"};
  d.train.resize(2);
  d.val.resize(2);
  std::uint64_t s = seed;
  for (auto* split : {&d.train, &d.val}) {
    for (int i = 0; i < per_split; ++i) {
      const Image img = smooth_image(kSide, kSide, 3, ++s);
      Tensor a = to_model_input(img, kSide);
      Tensor b = a;
      for (int p = 0; p < kSide * kSide; ++p) b.data()[p] = std::min(1.0f, b.data()[p] + 0.4f);
      (*split)[0].push_back(std::move(a));
      (*split)[1].push_back(std::move(b));
    }
  }
  return d;
}

BundleSpec small_spec(Architecture arch, std::uint64_t seed) {
  BundleSpec s = default_bundle_spec(arch, kSide, 4);
  s.seed = seed;
  return s;
}

TrainConfig short_config(Architecture arch, int epochs) {
  TrainConfig c = desk_train_config(arch);
  c.epochs = epochs;
  c.lr_steady_epochs = epochs;
  c.seeds = {1};
  c.collapse_samples = 4;
  return c;
}

RunManifest manifest_with_losses(const std::vector<double>& losses) {
  RunManifest m;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    EpochRecord r;
    r.epoch = static_cast<int>(e);
    r.val_loss = losses[e];
    m.history.push_back(r);
  }
  return m;
}

MetricReport val_report(double fid, double ssim) {
  MetricReport r;
  r.split = Split::val;
  r.fid = fid;
  r.ssim_mean = ssim;
  return r;
}

}  // namespace

// ------------------------------------------------------------- schedule

TEST(LrSchedule, FullScale) {
  const TrainConfig c = default_train_config(Architecture::cyclegan);
  for (int e : {0, 50, 99}) EXPECT_DOUBLE_EQ(lr_schedule(e, c), 0.0005);
  EXPECT_NEAR(lr_schedule(150, c), 0.00025, 1e-15);
  EXPECT_NEAR(lr_schedule(200, c), 0.0, 1e-15);
  for (int e = 100; e < 200; ++e) EXPECT_LE(lr_schedule(e + 1, c), lr_schedule(e, c));
  EXPECT_DOUBLE_EQ(default_train_config(Architecture::fpg).lr_initial, 0.0001);
}

TEST(LrSchedule, DeskProfile) {
  const TrainConfig c = desk_train_config(Architecture::unet_cyclegan);
  EXPECT_EQ(c.epochs, 30);
  EXPECT_EQ(c.lr_steady_epochs, 15);
  EXPECT_DOUBLE_EQ(lr_schedule(14, c), c.lr_initial);
  EXPECT_NEAR(lr_schedule(30, c), 0.0, 1e-15);
}

TEST(TrainConfigJson, RoundTripAndValidation) {
  TrainConfig c = desk_train_config(Architecture::cyclegan);
  c.weights.lambda_cyc = 7.0;
  const TrainConfig back = train_config_from_json(to_json(c), TrainConfig{});
  EXPECT_EQ(to_json(back), to_json(c));
  TrainConfig bad = c;
  bad.lr_steady_epochs = c.epochs + 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

// ------------------------------------------------------------- selection

TEST(Selection, ArgminPicksLowestFirstOnTies) {
  EXPECT_EQ(argmin_val_epoch(manifest_with_losses({3, 1, 2})), 1);
  EXPECT_EQ(argmin_val_epoch(manifest_with_losses({5, 4, 3, 2, 1})), 4);
  EXPECT_EQ(argmin_val_epoch(manifest_with_losses({2, 1, 1})), 1);
  EXPECT_THROW(argmin_val_epoch(RunManifest{}), DataError);
}

TEST(Selection, ArgminMatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + trial % 17);
    for (double& x : v) x = rng.uniform();
    int best = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      bool lowest = true;
      for (std::size_t j = 0; j < v.size(); ++j) lowest = lowest && v[i] <= v[j];
      if (lowest) {
        best = static_cast<int>(i);
        break;
      }
    }
    EXPECT_EQ(argmin_val_epoch(manifest_with_losses(v)), best);
  }
}

TEST(Selection, AcrossRunsByValidationFid) {
  std::vector<RunManifest> runs = {manifest_with_losses({3, 1, 2}), manifest_with_losses({1, 2}),
                                   manifest_with_losses({2, 2, 0.5})};
  for (std::size_t i = 0; i < runs.size(); ++i) runs[i].seed = 10 + i;
  const std::vector<double> fid = {4.0, 2.0, 2.0};
  const std::vector<double> ssim = {0.9, 0.7, 0.8};
  std::vector<int> asked;
  const Selection s = select_best(runs, [&](const RunManifest& m, int epoch) {
    asked.push_back(epoch);
    const std::size_t i = m.seed - 10;
    return val_report(fid[i], ssim[i]);
  });
  EXPECT_EQ(asked, (std::vector<int>{1, 0, 2}));
  EXPECT_EQ(s.run_index, 2u);
  EXPECT_EQ(s.seed, 12u);
  EXPECT_EQ(s.epoch, 2);
}

TEST(Selection, TestSplitIsUnreachable) {
  const std::vector<RunManifest> runs = {manifest_with_losses({1})};
  EXPECT_THROW(select_best(runs, [](const RunManifest&, int) {
                 require_test_access("test metrics");
                 return val_report(1, 1);
               }),
               ContractError);
  EXPECT_THROW(select_best(runs, [](const RunManifest&, int) {
                 MetricReport r = val_report(1, 1);
                 r.split = Split::test;
                 return r;
               }),
               ContractError);
  EXPECT_FALSE(SelectionScope::active());
  EXPECT_NO_THROW(require_test_access("after selection"));
}

// ------------------------------------------------------------- manifest

TEST(Manifest, JsonRoundTrip) {
  RunManifest m = manifest_with_losses({0.5, 0.25});
  m.architecture = "cyclegan";
  m.extra_mode = "structure";
  m.seed = 4;
  m.config = {{"a", 1}};
  m.config_hash = config_hash(m.config);
  m.selected_epoch = 1;
  m.selected_val_loss = 0.25;
  m.history[1].terms = {{"cyc", 0.1}};
  m.mode_collapse = true;
  m.collapse_epoch = 1;
  m.status = "completed";
  TempDir dir("manifest");
  save_manifest(dir.path() / "m.json", m);
  const RunManifest back = load_manifest(dir.path() / "m.json");
  EXPECT_EQ(to_json(back), to_json(m));
  EXPECT_EQ(back.history[1].terms.at("cyc"), 0.1);

  RunManifest bad = m;
  bad.selected_epoch = 7;
  EXPECT_THROW(bad.validate(), ContractError);
  EXPECT_NE(config_hash({{"a", 1}}), config_hash({{"a", 2}}));
  EXPECT_EQ(config_hash({{"a", 1}, {"b", 2}}), config_hash({{"b", 2}, {"a", 1}}));
}

// ------------------------------------------------------------- training

TEST(Training, OneEpochSmokeWritesArtifacts) {
  const TrainingData data = toy_data(4, 1);
  ModelBundle bundle = make_bundle(small_spec(Architecture::unet_cyclegan, 1));
  TrainConfig cfg = short_config(Architecture::unet_cyclegan, 1);
  TempDir dir("train");
  int callbacks = 0;
  TrainOptions opts;
  opts.run_dir = dir.path();
  opts.on_epoch = [&](const RunManifest&, const EpochRecord&) { ++callbacks; };
  const RunManifest m = train(data, bundle, cfg, opts);
  EXPECT_EQ(callbacks, 1);
  ASSERT_EQ(m.history.size(), 1u);
  EXPECT_EQ(m.status, "completed");
  EXPECT_EQ(m.selected_epoch, 0);
  EXPECT_TRUE(std::isfinite(m.history[0].generator_loss));
  EXPECT_TRUE(std::isfinite(m.history[0].discriminator_loss));
  EXPECT_GT(m.history[0].output_std, 0.0);
  EXPECT_TRUE(std::filesystem::exists(m.checkpoint));
  EXPECT_GT(m.generator_parameters, 0u);
  std::ifstream csv(dir.path() / "losses.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header.rfind("epoch,lr,generator_loss,discriminator_loss,val_loss,output_std", 0), 0u);
  EXPECT_EQ(row.rfind("0,", 0), 0u);
}

TEST(Training, SameSeedIsBitwiseReproducible) {
  const TrainingData data = toy_data(3, 2);
  const TrainConfig cfg = short_config(Architecture::cyclegan, 1);
  ModelBundle a = make_bundle(small_spec(Architecture::cyclegan, 5));
  ModelBundle b = make_bundle(small_spec(Architecture::cyclegan, 5));
  const RunManifest ma = train(data, a, cfg);
  const RunManifest mb = train(data, b, cfg);
  EXPECT_EQ(ma.history[0].val_loss, mb.history[0].val_loss);
  EXPECT_EQ(ma.history[0].generator_loss, mb.history[0].generator_loss);
  const auto pa = a.all_parameters(), pb = b.all_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(std::memcmp(pa[i]->value.data(), pb[i]->value.data(), pa[i]->size() * sizeof(float)), 0);
  }
  ModelBundle c = make_bundle(small_spec(Architecture::cyclegan, 6));
  EXPECT_NE(train(data, c, cfg).history[0].val_loss, ma.history[0].val_loss);
}

TEST(Training, SelectedCheckpointReproducesValidationLoss) {
  const TrainingData data = toy_data(3, 3);
  ModelBundle bundle = make_bundle(small_spec(Architecture::unet_cyclegan, 2));
  TrainConfig cfg = short_config(Architecture::unet_cyclegan, 2);
  cfg.extra.mode = ExtraMode::ms_ssim;
  TempDir dir("ckpt");
  TrainOptions opts;
  opts.run_dir = dir.path();
  const RunManifest m = train(data, bundle, cfg, opts);
  EXPECT_EQ(m.selected_epoch, argmin_val_epoch(m));
  ModelBundle loaded = load_checkpoint(m.checkpoint);
  EXPECT_NEAR(validation_loss(loaded, data, cfg), m.selected_val_loss, 1e-5);
}

TEST(Training, FpgRunsWithCriticSteps) {
  const TrainingData data = toy_data(3, 4);  // 6 critic steps, one generator step
  ModelBundle bundle = make_bundle(small_spec(Architecture::fpg, 3));
  TrainConfig cfg = short_config(Architecture::fpg, 1);
  const RunManifest m = train(data, bundle, cfg);
  EXPECT_EQ(m.architecture, "fpg");
  EXPECT_FALSE(m.replay_buffer);
  EXPECT_TRUE(std::isfinite(m.history[0].val_loss));
  EXPECT_GT(m.history[0].terms.at("domain"), 0.0);
}

TEST(Training, CollapseFlagRecordsFirstEpoch) {
  const TrainingData data = toy_data(4, 5);
  ModelBundle bundle = make_bundle(small_spec(Architecture::cyclegan, 1));
  TrainConfig cfg = short_config(Architecture::cyclegan, 2);
  cfg.collapse_threshold = 1e9;  // every spread is below it
  const RunManifest m = train(data, bundle, cfg);
  EXPECT_TRUE(m.mode_collapse);
  EXPECT_EQ(m.collapse_epoch, 0);

  ModelBundle fresh = make_bundle(small_spec(Architecture::cyclegan, 1));
  cfg.collapse_threshold = 0.0;
  EXPECT_FALSE(train(data, fresh, cfg).mode_collapse);
}

TEST(Training, NonFiniteLossAbortsWithManifest) {
  const TrainingData data = toy_data(2, 6);
  ModelBundle bundle = make_bundle(small_spec(Architecture::cyclegan, 1));
  TrainConfig cfg = short_config(Architecture::cyclegan, 1);
  auto params = bundle.generators[0].parameters();
  params.front()->value[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train(data, bundle, cfg);
    FAIL() << "expected TrainingAborted";
  } catch (const TrainingAborted& e) {
    EXPECT_EQ(e.manifest().status, "aborted");
    EXPECT_NE(e.manifest().diagnostic.find("non-finite"), std::string::npos);
  }
}

TEST(Training, RejectsMismatchedData) {
  TrainingData data = toy_data(2, 7);
  ModelBundle bundle = make_bundle(small_spec(Architecture::cyclegan, 1));
  const TrainConfig cfg = short_config(Architecture::cyclegan, 1);
  data.val[1].clear();
  EXPECT_THROW(train(data, bundle, cfg), DataError);
  data = toy_data(2, 7);
  data.train[0][0] = Tensor(3, 16, 16);
  EXPECT_THROW(train(data, bundle, cfg), DimensionError);
}

// ------------------------------------------------------------- full resolution

TEST(FullResolution, IdentityBaseReproducesInput) {
  const Image img = random_image(256, 256, 3, 11);
  const Image out = transform_full_resolution([](const Image& b) { return b; }, img, 32);
  EXPECT_EQ(out.height(), 256);
  EXPECT_EQ(out.range(), Range::unit);
  EXPECT_LE(bt::testing::max_abs_diff(out, img), 1e-4);
}

TEST(FullResolution, BaseShiftPropagatesUniformly) {
  Image img = random_image(128, 128, 3, 12);
  for (float& v : img.values()) v = 0.2f + 0.6f * v;  // keep clear of clipping
  const Image out = transform_full_resolution(
      [](const Image& b) {
        Image s = b;
        for (float& v : s.values()) v += 0.1f;  // symmetric range
        return s;
      },
      img, 16);
  double worst = 0.0;
  for (std::size_t i = 0; i < img.values().size(); ++i) {
    worst = std::max(worst, std::abs(out.values()[i] - img.values()[i] - 0.05));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(FullResolution, GeneratorAtLargeSize) {
  BundleSpec spec = default_bundle_spec(Architecture::unet_cyclegan, 64, 4);
  ModelBundle bundle = make_bundle(spec);
  const Image img = random_image(1024, 1024, 3, 13);
  const Image out = transform_full_resolution(bundle.generators[0], img);
  EXPECT_EQ(out.height(), 1024);
  EXPECT_EQ(out.width(), 1024);
  EXPECT_EQ(out.channels(), 3);
  for (float v : out.values()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
  EXPECT_THROW(transform_full_resolution(bundle.generators[0], random_image(96, 96, 3, 1)), DimensionError);
}
