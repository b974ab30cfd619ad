#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "../support/gradient_oracle.hpp"
#include "smartpilot/datagen/assembly.hpp"
#include "smartpilot/kernel/checkpoint.hpp"
#include "smartpilot/predictx/ablation.hpp"
#include "smartpilot/predictx/checkpoint.hpp"
#include "smartpilot/predictx/io.hpp"
#include "smartpilot/predictx/metrics.hpp"

using namespace smartpilot;
using namespace smartpilot::predictx;

namespace {

datagen::AssemblyData small_data(std::size_t n = 80, std::uint64_t seed = 9) {
  datagen::GenConfig g;
  g.seed = seed;
  g.n_windows = n;
  g.window_len = 6;
  g.image_feature_dim = 8;
  return datagen::gen_assembly(g);
}

FusionConfig small_config() {
  FusionConfig cfg;
  cfg.train.epochs = 3;
  cfg.autoencoder_epochs = 3;
  cfg.image_epochs = 3;
  cfg.ae_hidden = 8;
  cfg.latent = 4;
  cfg.head_hidden = 8;
  return cfg;
}

SensorWindow constant_window(double v, std::size_t len = 4, std::size_t ch = 3) {
  SensorWindow w;
  w.window_len = len;
  w.n_channels = ch;
  w.frames.assign(len * ch, v);
  w.state_ids.assign(len, "S00");
  return w;
}

// Confusion-matrix metrics written independently of compute_metrics.
WeightedMetrics oracle_metrics(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& label,
                               std::size_t k) {
  std::vector<std::vector<double>> cm(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < pred.size(); ++i) cm[label[i]][pred[i]] += 1.0;
  WeightedMetrics m;
  double diag = 0.0, n = static_cast<double>(pred.size());
  for (std::size_t c = 0; c < k; ++c) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cm[c][j];
      col += cm[j][c];
    }
    diag += cm[c][c];
    const double p = col == 0.0 ? 0.0 : cm[c][c] / col;
    const double r = row == 0.0 ? 0.0 : cm[c][c] / row;
    const double f = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
    m.precision += row / n * p;
    m.recall += row / n * r;
    m.f1 += row / n * f;
  }
  m.accuracy = diag / n;
  return m;
}

}  // namespace

TEST(Metrics, PerfectClassifier) {
  std::vector<AnomalyClass> l{AnomalyClass::Normal, AnomalyClass::NoNose, AnomalyClass::NoBody2};
  const auto m = compute_weighted_metrics(l, l);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.support, 3u);
  EXPECT_EQ(m.per_class.size(), 7u);
}

TEST(Metrics, AllNormalOnNoNose) {
  std::vector<AnomalyClass> p(5, AnomalyClass::Normal), l(5, AnomalyClass::NoNose);
  const auto m = compute_weighted_metrics(p, l);
  EXPECT_EQ(m.accuracy, 0.0);
  EXPECT_EQ(m.recall, 0.0);
}

TEST(Metrics, HandBuiltTenSamples) {
  // labels: 4 Normal, 3 NoNose, 3 NoBody1.
  // Normal -> N,N,N,NoNose ; NoNose -> NoNose,NoNose,N ; NoBody1 -> NoBody1,NoNose,NoBody1
  using A = AnomalyClass;
  std::vector<A> l{A::Normal, A::Normal, A::Normal, A::Normal, A::NoNose, A::NoNose, A::NoNose, A::NoBody1, A::NoBody1, A::NoBody1};
  std::vector<A> p{A::Normal, A::Normal, A::Normal, A::NoNose, A::NoNose, A::NoNose, A::Normal, A::NoBody1, A::NoNose, A::NoBody1};
  const auto m = compute_weighted_metrics(p, l);
  // Normal: P 3/4 R 3/4 ; NoNose: P 2/4 R 2/3 ; NoBody1: P 1 R 2/3.
  const double f_n = 0.75, f_nn = 2 * 0.5 * (2.0 / 3) / (0.5 + 2.0 / 3), f_b1 = 2 * (2.0 / 3) / (1 + 2.0 / 3);
  EXPECT_NEAR(m.precision, 0.4 * 0.75 + 0.3 * 0.5 + 0.3 * 1.0, 1e-12);
  EXPECT_NEAR(m.recall, 0.4 * 0.75 + 0.3 * (2.0 / 3) + 0.3 * (2.0 / 3), 1e-12);
  EXPECT_NEAR(m.f1, 0.4 * f_n + 0.3 * f_nn + 0.3 * f_b1, 1e-12);
  EXPECT_NEAR(m.accuracy, 0.7, 1e-12);
  EXPECT_EQ(m.find("NoBody2")->support, 0u);
  EXPECT_EQ(m.find("NoBody2")->f1, 0.0);
}

TEST(Metrics, MatchesConfusionMatrixOnRandomSmallSets) {
  kernel::CounterRng rng(17, "test/metrics");
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<std::size_t> p(n), l(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.below(kClassCount);
      l[i] = rng.below(kClassCount);
    }
    const auto got = compute_metrics(p, l, class_names());
    const auto want = oracle_metrics(p, l, kClassCount);
    ASSERT_NEAR(got.precision, want.precision, 1e-12);
    ASSERT_NEAR(got.recall, want.recall, 1e-12);
    ASSERT_NEAR(got.f1, want.f1, 1e-12);
    ASSERT_NEAR(got.accuracy, want.accuracy, 1e-12);
  }
}

TEST(Metrics, LengthMismatchIsInputError) {
  std::vector<AnomalyClass> p(2), l(3);
  EXPECT_THROW(compute_weighted_metrics(p, l), InputError);
  EXPECT_THROW(compute_weighted_metrics({}, {}), InputError);
}

TEST(Metrics, DetectionViewIsBinary) {
  using A = AnomalyClass;
  std::vector<A> p{A::NoBody1, A::Normal}, l{A::NoNose, A::Normal};
  const auto m = compute_detection_metrics(p, l);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.per_class.size(), 2u);
}

TEST(Types, ArgmaxTiesResolveInEnumerationOrder) {
  std::array<double, kClassCount> p{};
  p.fill(1.0 / 7);
  EXPECT_EQ(argmax_class(p), AnomalyClass::Normal);
  p[3] = p[5] = 0.3;
  EXPECT_EQ(argmax_class(p), AnomalyClass::NoBody2);
}

TEST(Autoencoder, ConstantWindowsReconstruct) {
  std::vector<SensorWindow> ws;
  for (int i = 0; i < 16; ++i) ws.push_back(constant_window(7.5));
  FusionConfig cfg;
  const auto ae = train_autoencoder(ws, cfg);
  EXPECT_LT(ae.reconstruction_mse(ws), 1e-3);
}

TEST(Autoencoder, ReducesReconstructionError) {
  const auto data = small_data(120);
  std::vector<SensorWindow> ws;
  for (const auto& s : data.dataset.samples) ws.push_back(s.window);
  FusionConfig cfg = small_config();
  const double before = train_autoencoder(ws, cfg, 0).reconstruction_mse(ws);
  const double after = train_autoencoder(ws, cfg, 20).reconstruction_mse(ws);
  EXPECT_LT(after, before);
}

TEST(Autoencoder, ZeroEpochsIsInitialization) {
  std::vector<SensorWindow> ws{constant_window(1.0)};
  FusionConfig cfg;
  EXPECT_EQ(train_autoencoder(ws, cfg, 0), init_autoencoder(ws, cfg));
}

TEST(Autoencoder, Deterministic) {
  const auto data = small_data(40);
  std::vector<SensorWindow> ws;
  for (const auto& s : data.dataset.samples) ws.push_back(s.window);
  const auto cfg = small_config();
  EXPECT_EQ(train_autoencoder(ws, cfg), train_autoencoder(ws, cfg));
}

TEST(Autoencoder, InconsistentChannelsRejected) {
  std::vector<SensorWindow> ws{constant_window(1.0, 4, 3), constant_window(1.0, 4, 2)};
  EXPECT_THROW(train_autoencoder(ws, FusionConfig{}), InputError);
  EXPECT_THROW(train_autoencoder(std::vector<SensorWindow>{}, FusionConfig{}), InputError);
}

TEST(Fusion, ProbabilitiesFormSimplexAndPredictIsPure) {
  const auto data = small_data();
  for (auto v : kAllVariants) {
    const auto m = init_fusion_model(v, data.dataset, small_config());
    const auto& s = data.dataset.samples.front();
    auto a = fuse_predict(m, s.window, s.image);
    auto b = fuse_predict(m, s.window, s.image);
    double sum = 0.0;
    for (double p : a.class_probs) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9) << to_string(v);
    EXPECT_EQ(a.next_frame.size(), data.dataset.channel_names.size());
    a.latency_ms = b.latency_ms = 0.0;
    EXPECT_EQ(nlohmann::json(to_json(a)), nlohmann::json(to_json(b)));
    EXPECT_EQ(a.predicted_class, argmax_class(a.class_probs));
  }
}

TEST(Fusion, DimensionMismatchIsInputError) {
  const auto data = small_data();
  const auto m = init_fusion_model(FusionVariant::P1, data.dataset, small_config());
  auto s = data.dataset.samples.front();
  auto img = s.image;
  img.vector.pop_back();
  EXPECT_THROW(fuse_predict(m, s.window, img), InputError);
  auto w = s.window;
  w.frames.resize(w.frames.size() - w.n_channels);
  w.window_len -= 1;
  EXPECT_THROW(fuse_predict(m, w, s.image), InputError);
}

TEST(Fusion, VariantStructure) {
  const auto data = small_data();
  const auto cfg = small_config();
  const auto b1 = init_fusion_model(FusionVariant::B1, data.dataset, cfg);
  EXPECT_TRUE(b1.image_branch.layers.empty());
  EXPECT_EQ(b1.head_input_dim(), 2 * data.dataset.channel_names.size());
  const auto b2 = train_fusion(FusionVariant::B2, data.dataset, nullptr, cfg);
  EXPECT_TRUE(b2.model.encoder.layers.empty());
  EXPECT_TRUE(b2.model.head.layers.empty());
  EXPECT_FALSE(b2.model.image_branch.layers.empty());
}

TEST(Fusion, P3LossMatchesHandComputation) {
  const auto data = small_data();
  FusionConfig cfg = small_config();
  cfg.channel_weights = {1, 2, 0.5, 1, 1, 3, 1, 1, 1, 0.25, 1, 1};
  cfg.penalty_weight = 0.7;
  cfg.classification_weight = 1.3;
  const auto m = init_fusion_model(FusionVariant::P3, data.dataset, cfg);
  std::size_t checked_violating = 0;
  for (const auto& s : data.dataset.samples) {
    const FusionPass p = run_fusion(m, s.window, s.image);
    // Scalar oracle: WMSE in standardized units, hinge on raw units, CE on softmax.
    double num = 0.0, den = 0.0, hinge = 0.0;
    for (std::size_t c = 0; c < m.n_channels; ++c) {
      const double target = (s.next_frame[c] - m.scaler.mean[c]) / m.scaler.scale[c];
      const double pred_std = p.predicted[c];
      num += cfg.channel_weights[c] * (pred_std - target) * (pred_std - target);
      den += cfg.channel_weights[c];
      const double raw = pred_std * m.scaler.scale[c] + m.scaler.mean[c];
      const auto& r = data.ontology.range(s.next_state, m.channel_names[c]);
      if (raw < r.lo) hinge += (r.lo - raw) * (r.lo - raw);
      if (raw > r.hi) hinge += (raw - r.hi) * (raw - r.hi);
    }
    double zmax = p.logits[0];
    for (double z : p.logits) zmax = std::max(zmax, z);
    double zsum = 0.0;
    for (double z : p.logits) zsum += std::exp(z - zmax);
    const double ce = -(p.logits[index_of(s.window.label)] - zmax - std::log(zsum));
    const double expected = num / den + 0.7 * hinge + 1.3 * ce;
    const auto b = sample_loss(m, p, s, &data.ontology, cfg);
    ASSERT_NEAR(b.total, expected, 1e-10);
    if (hinge > 0.0) ++checked_violating;
  }
  EXPECT_GT(checked_violating, 0u);
}

TEST(Fusion, P3LossEqualsP2FormIffInRange) {
  const auto data = small_data();
  const auto cfg = small_config();
  auto p3 = init_fusion_model(FusionVariant::P3, data.dataset, cfg);
  auto p2 = p3;
  p2.variant = FusionVariant::P2;
  for (const auto& s : data.dataset.samples) {
    const auto l3 = sample_loss(p3, s, &data.ontology, cfg);
    const auto l2 = sample_loss(p2, s, &data.ontology, cfg);
    ASSERT_GE(l3.total, l2.total);
    const auto frame = run_fusion(p3, s.window, s.image).next_frame;
    const bool in_range = ontology::range_penalty(frame, p3.channel_names, s.next_state, data.ontology) == 0.0;
    ASSERT_EQ(l3.total == l2.total, in_range);
  }
}

TEST(Fusion, GradientsMatchFiniteDifferences) {
  const auto data = small_data(10);
  FusionConfig cfg = small_config();
  cfg.penalty_weight = 0.5;
  for (auto v : {FusionVariant::B1, FusionVariant::P1, FusionVariant::P3, FusionVariant::B2}) {
    auto m = init_fusion_model(v, data.dataset, cfg);
    if (!m.head.layers.empty()) m.head.layers[0].spec.activation = kernel::Activation::tanh;  // smooth for differences
    const auto& s = data.dataset.samples[3];
    FusionGradients g = zero_gradients(m);
    accumulate_gradients(m, s, &data.ontology, cfg, g);
    auto check = [&](Network FusionModel::*part, const kernel::GradientSet& gs) {
      auto loss = [&](const Network& net) {
        FusionModel copy = m;
        copy.*part = net;
        return sample_loss(copy, s, &data.ontology, cfg).total;
      };
      const auto numeric = oracle::central_differences(m.*part, loss, 1e-6);
      std::size_t k = 0;
      for (std::size_t li = 0; li < (m.*part).layers.size(); ++li) {
        const auto& layer = (m.*part).layers[li];
        if (!layer.has_params() || !layer.spec.trainable) continue;
        const auto* pg = gs.find(li);
        ASSERT_NE(pg, nullptr);
        std::vector<double> analytic = pg->weight.values;
        analytic.insert(analytic.end(), pg->bias.values.begin(), pg->bias.values.end());
        ASSERT_EQ(analytic.size(), numeric[k].size());
        for (std::size_t i = 0; i < analytic.size(); ++i)
          EXPECT_LT(std::abs(analytic[i] - numeric[k][i]), 1e-6 + 1e-4 * std::abs(numeric[k][i]))
              << to_string(v) << " layer " << li << " param " << i;
        ++k;
      }
    };
    if (v != FusionVariant::B2) {
      check(&FusionModel::encoder, g.encoder);
      check(&FusionModel::decoder, g.decoder);
      check(&FusionModel::head, g.head);
    }
    if (uses_image(v)) check(&FusionModel::image_branch, g.image_branch);
  }
}

TEST(Fusion, FrozenEncoderHashUnchangedAfterTenEpochs) {
  const auto data = small_data();
  FusionConfig cfg = small_config();
  cfg.train.epochs = 10;
  const Pretrained pre = pretrain(data.dataset, cfg);
  const auto before = kernel::parameter_hash(pre.autoencoder.encoder);
  for (auto v : {FusionVariant::P2, FusionVariant::P3}) {
    const auto t = train_fusion(v, data.dataset, &data.ontology, cfg, &pre);
    EXPECT_EQ(kernel::parameter_hash(t.model.encoder), before) << to_string(v);
    EXPECT_NE(kernel::parameter_hash(t.model.decoder), kernel::parameter_hash(init_fusion_model(v, data.dataset, cfg, &pre.autoencoder).decoder));
  }
  const auto p1 = train_fusion(FusionVariant::P1, data.dataset, &data.ontology, cfg, &pre);
  EXPECT_NE(kernel::parameter_hash(p1.model.encoder), before);
}

TEST(Fusion, P3WithoutRangesFailsBeforeTraining) {
  auto data = small_data();
  const auto& states = data.ontology.states();
  std::vector<ontology::CycleState> kept(states.begin(), states.begin() + 3);
  const ontology::ProcessOntology partial("1", "f", kept);
  EXPECT_THROW(train_fusion(FusionVariant::P3, data.dataset, &partial, small_config()), LookupError);
  EXPECT_THROW(train_fusion(FusionVariant::P3, data.dataset, nullptr, small_config()), InputError);
}

TEST(Fusion, TrainingReducesLoss) {
  const auto data = small_data(200);
  FusionConfig cfg = small_config();
  cfg.train.epochs = 15;
  const auto t = train_fusion(FusionVariant::P3, data.dataset, &data.ontology, cfg);
  ASSERT_EQ(t.loss_history.size(), 15u);
  EXPECT_LT(t.loss_history.back(), t.loss_history.front());
}

TEST(Fusion, PlantedNoNoseRecognisedAfterP3Training) {
  datagen::GenConfig g;  // defaults, seed 42
  const auto data = datagen::gen_assembly(g);
  const auto split = split_dataset(data.dataset, 0.8, g.seed);
  const auto t = train_fusion(FusionVariant::P3, split.train, &data.ontology, FusionConfig{});
  // Clean planted case from the same generator (same ontology and camera
  // directions): nose visible to sensors and camera, nothing else missing.
  // Windows past index 2000 use per-window streams the training set never saw.
  datagen::GenConfig clean = g;
  clean.n_windows = 2200;
  clean.sensor_visibility = clean.image_visibility = 1.0;
  clean.anomaly_mix = {{AnomalyClass::NoNose, 1.0}};
  const auto planted = datagen::gen_assembly(clean);
  std::size_t hits = 0, total = 0;
  for (std::size_t i = g.n_windows; i < planted.dataset.samples.size(); ++i, ++total) {
    const auto& s = planted.dataset.samples[i];
    hits += fuse_predict(t.model, s.window, s.image).predicted_class == AnomalyClass::NoNose;
  }
  // Per-window contract checked as a majority over 200 independent plants.
  EXPECT_GT(static_cast<double>(hits) / static_cast<double>(total), 0.5);
}

TEST(Ablation, DeterministicReport) {
  const auto data = small_data(60);
  const auto cfg = small_config();
  const auto a = run_ablation(data.dataset, data.ontology, cfg, 5);
  const auto b = run_ablation(data.dataset, data.ontology, cfg, 5);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a.variants.size(), 5u);
  EXPECT_TRUE(a.at(FusionVariant::B2).detection_only);
  ASSERT_TRUE(a.p1_zero_image.has_value());
  EXPECT_EQ(a.train_size + a.test_size, 60u);
  const auto table = format_table(a);
  for (auto c : kAllClasses) EXPECT_NE(table.find(to_string(c)), std::string::npos);
}

TEST(DatasetFiles, RoundTrip) {
  const auto data = small_data(12);
  const auto dir = std::filesystem::temp_directory_path() / "smartpilot_dataset_test";
  std::filesystem::remove_all(dir);
  write_dataset(data.dataset, dir);
  const auto back = read_dataset(dir);
  EXPECT_EQ(back.channel_names, data.dataset.channel_names);
  ASSERT_EQ(back.samples.size(), data.dataset.samples.size());
  for (std::size_t i = 0; i < back.samples.size(); ++i) EXPECT_EQ(back.samples[i], data.dataset.samples[i]) << i;
  std::filesystem::remove_all(dir);
}

TEST(DatasetFiles, MissingImageRowIsValidationError) {
  const auto data = small_data(3);
  const auto dir = std::filesystem::temp_directory_path() / "smartpilot_dataset_bad";
  std::filesystem::remove_all(dir);
  write_dataset(data.dataset, dir);
  std::ofstream(dir / kImageFile) << "timestamp\tsource_camera\tfeatures\n";
  EXPECT_THROW(read_dataset(dir), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, FusionModelRoundTripsEveryVariant) {
  const auto data = small_data(40);
  const auto dir = std::filesystem::temp_directory_path() / "smartpilot_fusion_ckpt";
  std::filesystem::create_directories(dir);
  for (auto v : kAllVariants) {
    const auto m = init_fusion_model(v, data.dataset, small_config());
    const auto path = (dir / (std::string(to_string(v)) + ".json")).string();
    save_fusion_model(m, path);
    const auto back = load_fusion_model(path);
    EXPECT_EQ(back, m) << to_string(v);
    const auto& s = data.dataset.samples.front();
    EXPECT_EQ(fuse_predict(back, s.window, s.image).class_probs, fuse_predict(m, s.window, s.image).class_probs);
  }
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, FusionModelRejectsForeignDocuments) {
  EXPECT_THROW(fusion_model_from_json(nlohmann::json{{"format", "other"}}), ValidationError);
  auto j = to_json(init_fusion_model(FusionVariant::P1, small_data(20).dataset, small_config()));
  j.erase("scaler");
  EXPECT_THROW(fusion_model_from_json(j), ValidationError);
  j = to_json(init_fusion_model(FusionVariant::P1, small_data(20).dataset, small_config()));
  j["channel_names"].erase(0);
  EXPECT_THROW(fusion_model_from_json(j), ValidationError);
}
