#pragma once

#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "smartpilot/errors.hpp"
#include "smartpilot/kernel/checkpoint.hpp"
#include "smartpilot/kernel/loss.hpp"
#include "smartpilot/kernel/network.hpp"
#include "smartpilot/kernel/train.hpp"
#include "smartpilot/ontology/ontology.hpp"
#include "smartpilot/predictx/types.hpp"

namespace smartpilot::predictx {

using kernel::Activation;
using kernel::Network;
using kernel::Tensor;

/// Per-dimension standardization fit on training data. Dimensions with
/// (near) zero spread keep unit scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  template <typename Rows>
  static Standardizer fit(std::size_t dim, const Rows& rows) {
    Standardizer s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
    std::size_t n = 0;
    for (std::span<const double> r : rows) {
      for (std::size_t i = 0; i < dim; ++i) s.mean[i] += r[i];
      ++n;
    }
    if (n == 0) throw InputError("standardizer: no data");
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (std::span<const double> r : rows)
      for (std::size_t i = 0; i < dim; ++i) s.scale[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
    for (auto& v : s.scale) {
      v = std::sqrt(v / static_cast<double>(n));
      if (v < 1e-9) v = 1.0;
    }
    return s;
  }

  double forward(std::size_t i, double v) const { return (v - mean[i]) / scale[i]; }
  double inverse(std::size_t i, double v) const { return v * scale[i] + mean[i]; }
  std::size_t dim() const { return mean.size(); }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct FusionConfig {
  kernel::TrainConfig train{.learning_rate = 2e-3, .epochs = 30, .batch_size = 32};
  std::size_t autoencoder_epochs = 30;
  std::size_t image_epochs = 30;
  std::size_t ae_hidden = 32;
  std::size_t latent = 8;
  std::size_t image_hidden = 0;  // 0: linear classifier on the features
  std::size_t head_hidden = 32;
  double penalty_weight = 0.1;         // lambda
  double classification_weight = 1.0;  // beta
  std::vector<double> channel_weights; // WMSE weights, empty = all 1
  std::uint64_t seed = 42;

  double lambda() const { return train.weight("penalty", penalty_weight); }
  double beta() const { return train.weight("classification", classification_weight); }
};

/// Time-series autoencoder over a flattened, standardized window.
struct Autoencoder {
  Network encoder;
  Network decoder;
  Standardizer scaler;
  std::size_t window_len = 0;
  std::size_t n_channels = 0;

  Tensor normalize(const SensorWindow& w) const {
    Tensor x({w.window_len * w.n_channels});
    for (std::size_t t = 0; t < w.window_len; ++t)
      for (std::size_t c = 0; c < w.n_channels; ++c)
        x[t * w.n_channels + c] = scaler.forward(c, w.frames[t * w.n_channels + c]);
    return x;
  }

  Tensor reconstruct(const Tensor& x) const { return kernel::forward(decoder, kernel::forward(encoder, x)); }

  double reconstruction_mse(std::span<const SensorWindow> windows) const {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& w : windows) {
      const Tensor x = normalize(w);
      const Tensor r = reconstruct(x);
      for (std::size_t i = 0; i < x.size(); ++i) total += (r[i] - x[i]) * (r[i] - x[i]);
      n += x.size();
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
  }

  friend bool operator==(const Autoencoder&, const Autoencoder&) = default;
};

namespace detail {

inline void check_windows(std::span<const SensorWindow> windows) {
  if (windows.empty()) throw InputError("no windows supplied");
  const auto c = windows.front().n_channels;
  const auto l = windows.front().window_len;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (w.n_channels != c)
      throw InputError("window " + std::to_string(i) + " has " + std::to_string(w.n_channels) +
                       " channels, expected " + std::to_string(c));
    if (w.window_len != l || w.window_len == 0 || w.frames.size() != w.window_len * w.n_channels)
      throw InputError("window " + std::to_string(i) + " has inconsistent length");
  }
}

inline std::vector<std::span<const double>> frame_rows(std::span<const SensorWindow> windows) {
  std::vector<std::span<const double>> rows;
  for (const auto& w : windows)
    for (std::size_t t = 0; t < w.window_len; ++t) rows.push_back(w.frame(t));
  return rows;
}

}  // namespace detail

inline Autoencoder init_autoencoder(std::span<const SensorWindow> windows, const FusionConfig& cfg,
                                    const Standardizer* scaler = nullptr) {
  detail::check_windows(windows);
  Autoencoder ae;
  ae.window_len = windows.front().window_len;
  ae.n_channels = windows.front().n_channels;
  ae.scaler = scaler ? *scaler : Standardizer::fit(ae.n_channels, detail::frame_rows(windows));
  const std::size_t in = ae.window_len * ae.n_channels;
  ae.encoder = kernel::make_network(
      {kernel::dense(in, cfg.ae_hidden, Activation::tanh), kernel::dense(cfg.ae_hidden, cfg.latent, Activation::tanh)},
      cfg.seed ^ 0xae01);
  ae.decoder = kernel::make_network(
      {kernel::dense(cfg.latent, cfg.ae_hidden, Activation::tanh), kernel::dense(cfg.ae_hidden, in)},
      cfg.seed ^ 0xae02);
  return ae;
}

/// Trains encoder + decoder to reconstruct standardized windows (MSE).
/// `epochs` defaults to cfg.autoencoder_epochs; zero returns the initialization.
inline Autoencoder train_autoencoder(std::span<const SensorWindow> windows, const FusionConfig& cfg,
                                     std::optional<std::size_t> epochs = std::nullopt,
                                     const Standardizer* scaler = nullptr) {
  Autoencoder ae = init_autoencoder(windows, cfg, scaler);
  std::vector<kernel::Sample> data;
  data.reserve(windows.size());
  for (const auto& w : windows) {
    Tensor x = ae.normalize(w);
    data.push_back({x, x});
  }
  // Train the stacked network, then split it back.
  Network stacked;
  stacked.seed = cfg.seed;
  stacked.layers = ae.encoder.layers;
  stacked.layers.insert(stacked.layers.end(), ae.decoder.layers.begin(), ae.decoder.layers.end());
  kernel::TrainConfig tc = cfg.train;
  tc.epochs = epochs.value_or(cfg.autoencoder_epochs);
  tc.seed = cfg.seed ^ 0xae03;
  if (tc.epochs > 0) {
    auto result = kernel::train(std::move(stacked), data, tc, kernel::LossSpec::mse());
    const std::size_t n_enc = ae.encoder.layers.size();
    std::copy_n(result.model.layers.begin(), n_enc, ae.encoder.layers.begin());
    std::copy(result.model.layers.begin() + static_cast<std::ptrdiff_t>(n_enc), result.model.layers.end(),
              ae.decoder.layers.begin());
  }
  return ae;
}

/// Decision-level fusion model. The encoder comes from the pretrained
/// autoencoder; the decoder maps the latent code to the next frame. Which
/// parts are present depends on the variant: B1 has no image branch, B2 is
/// the image classifier alone.
struct FusionModel {
  FusionVariant variant = FusionVariant::P1;
  std::size_t window_len = 0;
  std::size_t n_channels = 0;
  std::size_t image_dim = 0;
  std::vector<std::string> channel_names;
  Standardizer scaler;   // sensor channels
  Network encoder;       // window -> latent
  Network decoder;       // latent -> next frame (standardized)
  Standardizer image_scaler;
  Network image_branch;  // image -> class logits
  Network head;          // [next frame, per-channel error vs last frame, image logits] -> logits

  std::size_t head_input_dim() const { return 2 * n_channels + (uses_image(variant) ? kClassCount : 0); }

  Tensor normalize(const SensorWindow& w) const {
    Tensor x({w.window_len * w.n_channels});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = scaler.forward(i % w.n_channels, w.frames[i]);
    return x;
  }

  friend bool operator==(const FusionModel&, const FusionModel&) = default;
};

/// Everything one forward pass produces, in standardized units where noted.
struct FusionPass {
  Tensor x;             // standardized flattened window
  Tensor latent;
  Tensor predicted;     // standardized next frame
  Tensor error;         // per channel, (predicted - last observed)^2
  Tensor image_in;
  Tensor image_logits;
  Tensor head_in;
  std::vector<double> next_frame;  // raw units
  std::array<double, kClassCount> logits{};
  std::array<double, kClassCount> probs{};
  kernel::Tape enc_tape, dec_tape, img_tape, head_tape;
};

namespace detail {

inline std::array<double, kClassCount> softmax(const std::array<double, kClassCount>& z) {
  std::array<double, kClassCount> p{};
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < kClassCount; ++k) sum += (p[k] = std::exp(z[k] - m));
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace detail

inline void check_inputs(const FusionModel& m, const SensorWindow& w, const ImageFeatures& img) {
  if (w.n_channels != m.n_channels || w.window_len != m.window_len || w.frames.size() != w.window_len * w.n_channels)
    throw InputError("window is " + std::to_string(w.window_len) + "x" + std::to_string(w.n_channels) +
                     ", model expects " + std::to_string(m.window_len) + "x" + std::to_string(m.n_channels));
  if (uses_image(m.variant) && img.vector.size() != m.image_dim)
    throw InputError("image features have dim " + std::to_string(img.vector.size()) + ", model expects " +
                     std::to_string(m.image_dim));
}

inline FusionPass run_fusion(const FusionModel& m, const SensorWindow& w, const ImageFeatures& img) {
  check_inputs(m, w, img);
  FusionPass p;
  const std::size_t c = m.n_channels;
  if (uses_image(m.variant)) {
    p.image_in = Tensor({m.image_dim});
    for (std::size_t i = 0; i < m.image_dim; ++i) p.image_in[i] = m.image_scaler.forward(i, img.vector[i]);
    p.image_logits = kernel::forward(m.image_branch, p.image_in, p.img_tape);
  }
  if (m.variant == FusionVariant::B2) {
    for (std::size_t k = 0; k < kClassCount; ++k) p.logits[k] = p.image_logits[k];
    const auto last = w.last_frame();
    p.next_frame.assign(last.begin(), last.end());
  } else {
    p.x = m.normalize(w);
    p.latent = kernel::forward(m.encoder, p.x, p.enc_tape);
    p.predicted = kernel::forward(m.decoder, p.latent, p.dec_tape);
    p.error = Tensor({c});
    const std::size_t last = (m.window_len - 1) * c;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = p.predicted[ch] - p.x[last + ch];
      p.error[ch] = d * d;
    }
    p.head_in = Tensor({m.head_input_dim()});
    for (std::size_t ch = 0; ch < c; ++ch) {
      p.head_in[ch] = p.predicted[ch];
      p.head_in[c + ch] = p.error[ch];
    }
    if (uses_image(m.variant))
      for (std::size_t k = 0; k < kClassCount; ++k) p.head_in[2 * c + k] = p.image_logits[k];
    const Tensor out = kernel::forward(m.head, p.head_in, p.head_tape);
    for (std::size_t k = 0; k < kClassCount; ++k) p.logits[k] = out[k];
    p.next_frame.resize(c);
    for (std::size_t ch = 0; ch < c; ++ch) p.next_frame[ch] = m.scaler.inverse(ch, p.predicted[ch]);
  }
  p.probs = detail::softmax(p.logits);
  return p;
}

/// Next frame + class distribution for one window. Pure apart from latency_ms.
inline PredictionResult fuse_predict(const FusionModel& m, const SensorWindow& w, const ImageFeatures& img) {
  const auto start = std::chrono::steady_clock::now();
  const FusionPass p = run_fusion(m, w, img);
  PredictionResult r;
  r.timestamp = w.timestamp;
  r.state_id = w.state_ids.empty() ? std::string{} : w.state_ids.back();
  r.next_frame = p.next_frame;
  r.class_probs = p.probs;
  r.predicted_class = argmax_class(r.class_probs);
  r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline ontology::Explanation explain(const PredictionResult& prediction, std::span<const double> frame,
                                     std::span<const std::string> channel_names, const std::string& state_id,
                                     const ontology::ProcessOntology& onto) {
  return ontology::explain(is_anomalous(prediction.predicted_class), frame, channel_names, state_id, onto);
}

struct LossBreakdown {
  double wmse = 0.0;
  double penalty = 0.0;
  double cross_entropy = 0.0;
  double total = 0.0;
};

/// Per-sample objective. Regression is WMSE over standardized channels; the
/// range penalty (P3 only) is the quadratic hinge of the raw predicted frame
/// against the ranges of the target frame's state.
inline LossBreakdown sample_loss(const FusionModel& m, const FusionPass& p, const LabeledSample& s,
                                 const ontology::ProcessOntology* onto, const FusionConfig& cfg) {
  LossBreakdown b;
  const std::size_t label = index_of(s.window.label);
  b.cross_entropy = -std::log(p.probs[label]);
  if (m.variant != FusionVariant::B2) {
    std::vector<double> pred(p.predicted.values), target(m.n_channels);
    for (std::size_t c = 0; c < m.n_channels; ++c) target[c] = m.scaler.forward(c, s.next_frame[c]);
    b.wmse = kernel::wmse_value(pred, target, cfg.channel_weights);
    if (uses_range_penalty(m.variant)) {
      if (onto == nullptr) throw InputError("P3 requires a process ontology");
      b.penalty = ontology::range_penalty(p.next_frame, m.channel_names, s.next_state, *onto);
    }
  }
  b.total = b.wmse + cfg.lambda() * b.penalty + (m.variant == FusionVariant::B2 ? 1.0 : cfg.beta()) * b.cross_entropy;
  return b;
}

inline LossBreakdown sample_loss(const FusionModel& m, const LabeledSample& s, const ontology::ProcessOntology* onto,
                                 const FusionConfig& cfg) {
  return sample_loss(m, run_fusion(m, s.window, s.image), s, onto, cfg);
}

/// Gradients of sample_loss for every trainable part of the model.
struct FusionGradients {
  kernel::GradientSet encoder, decoder, image_branch, head;
};

inline FusionGradients zero_gradients(const FusionModel& m) {
  FusionGradients g;
  if (m.variant != FusionVariant::B2) {
    g.encoder = kernel::zero_gradients(m.encoder);
    g.decoder = kernel::zero_gradients(m.decoder);
    g.head = kernel::zero_gradients(m.head);
  }
  if (uses_image(m.variant)) g.image_branch = kernel::zero_gradients(m.image_branch);
  return g;
}

inline double accumulate_gradients(const FusionModel& m, const LabeledSample& s, const ontology::ProcessOntology* onto,
                                   const FusionConfig& cfg, FusionGradients& g) {
  const FusionPass p = run_fusion(m, s.window, s.image);
  const LossBreakdown b = sample_loss(m, p, s, onto, cfg);
  if (!std::isfinite(b.total)) throw NumericError("fusion loss is not finite: " + std::to_string(b.total));
  const std::size_t c = m.n_channels;
  const std::size_t label = index_of(s.window.label);
  const double beta = m.variant == FusionVariant::B2 ? 1.0 : cfg.beta();
  Tensor dlogits({kClassCount});
  for (std::size_t k = 0; k < kClassCount; ++k) dlogits[k] = beta * (p.probs[k] - (k == label ? 1.0 : 0.0));

  Tensor dimage_logits;
  if (m.variant == FusionVariant::B2) {
    dimage_logits = dlogits;
  } else {
    const Tensor dhead_in = kernel::backward(m.head, p.head_tape, dlogits, g.head, true);
    double wsum = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) wsum += cfg.channel_weights.empty() ? 1.0 : cfg.channel_weights[ch];
    std::vector<double> dpen;
    if (uses_range_penalty(m.variant)) {
      if (onto == nullptr) throw InputError("P3 requires a process ontology");
      dpen = ontology::range_penalty_gradient(p.next_frame, m.channel_names, s.next_state, *onto);
    }
    const std::size_t last = (m.window_len - 1) * c;
    Tensor dpred({c});
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double wc = cfg.channel_weights.empty() ? 1.0 : cfg.channel_weights[ch];
      const double target = m.scaler.forward(ch, s.next_frame[ch]);
      double d = 2.0 * wc * (p.predicted[ch] - target) / wsum;
      if (!dpen.empty()) d += cfg.lambda() * dpen[ch] * m.scaler.scale[ch];
      d += dhead_in[ch] + dhead_in[c + ch] * 2.0 * (p.predicted[ch] - p.x[last + ch]);
      dpred[ch] = d;
    }
    const bool encoder_trainable = std::any_of(m.encoder.layers.begin(), m.encoder.layers.end(),
                                               [](const kernel::Layer& layer) { return layer.spec.trainable; });
    const Tensor dlatent = kernel::backward(m.decoder, p.dec_tape, dpred, g.decoder, encoder_trainable);
    if (encoder_trainable) kernel::backward(m.encoder, p.enc_tape, dlatent, g.encoder, false);
    if (uses_image(m.variant)) {
      dimage_logits = Tensor({kClassCount});
      for (std::size_t k = 0; k < kClassCount; ++k) dimage_logits[k] = dhead_in[2 * c + k];
    }
  }
  if (uses_image(m.variant)) kernel::backward(m.image_branch, p.img_tape, dimage_logits, g.image_branch, false);
  return b.total;
}

namespace detail {

// Next-frame decoder seeded from the reconstruction decoder: same hidden
// layer, output rows taken from the last reconstructed frame.
inline Network next_frame_decoder(const Autoencoder& ae) {
  Network d = ae.decoder;
  kernel::Layer& out = d.layers.back();
  const std::size_t c = ae.n_channels;
  const std::size_t hidden = out.spec.input_dim;
  const std::size_t first = (ae.window_len - 1) * c;
  kernel::Tensor w({c, hidden});
  kernel::Tensor bias({c});
  for (std::size_t r = 0; r < c; ++r) {
    for (std::size_t k = 0; k < hidden; ++k) w[r * hidden + k] = out.weight[(first + r) * hidden + k];
    bias[r] = out.bias[first + r];
  }
  out.spec.output_dim = c;
  out.weight = std::move(w);
  out.bias = std::move(bias);
  return d;
}

}  // namespace detail

inline FusionModel init_fusion_model(FusionVariant variant, const Dataset& data, const FusionConfig& cfg,
                                     const Autoencoder* pretrained_ae = nullptr,
                                     const Network* pretrained_image = nullptr) {
  if (data.samples.empty()) throw InputError("fusion: empty dataset");
  FusionModel m;
  m.variant = variant;
  m.window_len = data.samples.front().window.window_len;
  m.n_channels = data.samples.front().window.n_channels;
  m.image_dim = data.samples.front().image.vector.size();
  m.channel_names = data.channel_names;
  if (m.channel_names.size() != m.n_channels)
    throw InputError("dataset names " + std::to_string(m.channel_names.size()) + " channels, windows carry " +
                     std::to_string(m.n_channels));
  if (!cfg.channel_weights.empty() && cfg.channel_weights.size() != m.n_channels)
    throw ConfigError("channel_weights must have one entry per channel");

  std::vector<SensorWindow> windows;
  windows.reserve(data.samples.size());
  for (const auto& s : data.samples) windows.push_back(s.window);
  detail::check_windows(windows);

  if (uses_image(variant)) {
    std::vector<std::span<const double>> rows;
    for (const auto& s : data.samples) {
      if (s.image.vector.size() != m.image_dim) throw InputError("inconsistent image feature dimension");
      rows.emplace_back(s.image.vector);
    }
    m.image_scaler = Standardizer::fit(m.image_dim, rows);
    if (pretrained_image) {
      m.image_branch = *pretrained_image;
    } else if (cfg.image_hidden == 0) {
      m.image_branch = kernel::make_network({kernel::dense(m.image_dim, kClassCount)}, cfg.seed ^ 0x1a6e);
    } else {
      m.image_branch = kernel::make_network({kernel::dense(m.image_dim, cfg.image_hidden, Activation::relu),
                                             kernel::dense(cfg.image_hidden, kClassCount)},
                                            cfg.seed ^ 0x1a6e);
    }
  }
  const Autoencoder ae = pretrained_ae ? *pretrained_ae : init_autoencoder(windows, cfg);
  m.scaler = ae.scaler;
  if (variant != FusionVariant::B2) {
    m.encoder = ae.encoder;
    m.decoder = detail::next_frame_decoder(ae);
    m.head = kernel::make_network({kernel::dense(m.head_input_dim(), cfg.head_hidden, Activation::relu),
                                   kernel::dense(cfg.head_hidden, kClassCount)},
                                  cfg.seed ^ 0x4ead);
    if (freezes_encoder(variant)) m.encoder.set_trainable(false);
  }
  return m;
}

inline void check_ontology_coverage(const Dataset& data, const ontology::ProcessOntology& onto) {
  for (const auto& s : data.samples) {
    for (const auto& name : data.channel_names) onto.range(s.next_state, name);
  }
}

/// Trains all trainable parts of `model` jointly for cfg.train.epochs.
/// Returns per-epoch mean loss.
inline std::vector<double> fit_fusion(FusionModel& model, const Dataset& data, const ontology::ProcessOntology* onto,
                                      const FusionConfig& cfg) {
  cfg.train.validate();
  if (data.samples.empty()) throw InputError("fusion: empty dataset");
  kernel::Optimizer enc_opt(cfg.train.optimizer, cfg.train.learning_rate);
  kernel::Optimizer dec_opt(cfg.train.optimizer, cfg.train.learning_rate);
  kernel::Optimizer img_opt(cfg.train.optimizer, cfg.train.learning_rate);
  kernel::Optimizer head_opt(cfg.train.optimizer, cfg.train.learning_rate);
  std::vector<double> history;
  std::vector<std::size_t> order(data.samples.size());
  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    kernel::CounterRng rng(cfg.seed, "fusion/shuffle/" + std::to_string(epoch));
    kernel::shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.train.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.train.batch_size);
      FusionGradients g = zero_gradients(model);
      for (std::size_t i = start; i < end; ++i) total += accumulate_gradients(model, data.samples[order[i]], onto, cfg, g);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto* gs : {&g.encoder, &g.decoder, &g.image_branch, &g.head}) gs->scale(inv);
      if (model.variant != FusionVariant::B2) {
        enc_opt.step(model.encoder, g.encoder);
        dec_opt.step(model.decoder, g.decoder);
        head_opt.step(model.head, g.head);
      }
      if (uses_image(model.variant)) img_opt.step(model.image_branch, g.image_branch);
    }
    history.push_back(total / static_cast<double>(data.samples.size()));
  }
  return history;
}

/// Components shared across variants: an autoencoder pretrained on
/// reconstruction and the B2 image classifier.
struct Pretrained {
  Autoencoder autoencoder;
  Network image_classifier;
};

inline Pretrained pretrain(const Dataset& data, const FusionConfig& cfg) {
  if (data.samples.empty()) throw InputError("fusion: empty dataset");
  std::vector<SensorWindow> normal, all;
  for (const auto& s : data.samples) {
    all.push_back(s.window);
    if (s.window.label == AnomalyClass::Normal) normal.push_back(s.window);
  }
  Pretrained p;
  // Scaler fit on every window; reconstruction learned on normal windows only,
  // so anomalies surface as reconstruction error.
  const Standardizer scaler = Standardizer::fit(all.front().n_channels, detail::frame_rows(all));
  p.autoencoder = train_autoencoder(normal.empty() ? std::span<const SensorWindow>(all) : normal, cfg,
                                    std::nullopt, &scaler);
  FusionModel b2 = init_fusion_model(FusionVariant::B2, data, cfg);
  FusionConfig img_cfg = cfg;
  img_cfg.train.epochs = cfg.image_epochs;
  fit_fusion(b2, data, nullptr, img_cfg);
  p.image_classifier = b2.image_branch;
  return p;
}

struct TrainedFusion {
  FusionModel model;
  std::vector<double> loss_history;
};

/// Trains one ablation variant. P3 validates ontology coverage before any
/// training happens; P2/P3 keep the encoder bit-identical.
inline TrainedFusion train_fusion(FusionVariant variant, const Dataset& data, const ontology::ProcessOntology* onto,
                                  const FusionConfig& cfg, const Pretrained* pretrained = nullptr) {
  if (uses_range_penalty(variant)) {
    if (onto == nullptr) throw InputError("P3 requires a process ontology");
    check_ontology_coverage(data, *onto);
  }
  std::optional<Pretrained> local;
  if (pretrained == nullptr) {
    local = pretrain(data, cfg);
    pretrained = &*local;
  }
  TrainedFusion out;
  // Fusion variants learn their image branch jointly with the head; feeding the
  // head logits from a classifier fit on the same samples overstates them.
  const Network* image = variant == FusionVariant::B2 ? &pretrained->image_classifier : nullptr;
  out.model = init_fusion_model(variant, data, cfg, &pretrained->autoencoder, image);
  if (variant == FusionVariant::B2) {
    // The pretrained image classifier is the B2 model.
    return out;
  }
  out.loss_history = fit_fusion(out.model, data, onto, cfg);
  return out;
}

}  // namespace smartpilot::predictx
