#pragma once

// Softmax linear classifier over the closed-set labels, trained by plain
// SGD under one of four losses: vanilla cross-entropy, the contrastive
// confidence loss (pairwise ID/OOD confidence hinge), outlier exposure
// (uniform target on outliers), or label smoothing. Gradients are derived
// by hand; finite-difference tests pin them down.

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ossc/corpus.hpp"
#include "ossc/featurize.hpp"
#include "ossc/rng.hpp"
#include "ossc/util.hpp"

namespace ossc {

struct ClassifierState {
  FeatureConfig feature_config;
  std::vector<std::string> class_labels;  // K entries, matches weight rows
  std::vector<double> weights;            // K x D, row-major
  std::vector<double> bias;               // K

  ClassifierState() = default;
  ClassifierState(FeatureConfig config, std::vector<std::string> labels)
      : feature_config(std::move(config)), class_labels(std::move(labels)) {
    feature_config.validate();
    if (class_labels.size() < 2) fail("classifier needs at least 2 classes");
    weights.assign(class_labels.size() * feature_config.dimension, 0.0);
    bias.assign(class_labels.size(), 0.0);
  }

  size_t num_classes() const { return class_labels.size(); }
  size_t dimension() const { return feature_config.dimension; }
  double& w(size_t k, size_t j) { return weights[k * dimension() + j]; }
  double w(size_t k, size_t j) const { return weights[k * dimension() + j]; }

  bool finite() const {
    for (double v : weights) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : bias) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

enum class LossKind { vanilla, ccl, oe, label_smoothing };

inline const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::vanilla: return "vanilla";
    case LossKind::ccl: return "ccl";
    case LossKind::oe: return "oe";
    case LossKind::label_smoothing: return "label_smoothing";
  }
  return "vanilla";
}

inline LossKind loss_kind_from_name(std::string_view name) {
  if (name == "vanilla") return LossKind::vanilla;
  if (name == "ccl") return LossKind::ccl;
  if (name == "oe") return LossKind::oe;
  if (name == "label_smoothing" || name == "ls") return LossKind::label_smoothing;
  fail("unknown loss: \"" + std::string(name) + "\"");
}

struct TrainConfig {
  LossKind loss = LossKind::vanilla;
  int steps = 5000;
  int batch_n = 40;
  double lambda = 1.0;     // CCL hinge weight
  double oe_weight = 1.0;  // outlier-exposure term weight
  double ls_alpha = 0.1;   // label smoothing factor
  double learning_rate = 0.1;
  uint64_t seed = 0;

  void validate() const {
    if (steps < 1) fail("steps must be >= 1");
    if (batch_n < 1) fail("batch_n must be >= 1");
    if (lambda < 0.0) fail("lambda must be >= 0");
    if (oe_weight < 0.0) fail("oe_weight must be >= 0");
    if (!(ls_alpha >= 0.0 && ls_alpha < 1.0)) fail("ls_alpha must be in [0, 1)");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  }

  bool uses_novelty() const { return loss == LossKind::ccl || loss == LossKind::oe; }
};

inline std::vector<double> logits(const ClassifierState& state, const SparseVector& x) {
  const size_t k_classes = state.num_classes();
  const size_t dim = state.dimension();
  std::vector<double> out(state.bias);
  for (size_t i = 0; i < x.indices.size(); ++i) {
    const uint32_t idx = x.indices[i];
    if (idx >= dim) fail("feature index " + std::to_string(idx) + " out of range");
    const double v = x.values[i];
    for (size_t k = 0; k < k_classes; ++k) {
      out[k] += state.weights[k * dim + idx] * v;
    }
  }
  return out;
}

struct SoftmaxResult {
  std::vector<double> probs;
  double confidence = 0.0;  // max probability
  int argmax = 0;           // ties broken toward the lowest index
};

inline SoftmaxResult softmax_confidence(std::span<const double> logit_values) {
  SoftmaxResult r;
  const size_t k_classes = logit_values.size();
  if (k_classes == 0) fail("softmax over zero classes");
  double max_logit = logit_values[0];
  r.argmax = 0;
  for (size_t k = 1; k < k_classes; ++k) {
    if (logit_values[k] > max_logit) {
      max_logit = logit_values[k];
      r.argmax = static_cast<int>(k);
    }
  }
  r.probs.resize(k_classes);
  double sum = 0.0;
  for (size_t k = 0; k < k_classes; ++k) {
    r.probs[k] = std::exp(logit_values[k] - max_logit);
    sum += r.probs[k];
  }
  for (double& p : r.probs) p /= sum;
  r.confidence = r.probs[static_cast<size_t>(r.argmax)];
  return r;
}

struct SelectivePrediction {
  std::string predicted_label;
  double confidence = 0.0;
};

// Predicts when confidence > gamma (strict), abstains otherwise.
inline std::optional<SelectivePrediction> predict_selective(const ClassifierState& state,
                                                            const SparseVector& x,
                                                            double gamma) {
  SoftmaxResult s = softmax_confidence(logits(state, x));
  if (s.confidence > gamma) {
    return SelectivePrediction{state.class_labels[static_cast<size_t>(s.argmax)], s.confidence};
  }
  return std::nullopt;
}

// (1 - alpha) on the gold index plus alpha/K everywhere.
inline std::vector<double> smoothed_target(int gold_index, size_t k_classes, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) fail("alpha must be in [0, 1)");
  if (gold_index < 0 || static_cast<size_t>(gold_index) >= k_classes) {
    fail("gold index out of range");
  }
  std::vector<double> t(k_classes, alpha / static_cast<double>(k_classes));
  t[static_cast<size_t>(gold_index)] += 1.0 - alpha;
  return t;
}

struct Gradient {
  std::vector<double> weights;  // K x D, row-major
  std::vector<double> bias;     // K
};

struct LossResult {
  double loss = 0.0;
  double ce_term = 0.0;   // mean ID cross-entropy (or smoothed CE)
  double aux_term = 0.0;  // unweighted mean hinge / OE term
  Gradient gradient;
};

namespace detail {

// Per-example dL/dlogits coefficients. The scatter step (dense gradient or
// sparse SGD update) is the only thing that differs between callers.
struct BatchCoefficients {
  double loss = 0.0;
  double ce_term = 0.0;
  double aux_term = 0.0;
  std::vector<std::vector<double>> id_coefs;
  std::vector<std::vector<double>> ood_coefs;
};

// d confidence / d logits with the argmax class treated as locally fixed:
// p_a * (e_a - p).
inline std::vector<double> confidence_grad(const SoftmaxResult& s) {
  const size_t k_classes = s.probs.size();
  std::vector<double> g(k_classes);
  const double pa = s.confidence;
  for (size_t k = 0; k < k_classes; ++k) {
    g[k] = pa * ((static_cast<int>(k) == s.argmax ? 1.0 : 0.0) - s.probs[k]);
  }
  return g;
}

inline BatchCoefficients batch_coefficients(const ClassifierState& state,
                                            std::span<const SparseVector> id_x,
                                            std::span<const int> id_y,
                                            std::span<const SparseVector> ood_x,
                                            const TrainConfig& cfg) {
  const size_t k_classes = state.num_classes();
  const size_t n_id = id_x.size();
  const size_t n_ood = ood_x.size();
  if (n_id == 0) fail("id batch must be non-empty");
  if (id_y.size() != n_id) fail("id batch labels/vectors length mismatch");
  if (cfg.uses_novelty() && n_ood == 0) fail("ood batch must be non-empty");

  BatchCoefficients out;
  out.id_coefs.resize(n_id);
  out.ood_coefs.resize(n_ood);

  std::vector<SoftmaxResult> id_soft(n_id);
  for (size_t i = 0; i < n_id; ++i) {
    const int y = id_y[i];
    if (y < 0 || static_cast<size_t>(y) >= k_classes) {
      fail("unknown label index " + std::to_string(y));
    }
    id_soft[i] = softmax_confidence(logits(state, id_x[i]));
    const auto& p = id_soft[i].probs;

    std::vector<double> target;
    if (cfg.loss == LossKind::label_smoothing) {
      target = smoothed_target(y, k_classes, cfg.ls_alpha);
    } else {
      target.assign(k_classes, 0.0);
      target[static_cast<size_t>(y)] = 1.0;
    }
    double ce = 0.0;
    for (size_t k = 0; k < k_classes; ++k) {
      if (target[k] > 0.0) ce -= target[k] * std::log(p[k]);
    }
    out.ce_term += ce / static_cast<double>(n_id);
    out.id_coefs[i].resize(k_classes);
    for (size_t k = 0; k < k_classes; ++k) {
      out.id_coefs[i][k] = (p[k] - target[k]) / static_cast<double>(n_id);
    }
  }

  if (cfg.loss == LossKind::oe) {
    const double u = 1.0 / static_cast<double>(k_classes);
    for (size_t j = 0; j < n_ood; ++j) {
      SoftmaxResult s = softmax_confidence(logits(state, ood_x[j]));
      double ce_u = 0.0;
      for (double p : s.probs) ce_u -= u * std::log(p);
      out.aux_term += ce_u / static_cast<double>(n_ood);
      out.ood_coefs[j].resize(k_classes);
      for (size_t k = 0; k < k_classes; ++k) {
        out.ood_coefs[j][k] = cfg.oe_weight * (s.probs[k] - u) / static_cast<double>(n_ood);
      }
    }
    out.loss = out.ce_term + cfg.oe_weight * out.aux_term;
  } else if (cfg.loss == LossKind::ccl) {
    std::vector<SoftmaxResult> ood_soft(n_ood);
    for (size_t j = 0; j < n_ood; ++j) {
      ood_soft[j] = softmax_confidence(logits(state, ood_x[j]));
    }
    // All n_id * n_ood pairs, exactly; the hinge is inactive at equality.
    const double pair_scale = 1.0 / (static_cast<double>(n_id) * static_cast<double>(n_ood));
    std::vector<size_t> id_active(n_id, 0);
    std::vector<size_t> ood_active(n_ood, 0);
    double hinge_sum = 0.0;
    for (size_t i = 0; i < n_id; ++i) {
      for (size_t j = 0; j < n_ood; ++j) {
        const double diff = ood_soft[j].confidence - id_soft[i].confidence;
        if (diff > 0.0) {
          hinge_sum += diff;
          ++id_active[i];
          ++ood_active[j];
        }
      }
    }
    out.aux_term = hinge_sum * pair_scale;
    out.loss = out.ce_term + cfg.lambda * out.aux_term;
    for (size_t i = 0; i < n_id; ++i) {
      if (id_active[i] == 0) continue;
      const double m = -cfg.lambda * static_cast<double>(id_active[i]) * pair_scale;
      std::vector<double> cg = confidence_grad(id_soft[i]);
      for (size_t k = 0; k < k_classes; ++k) out.id_coefs[i][k] += m * cg[k];
    }
    for (size_t j = 0; j < n_ood; ++j) {
      if (ood_active[j] == 0) continue;  // left empty, callers skip it
      const double m = cfg.lambda * static_cast<double>(ood_active[j]) * pair_scale;
      std::vector<double> cg = confidence_grad(ood_soft[j]);
      out.ood_coefs[j].resize(k_classes);
      for (size_t k = 0; k < k_classes; ++k) out.ood_coefs[j][k] = m * cg[k];
    }
  } else {
    out.loss = out.ce_term;
  }
  return out;
}

inline void scatter_dense(const std::vector<double>& coef, const SparseVector& x,
                          size_t dim, Gradient& g) {
  for (size_t k = 0; k < coef.size(); ++k) {
    g.bias[k] += coef[k];
    for (size_t i = 0; i < x.indices.size(); ++i) {
      g.weights[k * dim + x.indices[i]] += coef[k] * x.values[i];
    }
  }
}

inline LossResult dense_loss(const ClassifierState& state,
                             std::span<const SparseVector> id_x, std::span<const int> id_y,
                             std::span<const SparseVector> ood_x, const TrainConfig& cfg) {
  BatchCoefficients bc = batch_coefficients(state, id_x, id_y, ood_x, cfg);
  LossResult r;
  r.loss = bc.loss;
  r.ce_term = bc.ce_term;
  r.aux_term = bc.aux_term;
  r.gradient.weights.assign(state.weights.size(), 0.0);
  r.gradient.bias.assign(state.bias.size(), 0.0);
  const size_t dim = state.dimension();
  for (size_t i = 0; i < id_x.size(); ++i) scatter_dense(bc.id_coefs[i], id_x[i], dim, r.gradient);
  for (size_t j = 0; j < ood_x.size(); ++j) {
    if (!bc.ood_coefs[j].empty()) scatter_dense(bc.ood_coefs[j], ood_x[j], dim, r.gradient);
  }
  return r;
}

}  // namespace detail

inline LossResult vanilla_batch_loss(const ClassifierState& state,
                                     std::span<const SparseVector> id_x,
                                     std::span<const int> id_y) {
  TrainConfig cfg;
  cfg.loss = LossKind::vanilla;
  return detail::dense_loss(state, id_x, id_y, {}, cfg);
}

inline LossResult label_smoothing_batch_loss(const ClassifierState& state,
                                             std::span<const SparseVector> id_x,
                                             std::span<const int> id_y, double alpha) {
  TrainConfig cfg;
  cfg.loss = LossKind::label_smoothing;
  cfg.ls_alpha = alpha;
  return detail::dense_loss(state, id_x, id_y, {}, cfg);
}

// Mean ID cross-entropy plus lambda times the mean pairwise confidence
// hinge max(0, c_ood - c_id) over all pairs of the two batches.
inline LossResult ccl_batch_loss(const ClassifierState& state,
                                 std::span<const SparseVector> id_x,
                                 std::span<const int> id_y,
                                 std::span<const SparseVector> ood_x, double lambda) {
  TrainConfig cfg;
  cfg.loss = LossKind::ccl;
  cfg.lambda = lambda;
  return detail::dense_loss(state, id_x, id_y, ood_x, cfg);
}

// Mean ID cross-entropy plus oe_weight times the mean cross-entropy between
// the uniform distribution and the predictions on the OOD batch.
inline LossResult oe_batch_loss(const ClassifierState& state,
                                std::span<const SparseVector> id_x,
                                std::span<const int> id_y,
                                std::span<const SparseVector> ood_x, double oe_weight) {
  TrainConfig cfg;
  cfg.loss = LossKind::oe;
  cfg.oe_weight = oe_weight;
  return detail::dense_loss(state, id_x, id_y, ood_x, cfg);
}

struct TrainLogEntry {
  int step = 0;
  double loss = 0.0;
  double ce = 0.0;
  double aux = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  ClassifierState state;
  std::vector<TrainLogEntry> log;
};

// Plain SGD with a constant learning rate. Each step samples batch_n ID
// examples (and batch_n novelty examples when the loss uses them) uniformly
// with replacement. Bit-deterministic given the seed.
inline TrainResult train(const OpenSetSplit& split, const NoveltySource* novelty,
                         const TrainConfig& cfg, const FeatureConfig& feature_config) {
  cfg.validate();
  if (cfg.uses_novelty()) {
    if (novelty == nullptr || novelty->items.empty()) {
      fail(std::string(loss_kind_name(cfg.loss)) + " loss requires a non-empty novelty source");
    }
  } else if (novelty != nullptr) {
    fail(std::string(loss_kind_name(cfg.loss)) + " loss does not take a novelty source");
  }
  if (split.train.empty()) fail("training set is empty");

  TrainResult result;
  result.state = ClassifierState(feature_config, split.closed_labels);
  ClassifierState& state = result.state;
  const size_t k_classes = state.num_classes();
  const size_t dim = state.dimension();

  std::unordered_map<std::string, int> label_index;
  for (size_t k = 0; k < k_classes; ++k) label_index[state.class_labels[k]] = static_cast<int>(k);

  std::vector<SparseVector> train_x(split.train.size());
  std::vector<int> train_y(split.train.size());
  for (size_t i = 0; i < split.train.size(); ++i) {
    train_x[i] = featurize(split.train[i].text, feature_config);
    auto it = label_index.find(split.train[i].label);
    if (it == label_index.end()) {
      fail("unknown label \"" + split.train[i].label + "\" in training set");
    }
    train_y[i] = it->second;
  }

  std::vector<SparseVector> novelty_x;
  if (cfg.uses_novelty()) {
    novelty_x.reserve(novelty->items.size());
    for (const auto& e : novelty->items) novelty_x.push_back(featurize(e.text, feature_config));
  }

  Rng rng(cfg.seed);
  const size_t n = static_cast<size_t>(cfg.batch_n);
  std::vector<SparseVector> id_batch(n);
  std::vector<int> y_batch(n);
  std::vector<SparseVector> ood_batch;

  std::vector<double> bias_grad(k_classes);
  std::map<uint64_t, double> weight_grad;

  for (int step = 1; step <= cfg.steps; ++step) {
    for (size_t b = 0; b < n; ++b) {
      size_t i = rng.below(train_x.size());
      id_batch[b] = train_x[i];
      y_batch[b] = train_y[i];
    }
    if (cfg.uses_novelty()) {
      ood_batch.resize(n);
      for (size_t b = 0; b < n; ++b) ood_batch[b] = novelty_x[rng.below(novelty_x.size())];
    }

    detail::BatchCoefficients bc =
        detail::batch_coefficients(state, id_batch, y_batch, ood_batch, cfg);

    weight_grad.clear();
    std::fill(bias_grad.begin(), bias_grad.end(), 0.0);
    auto scatter = [&](const std::vector<double>& coef, const SparseVector& x) {
      for (size_t k = 0; k < k_classes; ++k) {
        bias_grad[k] += coef[k];
        for (size_t f = 0; f < x.indices.size(); ++f) {
          weight_grad[static_cast<uint64_t>(k) * dim + x.indices[f]] += coef[k] * x.values[f];
        }
      }
    };
    for (size_t b = 0; b < n; ++b) scatter(bc.id_coefs[b], id_batch[b]);
    for (size_t b = 0; b < ood_batch.size(); ++b) {
      if (!bc.ood_coefs[b].empty()) scatter(bc.ood_coefs[b], ood_batch[b]);
    }

    const bool log_step = (step % 100 == 0) || step == cfg.steps;
    if (log_step) {
      double sq = 0.0;
      for (const auto& [key, g] : weight_grad) sq += g * g;
      for (double g : bias_grad) sq += g * g;
      result.log.push_back({step, bc.loss, bc.ce_term, bc.aux_term, std::sqrt(sq)});
    }

    for (const auto& [key, g] : weight_grad) state.weights[key] -= cfg.learning_rate * g;
    for (size_t k = 0; k < k_classes; ++k) state.bias[k] -= cfg.learning_rate * bias_grad[k];
  }

  if (!state.finite()) fail("training diverged: non-finite parameters");
  return result;
}

// Model container: 8-byte magic, little-endian u64 header length, JSON
// header (feature config, class labels), then raw little-endian float64
// weights (row-major) and biases.
inline void save_model(const std::filesystem::path& path, const ClassifierState& state) {
  static_assert(std::endian::native == std::endian::little, "model format assumes little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write model file: " + path.string());
  nlohmann::json header{{"format", "ossc-model"},
                        {"version", 1},
                        {"feature_config", state.feature_config},
                        {"feature_fingerprint", state.feature_config.fingerprint()},
                        {"class_labels", state.class_labels}};
  std::string header_bytes = header.dump();
  out.write("OSSCMD01", 8);
  uint64_t len = header_bytes.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  out.write(reinterpret_cast<const char*>(state.weights.data()),
            static_cast<std::streamsize>(state.weights.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(state.bias.data()),
            static_cast<std::streamsize>(state.bias.size() * sizeof(double)));
  if (!out) fail("write failed: " + path.string());
}

inline ClassifierState load_model(const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "model format assumes little-endian");
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open model file: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string_view(magic, 8) != "OSSCMD01") {
    fail(path.string() + ": not a model file");
  }
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_bytes(len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(len));
  if (!in) fail(path.string() + ": truncated model header");
  nlohmann::json header = nlohmann::json::parse(header_bytes, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "ossc-model" ||
      header.value("version", 0) != 1) {
    fail(path.string() + ": unsupported model header");
  }
  ClassifierState state(header.at("feature_config").get<FeatureConfig>(),
                        header.at("class_labels").get<std::vector<std::string>>());
  in.read(reinterpret_cast<char*>(state.weights.data()),
          static_cast<std::streamsize>(state.weights.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(state.bias.data()),
          static_cast<std::streamsize>(state.bias.size() * sizeof(double)));
  if (!in) fail(path.string() + ": truncated model payload");
  if (!state.finite()) fail(path.string() + ": non-finite parameters");
  return state;
}

inline void write_train_log(const std::filesystem::path& path,
                            const std::vector<TrainLogEntry>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write training log: " + path.string());
  for (const auto& e : log) {
    nlohmann::json j{{"step", e.step}, {"loss", e.loss}, {"ce", e.ce},
                     {"aux", e.aux}, {"grad_norm", e.grad_norm}};
    out << j.dump() << "\n";
  }
  if (!out) fail("write failed: " + path.string());
}

}  // namespace ossc
