#pragma once

// Open-set selective classification metrics: MaxProb scoring of a test
// split, OOD-detection AUROC (rank statistic with half credit for ties),
// the accuracy-coverage curve and its area (AUAC), plus the noise-mixture
// and generation-quota sweep harnesses.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ossc/classifier.hpp"
#include "ossc/corpus.hpp"
#include "ossc/featurize.hpp"
#include "ossc/rng.hpp"
#include "ossc/util.hpp"

namespace ossc {

struct ScoredExample {
  std::string id;
  double confidence = 0.0;
  bool is_ood = false;
  bool is_correct = false;  // always false for OOD examples
};

inline std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Scores id_test and ood_test with MaxProb. Predictions on OOD examples
// are counted incorrect regardless of confidence.
inline std::vector<ScoredExample> score_test_set(const ClassifierState& state,
                                                 const OpenSetSplit& split) {
  if (state.class_labels != split.closed_labels) {
    fail("model class labels do not match the split's closed-set labels");
  }
  std::vector<ScoredExample> out;
  out.reserve(split.id_test.size() + split.ood_test.size());
  for (const auto& e : split.id_test) {
    SoftmaxResult s = softmax_confidence(logits(state, featurize(e.text, state.feature_config)));
    bool correct = state.class_labels[static_cast<size_t>(s.argmax)] == e.label;
    out.push_back({e.id, s.confidence, false, correct});
  }
  for (const auto& e : split.ood_test) {
    SoftmaxResult s = softmax_confidence(logits(state, featurize(e.text, state.feature_config)));
    out.push_back({e.id, s.confidence, true, false});
  }
  return out;
}

// P(conf_id > conf_ood) + 0.5 P(equal), via midranks. Agrees with the
// brute-force pairwise average to within quadrature noise (< 1e-12).
inline double auroc(const std::vector<ScoredExample>& scored) {
  size_t n_id = 0;
  size_t n_ood = 0;
  for (const auto& s : scored) (s.is_ood ? n_ood : n_id)++;
  if (n_id == 0 || n_ood == 0) {
    fail("auroc needs at least one ID and one OOD example");
  }

  std::vector<size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scored[a].confidence < scored[b].confidence;
  });

  double id_rank_sum = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() &&
           scored[order[j]].confidence == scored[order[i]].confidence) {
      ++j;
    }
    // 1-based midrank of the tie group [i, j)
    double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t t = i; t < j; ++t) {
      if (!scored[order[t]].is_ood) id_rank_sum += midrank;
    }
    i = j;
  }
  double u = id_rank_sum - static_cast<double>(n_id) * (static_cast<double>(n_id) + 1.0) / 2.0;
  return u / (static_cast<double>(n_id) * static_cast<double>(n_ood));
}

namespace detail {

// Confidence descending, ties broken by id so curves are reproducible.
inline std::vector<size_t> coverage_order(const std::vector<ScoredExample>& scored) {
  std::vector<size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scored[a].confidence != scored[b].confidence) {
      return scored[a].confidence > scored[b].confidence;
    }
    return scored[a].id < scored[b].id;
  });
  return order;
}

}  // namespace detail

struct CurvePoint {
  double coverage = 0.0;
  double accuracy = 0.0;
};

inline std::vector<CurvePoint> accuracy_coverage_curve(const std::vector<ScoredExample>& scored) {
  if (scored.empty()) fail("cannot compute a coverage curve on an empty set");
  std::vector<size_t> order = detail::coverage_order(scored);
  std::vector<CurvePoint> curve;
  curve.reserve(scored.size());
  const double n = static_cast<double>(scored.size());
  size_t correct = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    if (scored[order[k]].is_correct) ++correct;
    curve.push_back({static_cast<double>(k + 1) / n,
                     static_cast<double>(correct) / static_cast<double>(k + 1)});
  }
  return curve;
}

// Mean of the prefix accuracies (step-function area under the curve).
inline double auac(const std::vector<ScoredExample>& scored) {
  std::vector<CurvePoint> curve = accuracy_coverage_curve(scored);
  double sum = 0.0;
  for (const auto& p : curve) sum += p.accuracy;
  return sum / static_cast<double>(curve.size());
}

inline double id_accuracy(const std::vector<ScoredExample>& scored) {
  size_t n_id = 0;
  size_t correct = 0;
  for (const auto& s : scored) {
    if (!s.is_ood) {
      ++n_id;
      if (s.is_correct) ++correct;
    }
  }
  if (n_id == 0) fail("no ID examples to compute accuracy over");
  return static_cast<double>(correct) / static_cast<double>(n_id);
}

struct EvalReport {
  size_t n_id = 0;
  size_t n_ood = 0;
  double id_acc = 0.0;
  double auac_value = 0.0;
  std::optional<double> auroc_value;  // absent when a population is missing
  std::vector<CurvePoint> curve;
  std::vector<ScoredExample> confidence_profile;  // confidence-descending
  nlohmann::json metadata;
};

inline EvalReport build_report(const std::vector<ScoredExample>& scored,
                               nlohmann::json metadata = nlohmann::json::object()) {
  EvalReport r;
  for (const auto& s : scored) (s.is_ood ? r.n_ood : r.n_id)++;
  r.id_acc = id_accuracy(scored);
  r.auac_value = auac(scored);
  if (r.n_ood > 0) r.auroc_value = auroc(scored);
  r.curve = accuracy_coverage_curve(scored);
  std::vector<size_t> order = detail::coverage_order(scored);
  r.confidence_profile.reserve(scored.size());
  for (size_t i : order) r.confidence_profile.push_back(scored[i]);
  r.metadata = std::move(metadata);
  return r;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : r.curve) curve.push_back({{"coverage", p.coverage}, {"accuracy", p.accuracy}});
  nlohmann::json profile = nlohmann::json::array();
  for (const auto& s : r.confidence_profile) {
    profile.push_back({{"id", s.id}, {"confidence", s.confidence},
                       {"is_ood", s.is_ood}, {"is_correct", s.is_correct}});
  }
  nlohmann::json j{{"n_id", r.n_id},
                   {"n_ood", r.n_ood},
                   {"id_accuracy", r.id_acc},
                   {"auac", r.auac_value},
                   {"curve", std::move(curve)},
                   {"confidence_profile", std::move(profile)},
                   {"metadata", r.metadata}};
  j["auroc"] = r.auroc_value ? nlohmann::json(*r.auroc_value) : nlohmann::json();
  return j;
}

inline void write_report_json(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write report: " + path.string());
  out << report_to_json(r).dump(2) << "\n";
  if (!out) fail("write failed: " + path.string());
}

inline void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write curve: " + path.string());
  out << "coverage,accuracy\n";
  for (const auto& p : curve) out << format_g9(p.coverage) << "," << format_g9(p.accuracy) << "\n";
  if (!out) fail("write failed: " + path.string());
}

// CSV of per-example confidences, confidence-descending, 9 significant
// digits, for external plotting.
inline void export_confidence_profile(const std::vector<ScoredExample>& scored,
                                      const std::filesystem::path& path) {
  std::vector<size_t> order = detail::coverage_order(scored);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write confidence profile: " + path.string());
  out << "id,confidence,is_ood,is_correct\n";
  for (size_t i : order) {
    const auto& s = scored[i];
    out << s.id << "," << format_g9(s.confidence) << "," << (s.is_ood ? 1 : 0) << ","
        << (s.is_correct ? 1 : 0) << "\n";
  }
  if (!out) fail("write failed: " + path.string());
}

struct SweepRow {
  std::string loss;
  double id_fraction = 0.0;
  std::string seed;  // seed number, or "mean"
  double id_acc = 0.0;
  double auac_value = 0.0;
  double auroc_value = 0.0;
};

// Trains at every (loss, id_fraction, seed) cell on a mixture of held-out
// OOD data and held-out ID data (the id_test pool), then evaluates.
// Training seeds are paired across fractions so per-seed drops are
// comparable; mixture sampling gets an independent stream per cell.
inline std::vector<SweepRow> run_noise_mixture(const OpenSetSplit& split,
                                               const std::vector<double>& id_fractions,
                                               const std::vector<LossKind>& losses,
                                               const std::vector<uint64_t>& seeds,
                                               size_t mixture_size,
                                               const TrainConfig& base_config,
                                               const FeatureConfig& feature_config) {
  if (split.ood_test.empty()) fail("noise-mixture sweep needs a held-out OOD pool");
  if (split.id_test.empty()) fail("noise-mixture sweep needs a held-out ID pool");
  if (seeds.empty()) fail("noise-mixture sweep needs at least one seed");
  std::vector<SweepRow> rows;
  for (LossKind loss : losses) {
    if (loss != LossKind::ccl && loss != LossKind::oe) {
      fail("noise-mixture sweep supports ccl and oe losses only");
    }
    for (double fraction : id_fractions) {
      double acc_sum = 0.0;
      double auac_sum = 0.0;
      double auroc_sum = 0.0;
      for (uint64_t seed : seeds) {
        uint64_t cell = mix_seed(seed, fnv1a64(std::string(loss_kind_name(loss)) + "|" +
                                               format_g9(fraction)));
        NoveltySource mixture =
            build_noise_mixture(split.ood_test, split.id_test, fraction, mixture_size, cell);
        TrainConfig cfg = base_config;
        cfg.loss = loss;
        cfg.seed = seed;
        TrainResult trained = train(split, &mixture, cfg, feature_config);
        EvalReport report = build_report(score_test_set(trained.state, split));
        rows.push_back({loss_kind_name(loss), fraction, std::to_string(seed), report.id_acc,
                        report.auac_value, report.auroc_value.value_or(0.0)});
        acc_sum += report.id_acc;
        auac_sum += report.auac_value;
        auroc_sum += report.auroc_value.value_or(0.0);
      }
      const double n = static_cast<double>(seeds.size());
      rows.push_back({loss_kind_name(loss), fraction, "mean", acc_sum / n, auac_sum / n,
                      auroc_sum / n});
    }
  }
  return rows;
}

struct QuotaRow {
  size_t quota = 0;
  double auac_value = 0.0;
  double auroc_value = 0.0;
  double id_acc = 0.0;
};

// Trains on the first `quota` novelty items in generation order, for each
// quota, ascending.
inline std::vector<QuotaRow> run_quota_sweep(const OpenSetSplit& split,
                                             const std::vector<LabeledExample>& novelty_items,
                                             const std::vector<size_t>& quotas,
                                             const TrainConfig& config,
                                             const FeatureConfig& feature_config) {
  std::vector<size_t> sorted = quotas;
  std::sort(sorted.begin(), sorted.end());
  std::vector<QuotaRow> rows;
  for (size_t quota : sorted) {
    if (quota < 1) fail("quota must be >= 1");
    if (quota > novelty_items.size()) {
      fail("quota " + std::to_string(quota) + " exceeds novelty set size " +
           std::to_string(novelty_items.size()));
    }
    NoveltySource src;
    src.kind = NoveltyKind::generated;
    src.items.assign(novelty_items.begin(),
                     novelty_items.begin() + static_cast<std::ptrdiff_t>(quota));
    TrainResult trained = train(split, &src, config, feature_config);
    EvalReport report = build_report(score_test_set(trained.state, split));
    rows.push_back({quota, report.auac_value, report.auroc_value.value_or(0.0), report.id_acc});
  }
  return rows;
}

inline void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write sweep table: " + path.string());
  out << "loss,id_fraction,seed,id_accuracy,auac,auroc\n";
  for (const auto& r : rows) {
    out << r.loss << "," << format_g9(r.id_fraction) << "," << r.seed << ","
        << format_g9(r.id_acc) << "," << format_g9(r.auac_value) << ","
        << format_g9(r.auroc_value) << "\n";
  }
  if (!out) fail("write failed: " + path.string());
}

inline void write_quota_csv(const std::filesystem::path& path, const std::vector<QuotaRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write sweep table: " + path.string());
  out << "quota,auac,auroc,id_accuracy\n";
  for (const auto& r : rows) {
    out << r.quota << "," << format_g9(r.auac_value) << "," << format_g9(r.auroc_value) << ","
        << format_g9(r.id_acc) << "\n";
  }
  if (!out) fail("write failed: " + path.string());
}

}  // namespace ossc
