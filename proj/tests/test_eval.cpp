#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ossc/eval.hpp"
#include "ossc/rng.hpp"
#include "support/synth.hpp"

using namespace ossc;

namespace {

// O(n_id * n_ood) pairwise average: 1 for a win, 0.5 for a tie.
double auroc_brute_force(const std::vector<ScoredExample>& scored) {
  double sum = 0.0;
  size_t pairs = 0;
  for (const auto& a : scored) {
    if (a.is_ood) continue;
    for (const auto& b : scored) {
      if (!b.is_ood) continue;
      ++pairs;
      if (a.confidence > b.confidence) {
        sum += 1.0;
      } else if (a.confidence == b.confidence) {
        sum += 0.5;
      }
    }
  }
  return sum / static_cast<double>(pairs);
}

// Recomputes every prefix accuracy from scratch.
double auac_prefix_oracle(const std::vector<ScoredExample>& scored) {
  std::vector<size_t> order(scored.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scored[a].confidence != scored[b].confidence) {
      return scored[a].confidence > scored[b].confidence;
    }
    return scored[a].id < scored[b].id;
  });
  double sum = 0.0;
  for (size_t k = 1; k <= order.size(); ++k) {
    size_t correct = 0;
    for (size_t i = 0; i < k; ++i) {
      if (scored[order[i]].is_correct) ++correct;
    }
    sum += static_cast<double>(correct) / static_cast<double>(k);
  }
  return sum / static_cast<double>(order.size());
}

std::vector<ScoredExample> make_scored(const std::vector<double>& id_conf,
                                       const std::vector<double>& ood_conf,
                                       const std::vector<bool>& id_correct = {}) {
  std::vector<ScoredExample> out;
  char tag = 'a';
  for (size_t i = 0; i < id_conf.size(); ++i) {
    bool correct = id_correct.empty() ? true : id_correct[i];
    out.push_back({std::string("id_") + tag++ + std::to_string(i), id_conf[i], false, correct});
  }
  for (size_t i = 0; i < ood_conf.size(); ++i) {
    out.push_back({"ood_" + std::to_string(i), ood_conf[i], true, false});
  }
  return out;
}

std::vector<ScoredExample> random_scored(Rng& rng, size_t size) {
  std::vector<ScoredExample> out;
  size_t n_id = 1 + rng.below(size - 1);
  for (size_t i = 0; i < size; ++i) {
    ScoredExample s;
    s.id = "e" + std::to_string(i);
    // coarse grid so ties actually happen
    s.confidence = static_cast<double>(rng.below(20)) / 20.0;
    s.is_ood = i >= n_id;
    s.is_correct = !s.is_ood && rng.below(2) == 0;
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("auroc hand-checked values", "[eval]") {
  auto perfect = make_scored({1.0, 1.0}, {0.0, 0.0});
  CHECK(auroc(perfect) == 1.0);

  auto ties = make_scored({0.5, 0.5}, {0.5});
  CHECK(auroc(ties) == 0.5);

  // 4 pairs: (.9,.7) win, (.9,.5) win, (.6,.7) loss, (.6,.5) win -> 0.75
  auto mixed = make_scored({0.9, 0.6}, {0.7, 0.5});
  CHECK_THAT(auroc(mixed), Catch::Matchers::WithinAbs(0.75, 1e-15));
  CHECK_THAT(auroc_brute_force(mixed), Catch::Matchers::WithinAbs(0.75, 1e-15));

  CHECK_THROWS(auroc(make_scored({0.5}, {})));
  CHECK_THROWS(auroc(make_scored({}, {0.5})));
}

TEST_CASE("accuracy-coverage curve hand-checked", "[eval]") {
  auto scored = make_scored({0.9, 0.8, 0.7}, {}, {true, true, false});
  auto curve = accuracy_coverage_curve(scored);
  REQUIRE(curve.size() == 3);
  CHECK_THAT(curve[0].coverage, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
  CHECK(curve[0].accuracy == 1.0);
  CHECK(curve[1].accuracy == 1.0);
  CHECK_THAT(curve[2].accuracy, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));

  auto all_correct = make_scored({0.9, 0.3}, {});
  for (const auto& p : accuracy_coverage_curve(all_correct)) CHECK(p.accuracy == 1.0);

  auto all_ood = make_scored({}, {0.9, 0.3});
  for (const auto& p : accuracy_coverage_curve(all_ood)) CHECK(p.accuracy == 0.0);
}

TEST_CASE("auac hand-checked values", "[eval]") {
  auto scored = make_scored({0.9, 0.8, 0.7}, {}, {true, true, false});
  CHECK_THAT(auac(scored), Catch::Matchers::WithinAbs(8.0 / 9.0, 1e-12));
  CHECK_THAT(auac_prefix_oracle(scored), Catch::Matchers::WithinAbs(8.0 / 9.0, 1e-12));

  auto single_wrong = make_scored({0.4}, {}, {false});
  CHECK(auac(single_wrong) == 0.0);
  auto all_correct = make_scored({0.9, 0.2, 0.5}, {});
  CHECK(auac(all_correct) == 1.0);
}

TEST_CASE("metric oracles agree on random scored sets", "[eval][oracle]") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    size_t size = 2 + rng.below(199);
    auto scored = random_scored(rng, size);
    CHECK(std::abs(auac(scored) - auac_prefix_oracle(scored)) < 1e-12);
    bool has_id = false, has_ood = false;
    for (const auto& s : scored) (s.is_ood ? has_ood : has_id) = true;
    if (has_id && has_ood) {
      CHECK(std::abs(auroc(scored) - auroc_brute_force(scored)) < 1e-12);
    }
  }
}

TEST_CASE("auroc is invariant under strictly increasing transforms", "[eval][property]") {
  Rng rng(55);
  for (int trial = 0; trial < 40; ++trial) {
    auto scored = random_scored(rng, 2 + rng.below(100));
    bool has_id = false, has_ood = false;
    for (const auto& s : scored) (s.is_ood ? has_ood : has_id) = true;
    if (!has_id || !has_ood) continue;
    double before = auroc(scored);
    for (auto& s : scored) s.confidence = std::exp(2.0 * s.confidence) - 0.5;
    CHECK(auroc(scored) == before);
  }
}

TEST_CASE("flipping a correct example never increases auac", "[eval][property]") {
  Rng rng(56);
  for (int trial = 0; trial < 40; ++trial) {
    auto scored = random_scored(rng, 3 + rng.below(60));
    double before = auac(scored);
    std::vector<size_t> correct_idx;
    for (size_t i = 0; i < scored.size(); ++i) {
      if (scored[i].is_correct) correct_idx.push_back(i);
    }
    if (correct_idx.empty()) continue;
    scored[correct_idx[rng.below(correct_idx.size())]].is_correct = false;
    CHECK(auac(scored) <= before + 1e-15);
  }
}

TEST_CASE("perfect separation gives auroc exactly 1", "[eval][property]") {
  Rng rng(57);
  for (int trial = 0; trial < 20; ++trial) {
    size_t n_id = 1 + rng.below(30);
    size_t n_ood = 1 + rng.below(30);
    std::vector<double> id_conf, ood_conf;
    for (size_t i = 0; i < n_id; ++i) id_conf.push_back(0.6 + 0.4 * rng.uniform01());
    for (size_t i = 0; i < n_ood; ++i) ood_conf.push_back(0.5 * rng.uniform01());
    CHECK(auroc(make_scored(id_conf, ood_conf)) == 1.0);
  }
}

TEST_CASE("score_test_set marks OOD incorrect and checks label spaces", "[eval]") {
  using ossc::testsupport::SynthConfig;
  SynthConfig scfg;
  scfg.closed_count = 90;
  scfg.ood_count = 30;
  auto corpus = ossc::testsupport::make_synth_corpus(scfg);
  auto split = make_open_set_split(corpus, {"delta"}, 0.2, 21);

  FeatureConfig fcfg;
  fcfg.dimension = 1u << 12;
  ClassifierState state(fcfg, split.closed_labels);

  auto scored = score_test_set(state, split);
  CHECK(scored.size() == split.id_test.size() + split.ood_test.size());
  for (const auto& s : scored) {
    if (s.is_ood) CHECK_FALSE(s.is_correct);
  }
  auto again = score_test_set(state, split);
  for (size_t i = 0; i < scored.size(); ++i) {
    CHECK(scored[i].confidence == again[i].confidence);
    CHECK(scored[i].is_correct == again[i].is_correct);
  }

  ClassifierState other(fcfg, {"x", "y"});
  CHECK_THROWS_WITH(score_test_set(other, split),
                    Catch::Matchers::ContainsSubstring("labels"));
}

TEST_CASE("report carries metrics within range and a valid curve", "[eval]") {
  Rng rng(58);
  auto scored = random_scored(rng, 80);
  auto report = build_report(scored, {{"run", "test"}});
  CHECK(report.n_id + report.n_ood == scored.size());
  CHECK(report.id_acc >= 0.0);
  CHECK(report.id_acc <= 1.0);
  CHECK(report.auac_value >= 0.0);
  CHECK(report.auac_value <= 1.0);
  if (report.auroc_value) {
    CHECK(*report.auroc_value >= 0.0);
    CHECK(*report.auroc_value <= 1.0);
  }
  for (size_t i = 1; i < report.curve.size(); ++i) {
    CHECK(report.curve[i].coverage > report.curve[i - 1].coverage);
  }
  auto j = report_to_json(report);
  CHECK(j["metadata"]["run"] == "test");
  CHECK(j["n_id"] == report.n_id);

  // empty OOD population: report valid, auroc undefined
  auto id_only = make_scored({0.9, 0.4}, {});
  auto r2 = build_report(id_only);
  CHECK_FALSE(r2.auroc_value.has_value());
  CHECK(report_to_json(r2)["auroc"].is_null());
}

TEST_CASE("confidence profile export format", "[eval]") {
  Rng rng(59);
  auto scored = random_scored(rng, 100);
  auto path = std::filesystem::temp_directory_path() / "profile.csv";
  export_confidence_profile(scored, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "id,confidence,is_ood,is_correct");
  size_t rows = 0;
  double prev = 2.0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string id, conf;
    std::getline(ss, id, ',');
    std::getline(ss, conf, ',');
    double c = std::stod(conf);
    CHECK(c <= prev + 1e-12);
    prev = c;
  }
  CHECK(rows == 100);

  // 9 significant digits
  auto one = make_scored({1.0 / 3.0}, {0.25});
  export_confidence_profile(one, path);
  std::ifstream in2(path);
  std::getline(in2, line);
  std::getline(in2, line);
  CHECK(line.find("0.333333333") != std::string::npos);
}

TEST_CASE("quota sweep validates quotas and sorts output", "[eval][sweep]") {
  using ossc::testsupport::SynthConfig;
  SynthConfig scfg;
  scfg.closed_count = 150;
  scfg.ood_count = 80;
  auto corpus = ossc::testsupport::make_synth_corpus(scfg);
  auto split = make_open_set_split(corpus, {"delta"}, 0.2, 31);

  std::vector<LabeledExample> novelty(split.ood_test.begin(), split.ood_test.end());
  for (auto& e : novelty) e.origin = Origin::generated;

  TrainConfig cfg;
  cfg.loss = LossKind::ccl;
  cfg.steps = 60;
  cfg.batch_n = 8;
  cfg.seed = 2;
  FeatureConfig fcfg;
  fcfg.dimension = 1u << 12;

  auto rows = run_quota_sweep(split, novelty, {40, 10, 20}, cfg, fcfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].quota == 10);
  CHECK(rows[1].quota == 20);
  CHECK(rows[2].quota == 40);

  CHECK_THROWS_WITH(run_quota_sweep(split, novelty, {novelty.size() + 1}, cfg, fcfg),
                    Catch::Matchers::ContainsSubstring("exceeds"));
  CHECK_THROWS(run_quota_sweep(split, novelty, {0}, cfg, fcfg));

  // full-set quota reproduces a direct run exactly under the same seed
  NoveltySource src;
  src.kind = NoveltyKind::generated;
  src.items = novelty;
  auto direct = train(split, &src, cfg, fcfg);
  auto report = build_report(score_test_set(direct.state, split));
  auto full = run_quota_sweep(split, novelty, {novelty.size()}, cfg, fcfg);
  REQUIRE(full.size() == 1);
  CHECK(full[0].auac_value == report.auac_value);
  CHECK(full[0].id_acc == report.id_acc);
}

TEST_CASE("noise mixture sweep emits per-trial and mean rows", "[eval][sweep]") {
  using ossc::testsupport::SynthConfig;
  SynthConfig scfg;
  scfg.closed_count = 150;
  scfg.ood_count = 80;
  auto corpus = ossc::testsupport::make_synth_corpus(scfg);
  auto split = make_open_set_split(corpus, {"delta"}, 0.2, 41);

  TrainConfig cfg;
  cfg.steps = 50;
  cfg.batch_n = 8;
  FeatureConfig fcfg;
  fcfg.dimension = 1u << 12;

  auto rows = run_noise_mixture(split, {0.0, 0.5}, {LossKind::ccl, LossKind::oe}, {1, 2}, 100,
                                cfg, fcfg);
  // 2 losses x 2 fractions x (2 trials + 1 mean)
  REQUIRE(rows.size() == 12);
  size_t means = 0;
  for (const auto& r : rows) {
    if (r.seed == "mean") ++means;
  }
  CHECK(means == 4);

  auto csv = std::filesystem::temp_directory_path() / "noise.csv";
  write_sweep_csv(csv, rows);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "loss,id_fraction,seed,id_accuracy,auac,auroc");
}
