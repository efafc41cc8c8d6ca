// Command-line pipeline driver: open-set split construction, novel label
// and example generation, classifier training, evaluation, and sweep
// harnesses. A declarative JSON run config provides values; command-line
// flags override it; built-in defaults fill the rest.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ossc/backend.hpp"
#include "ossc/classifier.hpp"
#include "ossc/corpus.hpp"
#include "ossc/eval.hpp"
#include "ossc/featurize.hpp"
#include "ossc/http_backend.hpp"
#include "ossc/novelty.hpp"
#include "ossc/util.hpp"
#include "ossc/version.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json g_cfg = json::object();

template <typename T>
T cget(const std::string& pointer, T fallback) {
  return g_cfg.value(json::json_pointer(pointer), fallback);
}

std::string cstr(const std::string& pointer, const std::string& fallback = "") {
  return cget<std::string>(pointer, fallback);
}

void cset(const std::string& pointer, json value) {
  g_cfg[json::json_pointer(pointer)] = std::move(value);
}

std::vector<std::string> cstrs(const std::string& pointer) {
  auto j = g_cfg.value(json::json_pointer(pointer), json::array());
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  return out;
}

std::vector<double> cnums(const std::string& pointer, std::vector<double> fallback) {
  auto j = g_cfg.value(json::json_pointer(pointer), json());
  if (!j.is_array()) return fallback;
  std::vector<double> out;
  for (const auto& v : j) out.push_back(v.get<double>());
  return out;
}

std::vector<uint64_t> seeds_from_config() {
  auto j = g_cfg.value(json::json_pointer("/seeds"), json::array({1}));
  std::vector<uint64_t> seeds;
  for (const auto& v : j) seeds.push_back(v.get<uint64_t>());
  if (seeds.empty()) ossc::fail("seeds list must be non-empty");
  return seeds;
}

std::string config_hash() {
  return ossc::to_hex(ossc::fnv1a64(g_cfg.dump()));
}

ossc::FeatureConfig feature_config_from_config() {
  ossc::FeatureConfig fc;
  fc.dimension = cget<uint32_t>("/features/dimension", fc.dimension);
  fc.ngram_min = cget<int>("/features/ngram_min", fc.ngram_min);
  fc.ngram_max = cget<int>("/features/ngram_max", fc.ngram_max);
  fc.hash_seed = cget<uint64_t>("/features/hash_seed", fc.hash_seed);
  fc.tf_scaling = ossc::tf_scaling_from_name(cstr("/features/tf_scaling", "log1p"));
  fc.l2_normalize = cget<bool>("/features/l2_normalize", fc.l2_normalize);
  fc.validate();
  return fc;
}

ossc::TrainConfig train_config_from_config() {
  ossc::TrainConfig tc;
  tc.loss = ossc::loss_kind_from_name(cstr("/train/loss", "vanilla"));
  tc.steps = cget<int>("/train/steps", tc.steps);
  tc.batch_n = cget<int>("/train/batch_n", tc.batch_n);
  tc.lambda = cget<double>("/train/lambda", tc.lambda);
  tc.oe_weight = cget<double>("/train/oe_weight", tc.oe_weight);
  tc.ls_alpha = cget<double>("/train/ls_alpha", tc.ls_alpha);
  tc.learning_rate = cget<double>("/train/learning_rate", tc.learning_rate);
  tc.validate();
  return tc;
}

std::shared_ptr<ossc::CompletionBackend> backend_from_config() {
  std::string kind = cstr("/backend/kind", "mock");
  std::shared_ptr<ossc::CompletionBackend> backend;
  if (kind == "mock") {
    backend = std::make_shared<ossc::MockBackend>();
  } else if (kind == "http") {
    ossc::HttpBackendOptions opts;
    opts.base_url = cstr("/backend/base_url", opts.base_url);
    opts.completions_path = cstr("/backend/completions_path", opts.completions_path);
    opts.token_env = cstr("/backend/token_env", opts.token_env);
    opts.retries = cget<int>("/backend/retries", opts.retries);
    opts.timeout_s = cget<int>("/backend/timeout_s", opts.timeout_s);
    opts.send_seed = cget<bool>("/backend/send_seed", opts.send_seed);
    backend = std::make_shared<ossc::HttpBackend>(opts);
  } else {
    ossc::fail("unknown backend kind: \"" + kind + "\" (expected mock or http)");
  }
  std::string cache_dir = cstr("/backend/cache_dir");
  if (cache_dir.empty()) {
    if (const char* env = std::getenv("OSSC_CACHE_DIR"); env != nullptr) cache_dir = env;
  }
  if (!cache_dir.empty()) {
    backend = std::make_shared<ossc::CachingBackend>(cache_dir, backend);
  }
  return backend;
}

ossc::CorpusFormat format_for(const std::string& path, const std::string& explicit_format) {
  if (!explicit_format.empty()) return ossc::corpus_format_from_name(explicit_format);
  std::string ext = fs::path(path).extension().string();
  if (ext == ".csv") return ossc::CorpusFormat::csv;
  if (ext == ".tsv") return ossc::CorpusFormat::tsv;
  return ossc::CorpusFormat::jsonl;
}

ossc::OpenSetSplit load_split(const fs::path& dir) {
  ossc::OpenSetSplit split;
  split.train = ossc::load_examples_jsonl(dir / "train.jsonl", ossc::Origin::train);
  split.id_test = ossc::load_examples_jsonl(dir / "id_test.jsonl", ossc::Origin::id_test);
  std::set<std::string> closed;
  for (const auto& e : split.train) closed.insert(e.label);
  for (const auto& e : split.id_test) closed.insert(e.label);
  split.closed_labels.assign(closed.begin(), closed.end());
  if (fs::exists(dir / "ood_test.jsonl")) {
    split.ood_test = ossc::load_examples_jsonl(dir / "ood_test.jsonl", ossc::Origin::ood_test);
    std::set<std::string> heldout;
    for (const auto& e : split.ood_test) heldout.insert(e.label);
    split.heldout_labels.assign(heldout.begin(), heldout.end());
  }
  return split;
}

void write_manifest(const fs::path& dir, const std::string& command, json extra) {
  json manifest{{"command", command},
                {"config_hash", config_hash()},
                {"version", ossc::kVersion},
                {"config", g_cfg}};
  manifest.update(extra);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) ossc::fail("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

ossc::NoveltySource novelty_from_config(const ossc::OpenSetSplit& split,
                                        const ossc::TrainConfig& tc) {
  std::string kind = cstr("/train/novelty_kind", "none");
  std::string path = cstr("/train/novelty_path");
  ossc::NoveltySource src;
  if (kind == "none") {
    if (tc.uses_novelty()) {
      ossc::fail(std::string(ossc::loss_kind_name(tc.loss)) +
                 " loss needs train.novelty_kind (gold, generated, or external)");
    }
    return src;
  }
  if (!tc.uses_novelty()) {
    ossc::fail("train.novelty_kind is set but loss \"" +
               std::string(ossc::loss_kind_name(tc.loss)) + "\" does not use a novelty source");
  }
  if (kind == "gold") {
    src.kind = ossc::NoveltyKind::gold_heldout;
    src.items = split.ood_test;
    if (src.items.empty()) ossc::fail("gold novelty requested but the split has no ood_test pool");
  } else if (kind == "generated") {
    if (path.empty()) ossc::fail("train.novelty_path is required for novelty_kind=generated");
    src.kind = ossc::NoveltyKind::generated;
    src.items = ossc::load_novelty_items(path);
  } else if (kind == "external") {
    if (path.empty()) ossc::fail("train.novelty_path is required for novelty_kind=external");
    src.kind = ossc::NoveltyKind::external_file;
    src.items = ossc::load_corpus(path, format_for(path, cstr("/train/novelty_format")),
                                  ossc::Origin::external);
  } else {
    ossc::fail("unknown novelty_kind: \"" + kind + "\"");
  }
  return src;
}

// ---------------------------------------------------------------------------

int cmd_split() {
  std::string dataset = cstr("/dataset/path");
  if (dataset.empty()) ossc::fail("dataset.path is required");
  if (!fs::exists(dataset)) ossc::fail("dataset file does not exist: " + dataset);

  ossc::LabelRenameMap rename;
  const ossc::LabelRenameMap* rename_ptr = nullptr;
  if (std::string map_path = cstr("/dataset/rename_map"); !map_path.empty()) {
    rename = ossc::load_label_rename_map(map_path);
    rename_ptr = &rename;
  }
  auto corpus = ossc::load_corpus(dataset, format_for(dataset, cstr("/dataset/format")),
                                  ossc::Origin::train, rename_ptr);

  auto heldout = cstrs("/split/heldout_labels");
  if (heldout.empty()) ossc::fail("split.heldout_labels is required");
  double test_fraction = cget<double>("/split/test_fraction", 0.2);
  uint64_t seed = cget<uint64_t>("/seed", seeds_from_config().front());

  auto split = ossc::make_open_set_split(corpus, heldout, test_fraction, seed);

  fs::path dir = cstr("/split/dir", "out/split");
  fs::create_directories(dir);
  ossc::write_examples_jsonl(dir / "train.jsonl", split.train);
  ossc::write_examples_jsonl(dir / "id_test.jsonl", split.id_test);
  ossc::write_examples_jsonl(dir / "ood_test.jsonl", split.ood_test);
  write_manifest(dir, "split",
                 {{"seed", seed},
                  {"test_fraction", test_fraction},
                  {"closed_labels", split.closed_labels},
                  {"heldout_labels", split.heldout_labels},
                  {"counts",
                   {{"train", split.train.size()},
                    {"id_test", split.id_test.size()},
                    {"ood_test", split.ood_test.size()}}}});
  std::cerr << "split: " << split.train.size() << " train, " << split.id_test.size()
            << " id_test, " << split.ood_test.size() << " ood_test -> " << dir << "\n";
  return 0;
}

int cmd_generate() {
  fs::path split_dir = cstr("/split/dir", "out/split");
  auto split = load_split(split_dir);
  auto backend = backend_from_config();
  auto mode = ossc::generation_mode_from_name(cstr("/generation/mode", "np"));
  uint64_t seed = cget<uint64_t>("/seed", seeds_from_config().front());

  fs::path dir = cstr("/generation/dir", "out/gen");
  fs::create_directories(dir);

  ossc::ExampleGenOptions gen;
  gen.model = cstr("/backend/model", "mock");
  gen.quota = cget<size_t>("/generation/quota", 1000);
  gen.seed = seed;
  gen.temperature = cget<double>("/generation/example_temperature", 0.7);
  gen.max_tokens = cget<int>("/generation/example_max_tokens", 128);
  gen.attempt_cap_factor = cget<size_t>("/generation/attempt_cap_factor", 10);
  gen.concurrency = cget<int>("/backend/concurrency", 1);
  if (size_t min_tokens = cget<size_t>("/generation/min_tokens", 0); min_tokens > 0) {
    gen.format_filter = [min_tokens](const std::string& text) {
      return ossc::tokenize(text).size() >= min_tokens;
    };
  }

  json manifest_extra{{"mode", ossc::generation_mode_name(mode)},
                      {"backend", backend->fingerprint()},
                      {"seed", seed}};

  ossc::NoveltySet result;
  if (mode == ossc::GenerationMode::np) {
    std::vector<std::string> prompt_labels;
    for (const auto& l : split.closed_labels) {
      prompt_labels.push_back(ossc::title_case_label(l));
    }
    ossc::Thesaurus thesaurus;
    const ossc::Thesaurus* thesaurus_ptr = nullptr;
    if (std::string tpath = cstr("/generation/thesaurus"); !tpath.empty()) {
      thesaurus = ossc::Thesaurus::load(tpath);
      thesaurus_ptr = &thesaurus;
    }
    ossc::LabelGenOptions lopts;
    lopts.model = gen.model;
    lopts.iterations = cget<int>("/generation/iterations", 5);
    lopts.temperature = cget<double>("/generation/label_temperature", 1.0);
    lopts.max_tokens = cget<int>("/generation/label_max_tokens", 64);
    lopts.seed = seed;
    auto label_set = ossc::generate_label_set(
        *backend, cstr("/generation/label_instruction", "Generate a diverse list of labels:"),
        prompt_labels, split.heldout_labels, thesaurus_ptr, lopts);
    ossc::write_label_set(dir / "labels.json", label_set);
    std::cerr << "labels: " << label_set.labels.size() << " kept of "
              << label_set.provenance.size() << " candidates (removal fraction "
              << ossc::format_g9(label_set.removal_fraction()) << ")\n";
    manifest_extra["label_count"] = label_set.labels.size();
    manifest_extra["label_removal_fraction"] = label_set.removal_fraction();

    gen.instruction = cstr("/generation/example_instruction",
                           "Given a label, generate a corresponding example:");
    result = ossc::generate_novel_examples(*backend, split, label_set, gen);
  } else {
    gen.instruction = cstr("/generation/fewshot_instruction", "Generate an example:");
    result = ossc::generate_baseline_examples(*backend, split,
                                              mode == ossc::GenerationMode::zeroshot, gen);
  }

  std::vector<ossc::GenerationRecord> accepted, rejected;
  for (const auto& r : result.records) {
    (r.verdict == "accepted" ? accepted : rejected).push_back(r);
  }
  ossc::write_novelty_records(dir / "novelty.jsonl", accepted);
  ossc::write_novelty_records(dir / "rejections.jsonl", rejected);
  manifest_extra["accepted"] = accepted.size();
  manifest_extra["rejected"] = rejected.size();
  if (result.error_summary) manifest_extra["error_summary"] = *result.error_summary;
  write_manifest(dir, "generate", manifest_extra);

  std::cerr << "generate: " << accepted.size() << " accepted, " << rejected.size()
            << " rejected -> " << dir << "\n";
  if (result.error_summary) {
    std::cerr << "error: " << *result.error_summary << "\n";
    return 1;
  }
  return 0;
}

int cmd_train() {
  fs::path split_dir = cstr("/split/dir", "out/split");
  auto split = load_split(split_dir);
  auto fc = feature_config_from_config();
  auto tc = train_config_from_config();
  auto novelty = novelty_from_config(split, tc);
  auto seeds = seeds_from_config();

  fs::path dir = cstr("/train/dir", "out/train");
  fs::create_directories(dir);

  for (uint64_t seed : seeds) {
    ossc::TrainConfig cfg = tc;
    cfg.seed = seed;
    auto result = ossc::train(split, tc.uses_novelty() ? &novelty : nullptr, cfg, fc);
    ossc::save_model(dir / ("model_seed" + std::to_string(seed) + ".bin"), result.state);
    ossc::write_train_log(dir / ("train_log_seed" + std::to_string(seed) + ".jsonl"), result.log);
    std::cerr << "train: seed " << seed << " final loss "
              << ossc::format_g9(result.log.back().loss) << "\n";
  }
  write_manifest(dir, "train",
                 {{"loss", ossc::loss_kind_name(tc.loss)},
                  {"seeds", seeds},
                  {"feature_fingerprint", fc.fingerprint()},
                  {"novelty_kind", cstr("/train/novelty_kind", "none")},
                  {"novelty_items", novelty.items.size()},
                  {"train_size", split.train.size()}});
  return 0;
}

int cmd_eval() {
  fs::path split_dir = cstr("/split/dir", "out/split");
  auto split = load_split(split_dir);
  fs::path train_dir = cstr("/train/dir", "out/train");
  auto seeds = seeds_from_config();

  fs::path dir = cstr("/eval/dir", "out/eval");
  fs::create_directories(dir);

  std::ofstream summary(dir / "summary.csv", std::ios::binary);
  summary << "seed,n_id,n_ood,id_accuracy,auac,auroc\n";

  for (uint64_t seed : seeds) {
    fs::path model_path = train_dir / ("model_seed" + std::to_string(seed) + ".bin");
    auto state = ossc::load_model(model_path);
    auto scored = ossc::score_test_set(state, split);
    json metadata{{"config_hash", config_hash()},
                  {"version", ossc::kVersion},
                  {"seed", seed},
                  {"model_file", model_path.filename().string()},
                  {"feature_fingerprint", state.feature_config.fingerprint()}};
    auto report = ossc::build_report(scored, metadata);
    std::string tag = "_seed" + std::to_string(seed);
    ossc::write_report_json(dir / ("report" + tag + ".json"), report);
    ossc::write_curve_csv(dir / ("curve" + tag + ".csv"), report.curve);
    ossc::export_confidence_profile(scored, dir / ("profile" + tag + ".csv"));
    summary << seed << "," << report.n_id << "," << report.n_ood << ","
            << ossc::format_g9(report.id_acc) << "," << ossc::format_g9(report.auac_value) << ","
            << (report.auroc_value ? ossc::format_g9(*report.auroc_value) : "") << "\n";
    std::cerr << "eval: seed " << seed << " id_acc " << ossc::format_g9(report.id_acc)
              << " auac " << ossc::format_g9(report.auac_value) << " auroc "
              << (report.auroc_value ? ossc::format_g9(*report.auroc_value) : "n/a") << "\n";
  }
  summary.close();
  write_manifest(dir, "eval", {{"seeds", seeds}});
  return 0;
}

int cmd_sweep() {
  std::string kind = cstr("/sweep/kind", "quota");
  fs::path split_dir = cstr("/split/dir", "out/split");
  auto split = load_split(split_dir);
  auto fc = feature_config_from_config();
  auto tc = train_config_from_config();
  auto seeds = seeds_from_config();

  fs::path dir = cstr("/sweep/dir", "out/sweep");
  fs::create_directories(dir);
  json manifest_extra{{"kind", kind}, {"seeds", seeds}};

  if (kind == "noise") {
    auto fractions = cnums("/sweep/fractions", {0.0, 0.25, 0.5, 0.75, 1.0});
    size_t size = cget<size_t>("/sweep/novelty_size", 4 * split.train.size());
    auto rows = ossc::run_noise_mixture(split, fractions, {ossc::LossKind::ccl, ossc::LossKind::oe},
                                        seeds, size, tc, fc);
    ossc::write_sweep_csv(dir / "noise_sweep.csv", rows);
    manifest_extra["novelty_size"] = size;
  } else if (kind == "quota") {
    std::string path = cstr("/train/novelty_path");
    if (path.empty()) ossc::fail("sweep kind=quota needs train.novelty_path");
    auto items = ossc::load_novelty_items(path);
    auto quota_values = cnums("/sweep/quotas", {});
    if (quota_values.empty()) ossc::fail("sweep.quotas is required for kind=quota");
    std::vector<size_t> quotas;
    for (double q : quota_values) quotas.push_back(static_cast<size_t>(q));
    for (uint64_t seed : seeds) {
      ossc::TrainConfig cfg = tc;
      cfg.seed = seed;
      auto rows = ossc::run_quota_sweep(split, items, quotas, cfg, fc);
      ossc::write_quota_csv(dir / ("quota_sweep_seed" + std::to_string(seed) + ".csv"), rows);
    }
  } else if (kind == "novelset-size") {
    auto size_values = cnums("/sweep/sizes", {});
    if (size_values.empty()) ossc::fail("sweep.sizes is required for kind=novelset-size");
    auto base = novelty_from_config(split, tc);
    for (uint64_t seed : seeds) {
      std::vector<ossc::QuotaRow> rows;
      for (double sv : size_values) {
        size_t size = static_cast<size_t>(sv);
        ossc::TrainConfig cfg = tc;
        cfg.seed = seed;
        ossc::TrainResult trained = [&] {
          if (size == 0) {
            cfg.loss = ossc::LossKind::vanilla;
            return ossc::train(split, nullptr, cfg, fc);
          }
          if (size > base.items.size()) {
            ossc::fail("novelset size " + std::to_string(size) + " exceeds pool size " +
                       std::to_string(base.items.size()));
          }
          ossc::NoveltySource subset = base;
          if (base.kind == ossc::NoveltyKind::gold_heldout) {
            ossc::Rng rng(ossc::mix_seed(seed, size));
            rng.shuffle(subset.items);
          }
          subset.items.resize(size);
          return ossc::train(split, &subset, cfg, fc);
        }();
        auto report = ossc::build_report(ossc::score_test_set(trained.state, split));
        rows.push_back({size, report.auac_value, report.auroc_value.value_or(0.0), report.id_acc});
      }
      ossc::write_quota_csv(dir / ("novelset_size_sweep_seed" + std::to_string(seed) + ".csv"),
                            rows);
    }
  } else if (kind == "trainset-size") {
    auto size_values = cnums("/sweep/train_sizes", {});
    if (size_values.empty()) ossc::fail("sweep.train_sizes is required for kind=trainset-size");
    auto novelty = novelty_from_config(split, tc);
    for (uint64_t seed : seeds) {
      std::vector<ossc::QuotaRow> rows;
      for (double sv : size_values) {
        size_t size = static_cast<size_t>(sv);
        if (size < 1 || size > split.train.size()) {
          ossc::fail("train subsample size " + std::to_string(size) + " out of range 1.." +
                     std::to_string(split.train.size()));
        }
        ossc::OpenSetSplit sub = split;
        ossc::Rng rng(ossc::mix_seed(seed, size));
        rng.shuffle(sub.train);
        sub.train.resize(size);
        ossc::TrainConfig cfg = tc;
        cfg.seed = seed;
        auto trained = ossc::train(sub, tc.uses_novelty() ? &novelty : nullptr, cfg, fc);
        auto report = ossc::build_report(ossc::score_test_set(trained.state, sub));
        rows.push_back({size, report.auac_value, report.auroc_value.value_or(0.0), report.id_acc});
      }
      ossc::write_quota_csv(dir / ("trainset_size_sweep_seed" + std::to_string(seed) + ".csv"),
                            rows);
    }
  } else {
    ossc::fail("unknown sweep kind: \"" + kind +
               "\" (expected noise, quota, novelset-size, trainset-size)");
  }
  write_manifest(dir, "sweep", manifest_extra);
  return 0;
}

int cmd_report(const std::vector<std::string>& report_paths) {
  if (report_paths.empty()) ossc::fail("report needs at least one report JSON path");
  struct Row {
    std::string name;
    double id_acc, auac_v;
    std::optional<double> auroc_v;
  };
  std::vector<Row> rows;
  for (const auto& p : report_paths) {
    std::ifstream in(p);
    if (!in) ossc::fail("cannot open report: " + p);
    json j;
    in >> j;
    Row r;
    r.name = fs::path(p).filename().string();
    r.id_acc = j.at("id_accuracy").get<double>();
    r.auac_v = j.at("auac").get<double>();
    if (j.contains("auroc") && !j["auroc"].is_null()) r.auroc_v = j["auroc"].get<double>();
    rows.push_back(r);
  }

  std::printf("%-32s %10s %10s %10s\n", "report", "id_acc", "auac", "auroc");
  double acc_sum = 0, auac_sum = 0, auroc_sum = 0;
  size_t auroc_n = 0;
  for (const auto& r : rows) {
    std::printf("%-32s %10.4f %10.4f ", r.name.c_str(), r.id_acc, r.auac_v);
    if (r.auroc_v) {
      std::printf("%10.4f\n", *r.auroc_v);
      auroc_sum += *r.auroc_v;
      ++auroc_n;
    } else {
      std::printf("%10s\n", "n/a");
    }
    acc_sum += r.id_acc;
    auac_sum += r.auac_v;
  }
  if (rows.size() > 1) {
    const double n = static_cast<double>(rows.size());
    std::printf("%-32s %10.4f %10.4f ", "mean", acc_sum / n, auac_sum / n);
    if (auroc_n > 0) {
      std::printf("%10.4f\n", auroc_sum / static_cast<double>(auroc_n));
    } else {
      std::printf("%10s\n", "n/a");
    }
  }
  return 0;
}

void load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) ossc::fail("cannot open config file: " + path);
  try {
    in >> g_cfg;
  } catch (const json::exception& e) {
    ossc::fail(path + ": invalid JSON: " + std::string(e.what()));
  }
  if (!g_cfg.is_object()) ossc::fail(path + ": config must be a JSON object");
}

void add_override_str(CLI::App* cmd, const std::string& flag, const std::string& pointer,
                      const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [pointer](const std::string& v) { cset(pointer, v); }, help);
}

void add_override_num(CLI::App* cmd, const std::string& flag, const std::string& pointer,
                      const std::string& help) {
  cmd->add_option_function<double>(
      flag, [pointer](double v) { cset(pointer, v); }, help);
}

void add_override_int(CLI::App* cmd, const std::string& flag, const std::string& pointer,
                      const std::string& help) {
  cmd->add_option_function<int64_t>(
      flag, [pointer](int64_t v) { cset(pointer, v); }, help);
}

void add_override_list(CLI::App* cmd, const std::string& flag, const std::string& pointer,
                       const std::string& help, bool numeric = false) {
  cmd->add_option_function<std::vector<std::string>>(
      flag,
      [pointer, numeric](const std::vector<std::string>& values) {
        json arr = json::array();
        for (const auto& v : values) {
          if (numeric) {
            arr.push_back(std::stod(v));
          } else {
            arr.push_back(v);
          }
        }
        cset(pointer, arr);
      },
      help)
      ->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
  // The config file loads before CLI11 applies overrides, regardless of
  // where --config appears on the command line.
  try {
    for (int i = 1; i < argc - 1; ++i) {
      std::string arg = argv[i];
      if (arg == "--config" || arg == "-c") load_config_file(argv[i + 1]);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"open-set selective classification pipeline"};
  app.require_subcommand(1);
  std::string config_placeholder;
  app.add_option("-c,--config", config_placeholder, "run configuration JSON file")
      ->each([](const std::string&) {});

  auto* split = app.add_subcommand("split", "construct an open-set split from a corpus");
  add_override_str(split, "--dataset", "/dataset/path", "corpus file (jsonl/csv/tsv)");
  add_override_str(split, "--format", "/dataset/format", "corpus format");
  add_override_str(split, "--rename-map", "/dataset/rename_map", "label rename map JSON");
  add_override_list(split, "--heldout", "/split/heldout_labels", "held-out labels");
  add_override_num(split, "--test-fraction", "/split/test_fraction", "id_test fraction");
  add_override_str(split, "--split-dir", "/split/dir", "output directory");
  add_override_int(split, "--seed", "/seed", "split seed");

  auto* generate = app.add_subcommand("generate", "generate a novel label and example set");
  add_override_str(generate, "--split-dir", "/split/dir", "split directory");
  add_override_str(generate, "--gen-dir", "/generation/dir", "output directory");
  add_override_str(generate, "--mode", "/generation/mode", "np | fewshot | zeroshot");
  add_override_str(generate, "--backend", "/backend/kind", "mock | http");
  add_override_str(generate, "--model", "/backend/model", "model name");
  add_override_str(generate, "--base-url", "/backend/base_url", "backend base URL");
  add_override_str(generate, "--cache-dir", "/backend/cache_dir", "completion cache directory");
  add_override_int(generate, "--concurrency", "/backend/concurrency", "parallel requests");
  add_override_int(generate, "--quota", "/generation/quota", "accepted generations wanted");
  add_override_int(generate, "--iterations", "/generation/iterations", "label generation calls");
  add_override_str(generate, "--thesaurus", "/generation/thesaurus", "thesaurus JSON");
  add_override_str(generate, "--label-instruction", "/generation/label_instruction",
                   "label prompt instruction");
  add_override_str(generate, "--example-instruction", "/generation/example_instruction",
                   "example prompt instruction");
  add_override_str(generate, "--fewshot-instruction", "/generation/fewshot_instruction",
                   "few-/zero-shot instruction");
  add_override_int(generate, "--min-tokens", "/generation/min_tokens",
                   "format filter: minimum tokens per generation");
  add_override_int(generate, "--seed", "/seed", "generation seed");

  auto* train = app.add_subcommand("train", "train a classifier on a split");
  add_override_str(train, "--split-dir", "/split/dir", "split directory");
  add_override_str(train, "--train-dir", "/train/dir", "output directory");
  add_override_str(train, "--loss", "/train/loss", "vanilla | ccl | oe | label_smoothing");
  add_override_int(train, "--steps", "/train/steps", "SGD steps");
  add_override_int(train, "--batch-n", "/train/batch_n", "batch size n");
  add_override_num(train, "--lambda", "/train/lambda", "CCL hinge weight");
  add_override_num(train, "--oe-weight", "/train/oe_weight", "outlier exposure weight");
  add_override_num(train, "--ls-alpha", "/train/ls_alpha", "label smoothing factor");
  add_override_num(train, "--lr", "/train/learning_rate", "learning rate");
  add_override_str(train, "--novelty-kind", "/train/novelty_kind",
                   "none | gold | generated | external");
  add_override_str(train, "--novelty-path", "/train/novelty_path", "novelty set file");
  add_override_int(train, "--dimension", "/features/dimension", "feature dimension (power of 2)");
  add_override_list(train, "--seeds", "/seeds", "training seeds", true);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate trained models on a split");
  add_override_str(eval_cmd, "--split-dir", "/split/dir", "split directory");
  add_override_str(eval_cmd, "--train-dir", "/train/dir", "directory holding model files");
  add_override_str(eval_cmd, "--eval-dir", "/eval/dir", "output directory");
  add_override_list(eval_cmd, "--seeds", "/seeds", "model seeds to evaluate", true);

  auto* sweep = app.add_subcommand("sweep", "run a sweep harness");
  add_override_str(sweep, "--kind", "/sweep/kind", "noise | quota | novelset-size | trainset-size");
  add_override_str(sweep, "--split-dir", "/split/dir", "split directory");
  add_override_str(sweep, "--sweep-dir", "/sweep/dir", "output directory");
  add_override_list(sweep, "--fractions", "/sweep/fractions", "mixture id fractions", true);
  add_override_list(sweep, "--quotas", "/sweep/quotas", "generation quotas", true);
  add_override_list(sweep, "--sizes", "/sweep/sizes", "novel set sizes", true);
  add_override_list(sweep, "--train-sizes", "/sweep/train_sizes", "train subsample sizes", true);
  add_override_int(sweep, "--novelty-size", "/sweep/novelty_size", "mixture size for kind=noise");
  add_override_str(sweep, "--loss", "/train/loss", "loss for size sweeps");
  add_override_int(sweep, "--steps", "/train/steps", "SGD steps");
  add_override_str(sweep, "--novelty-kind", "/train/novelty_kind", "novelty source kind");
  add_override_str(sweep, "--novelty-path", "/train/novelty_path", "novelty set file");
  add_override_list(sweep, "--seeds", "/seeds", "seeds", true);

  auto* report = app.add_subcommand("report", "summarize evaluation reports");
  std::vector<std::string> report_paths;
  report->add_option("paths", report_paths, "report JSON files")->expected(-1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (split->parsed()) return cmd_split();
    if (generate->parsed()) return cmd_generate();
    if (train->parsed()) return cmd_train();
    if (eval_cmd->parsed()) return cmd_eval();
    if (sweep->parsed()) return cmd_sweep();
    if (report->parsed()) return cmd_report(report_paths);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
