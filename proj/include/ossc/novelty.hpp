#pragma once

// Two-stage novel-example generation: prompt a completion backend to extend
// the closed-set label list, filter the candidates (closed-set duplicates,
// gold labels, thesaurus synonyms, punctuation noise), then prompt again to
// generate an example per sampled novel label with one demonstration from
// each closed class.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ossc/backend.hpp"
#include "ossc/corpus.hpp"
#include "ossc/rng.hpp"
#include "ossc/util.hpp"

namespace ossc {

// ---------------------------------------------------------------------------
// Prompts

struct LabelPrompt {
  std::string instruction;
  std::vector<std::string> closed_labels;
  std::string rendered;
};

// "<instruction>\n[A, B, C, " -- the open bracket invites the model to
// continue the list; the request's stop sequence is "]".
inline LabelPrompt build_label_prompt(const std::string& instruction,
                                      const std::vector<std::string>& closed_labels) {
  if (closed_labels.empty()) fail("label prompt needs at least one closed-set label");
  LabelPrompt p;
  p.instruction = instruction;
  p.closed_labels = closed_labels;
  std::string bracket_line = "[" + join(closed_labels, ", ") + ", ";
  p.rendered = instruction.empty() ? bracket_line : instruction + "\n" + bracket_line;
  return p;
}

inline constexpr const char* kLabelStop = "]";
inline constexpr const char* kExampleStop = "\nLabel:";
inline constexpr const char* kFewshotStop = "\n\n";

// One "Label:/Example:" block per closed-class demonstration, then the
// novel label with an open Example slot. Stop sequence: "\nLabel:".
inline std::string build_example_prompt(
    const std::string& instruction,
    const std::vector<std::pair<std::string, std::string>>& demonstrations,
    const std::string& novel_label) {
  if (demonstrations.empty()) fail("example prompt needs one demonstration per closed class");
  if (novel_label.empty()) fail("example prompt needs a non-empty novel label");
  std::string out;
  if (!instruction.empty()) {
    out = instruction;
    out += "\n\n";
  }
  for (const auto& [label, text] : demonstrations) {
    out += "Label: " + label + "\nExample: " + text + "\n\n";
  }
  out += "Label: " + novel_label + "\nExample:";
  return out;
}

// Zero-shot: the instruction alone. Few-shot: instruction followed by one
// unlabeled example block per closed class; labels never appear.
inline std::string build_fewshot_prompt(const std::string& instruction,
                                        const std::vector<std::string>& demonstrations,
                                        bool zero_shot) {
  if (zero_shot) return instruction;
  std::string out = instruction;
  for (const auto& text : demonstrations) {
    out += "\n\n";
    out += text;
  }
  out += "\n\n";
  return out;
}

// ---------------------------------------------------------------------------
// Label parsing and filtering

struct ParsedLabelCandidate {
  std::string raw;         // trimmed piece as completed
  std::string normalized;  // after normalize_label
  bool punctuation_ok = false;
};

inline bool label_chars_ok(std::string_view s) {
  for (char c : s) {
    if (!(is_ascii_alpha(c) || is_ascii_digit(c) || c == ' ' || c == '-' || c == '/')) {
      return false;
    }
  }
  return true;
}

// Truncates at the first "]", splits on commas, normalizes, and flags
// candidates containing characters outside letters/digits/space/-//.
// Pieces that are empty after trimming are dropped.
inline std::vector<ParsedLabelCandidate> parse_label_candidates(std::string_view completion) {
  std::string_view body = completion;
  if (size_t bracket = body.find(']'); bracket != std::string_view::npos) {
    body = body.substr(0, bracket);
  }
  std::vector<ParsedLabelCandidate> out;
  for (const std::string& piece : split(body, ',')) {
    ParsedLabelCandidate c;
    c.raw = trim(piece);
    if (c.raw.empty()) continue;
    c.normalized = normalize_label(c.raw);
    c.punctuation_ok = label_chars_ok(c.normalized);
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<std::string> parse_label_completion(std::string_view completion) {
  std::vector<std::string> out;
  for (auto& c : parse_label_candidates(completion)) {
    if (c.punctuation_ok) out.push_back(std::move(c.normalized));
  }
  return out;
}

// Word -> synonyms map with the symmetric closure applied at load.
class Thesaurus {
 public:
  Thesaurus() = default;

  static Thesaurus from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail("thesaurus must be a JSON object of word -> [synonyms]");
    Thesaurus t;
    for (const auto& [word, syns] : j.items()) {
      if (!syns.is_array()) fail("thesaurus entry for \"" + word + "\" must be an array");
      std::string w = normalize_label(word);
      for (const auto& s : syns) {
        if (!s.is_string()) fail("thesaurus synonyms must be strings");
        std::string syn = normalize_label(s.get<std::string>());
        if (syn.empty() || syn == w) continue;
        t.map_[w].insert(syn);
        t.map_[syn].insert(w);
      }
    }
    return t;
  }

  static Thesaurus load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open thesaurus: " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(path.string() + ": invalid JSON: " + e.what());
    }
    return from_json(j);
  }

  bool are_synonyms(const std::string& a, const std::string& b) const {
    auto it = map_.find(a);
    return it != map_.end() && it->second.count(b) > 0;
  }

  size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, std::unordered_set<std::string>> map_;
};

enum class LabelVerdict {
  accepted,
  rejected_punctuation,
  rejected_closed,
  rejected_gold,
  rejected_synonym,
  rejected_duplicate,
};

inline const char* label_verdict_name(LabelVerdict v) {
  switch (v) {
    case LabelVerdict::accepted: return "accepted";
    case LabelVerdict::rejected_punctuation: return "rejected_punctuation";
    case LabelVerdict::rejected_closed: return "rejected_closed";
    case LabelVerdict::rejected_gold: return "rejected_gold";
    case LabelVerdict::rejected_synonym: return "rejected_synonym";
    case LabelVerdict::rejected_duplicate: return "rejected_duplicate";
  }
  return "accepted";
}

struct LabelProvenance {
  std::string raw;
  std::string normalized;
  int iteration = 0;
  LabelVerdict verdict = LabelVerdict::accepted;
  std::string detail;  // e.g. which closed label a synonym matched
};

struct NovelLabelSet {
  std::vector<std::string> labels;  // normalized, deduplicated, first-seen order
  std::vector<LabelProvenance> provenance;

  size_t rejected_count() const {
    size_t n = 0;
    for (const auto& p : provenance) {
      if (p.verdict != LabelVerdict::accepted) ++n;
    }
    return n;
  }

  double removal_fraction() const {
    return provenance.empty()
               ? 0.0
               : static_cast<double>(rejected_count()) / static_cast<double>(provenance.size());
  }
};

struct LabelGenOptions {
  std::string model = "mock";
  int iterations = 5;
  double temperature = 1.0;
  int max_tokens = 64;
  uint64_t seed = 0;
};

// Unions parsed candidates over `iterations` completions of the same prompt
// under different sampling seeds, then filters. Every rejected candidate
// keeps a reason in the provenance. Zero survivors is a valid outcome.
inline NovelLabelSet generate_label_set(CompletionBackend& backend,
                                        const std::string& instruction,
                                        const std::vector<std::string>& closed_labels,
                                        const std::vector<std::string>& gold_labels,
                                        const Thesaurus* thesaurus,
                                        const LabelGenOptions& options) {
  if (options.iterations < 1) fail("label generation needs at least one iteration");
  LabelPrompt prompt = build_label_prompt(instruction, closed_labels);

  std::vector<std::string> closed_norm;
  closed_norm.reserve(closed_labels.size());
  std::unordered_set<std::string> closed_set;
  for (const auto& l : closed_labels) {
    closed_norm.push_back(normalize_label(l));
    closed_set.insert(closed_norm.back());
  }
  std::unordered_set<std::string> gold_set;
  for (const auto& g : gold_labels) gold_set.insert(normalize_label(g));

  NovelLabelSet out;
  std::unordered_set<std::string> accepted;
  for (int it = 0; it < options.iterations; ++it) {
    CompletionRequest req;
    req.model = options.model;
    req.prompt = prompt.rendered;
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;
    req.stop = {kLabelStop};
    req.seed = mix_seed(options.seed, static_cast<uint64_t>(it));
    Completion completion;
    try {
      completion = backend.complete(req);
    } catch (const std::exception& e) {
      fail("label generation iteration " + std::to_string(it) + " failed: " + e.what());
    }

    for (auto& cand : parse_label_candidates(completion.text)) {
      LabelProvenance p;
      p.raw = cand.raw;
      p.normalized = cand.normalized;
      p.iteration = it;
      if (!cand.punctuation_ok) {
        p.verdict = LabelVerdict::rejected_punctuation;
      } else if (closed_set.count(cand.normalized)) {
        p.verdict = LabelVerdict::rejected_closed;
        p.detail = cand.normalized;
      } else if (gold_set.count(cand.normalized)) {
        p.verdict = LabelVerdict::rejected_gold;
        p.detail = cand.normalized;
      } else {
        p.verdict = LabelVerdict::accepted;
        if (thesaurus != nullptr) {
          for (const auto& closed : closed_norm) {
            if (thesaurus->are_synonyms(cand.normalized, closed)) {
              p.verdict = LabelVerdict::rejected_synonym;
              p.detail = closed;
              break;
            }
          }
        }
        if (p.verdict == LabelVerdict::accepted) {
          if (!accepted.insert(cand.normalized).second) {
            p.verdict = LabelVerdict::rejected_duplicate;
          } else {
            out.labels.push_back(cand.normalized);
          }
        }
      }
      out.provenance.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Example generation

struct GenerationRecord {
  size_t attempt = 0;
  std::string label;
  std::string text;  // trimmed completion (possibly empty for rejects)
  std::string prompt_hash;
  std::string verdict;  // accepted | rejected_empty | rejected_format
};

struct NoveltySet {
  std::vector<LabeledExample> items;     // accepted generations, origin=generated
  std::vector<GenerationRecord> records;
  std::optional<std::string> error_summary;  // set when the attempt cap tripped
};

using FormatFilter = std::function<bool(const std::string&)>;

enum class GenerationMode { np, fewshot, zeroshot };

inline const char* generation_mode_name(GenerationMode m) {
  switch (m) {
    case GenerationMode::np: return "np";
    case GenerationMode::fewshot: return "fewshot";
    case GenerationMode::zeroshot: return "zeroshot";
  }
  return "np";
}

inline GenerationMode generation_mode_from_name(std::string_view name) {
  if (name == "np") return GenerationMode::np;
  if (name == "fewshot") return GenerationMode::fewshot;
  if (name == "zeroshot") return GenerationMode::zeroshot;
  fail("unknown generation mode: \"" + std::string(name) + "\" (expected np, fewshot, zeroshot)");
}

struct ExampleGenOptions {
  std::string model = "mock";
  size_t quota = 1000;
  uint64_t seed = 0;
  double temperature = 0.7;
  int max_tokens = 128;
  size_t attempt_cap_factor = 10;  // cap = factor * quota
  int concurrency = 1;
  FormatFilter format_filter;  // empty: accept everything non-empty
  std::string instruction = "Given a label, generate a corresponding example:";
};

namespace detail {

struct AttemptResult {
  size_t attempt = 0;
  std::string label;
  std::string prompt;
  std::string completion;
};

inline std::string trim_at_stop(std::string text, std::string_view stop) {
  if (size_t pos = text.find(stop); pos != std::string::npos) text.resize(pos);
  return trim(text);
}

// Each attempt draws from its own RNG stream so results are independent of
// acceptance history and of how many attempts run concurrently.
template <typename AttemptFn>
NoveltySet run_generation(CompletionBackend& backend, const ExampleGenOptions& options,
                          std::string_view stop, AttemptFn&& make_attempt) {
  if (options.quota < 1) fail("generation quota must be >= 1");
  const size_t cap = options.attempt_cap_factor * options.quota;
  const int window = options.concurrency > 1 ? options.concurrency : 1;

  NoveltySet out;
  std::deque<std::future<AttemptResult>> inflight;
  size_t next_attempt = 0;

  auto launch = [&](size_t attempt) {
    auto task = [&backend, &options, &make_attempt, stop, attempt]() {
      Rng rng(mix_seed(options.seed, attempt));
      auto [label, prompt] = make_attempt(rng);
      CompletionRequest req;
      req.model = options.model;
      req.prompt = prompt;
      req.max_tokens = options.max_tokens;
      req.temperature = options.temperature;
      req.stop = {std::string(stop)};
      req.seed = rng.next_u64();
      AttemptResult r{attempt, std::move(label), std::move(prompt),
                      backend.complete(req).text};
      return r;
    };
    inflight.push_back(window > 1 ? std::async(std::launch::async, task)
                                  : std::async(std::launch::deferred, task));
  };

  while (out.items.size() < options.quota && (next_attempt < cap || !inflight.empty())) {
    while (next_attempt < cap && inflight.size() < static_cast<size_t>(window)) {
      launch(next_attempt++);
    }
    if (inflight.empty()) break;
    AttemptResult r = inflight.front().get();
    inflight.pop_front();

    GenerationRecord rec;
    rec.attempt = r.attempt;
    rec.label = r.label;
    rec.prompt_hash = to_hex(fnv1a64(r.prompt));
    rec.text = trim_at_stop(std::move(r.completion), stop);
    if (rec.text.empty()) {
      rec.verdict = "rejected_empty";
    } else if (options.format_filter && !options.format_filter(rec.text)) {
      rec.verdict = "rejected_format";
    } else {
      rec.verdict = "accepted";
      LabeledExample e;
      e.id = "gen:" + std::to_string(r.attempt);
      e.text = rec.text;
      e.label = normalize_label(r.label);
      e.origin = Origin::generated;
      out.items.push_back(std::move(e));
    }
    out.records.push_back(std::move(rec));
  }

  if (out.items.size() < options.quota) {
    out.error_summary = "attempt cap exceeded: accepted " + std::to_string(out.items.size()) +
                        " of " + std::to_string(options.quota) + " after " +
                        std::to_string(next_attempt) + " attempts";
  }
  return out;
}

}  // namespace detail

// Novelty-prompted generation: per attempt, sample a novel label uniformly
// and one fresh demonstration per closed class from the training set.
inline NoveltySet generate_novel_examples(CompletionBackend& backend, const OpenSetSplit& split,
                                          const NovelLabelSet& label_set,
                                          const ExampleGenOptions& options) {
  if (label_set.labels.empty()) fail("novel label set is empty");
  std::unordered_map<std::string, std::vector<const LabeledExample*>> by_label;
  for (const auto& e : split.train) by_label[e.label].push_back(&e);
  for (const auto& label : split.closed_labels) {
    if (by_label[label].empty()) {
      fail("no training demonstrations available for closed label \"" + label + "\"");
    }
  }

  auto make_attempt = [&](Rng& rng) -> std::pair<std::string, std::string> {
    std::string label = label_set.labels[rng.below(label_set.labels.size())];
    std::vector<std::pair<std::string, std::string>> demos;
    demos.reserve(split.closed_labels.size());
    for (const auto& closed : split.closed_labels) {
      const auto& pool = by_label[closed];
      const LabeledExample* demo = pool[rng.below(pool.size())];
      demos.emplace_back(closed, demo->text);
    }
    return {label, build_example_prompt(options.instruction, demos, label)};
  };
  return detail::run_generation(backend, options, kExampleStop, make_attempt);
}

// Few-/zero-shot baseline generation: no label conditioning. Accepted items
// carry the placeholder label "novel".
inline NoveltySet generate_baseline_examples(CompletionBackend& backend,
                                             const OpenSetSplit& split, bool zero_shot,
                                             const ExampleGenOptions& options) {
  std::unordered_map<std::string, std::vector<const LabeledExample*>> by_label;
  if (!zero_shot) {
    for (const auto& e : split.train) by_label[e.label].push_back(&e);
    for (const auto& label : split.closed_labels) {
      if (by_label[label].empty()) {
        fail("no training demonstrations available for closed label \"" + label + "\"");
      }
    }
  }

  auto make_attempt = [&](Rng& rng) -> std::pair<std::string, std::string> {
    std::vector<std::string> demos;
    if (!zero_shot) {
      for (const auto& closed : split.closed_labels) {
        const auto& pool = by_label[closed];
        demos.push_back(pool[rng.below(pool.size())]->text);
      }
    }
    return {"novel", build_fewshot_prompt(options.instruction, demos, zero_shot)};
  };
  return detail::run_generation(backend, options, kFewshotStop, make_attempt);
}

// ---------------------------------------------------------------------------
// File formats

inline nlohmann::json label_set_to_json(const NovelLabelSet& set) {
  nlohmann::json provenance = nlohmann::json::array();
  std::unordered_map<std::string, size_t> counts;
  for (const auto& p : set.provenance) {
    provenance.push_back({{"raw", p.raw},
                          {"normalized", p.normalized},
                          {"iteration", p.iteration},
                          {"verdict", label_verdict_name(p.verdict)},
                          {"detail", p.detail}});
    counts[label_verdict_name(p.verdict)]++;
  }
  return nlohmann::json{{"labels", set.labels},
                        {"provenance", std::move(provenance)},
                        {"counts", counts},
                        {"removal_fraction", set.removal_fraction()}};
}

inline void write_label_set(const std::filesystem::path& path, const NovelLabelSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write label set: " + path.string());
  out << label_set_to_json(set).dump(2) << "\n";
  if (!out) fail("write failed: " + path.string());
}

inline NovelLabelSet load_label_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open label set: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(path.string() + ": invalid JSON: " + e.what());
  }
  NovelLabelSet set;
  set.labels = j.at("labels").get<std::vector<std::string>>();
  if (j.contains("provenance")) {
    for (const auto& p : j["provenance"]) {
      LabelProvenance lp;
      lp.raw = p.value("raw", "");
      lp.normalized = p.value("normalized", "");
      lp.iteration = p.value("iteration", 0);
      lp.detail = p.value("detail", "");
      std::string v = p.value("verdict", "accepted");
      lp.verdict = LabelVerdict::accepted;
      for (LabelVerdict k : {LabelVerdict::rejected_punctuation, LabelVerdict::rejected_closed,
                             LabelVerdict::rejected_gold, LabelVerdict::rejected_synonym,
                             LabelVerdict::rejected_duplicate}) {
        if (v == label_verdict_name(k)) lp.verdict = k;
      }
      set.provenance.push_back(std::move(lp));
    }
  }
  return set;
}

// One {label, text, prompt_hash, attempt, verdict} object per line.
inline void write_novelty_records(const std::filesystem::path& path,
                                  const std::vector<GenerationRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write novelty records: " + path.string());
  for (const auto& r : records) {
    nlohmann::json j{{"label", r.label}, {"text", r.text}, {"prompt_hash", r.prompt_hash},
                     {"attempt", r.attempt}, {"verdict", r.verdict}};
    out << j.dump() << "\n";
  }
  if (!out) fail("write failed: " + path.string());
}

// Loads accepted generations back as training-ready examples.
inline std::vector<LabeledExample> load_novelty_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open novelty set: " + path.string());
  std::vector<LabeledExample> items;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(path.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    if (j.value("verdict", "accepted") != "accepted") continue;
    LabeledExample e;
    e.id = "gen:" + std::to_string(j.value("attempt", lineno));
    e.text = j.at("text").get<std::string>();
    e.label = normalize_label(j.at("label").get<std::string>());
    e.origin = Origin::generated;
    items.push_back(std::move(e));
  }
  if (items.empty()) fail(path.string() + ": no accepted generations");
  return items;
}

}  // namespace ossc
