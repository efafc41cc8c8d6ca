#pragma once

// Labeled text corpora: loading from JSONL/CSV/TSV, open-set splits that
// hold out classes, and mixture novel sets.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ossc/rng.hpp"
#include "ossc/util.hpp"

namespace ossc {

enum class Origin { train, id_test, ood_test, generated, external };

inline const char* origin_name(Origin o) {
  switch (o) {
    case Origin::train: return "train";
    case Origin::id_test: return "id_test";
    case Origin::ood_test: return "ood_test";
    case Origin::generated: return "generated";
    case Origin::external: return "external";
  }
  return "train";
}

inline Origin origin_from_name(std::string_view name) {
  if (name == "train") return Origin::train;
  if (name == "id_test") return Origin::id_test;
  if (name == "ood_test") return Origin::ood_test;
  if (name == "generated") return Origin::generated;
  if (name == "external") return Origin::external;
  fail("unknown origin: \"" + std::string(name) + "\"");
}

struct LabeledExample {
  std::string id;
  std::string text;   // non-empty after trimming
  std::string label;  // normalized (see normalize_label)
  Origin origin = Origin::train;
};

struct OpenSetSplit {
  std::vector<std::string> closed_labels;  // alphabetical
  std::vector<std::string> heldout_labels;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> id_test;
  std::vector<LabeledExample> ood_test;
};

enum class NoveltyKind { generated, external_file, gold_heldout, mixture };

inline const char* novelty_kind_name(NoveltyKind k) {
  switch (k) {
    case NoveltyKind::generated: return "generated";
    case NoveltyKind::external_file: return "external_file";
    case NoveltyKind::gold_heldout: return "gold_heldout";
    case NoveltyKind::mixture: return "mixture";
  }
  return "generated";
}

struct NoveltySource {
  NoveltyKind kind = NoveltyKind::generated;
  std::vector<LabeledExample> items;
  double mixture_id_fraction = 0.0;  // meaningful for kind == mixture only
};

enum class CorpusFormat { jsonl, csv, tsv };

inline CorpusFormat corpus_format_from_name(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "csv") return CorpusFormat::csv;
  if (name == "tsv") return CorpusFormat::tsv;
  fail("unknown corpus format: \"" + std::string(name) + "\" (expected jsonl, csv, or tsv)");
}

// Keys and values are stored normalized; lookups happen after normalization,
// so a map like {"LOC": "location"} also rewrites a raw "loc".
using LabelRenameMap = std::unordered_map<std::string, std::string>;

inline LabelRenameMap load_label_rename_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open label rename map: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(path.string() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) fail(path.string() + ": rename map must be a JSON object");
  LabelRenameMap map;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) fail(path.string() + ": rename value for \"" + key + "\" must be a string");
    map[normalize_label(key)] = normalize_label(value.get<std::string>());
  }
  return map;
}

namespace detail {

struct RawRecord {
  std::string id;  // empty when the file gave none
  std::string text;
  std::string label;
  size_t line;  // 1-based line where the record starts
};

inline void check_record(const std::filesystem::path& path, const RawRecord& r) {
  if (trim(r.text).empty()) {
    fail(path.string() + ":" + std::to_string(r.line) + ": empty text field");
  }
}

inline std::vector<RawRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open corpus file: " + path.string());
  std::vector<RawRecord> records;
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
    RawRecord r;
    r.line = lineno;
    if (!j.contains("text") || !j["text"].is_string()) {
      fail(path.string() + ":" + std::to_string(lineno) + ": missing \"text\" field");
    }
    if (!j.contains("label") || !j["label"].is_string()) {
      fail(path.string() + ":" + std::to_string(lineno) + ": missing \"label\" field");
    }
    r.text = j["text"].get<std::string>();
    r.label = j["label"].get<std::string>();
    if (j.contains("id") && j["id"].is_string()) r.id = j["id"].get<std::string>();
    records.push_back(std::move(r));
  }
  return records;
}

// RFC 4180-style fields: quoted fields may contain the separator, doubled
// quotes, and embedded newlines.
inline std::vector<std::vector<std::string>> read_delimited(
    const std::filesystem::path& path, char sep, bool quoted,
    std::vector<size_t>* row_lines) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open corpus file: " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  size_t lineno = 1;
  size_t row_start_line = 1;
  auto end_field = [&]() { row.push_back(std::move(field)); field.clear(); };
  auto end_row = [&]() {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) {
      rows.push_back(std::move(row));
      if (row_lines) row_lines->push_back(row_start_line);
    }
    row.clear();
    row_start_line = lineno;
  };
  for (size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (c == '\n') ++lineno;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (quoted && c == '"' && field.empty()) {
      in_quotes = true;
    } else if (c == sep) {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_row();
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) fail(path.string() + ": unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

inline std::vector<RawRecord> read_csv_like(const std::filesystem::path& path, char sep, bool quoted) {
  std::vector<size_t> row_lines;
  auto rows = read_delimited(path, sep, quoted, &row_lines);
  if (rows.empty()) fail(path.string() + ": empty file");

  const auto& header = rows[0];
  auto column = [&](std::string_view name) -> int {
    for (size_t i = 0; i < header.size(); ++i) {
      if (to_lower_ascii(trim(header[i])) == name) return static_cast<int>(i);
    }
    return -1;
  };
  int text_col = column("text");
  int label_col = column("label");
  int id_col = column("id");
  if (text_col < 0 || label_col < 0) {
    fail(path.string() + ": header row must name columns text,label");
  }

  std::vector<RawRecord> records;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    RawRecord rec;
    rec.line = row_lines[r];
    size_t need = static_cast<size_t>(std::max(text_col, label_col)) + 1;
    if (row.size() < need) {
      fail(path.string() + ":" + std::to_string(rec.line) + ": row has " +
           std::to_string(row.size()) + " fields, expected at least " + std::to_string(need));
    }
    rec.text = row[static_cast<size_t>(text_col)];
    rec.label = row[static_cast<size_t>(label_col)];
    if (id_col >= 0 && static_cast<size_t>(id_col) < row.size()) {
      rec.id = row[static_cast<size_t>(id_col)];
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace detail

// Loads a corpus file. Labels are normalized (and optionally renamed), ids
// default to "<filename>:<line>" when the file provides none, and record
// order is preserved.
inline std::vector<LabeledExample> load_corpus(const std::filesystem::path& path,
                                               CorpusFormat format,
                                               Origin default_origin = Origin::train,
                                               const LabelRenameMap* rename = nullptr) {
  std::vector<detail::RawRecord> raw;
  switch (format) {
    case CorpusFormat::jsonl: raw = detail::read_jsonl(path); break;
    case CorpusFormat::csv: raw = detail::read_csv_like(path, ',', true); break;
    case CorpusFormat::tsv: raw = detail::read_csv_like(path, '\t', false); break;
  }
  if (raw.empty()) fail(path.string() + ": empty file");

  std::string filename = path.filename().string();
  std::vector<LabeledExample> out;
  out.reserve(raw.size());
  std::unordered_set<std::string> seen_ids;
  for (const auto& r : raw) {
    detail::check_record(path, r);
    LabeledExample e;
    e.id = r.id.empty() ? filename + ":" + std::to_string(r.line) : r.id;
    e.text = r.text;
    e.label = normalize_label(r.label);
    if (rename) {
      auto it = rename->find(e.label);
      if (it != rename->end()) e.label = it->second;
    }
    if (e.label.empty()) {
      fail(path.string() + ":" + std::to_string(r.line) + ": empty label field");
    }
    e.origin = default_origin;
    if (!seen_ids.insert(e.id).second) {
      fail(path.string() + ":" + std::to_string(r.line) + ": duplicate id \"" + e.id + "\"");
    }
    out.push_back(std::move(e));
  }
  return out;
}

// JSONL loader that honors per-record "origin" tags, for reading split files
// back. Falls back to `default_origin` for records without the tag.
inline std::vector<LabeledExample> load_examples_jsonl(const std::filesystem::path& path,
                                                       Origin default_origin) {
  std::ifstream in(path);
  if (!in) fail("cannot open file: " + path.string());
  std::vector<LabeledExample> out;
  std::unordered_set<std::string> seen_ids;
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
    LabeledExample e;
    if (!j.contains("text") || !j["text"].is_string()) {
      fail(path.string() + ":" + std::to_string(lineno) + ": missing \"text\" field");
    }
    if (!j.contains("label") || !j["label"].is_string()) {
      fail(path.string() + ":" + std::to_string(lineno) + ": missing \"label\" field");
    }
    e.text = j["text"].get<std::string>();
    e.label = normalize_label(j["label"].get<std::string>());
    e.id = j.value("id", path.filename().string() + ":" + std::to_string(lineno));
    e.origin = j.contains("origin") ? origin_from_name(j["origin"].get<std::string>())
                                    : default_origin;
    if (trim(e.text).empty()) {
      fail(path.string() + ":" + std::to_string(lineno) + ": empty text field");
    }
    if (!seen_ids.insert(e.id).second) {
      fail(path.string() + ":" + std::to_string(lineno) + ": duplicate id \"" + e.id + "\"");
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) fail(path.string() + ": empty file");
  return out;
}

inline void write_examples_jsonl(const std::filesystem::path& path,
                                 const std::vector<LabeledExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write file: " + path.string());
  for (const auto& e : examples) {
    nlohmann::json j{{"id", e.id}, {"text", e.text}, {"label", e.label},
                     {"origin", origin_name(e.origin)}};
    out << j.dump() << "\n";
  }
  if (!out) fail("write failed: " + path.string());
}

// Moves every example of a held-out label to ood_test and splits the rest
// into train/id_test by a seeded shuffle followed by a prefix split (the
// first round(n * test_fraction) shuffled examples become id_test).
inline OpenSetSplit make_open_set_split(const std::vector<LabeledExample>& corpus,
                                        const std::vector<std::string>& heldout_labels,
                                        double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail("test_fraction must be in (0, 1), got " + std::to_string(test_fraction));
  }

  std::set<std::string> present;
  for (const auto& e : corpus) present.insert(e.label);

  std::set<std::string> heldout;
  for (const auto& h : heldout_labels) {
    std::string norm = normalize_label(h);
    if (!present.count(norm)) fail("held-out label \"" + norm + "\" not present in corpus");
    heldout.insert(std::move(norm));
  }

  OpenSetSplit split;
  split.heldout_labels.assign(heldout.begin(), heldout.end());
  for (const auto& label : present) {
    if (!heldout.count(label)) split.closed_labels.push_back(label);
  }
  if (split.closed_labels.size() < 2) {
    fail("fewer than 2 closed-set labels remain after holding out " +
         std::to_string(heldout.size()) + " label(s)");
  }

  std::vector<LabeledExample> closed;
  for (const auto& e : corpus) {
    if (heldout.count(e.label)) {
      LabeledExample o = e;
      o.origin = Origin::ood_test;
      split.ood_test.push_back(std::move(o));
    } else {
      closed.push_back(e);
    }
  }

  Rng rng(seed);
  rng.shuffle(closed);
  size_t n_test = static_cast<size_t>(
      std::llround(static_cast<double>(closed.size()) * test_fraction));
  for (size_t i = 0; i < closed.size(); ++i) {
    LabeledExample e = closed[i];
    e.origin = (i < n_test) ? Origin::id_test : Origin::train;
    (i < n_test ? split.id_test : split.train).push_back(std::move(e));
  }
  return split;
}

namespace detail {

// Without replacement when the pool suffices, with replacement otherwise,
// so requested mixture ratios stay exact at small pool sizes.
inline std::vector<LabeledExample> sample_pool(const std::vector<LabeledExample>& pool,
                                               size_t n, Rng& rng) {
  std::vector<LabeledExample> out;
  out.reserve(n);
  if (n <= pool.size()) {
    std::vector<size_t> idx(pool.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    for (size_t i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
  } else {
    for (size_t i = 0; i < n; ++i) out.push_back(pool[rng.below(pool.size())]);
  }
  return out;
}

}  // namespace detail

inline NoveltySource build_noise_mixture(const std::vector<LabeledExample>& ood_pool,
                                         const std::vector<LabeledExample>& id_pool,
                                         double id_fraction, size_t size, uint64_t seed) {
  if (ood_pool.empty() || id_pool.empty()) fail("mixture pools must be non-empty");
  if (!(id_fraction >= 0.0 && id_fraction <= 1.0)) {
    fail("id_fraction must be in [0, 1], got " + std::to_string(id_fraction));
  }
  if (size < 1) fail("mixture size must be >= 1");

  size_t n_id = static_cast<size_t>(std::llround(static_cast<double>(size) * id_fraction));
  size_t n_ood = size - n_id;

  Rng rng(seed);
  NoveltySource src;
  src.kind = NoveltyKind::mixture;
  src.mixture_id_fraction = id_fraction;
  src.items = detail::sample_pool(id_pool, n_id, rng);
  auto ood_items = detail::sample_pool(ood_pool, n_ood, rng);
  src.items.insert(src.items.end(), ood_items.begin(), ood_items.end());
  rng.shuffle(src.items);
  // Re-id: sampling with replacement may duplicate source ids.
  for (size_t i = 0; i < src.items.size(); ++i) {
    src.items[i].id += "#m" + std::to_string(i);
  }
  return src;
}

}  // namespace ossc
