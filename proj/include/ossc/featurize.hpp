#pragma once

// Hashed n-gram term-frequency features. Text goes in, a fixed-dimension
// sparse vector comes out; the classifier never sees raw strings.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ossc/util.hpp"

namespace ossc {

enum class TfScaling { raw, log1p };

inline const char* tf_scaling_name(TfScaling s) {
  return s == TfScaling::raw ? "raw" : "log1p";
}

inline TfScaling tf_scaling_from_name(std::string_view name) {
  if (name == "raw") return TfScaling::raw;
  if (name == "log1p") return TfScaling::log1p;
  fail("unknown tf_scaling: \"" + std::string(name) + "\"");
}

struct FeatureConfig {
  uint32_t dimension = 1u << 18;  // power of two
  int ngram_min = 1;
  int ngram_max = 2;
  uint64_t hash_seed = 0;
  TfScaling tf_scaling = TfScaling::log1p;
  bool l2_normalize = true;

  void validate() const {
    if (dimension == 0 || (dimension & (dimension - 1)) != 0) {
      fail("feature dimension must be a power of two, got " + std::to_string(dimension));
    }
    if (ngram_min < 1) fail("ngram_min must be >= 1");
    if (ngram_max < ngram_min) fail("ngram_max must be >= ngram_min");
  }

  // Stable digest of every field that affects the mapping; embedded in
  // model files and the feature cache so stale artifacts are rejected.
  std::string fingerprint() const {
    std::string repr = "fc1|d=" + std::to_string(dimension) +
                       "|nmin=" + std::to_string(ngram_min) +
                       "|nmax=" + std::to_string(ngram_max) +
                       "|seed=" + std::to_string(hash_seed) +
                       "|tf=" + tf_scaling_name(tf_scaling) +
                       "|l2=" + (l2_normalize ? "1" : "0");
    return to_hex(fnv1a64(repr));
  }
};

inline void to_json(nlohmann::json& j, const FeatureConfig& c) {
  j = nlohmann::json{{"dimension", c.dimension},
                     {"ngram_min", c.ngram_min},
                     {"ngram_max", c.ngram_max},
                     {"hash_seed", c.hash_seed},
                     {"tf_scaling", tf_scaling_name(c.tf_scaling)},
                     {"l2_normalize", c.l2_normalize}};
}

inline void from_json(const nlohmann::json& j, FeatureConfig& c) {
  c.dimension = j.value("dimension", c.dimension);
  c.ngram_min = j.value("ngram_min", c.ngram_min);
  c.ngram_max = j.value("ngram_max", c.ngram_max);
  c.hash_seed = j.value("hash_seed", c.hash_seed);
  if (j.contains("tf_scaling")) c.tf_scaling = tf_scaling_from_name(j["tf_scaling"].get<std::string>());
  c.l2_normalize = j.value("l2_normalize", c.l2_normalize);
}

struct SparseVector {
  std::vector<uint32_t> indices;  // strictly increasing
  std::vector<double> values;     // parallel, nonzero and finite

  bool empty() const { return indices.empty(); }
  size_t nnz() const { return indices.size(); }

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }
};

// Lowercases and splits on maximal runs of non-alphanumeric characters.
// ASCII-centric by construction: bytes >= 0x80 are kept inside tokens, so
// multibyte UTF-8 sequences survive intact.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    bool token_char = is_ascii_alpha(c) || is_ascii_digit(c) ||
                      static_cast<unsigned char>(c) >= 0x80;
    if (token_char) {
      cur.push_back(ascii_lower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// Hashes each n-gram (tokens joined by a single space) with the seeded
// FNV-1a hash and masks to dimension-1; colliding indices accumulate.
inline SparseVector featurize(std::string_view text, const FeatureConfig& config) {
  config.validate();
  std::vector<std::string> tokens = tokenize(text);

  std::map<uint32_t, double> counts;
  const uint32_t mask = config.dimension - 1;
  for (int n = config.ngram_min; n <= config.ngram_max; ++n) {
    if (tokens.size() < static_cast<size_t>(n)) break;
    for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
      std::string gram = tokens[i];
      for (size_t k = 1; k < static_cast<size_t>(n); ++k) {
        gram += ' ';
        gram += tokens[i + k];
      }
      uint32_t idx = static_cast<uint32_t>(fnv1a64(gram, config.hash_seed)) & mask;
      counts[idx] += 1.0;
    }
  }

  SparseVector out;
  out.indices.reserve(counts.size());
  out.values.reserve(counts.size());
  for (const auto& [idx, count] : counts) {
    double v = (config.tf_scaling == TfScaling::log1p) ? std::log1p(count) : count;
    out.indices.push_back(idx);
    out.values.push_back(v);
  }
  if (config.l2_normalize && !out.values.empty()) {
    double norm = out.norm();
    for (double& v : out.values) v /= norm;
  }
  return out;
}

// Feature-matrix cache: JSONL, first line a header carrying the config
// fingerprint, then one {id, indices, values} object per vector.
inline void write_feature_cache(const std::filesystem::path& path,
                                const FeatureConfig& config,
                                const std::vector<std::pair<std::string, SparseVector>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write feature cache: " + path.string());
  nlohmann::json header{{"format", "ossc-feature-cache"},
                        {"version", 1},
                        {"fingerprint", config.fingerprint()}};
  out << header.dump() << "\n";
  for (const auto& [id, vec] : rows) {
    nlohmann::json j{{"id", id}, {"indices", vec.indices}, {"values", vec.values}};
    out << j.dump() << "\n";
  }
  if (!out) fail("write failed: " + path.string());
}

inline std::vector<std::pair<std::string, SparseVector>> read_feature_cache(
    const std::filesystem::path& path, const FeatureConfig& config) {
  std::ifstream in(path);
  if (!in) fail("cannot open feature cache: " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(path.string() + ": empty feature cache");
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "ossc-feature-cache") {
    fail(path.string() + ": not a feature cache file");
  }
  if (header.value("fingerprint", "") != config.fingerprint()) {
    fail(path.string() + ": feature cache fingerprint mismatch (stale cache?)");
  }
  std::vector<std::pair<std::string, SparseVector>> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(path.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    SparseVector v;
    v.indices = j.at("indices").get<std::vector<uint32_t>>();
    v.values = j.at("values").get<std::vector<double>>();
    rows.emplace_back(j.at("id").get<std::string>(), std::move(v));
  }
  return rows;
}

}  // namespace ossc
