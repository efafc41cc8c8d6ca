#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "ossc/featurize.hpp"
#include "ossc/rng.hpp"

using namespace ossc;

TEST_CASE("tokenize splits on non-alphanumeric runs", "[featurize]") {
  CHECK(tokenize("Afghan warlords 'threaten poll'") ==
        std::vector<std::string>{"afghan", "warlords", "threaten", "poll"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("U.S.-led") == std::vector<std::string>{"u", "s", "led"});
  CHECK(tokenize("  !!  ") == std::vector<std::string>{});
  CHECK(tokenize("a1b2") == std::vector<std::string>{"a1b2"});
}

TEST_CASE("featurize basics", "[featurize]") {
  FeatureConfig cfg;
  cfg.dimension = 1u << 10;

  SECTION("empty text gives an empty vector") {
    auto v = featurize("", cfg);
    CHECK(v.empty());
  }

  SECTION("identical text twice gives bitwise-identical vectors") {
    auto a = featurize("the quick brown fox", cfg);
    auto b = featurize("the quick brown fox", cfg);
    CHECK(a.indices == b.indices);
    CHECK(a.values == b.values);
  }

  SECTION("single token with l2 normalization has one index with value 1.0") {
    auto v = featurize("hello", cfg);
    REQUIRE(v.nnz() == 1);
    CHECK(v.values[0] == 1.0);
  }

  SECTION("indices strictly increasing and within dimension") {
    auto v = featurize("one two three four five six seven one two", cfg);
    for (size_t i = 1; i < v.indices.size(); ++i) CHECK(v.indices[i] > v.indices[i - 1]);
    for (auto idx : v.indices) CHECK(idx < cfg.dimension);
  }
}

TEST_CASE("featurize unit norm property", "[featurize][property]") {
  FeatureConfig cfg;
  cfg.dimension = 1u << 12;
  Rng rng(2024);
  const char* words[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"};
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    size_t len = 1 + rng.below(20);
    for (size_t i = 0; i < len; ++i) {
      if (i) text += ' ';
      text += words[rng.below(8)];
    }
    auto v = featurize(text, cfg);
    REQUIRE_FALSE(v.empty());
    CHECK(std::abs(v.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("featurize respects tf scaling and ngram orders", "[featurize]") {
  FeatureConfig raw;
  raw.dimension = 1u << 12;
  raw.tf_scaling = TfScaling::raw;
  raw.l2_normalize = false;
  raw.ngram_max = 1;

  auto v = featurize("cat cat dog", raw);
  REQUIRE(v.nnz() == 2);
  double total = 0.0;
  for (double x : v.values) total += x;
  CHECK(total == 3.0);  // counts 2 + 1

  FeatureConfig bigrams = raw;
  bigrams.ngram_min = 2;
  bigrams.ngram_max = 2;
  auto b = featurize("cat cat dog", bigrams);
  double btotal = 0.0;
  for (double x : b.values) btotal += x;
  CHECK(btotal == 2.0);  // "cat cat", "cat dog"
}

TEST_CASE("feature config validation", "[featurize]") {
  FeatureConfig bad;
  bad.dimension = 300;  // not a power of two
  CHECK_THROWS(bad.validate());
  bad.dimension = 256;
  bad.ngram_min = 2;
  bad.ngram_max = 1;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("fingerprint changes with any field", "[featurize]") {
  FeatureConfig a;
  FeatureConfig b = a;
  CHECK(a.fingerprint() == b.fingerprint());
  b.hash_seed = 99;
  CHECK(a.fingerprint() != b.fingerprint());
  FeatureConfig c = a;
  c.ngram_max = 3;
  CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("feature cache round-trips and rejects stale fingerprints", "[featurize]") {
  FeatureConfig cfg;
  cfg.dimension = 1u << 10;
  std::vector<std::pair<std::string, SparseVector>> rows;
  rows.emplace_back("a", featurize("hello world", cfg));
  rows.emplace_back("b", featurize("goodbye world", cfg));

  auto path = std::filesystem::temp_directory_path() / "feature_cache.jsonl";
  write_feature_cache(path, cfg, rows);
  auto loaded = read_feature_cache(path, cfg);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].first == "a");
  CHECK(loaded[0].second.indices == rows[0].second.indices);
  CHECK(loaded[0].second.values == rows[0].second.values);

  FeatureConfig other = cfg;
  other.hash_seed = 123;
  CHECK_THROWS_WITH(read_feature_cache(path, other),
                    Catch::Matchers::ContainsSubstring("fingerprint"));
}
