#pragma once

// Synthetic 4-topic keyword corpus for benchmarks: three closed topics plus
// one held-out topic ("delta"). Closed documents come in an easy flavor
// (dominated by own-topic keywords) and a hard flavor (mostly background
// and words shared with a neighboring topic), which spreads the classifier's
// ID confidence. Held-out documents mix delta keywords with words borrowed
// from one fixed closed topic, so they masquerade as that class until the
// delta vocabulary is learned as evidence against it.

#include <string>
#include <vector>

#include "ossc/corpus.hpp"
#include "ossc/rng.hpp"

namespace ossc::testsupport {

struct SynthConfig {
  size_t closed_count = 2500;  // spread over the three closed topics
  size_t ood_count = 500;
  uint64_t seed = 1;
  double keyword_fraction = 0.50;       // easy closed docs: own-topic keyword rate
  double shared_fraction = 0.20;        // closed docs: neighbor-shared words
  double hard_fraction = 0.35;          // fraction of closed docs drawn hard
  double hard_keyword_fraction = 0.15;  // own-keyword rate within hard docs
  double ood_own_fraction = 0.30;       // held-out docs: delta keywords
  double ood_borrow_fraction = 0.40;    // held-out docs: borrowed-topic keywords
  size_t ood_borrow_topic = 0;          // the closed topic held-out docs resemble
  size_t min_tokens = 8;
  size_t max_tokens = 16;
};

inline const std::vector<std::string>& synth_topics() {
  static const std::vector<std::string> topics = {"alpha", "beta", "gamma", "delta"};
  return topics;
}

inline std::vector<LabeledExample> make_synth_corpus(const SynthConfig& cfg) {
  const auto& topics = synth_topics();
  const size_t kKeywords = 40;
  const size_t kBackground = 120;
  const size_t kShared = 20;

  std::vector<std::vector<std::string>> keywords(topics.size());
  for (size_t t = 0; t < topics.size(); ++t) {
    for (size_t i = 0; i < kKeywords; ++i) {
      keywords[t].push_back(topics[t] + "w" + std::to_string(i));
    }
  }
  std::vector<std::string> background;
  for (size_t i = 0; i < kBackground; ++i) background.push_back("bg" + std::to_string(i));
  // one shared pool per closed-topic pair (ab, bc, ca)
  std::vector<std::vector<std::string>> shared(3);
  for (size_t p = 0; p < 3; ++p) {
    for (size_t i = 0; i < kShared; ++i) {
      shared[p].push_back("mix" + std::to_string(p) + "x" + std::to_string(i));
    }
  }

  Rng rng(cfg.seed);
  std::vector<LabeledExample> corpus;
  corpus.reserve(cfg.closed_count + cfg.ood_count);

  auto make_closed_doc = [&](size_t topic, size_t serial) {
    const bool hard = rng.uniform01() < cfg.hard_fraction;
    const double kw = hard ? cfg.hard_keyword_fraction : cfg.keyword_fraction;
    size_t len = cfg.min_tokens + rng.below(cfg.max_tokens - cfg.min_tokens + 1);
    std::string text;
    for (size_t i = 0; i < len; ++i) {
      if (i) text += ' ';
      double r = rng.uniform01();
      if (r < kw) {
        text += keywords[topic][rng.below(kKeywords)];
      } else if (r < kw + cfg.shared_fraction) {
        // pools 0,1,2 join topics (0,1), (1,2), (2,0)
        size_t pool = (topic + (rng.below(2) == 0 ? 0 : 2)) % 3;
        text += shared[pool][rng.below(kShared)];
      } else {
        text += background[rng.below(kBackground)];
      }
    }
    LabeledExample e;
    e.id = "closed:" + std::to_string(serial);
    e.text = std::move(text);
    e.label = topics[topic];
    return e;
  };

  auto make_ood_doc = [&](size_t serial) {
    const size_t borrow = cfg.ood_borrow_topic % 3;
    size_t len = cfg.min_tokens + rng.below(cfg.max_tokens - cfg.min_tokens + 1);
    std::string text;
    for (size_t i = 0; i < len; ++i) {
      if (i) text += ' ';
      double r = rng.uniform01();
      if (r < cfg.ood_own_fraction) {
        text += keywords[3][rng.below(kKeywords)];
      } else if (r < cfg.ood_own_fraction + cfg.ood_borrow_fraction) {
        text += keywords[borrow][rng.below(kKeywords)];
      } else {
        text += background[rng.below(kBackground)];
      }
    }
    LabeledExample e;
    e.id = "ood:" + std::to_string(serial);
    e.text = std::move(text);
    e.label = topics[3];
    return e;
  };

  for (size_t i = 0; i < cfg.closed_count; ++i) corpus.push_back(make_closed_doc(i % 3, i));
  for (size_t i = 0; i < cfg.ood_count; ++i) corpus.push_back(make_ood_doc(i));
  return corpus;
}

}  // namespace ossc::testsupport
