#pragma once

// Text-completion backend abstraction. Generation code only ever sees this
// interface; the mock backend keeps the whole pipeline runnable offline and
// the caching wrapper makes repeated runs cheap and reproducible.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "ossc/rng.hpp"
#include "ossc/util.hpp"

namespace ossc {

struct CompletionRequest {
  std::string model;
  std::string prompt;
  int max_tokens = 64;
  double temperature = 1.0;
  std::vector<std::string> stop;
  uint64_t seed = 0;  // sampling seed; forwarded where the backend supports it

  // Canonical byte string for cache keys; '\x1f' cannot appear in fields
  // we control (model, numeric params) and is vanishingly rare in prompts.
  std::string canonical() const {
    std::string s = model;
    s += '\x1f';
    s += prompt;
    s += '\x1f';
    s += std::to_string(max_tokens);
    s += '\x1f';
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.9g", temperature);
    s += temp;
    s += '\x1f';
    for (const auto& st : stop) {
      s += st;
      s += '\x1e';
    }
    s += '\x1f';
    s += std::to_string(seed);
    return s;
  }
};

struct Completion {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
  // Identifies the backend instance for cache keys and run manifests.
  virtual std::string fingerprint() const = 0;
};

// Deterministic stand-in for a real model: output is a pure function of
// (prompt, seed). Recognizes the three prompt shapes the library emits and
// produces parseable continuations for each.
class MockBackend : public CompletionBackend {
 public:
  Completion complete(const CompletionRequest& request) override {
    Rng rng(mix_seed(fnv1a64(request.prompt), request.seed));
    Completion c;
    c.prompt_tokens = static_cast<int>(request.prompt.size() / 4);
    if (request.prompt.size() >= 2 && request.prompt.ends_with(", ") &&
        request.prompt.find('[') != std::string::npos) {
      c.text = label_list(rng);
    } else if (request.prompt.ends_with("\nExample:")) {
      c.text = example_text(request.prompt, rng);
    } else {
      c.text = " plain sample text number " + std::to_string(rng.below(10000)) + "\n\n";
    }
    c.completion_tokens = static_cast<int>(c.text.size() / 4);
    return c;
  }

  std::string fingerprint() const override { return "mock|v1"; }

 private:
  static std::string label_list(Rng& rng) {
    static const char* kPool[] = {
        "Entertainment", "Health",   "Travel",     "Politics", "Finance",  "Weather",
        "Food",          "Fashion",  "Crime",      "Science",  "History",  "Education",
        "Music",         "Gaming",   "Lifestyle",  "Culture",  "Energy",   "Housing",
        "Opinion",       "Wildlife", "Technology", "Art",      "Religion", "Space",
    };
    const size_t pool_size = sizeof(kPool) / sizeof(kPool[0]);
    size_t count = 3 + rng.below(3);
    std::string out;
    for (size_t i = 0; i < count; ++i) {
      if (i) out += ", ";
      out += kPool[rng.below(pool_size)];
    }
    out += "]";
    return out;
  }

  static std::string example_text(const std::string& prompt, Rng& rng) {
    // The final "Label: <x>\nExample:" block names the class to write about.
    std::string label = "something";
    size_t pos = prompt.rfind("Label: ");
    if (pos != std::string::npos) {
      size_t end = prompt.find('\n', pos);
      if (end != std::string::npos) label = prompt.substr(pos + 7, end - pos - 7);
    }
    return " a generated sample about " + label + " number " + std::to_string(rng.below(10000)) +
           "\nLabel: spurious";
  }
};

// Content-addressed file cache keyed by the backend fingerprint and the
// full request. A hit returns the stored completion byte-for-byte and never
// touches the wrapped backend. Safe for concurrent use within a process;
// writes go through a temp file plus rename.
class CachingBackend : public CompletionBackend {
 public:
  CachingBackend(std::filesystem::path dir, std::shared_ptr<CompletionBackend> inner)
      : dir_(std::move(dir)), inner_(std::move(inner)) {
    std::filesystem::create_directories(dir_);
  }

  Completion complete(const CompletionRequest& request) override {
    const std::filesystem::path path = dir_ / (key(request) + ".json");
    {
      std::lock_guard<std::mutex> lock(mutex_);
      std::ifstream in(path);
      if (in) {
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (!j.is_discarded()) {
          ++hits_;
          Completion c;
          c.text = j.value("text", "");
          c.prompt_tokens = j.value("prompt_tokens", 0);
          c.completion_tokens = j.value("completion_tokens", 0);
          return c;
        }
      }
    }
    Completion c = inner_->complete(request);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      nlohmann::json j{{"backend", inner_->fingerprint()},
                       {"model", request.model},
                       {"seed", request.seed},
                       {"text", c.text},
                       {"prompt_tokens", c.prompt_tokens},
                       {"completion_tokens", c.completion_tokens}};
      std::filesystem::path tmp = path;
      tmp += ".tmp";
      std::ofstream out(tmp, std::ios::binary);
      if (out) {
        out << j.dump() << "\n";
        out.close();
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
      }
    }
    return c;
  }

  std::string fingerprint() const override { return inner_->fingerprint(); }

  size_t hits() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return hits_;
  }

 private:
  std::string key(const CompletionRequest& request) const {
    std::string material = inner_->fingerprint() + '\x1f' + request.canonical();
    return to_hex(fnv1a64(material, 0x5ca1ab1e)) + to_hex(fnv1a64(material, 0x0ddba11));
  }

  std::filesystem::path dir_;
  std::shared_ptr<CompletionBackend> inner_;
  mutable std::mutex mutex_;
  size_t hits_ = 0;
};

}  // namespace ossc
