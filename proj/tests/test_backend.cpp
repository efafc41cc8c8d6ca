#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "ossc/backend.hpp"
#include "ossc/http_backend.hpp"

using namespace ossc;

namespace {

class CountingBackend : public CompletionBackend {
 public:
  Completion complete(const CompletionRequest& request) override {
    ++calls_;
    Completion c;
    c.text = "echo:" + std::to_string(request.seed);
    return c;
  }
  std::string fingerprint() const override { return "counting|v1"; }
  size_t calls() const { return calls_; }

 private:
  std::atomic<size_t> calls_{0};
};

CompletionRequest basic_request(uint64_t seed) {
  CompletionRequest r;
  r.model = "test-model";
  r.prompt = "a prompt";
  r.seed = seed;
  return r;
}

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit TestServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server.Post("/v1/completions", [handler = std::move(handler)](const httplib::Request& req,
                                                                  httplib::Response& res) {
      handler(req, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~TestServer() {
    server.stop();
    thread.join();
  }

  HttpBackendOptions options() const {
    HttpBackendOptions o;
    o.base_url = "http://127.0.0.1:" + std::to_string(port);
    o.backoff_ms = 1;
    return o;
  }
};

}  // namespace

TEST_CASE("mock backend is a pure function of prompt and seed", "[backend]") {
  MockBackend backend;
  auto a = backend.complete(basic_request(1));
  auto b = backend.complete(basic_request(1));
  CHECK(a.text == b.text);
  auto c = backend.complete(basic_request(2));
  CHECK(a.text != c.text);
}

TEST_CASE("cache hit never calls the inner backend twice", "[backend]") {
  auto dir = std::filesystem::temp_directory_path() / "ossc_cache_test";
  std::filesystem::remove_all(dir);
  auto inner = std::make_shared<CountingBackend>();
  CachingBackend cache(dir, inner);

  auto first = cache.complete(basic_request(5));
  auto second = cache.complete(basic_request(5));
  CHECK(inner->calls() == 1);
  CHECK(cache.hits() == 1);
  CHECK(first.text == second.text);

  // different seed -> different key -> one more inner call
  cache.complete(basic_request(6));
  CHECK(inner->calls() == 2);

  // a fresh cache over the same directory still hits
  CachingBackend cache2(dir, inner);
  auto third = cache2.complete(basic_request(5));
  CHECK(inner->calls() == 2);
  CHECK(third.text == first.text);
}

TEST_CASE("cache key covers parameters, not just the prompt", "[backend]") {
  auto dir = std::filesystem::temp_directory_path() / "ossc_cache_params";
  std::filesystem::remove_all(dir);
  auto inner = std::make_shared<CountingBackend>();
  CachingBackend cache(dir, inner);

  auto req = basic_request(1);
  cache.complete(req);
  req.temperature = 0.2;
  cache.complete(req);
  req.max_tokens = 99;
  cache.complete(req);
  CHECK(inner->calls() == 3);
}

TEST_CASE("http backend sends an OpenAI-compatible request", "[backend][http]") {
  nlohmann::json seen;
  std::string auth;
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    if (auto it = req.headers.find("Authorization"); it != req.headers.end()) auth = it->second;
    res.set_content(R"({"choices":[{"text":" hello"}],"usage":{"prompt_tokens":3,"completion_tokens":2}})",
                    "application/json");
  });

  setenv("OSSC_API_TOKEN", "sk-test-token", 1);
  HttpBackend backend(server.options());
  CompletionRequest req;
  req.model = "davinci-ish";
  req.prompt = "Generate:\n[A, B, ";
  req.max_tokens = 64;
  req.temperature = 0.7;
  req.stop = {"]"};
  auto completion = backend.complete(req);
  unsetenv("OSSC_API_TOKEN");

  CHECK(completion.text == " hello");
  CHECK(completion.prompt_tokens == 3);
  CHECK(seen["model"] == "davinci-ish");
  CHECK(seen["prompt"] == "Generate:\n[A, B, ");
  CHECK(seen["max_tokens"] == 64);
  CHECK(seen["stop"][0] == "]");
  CHECK(auth == "Bearer sk-test-token");
}

TEST_CASE("http backend retries transient failures", "[backend][http]") {
  std::atomic<int> calls{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    int n = ++calls;
    if (n < 3) {
      res.status = 500;
      res.set_content("boom", "text/plain");
    } else {
      res.set_content(R"({"choices":[{"text":"ok"}]})", "application/json");
    }
  });

  HttpBackend backend(server.options());
  auto completion = backend.complete(basic_request(1));
  CHECK(completion.text == "ok");
  CHECK(calls == 3);
}

TEST_CASE("http backend honors retry-after on rate limits", "[backend][http]") {
  std::atomic<int> calls{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    int n = ++calls;
    if (n == 1) {
      res.status = 429;
      res.set_header("Retry-After", "0");
      res.set_content("slow down", "text/plain");
    } else {
      res.set_content(R"({"choices":[{"text":"ok"}]})", "application/json");
    }
  });

  HttpBackend backend(server.options());
  CHECK(backend.complete(basic_request(1)).text == "ok");
  CHECK(calls == 2);
}

TEST_CASE("http backend fails fast on non-retryable errors", "[backend][http]") {
  std::atomic<int> calls{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 404;
    res.set_content("nope", "text/plain");
  });

  HttpBackend backend(server.options());
  CHECK_THROWS_WITH(backend.complete(basic_request(1)),
                    Catch::Matchers::ContainsSubstring("404"));
  CHECK(calls == 1);
}

TEST_CASE("http backend surfaces exhausted retries", "[backend][http]") {
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("still down", "text/plain");
  });

  auto options = server.options();
  options.retries = 2;
  HttpBackend backend(options);
  CHECK_THROWS_WITH(backend.complete(basic_request(1)),
                    Catch::Matchers::ContainsSubstring("3 attempts"));
}

TEST_CASE("http backend rejects malformed responses", "[backend][http]") {
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"no_choices":true})", "application/json");
  });
  HttpBackend backend(server.options());
  CHECK_THROWS_WITH(backend.complete(basic_request(1)),
                    Catch::Matchers::ContainsSubstring("choices"));
}
