#include <catch_amalgamated.hpp>

#include <set>
#include <thread>

#include "cmtbench/digest.hpp"
#include "cmtbench/llm_client.hpp"
#include "cmtbench/mockjudge.hpp"
#include "cmtbench/runner.hpp"
#include "support.hpp"

using namespace cmtbench;
using testsupport::TempDir;

namespace {

ChatRequest request(std::string user = "u") {
  ChatRequest r;
  r.model_id = "m";
  r.user_prompt = std::move(user);
  r.temperature = 0.7;
  return r;
}

class FixedBackend final : public Backend {
 public:
  explicit FixedBackend(std::string text) : text_(std::move(text)) {}
  ChatResponse complete(const ChatRequest& r) override {
    ++calls;
    ChatResponse out;
    out.text = text_ + ":" + r.user_prompt;
    out.prompt_token_count = 11;
    out.output_token_count = 7;
    return out;
  }
  std::string describe() const override { return "fixed"; }
  int calls = 0;

 private:
  std::string text_;
};

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("canonical request form") {
  ChatRequest r = request("hello");
  CHECK(canonical_request(r) == R"(["cmtbench.request.v1","m",null,"hello",0.7,null])");
  r.system_prompt = "sys";
  r.seed = 42;
  r.max_output = 100;  // not part of the identity
  CHECK(canonical_request(r) == R"(["cmtbench.request.v1","m","sys","hello",0.7,42])");
  CHECK(digest_request(r).hex ==
        sha256_hex(R"(["cmtbench.request.v1","m","sys","hello",0.7,42])"));
}

TEST_CASE("request digests are stable and distinct over the seed corpus") {
  const ModelSpec base = make_model_spec("llama3.2:3b", "Llama3.2", PromptingMode::Baseline);
  const ModelSpec cmt = make_model_spec("llama3.2:3b", "Llama3.2", PromptingMode::CMT);
  std::set<std::string> seen;
  for (const Task& t : seed_corpus()) {
    for (const ModelSpec* spec : {&base, &cmt}) {
      for (std::optional<std::int64_t> seed : {std::optional<std::int64_t>{}, std::optional<std::int64_t>{1}}) {
        const ChatRequest r = make_candidate_request(*spec, t, seed);
        const RequestDigest d = digest_request(r);
        CHECK(d.hex.size() == 64);
        CHECK(digest_request(r) == d);
        CHECK(seen.insert(d.hex).second);
      }
    }
  }
  CHECK(seen.size() == 48);
}

TEST_CASE("every identifying field changes the digest") {
  const ChatRequest r = request();
  const auto d = digest_request(r);
  ChatRequest v = r;
  v.model_id = "n";
  CHECK(digest_request(v) != d);
  v = r;
  v.system_prompt = "";
  CHECK(digest_request(v) != d);
  v = r;
  v.user_prompt = "u ";
  CHECK(digest_request(v) != d);
  v = r;
  v.temperature = 0.0;
  CHECK(digest_request(v) != d);
  v = r;
  v.seed = 0;
  CHECK(digest_request(v) != d);
}

TEST_CASE("validate_request") {
  CHECK_NOTHROW(validate_request(request()));
  CHECK_THROWS_AS(validate_request(request("")), std::invalid_argument);
  ChatRequest hot = request();
  hot.temperature = 2.1;
  CHECK_THROWS_AS(validate_request(hot), std::invalid_argument);
}

TEST_CASE("retry classification") {
  using K = BackendError::Kind;
  CHECK(BackendError(K::Connection, "").retryable());
  CHECK(BackendError(K::Timeout, "").retryable());
  CHECK(BackendError(K::HttpStatus, "", 429).retryable());
  CHECK(BackendError(K::HttpStatus, "", 503).retryable());
  CHECK_FALSE(BackendError(K::HttpStatus, "", 400).retryable());
  CHECK_FALSE(BackendError(K::HttpStatus, "", 404).retryable());
  CHECK_FALSE(BackendError(K::ReplayMiss, "").retryable());
  CHECK_FALSE(BackendError(K::MissingContent, "").retryable());
}

TEST_CASE("complete_with_retry backs off exponentially") {
  std::vector<std::chrono::milliseconds> sleeps;
  RetryPolicy policy;
  policy.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };

  SECTION("succeeds on the third attempt") {
    int calls = 0;
    const ChatResponse r = complete_with_retry(policy, [&] {
      if (++calls < 3) throw BackendError(BackendError::Kind::HttpStatus, "busy", 503);
      return ChatResponse{"ok", {}, {}, {}};
    });
    CHECK(r.text == "ok");
    CHECK(calls == 3);
    CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000),
                                                           std::chrono::milliseconds(2000)});
  }
  SECTION("gives up after max attempts") {
    int calls = 0;
    CHECK_THROWS_AS(complete_with_retry(policy,
                                        [&]() -> ChatResponse {
                                          ++calls;
                                          throw BackendError(BackendError::Kind::Timeout, "slow");
                                        }),
                    BackendError);
    CHECK(calls == 3);
    CHECK(sleeps.size() == 2);
  }
  SECTION("non-retryable errors surface immediately") {
    int calls = 0;
    CHECK_THROWS_AS(complete_with_retry(policy,
                                        [&]() -> ChatResponse {
                                          ++calls;
                                          throw BackendError(BackendError::Kind::HttpStatus, "bad",
                                                             400);
                                        }),
                    BackendError);
    CHECK(calls == 1);
    CHECK(sleeps.empty());
  }
}

TEST_CASE("wire formats") {
  ChatRequest r = request("question");
  r.system_prompt = "sys";
  r.seed = 5;
  r.max_output = 64;

  const auto ollama = nlohmann::json::parse(build_chat_body(WireProtocol::Ollama, r));
  CHECK(ollama["model"] == "m");
  CHECK(ollama["stream"] == false);
  REQUIRE(ollama["messages"].size() == 2);
  CHECK(ollama["messages"][0] == nlohmann::json({{"role", "system"}, {"content", "sys"}}));
  CHECK(ollama["messages"][1] == nlohmann::json({{"role", "user"}, {"content", "question"}}));
  CHECK(ollama["options"]["temperature"] == 0.7);
  CHECK(ollama["options"]["seed"] == 5);
  CHECK(ollama["options"]["num_predict"] == 64);

  const auto openai = nlohmann::json::parse(build_chat_body(WireProtocol::OpenAI, r));
  CHECK(openai["temperature"] == 0.7);
  CHECK(openai["seed"] == 5);
  CHECK(openai["max_tokens"] == 64);
  CHECK(openai["messages"].size() == 2);

  ChatRequest bare = request("q");
  const auto bare_body = nlohmann::json::parse(build_chat_body(WireProtocol::Ollama, bare));
  CHECK(bare_body["messages"].size() == 1);
  CHECK_FALSE(bare_body["options"].contains("seed"));

  const ChatResponse o = parse_chat_body(
      WireProtocol::Ollama,
      R"({"message":{"role":"assistant","content":"hi"},"prompt_eval_count":3,"eval_count":4})");
  CHECK(o.text == "hi");
  CHECK(o.prompt_token_count == 3);
  CHECK(o.output_token_count == 4);
  const ChatResponse a = parse_chat_body(
      WireProtocol::OpenAI,
      R"({"choices":[{"message":{"content":"yo"}}],"usage":{"prompt_tokens":1,"completion_tokens":2}})");
  CHECK(a.text == "yo");
  CHECK(a.output_token_count == 2);

  for (const char* bad : {"{}", "not json", R"({"choices":[]})", R"({"message":{"content":5}})"}) {
    try {
      parse_chat_body(WireProtocol::OpenAI, bad);
      parse_chat_body(WireProtocol::Ollama, bad);
      FAIL("expected MissingContent for " << bad);
    } catch (const BackendError& e) {
      CHECK(e.kind() == BackendError::Kind::MissingContent);
    }
  }
}

TEST_CASE("protocol names") {
  CHECK(parse_wire_protocol("ollama") == WireProtocol::Ollama);
  CHECK(parse_wire_protocol("openai") == WireProtocol::OpenAI);
  CHECK_THROWS_AS(parse_wire_protocol("grpc"), std::invalid_argument);
}

TEST_CASE("record then replay without the live backend") {
  TempDir dir;
  const auto path = dir / "store.jsonl";
  auto live = std::make_shared<FixedBackend>("live");
  {
    auto recorder = record(live, path);
    CHECK(recorder->complete(request("a")).text == "live:a");
    CHECK(recorder->complete(request("b")).text == "live:b");
    CHECK(recorder->complete(request("a")).text == "live:a");  // served from the store
    CHECK(recorder->describe() == "fixed");
  }
  CHECK(live->calls == 2);

  auto store = std::make_shared<ReplayStore>(path);
  CHECK(store->size() == 2);
  ReplayBackend replay(store, "ollama:http://x");
  const ChatResponse r = replay.complete(request("b"));
  CHECK(r.text == "live:b");
  CHECK(r.prompt_token_count == 11);
  CHECK(replay.describe() == "ollama:http://x");
  try {
    replay.complete(request("c"));
    FAIL("expected a replay miss");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::ReplayMiss);
    CHECK(std::string(e.what()).find(digest_request(request("c")).hex.substr(0, 12)) !=
          std::string::npos);
  }
}

TEST_CASE("store survives a crash mid-append") {
  TempDir dir;
  const auto path = dir / "store.jsonl";
  auto live = std::make_shared<FixedBackend>("live");
  {
    auto recorder = record(live, path);
    recorder->complete(request("a"));
    recorder->complete(request("b"));
  }
  // Simulate a writer killed halfway through a third line.
  const std::string intact = testsupport::slurp(path);
  testsupport::spit(path, intact + R"({"digest":"abc","text":"trunc)");

  auto store = std::make_shared<ReplayStore>(path);
  CHECK(store->size() == 2);
  {
    RecordingBackend recorder(live, store);
    recorder.complete(request("c"));
    CHECK(recorder.forwarded() == 1);
  }
  const std::string repaired = testsupport::slurp(path);
  CHECK(repaired.rfind(intact, 0) == 0);
  CHECK(read_jsonl(path).size() == 3);
  CHECK(ReplayStore(path).size() == 3);
}

TEST_CASE("corrupt interior lines are store errors") {
  TempDir dir;
  const auto path = dir / "store.jsonl";
  testsupport::spit(path, "{\"digest\":\"a\",\"text\":\"x\"}\nnot json\n{\"digest\":\"b\",\"text\":\"y\"}\n");
  try {
    ReplayStore store(path);
    FAIL("expected StoreIo");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::StoreIo);
    CHECK(std::string(e.what()).find("store.jsonl:2:") != std::string::npos);
  }
  CHECK(ReplayStore(dir / "absent.jsonl").size() == 0);
}

TEST_CASE("jsonl appender is safe under concurrent appends") {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  {
    JsonlAppender log(path);
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 50; ++i) log.append({{"t", t}, {"i", i}});
      });
    }
  }
  CHECK(read_jsonl(path).size() == 400);
  CHECK_FALSE(repair_jsonl_tail(path));
}

TEST_CASE("counting backend") {
  auto inner = std::make_shared<FixedBackend>("x");
  CountingBackend counting(inner);
  counting.complete(request());
  counting.complete(request());
  CHECK(counting.calls() == 2);
  CHECK(counting.describe() == "fixed");
}
