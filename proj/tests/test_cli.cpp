#include <catch_amalgamated.hpp>

#include <sstream>

#include "cmtbench/cli.hpp"
#include "cmtbench/mockjudge.hpp"
#include "support.hpp"

using namespace cmtbench;
using namespace testsupport;

namespace {

struct Captured {
  int code = -1;
  std::string out;
  std::string err;
};

Captured cli(std::vector<std::string> args, const EnvLookup& env = [](const char*) {
  return std::optional<std::string>();
}) {
  args.insert(args.begin(), "cmtbench");
  std::ostringstream out, err;
  Captured c;
  c.code = run_cli(args, out, err, env);
  c.out = out.str();
  c.err = err.str();
  return c;
}

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const char* name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

std::filesystem::path constant_script() {
  return source_dir() / "configs/scripts/constant-judge.json";
}

Config scripted_config(const std::filesystem::path& output_dir) {
  Config config;
  config.pairs = {{"llama3.2:3b", "Llama3.2"}};
  config.mode = BackendMode::Scripted;
  config.script = constant_script();
  config.output_dir = output_dir;
  return config;
}

}  // namespace

TEST_CASE("validate exit codes") {
  TempDir dir;
  auto seed = cli({"validate"});
  CHECK(seed.code == kExitOk);
  CHECK(seed.out.find("valid") != std::string::npos);

  Corpus dup = seed_corpus();
  dup.push_back(dup[0]);
  spit(dir / "dup.json", serialize_corpus(dup));
  auto bad = cli({"validate", (dir / "dup.json").string()});
  CHECK(bad.code == kExitFailures);
  CHECK(bad.err.find(dup[0].id) != std::string::npos);

  auto missing = cli({"validate", (dir / "nope.json").string()});
  CHECK(missing.code == kExitIo);
}

TEST_CASE("seed-corpus round-trips through validate") {
  TempDir dir;
  const auto path = dir / "seed.json";
  CHECK(cli({"seed-corpus", path.string()}).code == kExitOk);
  CHECK(load_corpus(path) == seed_corpus());
  CHECK(cli({"validate", path.string()}).code == kExitOk);
  CHECK(cli({"seed-corpus", "/proc/nope/seed.json"}).code == kExitIo);
}

TEST_CASE("export-modelfile") {
  TempDir dir;
  auto printed = cli({"export-modelfile"});
  REQUIRE(printed.code == kExitOk);
  CHECK(printed.out.rfind("PARAMETER temperature 0.7", 0) == 0);
  CHECK(printed.out == render_cmt_modelfile(std::nullopt));
  CHECK(cli({"export-modelfile", "-o", (dir / "Modelfile").string()}).code == kExitOk);
  CHECK(slurp(dir / "Modelfile") == printed.out);
  CHECK(cli({"export-modelfile", "-o", (dir / "Modelfile2").string()}).code == kExitOk);
  CHECK(slurp(dir / "Modelfile2") == slurp(dir / "Modelfile"));

  auto from = cli({"export-modelfile", "--from", "phi3:3.8b"});
  CHECK(from.out.find("FROM phi3:3.8b") != std::string::npos);
  CHECK(cli({"export-modelfile", "--mode", "baseline"}).code == kExitIo);
  CHECK(cli({"export-modelfile", "--mode", "nonsense"}).code == kExitIo);
}

TEST_CASE("parse errors and unknown commands exit 2") {
  CHECK(cli({}).code == kExitIo);
  CHECK(cli({"frobnicate"}).code == kExitIo);
  CHECK(cli({"run", "--parallelism", "many"}).code == kExitIo);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("parse_pair") {
  CHECK(parse_pair("phi3:3.8b=Phi3") == ModelPairConfig{"phi3:3.8b", "Phi3"});
  CHECK(parse_pair("mistral:7b") == ModelPairConfig{"mistral:7b", "mistral:7b"});
  CHECK_THROWS_AS(parse_pair("=Phi3"), ConfigError);
  CHECK_THROWS_AS(parse_pair("phi3="), ConfigError);
}

TEST_CASE("standard profile") {
  Config config;
  apply_profile(config, "standard");
  REQUIRE(config.pairs.size() == 4);
  CHECK(config.pairs[0] == ModelPairConfig{"llama3.2:3b", "Llama3.2"});
  CHECK(config.pairs[3] == ModelPairConfig{"mistral:7b", "Mistral"});
  CHECK(config.judge_model == "llama3.3:70b");
  Config untouched;
  apply_profile(untouched, "none");
  CHECK(untouched.pairs.empty());
  CHECK_THROWS_AS(apply_profile(untouched, "bogus"), ConfigError);
}

TEST_CASE("configuration precedence: flags > env > file > profile") {
  TempDir dir;
  spit(dir / "c.json", R"({"api_base": "http://file:1", "output_dir": "from-file",
                          "judge_model": "file-judge"})");
  ConfigOverrides flags;
  flags.config_path = (dir / "c.json").string();

  Config c = resolve_config(flags, env_of({}));
  CHECK(c.api_base == "http://file:1");
  CHECK(c.output_dir == "from-file");
  CHECK(c.judge_model == "file-judge");
  CHECK(c.pairs.size() == 4);  // default profile

  c = resolve_config(flags, env_of({{"CMTBENCH_API_BASE", "http://env:2"}}));
  CHECK(c.api_base == "http://env:2");

  flags.api_base = "http://flag:3";
  flags.output_dir = "from-flag";
  flags.pairs = {"a=A"};
  c = resolve_config(flags, env_of({{"CMTBENCH_API_BASE", "http://env:2"}}));
  CHECK(c.api_base == "http://flag:3");
  CHECK(c.output_dir == "from-flag");
  CHECK(c.pairs == std::vector<ModelPairConfig>{{"a", "A"}});

  // The config file may also come from the environment.
  ConfigOverrides none;
  c = resolve_config(none, env_of({{"CMTBENCH_CONFIG", (dir / "c.json").string()}}));
  CHECK(c.judge_model == "file-judge");

  none.profile = "none";
  CHECK(resolve_config(none, env_of({})).pairs.empty());
}

TEST_CASE("config documents are strict") {
  Config c;
  CHECK_THROWS_AS(apply_config_json(c, nlohmann::json::parse(R"({"paralellism": 4})")),
                  ConfigError);
  CHECK_THROWS_AS(apply_config_json(c, nlohmann::json::parse(R"({"parallelism": "4"})")),
                  ConfigError);
  CHECK_THROWS_AS(apply_config_json(c, nlohmann::json::parse(R"([1])")), ConfigError);
  TempDir dir;
  spit(dir / "bad.json", R"({"unknown": true})");
  auto r = cli({"run", "-c", (dir / "bad.json").string()});
  CHECK(r.code == kExitIo);
  CHECK(r.err.find("unknown") != std::string::npos);
}

TEST_CASE("validate_config") {
  Config c;
  CHECK_THROWS_AS(validate_config(c, true), ConfigError);
  CHECK_NOTHROW(validate_config(c, false));
  c.pairs = {{"a", "A"}, {"b", "A"}};
  CHECK_THROWS_AS(validate_config(c, true), ConfigError);
  c.pairs = {{"a", "A"}};
  c.mode = BackendMode::Replay;
  CHECK_THROWS_AS(validate_config(c, true), ConfigError);
  c.store = "s.jsonl";
  CHECK_NOTHROW(validate_config(c, true));
  c.parallelism = 0;
  CHECK_THROWS_AS(validate_config(c, true), ConfigError);
}

TEST_CASE("scripted all: fixed means, then a free and identical rerun") {
  TempDir dir;
  const Config config = scripted_config(dir / "out");
  auto backends = make_backends(config);
  auto* scripted = dynamic_cast<ScriptedBackend*>(backends.candidate.get());
  REQUIRE(scripted != nullptr);

  std::ostringstream out, err;
  REQUIRE(cmd_all(config, out, err, backends) == kExitOk);
  const std::size_t n = seed_corpus().size();
  CHECK(scripted->total_calls() == 3 * n);

  const std::string csv = slurp(dir / "out/summary.csv");
  for (Category c : kAllCategories) {
    const std::string row = "Llama3.2," + std::string(to_string(c)) + ",3,0,3.000,5.000,0,3,0\n";
    CHECK(csv.find(row) != std::string::npos);
  }
  const std::string chart = slurp(dir / "out/chart-MIM.svg");

  auto again = make_backends(config);
  std::ostringstream out2, err2;
  REQUIRE(cmd_all(config, out2, err2, again) == kExitOk);
  CHECK(dynamic_cast<ScriptedBackend&>(*again.candidate).total_calls() == 0);
  CHECK(slurp(dir / "out/summary.csv") == csv);
  CHECK(slurp(dir / "out/chart-MIM.svg") == chart);

  // report alone reads the same logs.
  std::ostringstream out3, err3;
  CHECK(cmd_report(config, out3, err3) == kExitOk);
  CHECK(slurp(dir / "out/summary.csv") == csv);
}

TEST_CASE("staged run, judge and report through the command line") {
  TempDir dir;
  const std::vector<std::string> common = {"--profile", "none", "--pair", "llama3.2:3b=Llama3.2",
                                           "--mode", "scripted", "--script",
                                           constant_script().string(), "-o",
                                           (dir / "out").string()};
  auto with = [&](std::string cmd) {
    std::vector<std::string> args{std::move(cmd)};
    args.insert(args.end(), common.begin(), common.end());
    return cli(args);
  };
  CHECK(with("report").code == kExitIo);  // nothing run yet
  CHECK(with("judge").code == kExitIo);
  auto run = with("run");
  CHECK(run.code == kExitOk);
  CHECK(run.out.find("run Llama3.2: 12 pairs, 12 new, 0 failed") != std::string::npos);
  CHECK(with("report").code == kExitIo);  // not judged yet
  CHECK(with("judge").code == kExitOk);
  auto report = with("report");
  CHECK(report.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "out/summary.json"));
  CHECK(std::filesystem::exists(dir / "out/chart-RCM.svg"));
}

TEST_CASE("call counts: 100 tasks x 4 pairs") {
  TempDir dir;
  spit(dir / "corpus.json", serialize_corpus(bulk_corpus(100)));
  Config config = scripted_config(dir / "out");
  apply_profile(config, "standard");
  config.corpus = dir / "corpus.json";
  config.parallelism = 8;
  auto backends = make_backends(config);
  auto& scripted = dynamic_cast<ScriptedBackend&>(*backends.candidate);
  std::ostringstream out, err;
  REQUIRE(cmd_all(config, out, err, backends) == kExitOk);
  CHECK(scripted.rule_calls(0) == 400);                               // judge
  CHECK(scripted.rule_calls(1) + scripted.fallback_calls() == 800);  // candidates
  CHECK(scripted.rule_calls(1) == 400);
}

TEST_CASE("replay reproduces a recorded run without the live backend") {
  TempDir dir;
  Config config = scripted_config(dir / "rec");
  const auto store_path = dir / "store.jsonl";
  auto live = scripted_backend(load_script(constant_script()), "ollama:http://fake");
  auto store = std::make_shared<ReplayStore>(store_path);
  auto recorder = std::make_shared<RecordingBackend>(live, store);
  std::ostringstream out, err;
  REQUIRE(cmd_all(config, out, err, Backends{recorder, recorder}) == kExitOk);
  const std::size_t live_calls = live->total_calls();
  CHECK(live_calls == 3 * seed_corpus().size());

  config.output_dir = dir / "replayed";
  auto replay_store = std::make_shared<ReplayStore>(store_path);
  auto replay = std::make_shared<ReplayBackend>(replay_store, "ollama:http://fake");
  REQUIRE(cmd_all(config, out, err, Backends{replay, replay}) == kExitOk);
  CHECK(live->total_calls() == live_calls);
  CHECK(slurp(dir / "replayed/summary.csv") == slurp(dir / "rec/summary.csv"));

  // A replay store missing entries fails the affected units rather than the process.
  spit(dir / "empty.jsonl", "");
  config.output_dir = dir / "empty";
  auto empty = std::make_shared<ReplayBackend>(std::make_shared<ReplayStore>(dir / "empty.jsonl"),
                                               "ollama:http://fake");
  std::ostringstream out2, err2;
  CHECK(cmd_run(config, out2, err2, Backends{empty, empty}) == kExitFailures);
  CHECK(err2.str().find("replay") != std::string::npos);
}
