#include <doctest.h>

#include <sstream>

#include "../../tools/cli.hpp"
#include "autocode/jsonl.hpp"
#include "autocode/optim.hpp"
#include "helpers.hpp"

using namespace autocode;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json manifest(const fs::path& dir) { return json::parse(read_text_file(dir / "manifest.json")); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen-env is deterministic and writes a manifest") {
    const auto root = test::temp_dir("cli_gen");
    const auto a = root / "a", b = root / "b";
    REQUIRE(run({"--run-dir", a.string(), "--seed", "3", "gen-env", "--n", "20"}).code == cli::kOk);
    REQUIRE(run({"--run-dir", b.string(), "--seed", "3", "gen-env", "--n", "20"}).code == cli::kOk);
    CHECK(read_text_file(a / "suite.jsonl") == read_text_file(b / "suite.jsonl"));
    CHECK(read_text_file(a / "queries.jsonl") == read_text_file(b / "queries.jsonl"));
    const auto m = manifest(a);
    CHECK(m["command"] == "gen-env");
    CHECK(m["status"] == "ok");
    CHECK(m["seed"] == 3);
    CHECK(m["config_hash"].get<std::string>().size() == 16);
    CHECK(m["artifacts"] == json::array({"suite.jsonl", "queries.jsonl"}));
    CHECK(m["overrides"] == json::array({"seed=3"}));
    CHECK(m.contains("revision"));
    CHECK(m.contains("started_at"));
  }

  TEST_CASE("train em records its artifacts") {
    const auto root = test::temp_dir("cli_train");
    REQUIRE(run({"--run-dir", (root / "env").string(), "gen-env", "--n", "8"}).code == cli::kOk);
    const auto r = run({"--run-dir", (root / "em").string(), "--set", "iterations=2", "--set", "K=2", "train", "em",
                        "--suite", (root / "env" / "suite.jsonl").string()});
    REQUIRE(r.code == cli::kOk);
    const auto m = manifest(root / "em");
    CHECK(m["method"] == "em");
    CHECK(m["overrides"] == json::array({"iterations=2", "K=2"}));
    CHECK(m["config"]["K"] == 2);
    for (const auto& a : m["artifacts"]) CHECK(fs::exists(root / "em" / a.get<std::string>()));
    const auto rows = optim::parse_metrics_csv(read_text_file(root / "em" / "metrics.csv"));
    CHECK(rows.size() >= 2);
    CHECK(fs::exists(root / "em" / "checkpoint.jsonl"));
  }

  TEST_CASE("exit codes") {
    const auto root = test::temp_dir("cli_codes");
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"bogus"}).code == cli::kUsage);
    CHECK(run({"--frobnicate", "gen-env"}).code == cli::kUsage);
    CHECK(run({"--run-dir", (root / "x").string(), "train", "nope", "--suite", "s"}).code == cli::kUsage);
    CHECK(run({"--run-dir", (root / "y").string(), "--set", "K", "gen-env"}).code == cli::kUsage);
    CHECK(run({"--run-dir", (root / "z").string(), "--set", "K=0", "gen-env"}).code == cli::kConfig);
    CHECK(run({"-c", (root / "none.toml").string(), "--run-dir", (root / "c").string(), "gen-env"}).code ==
          cli::kConfig);
    CHECK(run({"--run-dir", (root / "m").string(), "train", "em", "--suite", (root / "none.jsonl").string()}).code ==
          cli::kMissingInput);
    CHECK(manifest(root / "m")["status"] == "failed");

    write_text_file(root / "bad.jsonl", "{not json\n");
    CHECK(run({"--run-dir", (root / "b").string(), "train", "em", "--suite", (root / "bad.jsonl").string()}).code ==
          cli::kInvalid);

    REQUIRE(run({"--run-dir", (root / "g").string(), "gen-env", "--n", "4"}).code == cli::kOk);
    CHECK(run({"--run-dir", (root / "g").string(), "gen-env", "--n", "4"}).code == cli::kRunExists);
    CHECK(run({"--run-dir", (root / "g").string(), "--force", "gen-env", "--n", "4"}).code == cli::kOk);
    CHECK(run({"--help"}).code == cli::kOk);
  }
}
