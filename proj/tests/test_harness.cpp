#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "objsoup/error.hpp"
#include "objsoup/harness.hpp"

using namespace objsoup;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("objsoup_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + OBJSOUP_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json base_config(const fs::path& out) {
  return Json::parse(R"({
    "problem": {"name": "quadratic_soup", "seed": 4},
    "recipe": {"kind": "vs"},
    "optimizer": {"alpha": 0.1, "epochs": 2, "iters_per_epoch": 20, "log_every": 5},
    "output": {"directory": ")" + out.string() + R"(", "formats": ["jsonl", "csv"]}
  })");
}

fs::path write_config(const fs::path& dir, const Json& doc, const std::string& name = "cfg.json") {
  const fs::path p = dir / name;
  std::ofstream(p) << doc.dump(2);
  return p;
}

std::string strip_wallclock(const std::string& trace) {
  std::istringstream in(trace);
  std::string line, out;
  while (std::getline(in, line)) {
    Json j = Json::parse(line);
    j.erase("wallclock_ms");
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  TempDir tmp;
  const Json doc = base_config(tmp.path / "run");
  const auto cfg = parse_experiment_config(doc);
  CHECK(cfg.train.seed == 4);
  CHECK(cfg.recipe.alpha == 0.1);
  CHECK(cfg.train.epochs == 2);
  CHECK(cfg.output_formats.size() == 2);
  CHECK(parse_experiment_config(doc, 11).train.seed == 11);

  Json bad = doc;
  bad["optimizer"]["alpah"] = 0.1;
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  bad = doc;
  bad["optimizer"]["epochs"] = "ten";
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  bad = doc;
  bad["recipe"]["kind"] = "pcgrad";
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  bad = doc;
  bad["problem"]["name"] = "rosenbrock";
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  bad = doc;
  bad["output"]["formats"] = Json::array({"parquet"});
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  bad = doc;
  bad["surprise"] = 1;
  CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
}

TEST_CASE("resolved config is a fixed point") {
  TempDir tmp;
  Json doc = base_config(tmp.path / "run");
  doc["recipe"] = Json::parse(R"({"kind": "vm", "levels": [["t0_n0"], ["t1_n0"]]})");
  const Json first = resolved_config_json(parse_experiment_config(doc));
  const Json second = resolved_config_json(parse_experiment_config(first));
  CHECK(first.dump() == second.dump());
  CHECK(first["problem"]["seed"] == 4);
  CHECK(first["recipe"]["level_penalties"].size() == 1);
  CHECK(first["optimizer"].contains("gamma"));
}

TEST_CASE("OBJSOUP_SEED is the fallback seed") {
  TempDir tmp;
  Json doc = base_config(tmp.path / "run");
  doc["problem"].erase("seed");
  ::setenv("OBJSOUP_SEED", "321", 1);
  CHECK(parse_experiment_config(doc).train.seed == 321);
  CHECK(parse_experiment_config(doc, 5).train.seed == 5);
  ::setenv("OBJSOUP_SEED", "minus one", 1);
  CHECK_THROWS_AS(parse_experiment_config(doc), ConfigError);
  ::unsetenv("OBJSOUP_SEED");
  CHECK(parse_experiment_config(doc).train.seed == 0);
}

TEST_CASE("cli run writes artifacts and is reproducible") {
  TempDir tmp;
  const auto cfg = write_config(tmp.path, base_config(tmp.path / "a"));
  REQUIRE(cli("run --config " + cfg.string()) == 0);
  REQUIRE(cli("run --config " + cfg.string() + " --out " + (tmp.path / "b").string()) == 0);
  for (const char* f : {"config.resolved.json", "trace.jsonl", "trace.csv", "summary.json",
                        "accumulator.json"}) {
    CHECK(fs::exists(tmp.path / "a" / f));
  }
  CHECK(strip_wallclock(slurp(tmp.path / "a" / "trace.jsonl")) ==
        strip_wallclock(slurp(tmp.path / "b" / "trace.jsonl")));

  // the summary is a pure function of the trace
  const auto records = read_jsonl(tmp.path / "a" / "trace.jsonl");
  const Json summary = Json::parse(slurp(tmp.path / "a" / "summary.json"));
  CHECK(summarize_trace(records).dump() == summary.dump());
  CHECK(summary["iterations"] == 40);
  CHECK(summary["seed"] == 4);

  // the resolved config reproduces the run
  const auto resolved = tmp.path / "a" / "config.resolved.json";
  REQUIRE(cli("run --config " + resolved.string() + " --out " + (tmp.path / "c").string()) == 0);
  CHECK(strip_wallclock(slurp(tmp.path / "a" / "trace.jsonl")) ==
        strip_wallclock(slurp(tmp.path / "c" / "trace.jsonl")));

  // CSV has one row per JSONL iteration record
  std::size_t iter_records = 0;
  for (const auto& r : records) iter_records += r.contains("stationarity") ? 1 : 0;
  const std::string csv = slurp(tmp.path / "a" / "trace.csv");
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == iter_records + 1);
}

TEST_CASE("cli exit codes") {
  TempDir tmp;
  Json doc = base_config(tmp.path / "neg");
  doc["optimizer"]["alpha"] = -0.1;
  CHECK(cli("run --config " + write_config(tmp.path, doc).string()) == 1);
  CHECK_FALSE(fs::exists(tmp.path / "neg"));

  doc = base_config(tmp.path / "big");
  doc["optimizer"]["alpha"] = 1e6;
  CHECK(cli("run --config " + write_config(tmp.path, doc).string()) == 2);
  const auto records = read_jsonl(tmp.path / "big" / "trace.jsonl");
  REQUIRE_FALSE(records.empty());
  CHECK(records.back()["diagnostic"] == "numerical_failure");

  CHECK(cli("run --config " + (tmp.path / "missing.json").string()) != 0);
  CHECK(cli("frobnicate") == 1);
  CHECK(cli("run") == 1);
  CHECK(cli("--help") == 0);

  // an output path that is a regular file
  std::ofstream(tmp.path / "blocker") << "x";
  doc = base_config(tmp.path / "blocker" / "sub");
  CHECK(cli("run --config " + write_config(tmp.path, doc).string()) == 3);
}

TEST_CASE("cli seed priority") {
  TempDir tmp;
  Json doc = base_config(tmp.path / "s");
  doc["problem"].erase("seed");
  doc["problem"]["name"] = "toy_multitask_net";
  doc["optimizer"]["epochs"] = 1;
  doc["optimizer"]["iters_per_epoch"] = 3;
  const auto cfg = write_config(tmp.path, doc);
  REQUIRE(cli("run --config " + cfg.string() + " --out " + (tmp.path / "env").string(),
              "OBJSOUP_SEED=17") == 0);
  REQUIRE(cli("run --config " + cfg.string() + " --seed 17 --out " + (tmp.path / "flag").string(),
              "OBJSOUP_SEED=99") == 0);
  const Json a = Json::parse(slurp(tmp.path / "env" / "summary.json"));
  const Json b = Json::parse(slurp(tmp.path / "flag" / "summary.json"));
  CHECK(a["seed"] == 17);
  CHECK(a["params_hash"] == b["params_hash"]);
}

TEST_CASE("cli conflicts") {
  TempDir tmp;
  Json doc = base_config(tmp.path / "r");
  doc["problem"] = Json::parse(
      R"({"name": "conflict_by_construction", "block_dims": [3, 3, 3], "conflict_blocks": [1]})");
  doc["optimizer"]["warmup_epochs"] = 2;
  doc["optimizer"]["alpha"] = 0.001;
  const auto cfg = write_config(tmp.path, doc);
  REQUIRE(cli("run --config " + cfg.string()) == 0);
  const auto out = tmp.path / "c.csv";
  REQUIRE(cli("conflicts --run " + (tmp.path / "r").string() + " --per-layer --out " +
              out.string()) == 0);

  std::map<std::tuple<std::string, std::string, std::string>, std::string> cos;
  std::map<std::string, bool> layer_conflict;
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  CHECK(line == "layer,obj_i,obj_j,cosine,conflicting");
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 5);
    cos[{f[0], f[1], f[2]}] = f[3];
    if (f[4] == "1") layer_conflict[f[0]] = true;
  }
  for (const auto& [k, v] : cos) {
    const auto& [layer, i, j] = k;
    CHECK(cos.at({layer, j, i}) == v);
  }
  CHECK(layer_conflict.count("backbone.1") == 1);
  CHECK(layer_conflict.count("backbone.0") == 0);
  CHECK(layer_conflict.count("backbone.2") == 0);

  const auto out2 = tmp.path / "c2.csv";
  CHECK(cli("conflicts --config " + cfg.string() + " --per-layer --out " + out2.string()) == 0);
  CHECK(slurp(out2) == slurp(out));

  fs::create_directories(tmp.path / "empty");
  CHECK(cli("conflicts --run " + (tmp.path / "empty").string() + " --out " + out.string()) == 1);
  CHECK(cli("conflicts --out " + out.string()) == 1);
}

TEST_CASE("cli compare") {
  TempDir tmp;
  Json doc = base_config(tmp.path / "vs");
  REQUIRE(cli("run --config " + write_config(tmp.path, doc).string()) == 0);
  doc["recipe"] = Json::parse(R"({"kind": "static_weight", "static_weights": [0.5, 0.5]})");
  doc["output"]["directory"] = (tmp.path / "sw").string();
  REQUIRE(cli("run --config " + write_config(tmp.path, doc).string()) == 0);
  doc["problem"]["seed"] = 5;
  doc["output"]["directory"] = (tmp.path / "sw5").string();
  REQUIRE(cli("run --config " + write_config(tmp.path, doc).string()) == 0);

  const auto out = tmp.path / "cmp.csv";
  const std::string runs =
      (tmp.path / "vs").string() + " " + (tmp.path / "sw").string() + " " + (tmp.path / "sw5").string();
  REQUIRE(cli("compare --out " + out.string() + " " + runs) == 0);
  const std::string csv = slurp(out);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("run,recipe,order,seed,loss_t0_n0,loss_t1_n0,stationarity", 0) == 0);

  // self-compare is a valid comparison
  CHECK(cli("compare --out " + out.string() + " " + (tmp.path / "vs").string() + " " +
            (tmp.path / "vs").string()) == 0);
  CHECK(cli("compare --out " + out.string() + " " + (tmp.path / "vs").string()) == 1);

  doc["problem"] = Json::parse(R"({"name": "quadratic_soup", "centers": [[2, 0], [-1, 0]]})");
  doc["recipe"] = Json::parse(R"({"kind": "vs"})");
  doc["output"]["directory"] = (tmp.path / "other").string();
  REQUIRE(cli("run --config " + write_config(tmp.path, doc).string()) == 0);
  CHECK(cli("compare --out " + out.string() + " " + (tmp.path / "vs").string() + " " +
            (tmp.path / "other").string()) == 1);
}

TEST_CASE("cli gradcheck") {
  CHECK(cli("gradcheck --problem quadratic_soup") == 0);
  CHECK(cli("gradcheck --problem conflict_by_construction") == 0);
  CHECK(cli("gradcheck --problem toy_multitask_net --points 1") == 0);
  CHECK(cli("gradcheck --problem toy_multitask_net --points 1 --corrupt 0.01") == 2);
  CHECK(cli("gradcheck --problem toy_multitask_net --h -1") == 1);
  CHECK(cli("gradcheck --problem nope") == 1);
}

TEST_CASE("accumulator JSON round trip") {
  TempDir tmp;
  Json doc = base_config(tmp.path / "acc");
  doc["optimizer"]["warmup_epochs"] = 2;
  REQUIRE(cli("run --config " + write_config(tmp.path, doc).string()) == 0);
  const Json j = Json::parse(slurp(tmp.path / "acc" / "accumulator.json"));
  const auto acc = accumulator_from_json(j);
  CHECK(acc.epochs_observed() == 2);
  CHECK(accumulator_to_json(acc).dump() == j.dump());
  CHECK_THROWS_AS(accumulator_from_json(Json::parse(R"({"window": 1})")), ConfigError);
}
