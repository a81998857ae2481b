#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "slant/error.hpp"
#include "slant/hashing.hpp"
#include "slant/pipeline.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slant;
using namespace slant::pipeline;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SLANT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json small_config() {
  return json::parse(R"({
    "seed": 3,
    "output_dir": "out",
    "paths": {"fnc": "sim/fnc.jsonl", "cnn": "sim/cnn.jsonl", "newspapers": "sim/newspapers.jsonl",
              "counties": "sim/counties.csv", "circulation": "sim/circulation.csv", "outlets": "sim/outlets.csv",
              "ground_truth": "sim/ground_truth.json"},
    "features": {"ngram": 1, "threshold": 5, "k": 60},
    "classifier": {"lambda_grid": [0.01, 0.1], "folds": 3},
    "topics": {"enabled": true, "num_topics": 3, "passes": 1, "min_df": 2},
    "regressions": [{"name": "iv", "kind": "tsls", "controls": ["@demographics"]},
                    {"name": "fs", "kind": "first_stage", "controls": ["@demographics"]}],
    "simulate": {"output": "sim", "n_snippets": 600, "vocab_size": 120, "separation": 0.3,
                 "n_counties": 60, "n_outlets": 20, "articles_per_edition": 5}
  })");
}

fs::path write_config(const fs::path& dir, const json& j) {
  const auto p = dir / "config.json";
  slant_test::write_file(p, j.dump(2));
  return p;
}

std::map<std::string, std::string> hash_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = sha256_file(e.path());
  return out;
}

}  // namespace

TEST_CASE("config loading and overrides") {
  slant_test::TempDir tmp("cli-config");
  const auto path = write_config(tmp.path, small_config());
  const std::vector<std::string> sets{"features.k=10", "classifier.penalty=l2_norm", "seed=9"};
  auto c = load_config(path, sets);
  CHECK(c.features.k == 10);
  CHECK(c.seed == 9);
  CHECK(c.output_dir == tmp.path / "out");
  CHECK(c.paths.fnc == tmp.path / "sim/fnc.jsonl");
  CHECK(c.raw["features"]["k"] == 10);

  json j = {{"a", {{"b", 1}}}};
  apply_override(j, "a.c=hello");
  apply_override(j, "a.b=[1,2]");
  CHECK(j["a"]["c"] == "hello");
  CHECK(j["a"]["b"] == json::array({1, 2}));
  CHECK_THROWS_AS(apply_override(j, "novalue"), ValidationError);

  auto bad = small_config();
  bad["features"]["colour"] = 1;
  CHECK_THROWS_AS(config_from_json(bad, tmp.path), ValidationError);
  bad = small_config();
  bad["features"]["ngram"] = 3;
  CHECK_THROWS_AS(config_from_json(bad, tmp.path), ValidationError);
  CHECK(default_lambda_grid().size() == 8);
  CHECK(default_lambda_grid().front() == doctest::Approx(2e-7));
}

TEST_CASE("weight balanced bins") {
  const std::vector<double> x{5, 1, 4, 2, 3, 0, 9, 8, 7, 6}, w(10, 1.0);
  const auto b = weight_balanced_bins(x, w, 5);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(b[i] == static_cast<std::size_t>(x[i]) / 2);
  const std::vector<double> heavy{1, 1, 8};
  const auto h = weight_balanced_bins(std::vector<double>{0, 1, 2}, heavy, 2);
  CHECK(h == std::vector<std::size_t>{0, 0, 1});
}

TEST_CASE("binscatter residuals match the dense projection") {
  std::mt19937_64 rng(4);
  const Eigen::Index n = 200;
  econometrics::Table t;
  t.numeric["position"] = oracle::gaussian(n, 1, rng);
  t.numeric["slant"] = 0.4 * t.numeric["position"] + oracle::gaussian(n, 1, rng);
  t.numeric["income"] = oracle::gaussian(n, 1, rng);
  t.numeric["circulation"] = oracle::gaussian(n, 1, rng).cwiseAbs().array() + 0.2;
  std::vector<std::string> state;
  std::vector<int> gid;
  for (Eigen::Index i = 0; i < n; ++i) {
    state.push_back("s" + std::to_string(i % 5));
    gid.push_back(static_cast<int>(i % 5));
  }
  t.text["state"] = state;
  Binscatter spec;
  spec.name = "b";
  spec.controls = {"income"};
  spec.standardize = false;
  spec.bins = 8;
  const auto pts = binscatter(t, spec);

  const Eigen::MatrixXd z = oracle::hcat(oracle::dummies(gid, 5), t.numeric["income"]);
  const auto& w = t.numeric["circulation"];
  const Eigen::VectorXd ry = t.numeric["slant"] - z * oracle::wls(z, t.numeric["slant"], w);
  const Eigen::VectorXd rx = t.numeric["position"] - z * oracle::wls(z, t.numeric["position"], w);
  const auto bins = weight_balanced_bins(std::span<const double>(rx.data(), n), std::span<const double>(w.data(), n), 8);
  std::vector<double> sx(8), sy(8), sw(8);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto b = bins[static_cast<std::size_t>(i)];
    sx[b] += w[i] * rx[i];
    sy[b] += w[i] * ry[i];
    sw[b] += w[i];
  }
  REQUIRE(pts.size() == 8);
  for (const auto& p : pts) {
    CHECK(std::abs(p.x - sx[p.bin] / sw[p.bin]) < 1e-10);
    CHECK(std::abs(p.y - sy[p.bin] / sw[p.bin]) < 1e-10);
  }
  // the weighted slope through the residuals is the regression coefficient
  econometrics::RegressionSpec rs;
  rs.kind = econometrics::Kind::Ols;
  rs.endogenous = "position";
  rs.controls = {"income"};
  rs.clusters.clear();
  rs.standardize = false;
  const double slope = (w.array() * rx.array() * ry.array()).sum() / (w.array() * rx.array().square()).sum();
  CHECK(econometrics::run(t, rs).theta == doctest::Approx(slope).epsilon(1e-10));
}

TEST_CASE("cli end to end") {
  slant_test::TempDir tmp("cli-run");
  const auto cfg = write_config(tmp.path, small_config());
  const auto log = tmp / "log.txt";
  const std::string c = "-c " + cfg.string();

  CHECK(run_cli("--version", log) == 0);
  CHECK(slant_test::read_file(log).find(std::string(kVersion)) != std::string::npos);
  CHECK(run_cli("nonsense", log) == 2);
  CHECK(run_cli("train -c " + (tmp / "missing.json").string(), log) == 2);
  CHECK(run_cli("train " + c + " --set features.bogus=1", log) == 2);

  // inputs absent before simulate
  CHECK(run_cli("prepare " + c, log) == 2);
  REQUIRE(run_cli("simulate " + c, log) == 0);
  CHECK(fs::exists(tmp / "sim" / "ground_truth.json"));

  CHECK(run_cli("train " + c, log) == 1);
  CHECK(slant_test::read_file(log).find("run `slant prepare` first") != std::string::npos);

  for (const char* cmd : {"prepare", "train", "topics", "score", "regress", "report"}) {
    INFO(cmd);
    REQUIRE(run_cli(std::string(cmd) + " " + c, log) == 0);
    const auto m = json::parse(slant_test::read_file(tmp / "out" / cmd / "manifest.json"));
    CHECK(m["command"] == cmd);
    CHECK(m["seed"] == 3);
    for (const auto& [name, h] : m["outputs"].items()) CHECK(h.get<std::string>().size() == 64);
  }
  CHECK(fs::exists(tmp / "out" / "regress" / "table.csv"));
  CHECK(fs::exists(tmp / "out" / "regress" / "recovery.json"));
  CHECK(fs::exists(tmp / "out" / "report" / "binscatter_slant_position.csv"));
  const auto eval = json::parse(slant_test::read_file(tmp / "out" / "train" / "eval.json"));
  CHECK(eval["k"] == 60);
  CHECK(eval["accuracy"].get<double>() > 0.7);

  const auto first = hash_tree(tmp / "out");
  for (const char* cmd : {"prepare", "train", "topics", "score", "regress", "report"})
    REQUIRE(run_cli(std::string(cmd) + " " + c, log) == 0);
  CHECK(hash_tree(tmp / "out") == first);

  // an override changes the config hash recorded in the manifest
  REQUIRE(run_cli("prepare " + c + " --set seed=4", log) == 0);
  const auto m = json::parse(slant_test::read_file(tmp / "out" / "prepare" / "manifest.json"));
  CHECK(m["seed"] == 4);
  CHECK(hash_tree(tmp / "out").at("prepare/manifest.json") != first.at("prepare/manifest.json"));
}
