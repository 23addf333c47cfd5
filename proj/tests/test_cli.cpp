#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "json.hpp"
#include "syntha1c/cohort.hpp"
#include "syntha1c/features.hpp"
#include "syntha1c/pipeline.hpp"
#include "syntha1c/version.hpp"
#include "test_util.hpp"

using namespace syntha1c;
namespace f = syntha1c::features;

namespace {

std::string g_cli_path;

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args, const std::filesystem::path& dir) {
  const auto out_path = dir / "stdout.txt";
  const auto err_path = dir / "stderr.txt";
  const std::string command = g_cli_path + " " + args + " > " +
                              out_path.string() + " 2> " + err_path.string();
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = testutil::read_file(out_path);
  result.err = testutil::read_file(err_path);
  return result;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  return nlohmann::json::parse(testutil::read_file(path));
}

}  // namespace

TEST_CASE("full pipeline: generate, assemble, train, evaluate, smoothness") {
  testutil::TempDir dir("cli_pipeline");
  const auto data = dir.path() / "data";

  auto generated = run_cli("generate --out " + data.string() + " --seed 4",
                           dir.path());
  REQUIRE(generated.exit_code == 0);
  CHECK(generated.out.find("2077 samples") != std::string::npos);

  auto assembled = run_cli("assemble --data " + data.string() +
                               " --schema r --out " +
                               (dir.path() / "samples.csv").string(),
                           dir.path());
  REQUIRE(assembled.exit_code == 0);

  testutil::write_file(dir.path() / "config.json", R"({
    "model": "gbdt", "task": "syntha1c", "schema": "r", "seed": 9,
    "split": {"holdout_count": 208, "validation_fraction": 0.1},
    "hyperparameters": {"max_depth": 3, "n_trees": 8}
  })");

  const std::string train_args =
      "train --config " + (dir.path() / "config.json").string() +
      " --samples " + (dir.path() / "samples.csv").string();
  auto train1 = run_cli(
      train_args + " --out " + (dir.path() / "model1.json").string() +
          " --log " + (dir.path() / "log1.json").string(),
      dir.path());
  REQUIRE(train1.exit_code == 0);
  auto train2 = run_cli(
      train_args + " --out " + (dir.path() / "model2.json").string(),
      dir.path());
  REQUIRE(train2.exit_code == 0);
  // Identical config and data give byte-identical model files.
  CHECK(testutil::read_file(dir.path() / "model1.json") ==
        testutil::read_file(dir.path() / "model2.json"));

  const auto log = read_json(dir.path() / "log1.json");
  CHECK(log["partition_sizes"]["holdout"] == 208);
  CHECK(log["toolkit_version"] == kToolkitVersion);

  auto evaluated = run_cli(
      "evaluate --model " + (dir.path() / "model1.json").string() +
          " --samples " + (dir.path() / "samples.csv").string() +
          " --partition holdout --out " + (dir.path() / "report.json").string() +
          " --csv " + (dir.path() / "report.csv").string() + " --scatter " +
          (dir.path() / "scatter.csv").string() + " --stratified",
      dir.path());
  REQUIRE(evaluated.exit_code == 0);
  const auto report = read_json(dir.path() / "report.json");
  CHECK(report["n"] == 208);
  CHECK(report["regression"].contains("rmse"));
  CHECK(report.contains("config"));
  const auto csv_text = testutil::read_file(dir.path() / "report.csv");
  CHECK(csv_text.find("rmse") != std::string::npos);
  CHECK(csv_text.find("dm_recall") != std::string::npos);

  auto smooth = run_cli(
      "smoothness --model " + (dir.path() / "model1.json").string() +
          " --samples " + (dir.path() / "samples.csv").string() +
          " --partition holdout --q-samples 8 --out " +
          (dir.path() / "smooth.json").string(),
      dir.path());
  REQUIRE(smooth.exit_code == 0);
  CHECK(smooth.out.find("M x100") != std::string::npos);
  const auto smooth_doc = read_json(dir.path() / "smooth.json");
  CHECK(smooth_doc["mu_values"].size() == 208);
  CHECK(smooth_doc["global_m_x100"].get<double>() ==
        doctest::Approx(smooth_doc["global_m"].get<double>() * 100.0));
  CHECK(smooth_doc["cardinality_tag"] == 9);

  // Shift of the cohort against itself is ~zero.
  auto shift = run_cli(
      "shift --samples-p " + (dir.path() / "samples.csv").string() +
          " --samples-q " + (dir.path() / "samples.csv").string() +
          " --schema-p r --schema-q r --out " +
          (dir.path() / "shift.json").string(),
      dir.path());
  REQUIRE(shift.exit_code == 0);
  const auto shift_doc = read_json(dir.path() / "shift.json");
  CHECK(shift_doc["total"].get<double>() <= 1e-9);
  CHECK(shift_doc["per_feature"].size() == 5);
}

TEST_CASE("evaluate reproduces the zero-rule row on a 52.4 percent set") {
  testutil::TempDir dir("cli_zero_rule");
  // 524 of 1000 samples above the DM cutoff.
  std::vector<cohort::Sample> samples;
  const auto schema = f::make_schema(f::SchemaVariant::PPrime);
  for (int i = 0; i < 1000; ++i) {
    cohort::Sample s;
    s.patient_id = "p" + std::to_string(i);
    s.target_hba1c = i < 524 ? 7.5 : 5.0;
    s.target_date = i;
    s.daterange = 0;
    s.features = {static_cast<double>(i % 7), static_cast<double>(i % 2),
                  50.0 + i % 30, 20.0 + i % 20};
    samples.push_back(s);
  }
  pipeline::write_samples_csv(dir.path() / "samples.csv", samples, schema,
                              "test fixture");
  testutil::write_file(dir.path() / "config.json", R"({
    "model": "zero_rule", "task": "dm", "schema": "p_prime", "seed": 1,
    "split": {"holdout_count": 0, "validation_fraction": 0.0}
  })");
  auto trained = run_cli(
      "train --config " + (dir.path() / "config.json").string() +
          " --samples " + (dir.path() / "samples.csv").string() + " --out " +
          (dir.path() / "zero.json").string(),
      dir.path());
  REQUIRE(trained.exit_code == 0);
  auto evaluated = run_cli(
      "evaluate --model " + (dir.path() / "zero.json").string() +
          " --samples " + (dir.path() / "samples.csv").string() +
          " --partition all --out " + (dir.path() / "report.json").string(),
      dir.path());
  REQUIRE(evaluated.exit_code == 0);
  const auto report = read_json(dir.path() / "report.json");
  const auto& c = report["classification"];
  CHECK(c["recall"].get<double>() == 100.0);
  CHECK(c["precision"].get<double>() == 52.4);
  CHECK(c["specificity"].get<double>() == 0.0);
  CHECK(c["accuracy"].get<double>() == 52.4);
}

TEST_CASE("score prints points and both classifications") {
  testutil::TempDir dir("cli_score");
  auto result = run_cli(
      "score --age 62 --gender man --sbp 135 --dbp 85 --bmi 33", dir.path());
  REQUIRE(result.exit_code == 0);
  const auto doc = nlohmann::json::parse(result.out);
  CHECK(doc["points"] == 7);
  CHECK(doc["dm"] == "positive");
  CHECK(doc["dm_pre_dm"] == "positive");

  auto low = run_cli(
      "score --age 35 --gender woman --sbp 118 --dbp 72 --bmi 22", dir.path());
  const auto low_doc = nlohmann::json::parse(low.out);
  CHECK(low_doc["points"] == 0);
  CHECK(low_doc["dm"] == "negative");
  CHECK(low_doc["dm_pre_dm"] == "negative");
}

TEST_CASE("failures exit nonzero with a single-line json error record") {
  testutil::TempDir dir("cli_errors");
  auto missing = run_cli("assemble --data /nonexistent --schema r --out " +
                             (dir.path() / "x.csv").string(),
                         dir.path());
  CHECK(missing.exit_code != 0);
  const auto record = nlohmann::json::parse(missing.err);
  CHECK(record.contains("error"));
  CHECK(missing.err.find('\n') == missing.err.size() - 1);

  auto usage = run_cli("frobnicate", dir.path());
  CHECK(usage.exit_code != 0);
  CHECK(nlohmann::json::parse(usage.err).contains("error"));

  auto bad_schema = run_cli(
      "assemble --data /nonexistent --schema q --out x.csv", dir.path());
  CHECK(bad_schema.exit_code != 0);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <path-to-syntha1c-binary>\n");
    return 2;
  }
  g_cli_path = argv[1];
  doctest::Context context;
  context.applyCommandLine(argc - 1, argv + 1);
  return context.run();
}
