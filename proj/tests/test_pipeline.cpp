#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "syntha1c/cohort.hpp"
#include "syntha1c/pipeline.hpp"
#include "syntha1c/rng.hpp"
#include "syntha1c/synthgen.hpp"
#include "syntha1c/version.hpp"
#include "test_util.hpp"

using namespace syntha1c;
namespace f = syntha1c::features;
using pipeline::ModelKind;
using pipeline::RunConfig;
using pipeline::Task;

namespace {

// Assembles a small synthetic cohort once per binary run.
const std::vector<cohort::Sample>& shared_samples() {
  static const auto samples = [] {
    synthgen::GeneratorSpec spec = synthgen::GeneratorSpec::defaults();
    spec.n_patients = 80;
    spec.n_samples = 400;
    spec.seed = 20;
    testutil::TempDir dir("pipeline_cohort");
    synthgen::generate(spec, dir.path());
    const auto cohort = cohort::load_cohort(dir.path() / "measurements.csv",
                                            dir.path() / "statics.csv");
    return cohort::assemble_samples(cohort, f::make_schema(f::SchemaVariant::R));
  }();
  return samples;
}

RunConfig basic_config(ModelKind model, Task task,
                       f::SchemaVariant schema = f::SchemaVariant::R) {
  nlohmann::json doc = {{"model", pipeline::to_string(model)},
                        {"task", pipeline::to_string(task)},
                        {"schema", f::to_string(schema)},
                        {"seed", 5},
                        {"split",
                         {{"holdout_count", 60},
                          {"validation_fraction", 0.1}}}};
  return RunConfig::from_json(doc);
}

}  // namespace

TEST_CASE("run config validation rejects bad model/task pairs") {
  CHECK_THROWS_AS(RunConfig::from_json({{"model", "ols"}, {"task", "dm"}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      RunConfig::from_json({{"model", "zero_rule"}, {"task", "syntha1c"}}),
      std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_json({{"model", "multi_rule"},
                                        {"task", "dm"},
                                        {"schema", "p_prime"}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_json({{"bogus_key", 1}}),
                  std::invalid_argument);
  // Valid combinations parse.
  CHECK_NOTHROW(RunConfig::from_json(
      {{"model", "multi_rule"}, {"task", "dm"}, {"schema", "p"}}));
  CHECK_NOTHROW(RunConfig::from_json(
      {{"model", "ols"}, {"task", "syntha1c"}, {"schema", "r"}}));
}

TEST_CASE("split and smoothness seeds default to the run seed") {
  const auto config = RunConfig::from_json({{"seed", 42}});
  CHECK(config.split.seed == 42);
  CHECK(config.smoothness.seed == 42);
  const auto pinned = RunConfig::from_json(
      {{"seed", 42}, {"split", {{"seed", 7}}}, {"smoothness", {{"seed", 9}}}});
  CHECK(pinned.split.seed == 7);
  CHECK(pinned.smoothness.seed == 9);
}

TEST_CASE("gbdt defaults follow the shipped hyperparameter tables") {
  // Classification: 32 trees, lr 0.1, depth 16, alpha 1, lambda 2.
  const auto clf = pipeline::default_gbdt_config(Task::Dm, f::SchemaVariant::R);
  CHECK(clf.objective == Objective::Logistic);
  CHECK(clf.n_trees == 32);
  CHECK(clf.learning_rate == 0.1);
  CHECK(clf.max_depth == 16);
  CHECK(clf.l1_alpha == 1.0);
  CHECK(clf.l2_lambda == 2.0);

  // Encoder task, r inputs: lr 0.25, depth 6, alpha 0, lambda 1.
  const auto enc_r =
      pipeline::default_gbdt_config(Task::SynthA1c, f::SchemaVariant::R);
  CHECK(enc_r.objective == Objective::Squared);
  CHECK(enc_r.learning_rate == 0.25);
  CHECK(enc_r.max_depth == 6);
  CHECK(enc_r.l1_alpha == 0.0);
  CHECK(enc_r.l2_lambda == 1.0);

  // Encoder task, p inputs: lr 0.1, depth 8, alpha 1, lambda 4. The
  // p_prime variant reuses the p values.
  for (const auto variant : {f::SchemaVariant::P, f::SchemaVariant::PPrime}) {
    const auto enc_p = pipeline::default_gbdt_config(Task::SynthA1c, variant);
    CHECK(enc_p.learning_rate == 0.1);
    CHECK(enc_p.max_depth == 8);
    CHECK(enc_p.l1_alpha == 1.0);
    CHECK(enc_p.l2_lambda == 4.0);
  }

  // Ablation classification runs: alpha 2, lambda 4, lr 0.1 / 0.3.
  const auto cdp =
      pipeline::default_gbdt_config(Task::Dm, f::SchemaVariant::CdpOnly);
  CHECK(cdp.learning_rate == 0.1);
  CHECK(cdp.l1_alpha == 2.0);
  CHECK(cdp.l2_lambda == 4.0);
  const auto idp =
      pipeline::default_gbdt_config(Task::Dm, f::SchemaVariant::IdpOnly);
  CHECK(idp.learning_rate == 0.3);
  CHECK(idp.max_depth == 16);

  // FCNN schedule: 150 epochs, lr 0.01, step 25, decay 0.5, batch 128.
  const auto mlp = pipeline::default_mlp_config(Task::Dm);
  CHECK(mlp.epochs == 150);
  CHECK(mlp.learning_rate == 0.01);
  CHECK(mlp.lr_step_epochs == 25);
  CHECK(mlp.lr_decay == 0.5);
  CHECK(mlp.batch_size == 128);
  CHECK(mlp.dropout == 0.0);
  CHECK(mlp.adam_beta1 == 0.9);
  CHECK(mlp.adam_beta2 == 0.999);
}

TEST_CASE("hyperparameter overrides are applied and unknown keys rejected") {
  auto config = basic_config(ModelKind::Gbdt, Task::Dm);
  config.hyperparameters = {{"max_depth", 2}, {"n_trees", 4}};
  const auto resolved = pipeline::resolve_gbdt_config(config);
  CHECK(resolved.max_depth == 2);
  CHECK(resolved.n_trees == 4);
  CHECK(resolved.learning_rate == 0.1);

  config.hyperparameters = {{"depth", 2}};
  CHECK_THROWS_AS(pipeline::resolve_gbdt_config(config),
                  std::invalid_argument);
}

TEST_CASE("samples csv round-trips losslessly") {
  const auto& samples = shared_samples();
  const auto schema = f::make_schema(f::SchemaVariant::R);
  testutil::TempDir dir("samples_rt");
  pipeline::write_samples_csv(dir.path() / "s.csv", samples, schema, "test");
  const auto restored = pipeline::read_samples_csv(dir.path() / "s.csv", schema);
  REQUIRE(restored.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(restored[i].patient_id == samples[i].patient_id);
    CHECK(restored[i].target_hba1c == samples[i].target_hba1c);
    CHECK(restored[i].target_date == samples[i].target_date);
    CHECK(restored[i].daterange == samples[i].daterange);
    CHECK(restored[i].features == samples[i].features);
    CHECK(restored[i].race_code == samples[i].race_code);
    CHECK(restored[i].gender_code == samples[i].gender_code);
  }
  // Wrong schema is a hard error.
  CHECK_THROWS(pipeline::read_samples_csv(dir.path() / "s.csv",
                                          f::make_schema(f::SchemaVariant::P)));
}

TEST_CASE("training is deterministic through save/load") {
  const auto& samples = shared_samples();
  auto config = basic_config(ModelKind::Gbdt, Task::Dm);
  config.hyperparameters = {{"max_depth", 4}, {"n_trees", 6}};
  const auto a = pipeline::train_model(config, samples);
  const auto b = pipeline::train_model(config, samples);
  CHECK(pipeline::model_to_json(a.model).dump() ==
        pipeline::model_to_json(b.model).dump());

  testutil::TempDir dir("model_rt");
  pipeline::save_model(a.model, dir.path() / "model.json");
  const auto loaded = pipeline::load_model(dir.path() / "model.json");
  CHECK(pipeline::model_to_json(loaded).dump() ==
        pipeline::model_to_json(a.model).dump());
  const auto values_a =
      a.model.predict_values(samples, 1);
  const auto values_l = loaded.predict_values(samples, 1);
  CHECK(values_a == values_l);
}

TEST_CASE("zero-rule evaluation reproduces the analytic fixed point") {
  const auto& samples = shared_samples();
  const auto config = basic_config(ModelKind::ZeroRule, Task::Dm);
  const auto trained = pipeline::train_model(config, samples);
  const auto report =
      pipeline::evaluate_model(trained.model, samples, "holdout");
  const auto& c = report["classification"];
  CHECK(c["recall"] == 100.0);
  CHECK(c["specificity"] == 0.0);
  // Accuracy equals precision equals holdout prevalence.
  CHECK(c["accuracy"] == c["precision"]);
  CHECK(report["n"] == 60);
  CHECK(report["toolkit_version"] == kToolkitVersion);
  CHECK(report.contains("config"));
}

TEST_CASE("encoder evaluation carries regression, downstream and bland-altman") {
  const auto& samples = shared_samples();
  auto config = basic_config(ModelKind::Ols, Task::SynthA1c);
  const auto trained = pipeline::train_model(config, samples);
  const auto report =
      pipeline::evaluate_model(trained.model, samples, "holdout", true);
  CHECK(report.contains("regression"));
  CHECK(report["regression"]["rmse"].get<double>() > 0.0);
  CHECK(report.contains("downstream_classification"));
  CHECK(report["downstream_classification"].contains("dm"));
  CHECK(report["downstream_classification"].contains("dm_pre_dm"));
  CHECK(report.contains("bland_altman"));
  CHECK(report.contains("stratified"));
  CHECK(report["stratified"].contains("gender"));

  // The downstream confusion counts partition the holdout.
  const auto& counts = report["downstream_classification"]["dm"]["counts"];
  CHECK(counts["tp"].get<size_t>() + counts["fp"].get<size_t>() +
            counts["tn"].get<size_t>() + counts["fn"].get<size_t>() ==
        report["n"].get<size_t>());
}

TEST_CASE("multi-rule predictions flow through sample features") {
  const auto& samples = shared_samples();
  const auto config = basic_config(ModelKind::MultiRule, Task::DmPlusPreDm);
  const auto trained = pipeline::train_model(config, samples);
  const auto values = trained.model.predict_values(samples, 0);
  for (double v : values) {
    CHECK(v >= 0.0);
    CHECK(v <= 8.0);
    CHECK(v == std::floor(v));
  }
  const auto report = pipeline::evaluate_model(trained.model, samples, "all");
  CHECK(report["classification"]["counts"]["tp"].get<size_t>() > 0);
}

TEST_CASE("weighted random evaluation is deterministic per seed") {
  const auto& samples = shared_samples();
  const auto config = basic_config(ModelKind::WeightedRandom, Task::Dm);
  const auto trained = pipeline::train_model(config, samples);
  CHECK(trained.model.train_positive_rate > 0.2);
  CHECK(trained.model.train_positive_rate < 0.8);
  const auto a = pipeline::evaluate_model(trained.model, samples, "holdout");
  const auto b = pipeline::evaluate_model(trained.model, samples, "holdout");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("model smoothness runs in the right space per model kind") {
  const auto& samples = shared_samples();
  robustness::SmoothnessConfig smooth;
  smooth.q_samples = 16;
  smooth.seed = 2;

  auto gbdt_config = basic_config(ModelKind::Gbdt, Task::SynthA1c);
  gbdt_config.hyperparameters = {{"max_depth", 3}, {"n_trees", 4}};
  const auto gbdt = pipeline::train_model(gbdt_config, samples);
  const auto gbdt_report = pipeline::model_smoothness(gbdt.model, samples, smooth);
  CHECK(gbdt_report.mu_values.size() == samples.size());
  CHECK(gbdt_report.global_m >= 0.0);
  // r schema: 9 continuous coordinates.
  CHECK(gbdt_report.cardinality_tag == 9);

  const auto ols_config = basic_config(ModelKind::Ols, Task::SynthA1c);
  const auto ols = pipeline::train_model(ols_config, samples);
  const auto ols_report = pipeline::model_smoothness(ols.model, samples, smooth);
  CHECK(ols_report.global_m > 0.0);
  CHECK_NOTHROW(robustness::require_comparable(gbdt_report, ols_report));

  const auto zero = pipeline::train_model(
      basic_config(ModelKind::ZeroRule, Task::Dm), samples);
  const auto zero_report = pipeline::model_smoothness(zero.model, samples, smooth);
  CHECK(zero_report.global_m == 0.0);

  const auto random = pipeline::train_model(
      basic_config(ModelKind::WeightedRandom, Task::Dm), samples);
  CHECK_THROWS_AS(pipeline::model_smoothness(random.model, samples, smooth),
                  std::invalid_argument);
}

TEST_CASE("kl columns are derivable from schema features") {
  const auto& samples = shared_samples();
  const auto schema = f::make_schema(f::SchemaVariant::R);
  const auto columns = pipeline::kl_columns(
      samples, schema, {"race", "gender", "age", "bmi", "hba1c"});
  CHECK(columns.at("race").categorical);
  CHECK(columns.at("race").vocab_size == 7);
  CHECK_FALSE(columns.at("bmi").categorical);
  CHECK(columns.at("bmi").values.size() == samples.size());
  CHECK(columns.at("hba1c").values.size() == samples.size());
  CHECK_THROWS_AS(pipeline::kl_columns(samples, schema, {"cholesterol"}),
                  std::invalid_argument);
}

TEST_CASE("scatter export writes one row per selected sample") {
  const auto& samples = shared_samples();
  const auto config = basic_config(ModelKind::Ols, Task::SynthA1c);
  const auto trained = pipeline::train_model(config, samples);
  testutil::TempDir dir("scatter");
  pipeline::write_scatter_csv(dir.path() / "scatter.csv", trained.model,
                              samples, "holdout");
  const auto content = testutil::read_file(dir.path() / "scatter.csv");
  size_t lines = 0;
  for (char ch : content) lines += ch == '\n';
  CHECK(lines == 60 + 2);  // comment + header + rows
}
