#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "syntha1c/baselines.hpp"
#include "syntha1c/cohort.hpp"
#include "syntha1c/csv.hpp"
#include "syntha1c/features.hpp"
#include "syntha1c/pipeline.hpp"
#include "syntha1c/robustness.hpp"
#include "syntha1c/synthgen.hpp"
#include "syntha1c/version.hpp"

namespace {

using namespace syntha1c;
namespace f = syntha1c::features;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  nlohmann::json doc;
  in >> doc;
  return doc;
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << doc.dump(2) << "\n";
  if (!out) {
    throw std::runtime_error("write failed for " + path);
  }
}

std::string percent_1dp(const nlohmann::json& value) {
  if (value.is_null()) return "";
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(1);
  out << value.get<double>();
  return out.str();
}

std::string fixed_dp(const nlohmann::json& value, int digits) {
  if (value.is_null()) return "";
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << value.get<double>();
  return out.str();
}

// Flat metric,value table; percentages rounded to one decimal place.
void write_report_csv(const std::string& path, const nlohmann::json& report) {
  std::vector<std::vector<std::string>> rows;
  if (report.contains("classification")) {
    const auto& c = report["classification"];
    rows.push_back({"recall", percent_1dp(c["recall"])});
    rows.push_back({"precision", percent_1dp(c["precision"])});
    rows.push_back({"specificity", percent_1dp(c["specificity"])});
    rows.push_back({"accuracy", percent_1dp(c["accuracy"])});
  }
  if (report.contains("regression")) {
    const auto& r = report["regression"];
    rows.push_back({"rmse", fixed_dp(r["rmse"], 2)});
    rows.push_back({"pcc", fixed_dp(r["pcc"], 3)});
  }
  if (report.contains("downstream_classification")) {
    for (const auto& [task, c] :
         report["downstream_classification"].items()) {
      rows.push_back({task + "_recall", percent_1dp(c["recall"])});
      rows.push_back({task + "_precision", percent_1dp(c["precision"])});
      rows.push_back({task + "_specificity", percent_1dp(c["specificity"])});
      rows.push_back({task + "_accuracy", percent_1dp(c["accuracy"])});
    }
  }
  rows.push_back({"n", std::to_string(report["n"].get<size_t>())});
  csv::write_csv(path, {"metric", "value"}, rows,
                 "syntha1c " + std::string(kToolkitVersion) + " report, partition=" +
                     report["partition"].get<std::string>());
}

struct GlobalArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out;
};

int run(int argc, char** argv) {
  CLI::App app{"syntha1c: tabular T2DM risk modeling toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs global;
  app.add_option("--config", global.config_path,
                 "JSON config file for the subcommand");
  app.add_option("--seed", global.seed, "Override the config seed");
  app.add_option("--out", global.out, "Primary output path");

  // generate
  auto* generate = app.add_subcommand(
      "generate", "Write a synthetic cohort (measurements, statics, ledger)");

  // assemble
  auto* assemble = app.add_subcommand(
      "assemble", "Assemble per-target feature vectors from a cohort");
  std::string asm_data_dir, asm_measurements, asm_statics, asm_schema = "r";
  assemble->add_option("--data", asm_data_dir,
                       "Directory holding measurements.csv and statics.csv");
  assemble->add_option("--measurements", asm_measurements, "Measurements CSV");
  assemble->add_option("--statics", asm_statics, "Statics CSV");
  assemble->add_option("--schema", asm_schema,
                       "Feature schema: r, p, p_prime, cdp_only, idp_only");

  // train
  auto* train = app.add_subcommand("train", "Train a model from a run config");
  std::string train_samples, train_log;
  train->add_option("--samples", train_samples, "Assembled samples CSV")
      ->required();
  train->add_option("--log", train_log, "Optional training log JSON path");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a trained model");
  std::string eval_model, eval_samples, eval_partition = "holdout";
  std::string eval_csv, eval_scatter;
  bool eval_stratified = false;
  evaluate->add_option("--model", eval_model, "Model JSON")->required();
  evaluate->add_option("--samples", eval_samples, "Samples CSV")->required();
  evaluate->add_option("--partition", eval_partition,
                       "train | validation | holdout | all");
  evaluate->add_option("--csv", eval_csv, "Also write a metric,value CSV");
  evaluate->add_option("--scatter", eval_scatter,
                       "Per-sample scatter/Bland-Altman CSV export");
  evaluate->add_flag("--stratified", eval_stratified,
                     "Include per-group reports");

  // smoothness
  auto* smoothness = app.add_subcommand(
      "smoothness", "Monte-Carlo manifold smoothness of a trained model");
  std::string smooth_model, smooth_samples, smooth_partition = "all";
  std::optional<int> smooth_q;
  std::optional<double> smooth_radius;
  std::optional<size_t> smooth_cap;
  smoothness->add_option("--model", smooth_model, "Model JSON")->required();
  smoothness->add_option("--samples", smooth_samples, "Samples CSV")->required();
  smoothness->add_option("--partition", smooth_partition,
                         "train | validation | holdout | all");
  smoothness->add_option("--q-samples", smooth_q, "Draws per neighborhood");
  smoothness->add_option("--radius", smooth_radius, "Perturbation scale");
  smoothness->add_option("--eval-cap", smooth_cap,
                         "Max evaluation points (0 = all)");

  // shift
  auto* shift = app.add_subcommand(
      "shift", "Empirical KL divergence D(P||Q) between two sample files");
  std::string shift_p, shift_q, shift_schema_p = "r", shift_schema_q = "r";
  std::vector<std::string> shift_features;
  int shift_bins = 10;
  double shift_smoothing = 0.5;
  bool shift_joint = false;
  shift->add_option("--samples-p", shift_p, "Test-set samples CSV")->required();
  shift->add_option("--samples-q", shift_q, "Training-set samples CSV")
      ->required();
  shift->add_option("--schema-p", shift_schema_p, "Schema of samples-p");
  shift->add_option("--schema-q", shift_schema_q, "Schema of samples-q");
  shift
      ->add_option("--features", shift_features,
                   "Feature ids (schema features, bmi, shad or hba1c)")
      ->delimiter(',');
  shift->add_option("--bins", shift_bins, "Equal-width bin count");
  shift->add_option("--smoothing", shift_smoothing, "Additive cell count");
  shift->add_flag("--joint", shift_joint, "Joint histogram mode");

  // score
  auto* score = app.add_subcommand(
      "score", "Multi-rule risk questionnaire: points and classifications");
  double score_age = 0, score_sbp = 0, score_dbp = 0, score_bmi = 0;
  std::string score_gender;
  score->add_option("--age", score_age, "Age in years")->required();
  score->add_option("--gender", score_gender, "man | woman")->required();
  score->add_option("--sbp", score_sbp, "Systolic blood pressure, mmHg")
      ->required();
  score->add_option("--dbp", score_dbp, "Diastolic blood pressure, mmHg")
      ->required();
  score->add_option("--bmi", score_bmi, "Body mass index, kg/m^2")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    nlohmann::json record = {{"error", e.what()}, {"kind", "usage"}};
    std::cerr << record.dump() << "\n";
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  if (generate->parsed()) {
    if (global.out.empty()) {
      throw std::runtime_error("generate: --out directory is required");
    }
    synthgen::GeneratorSpec spec =
        global.config_path.empty()
            ? synthgen::GeneratorSpec::defaults()
            : synthgen::GeneratorSpec::from_json(read_json_file(global.config_path));
    if (global.seed) spec.seed = *global.seed;
    const auto ledger = synthgen::generate(spec, global.out);
    std::cout << "generated " << ledger["n_samples"] << " samples for "
              << ledger["n_patients"] << " patients into " << global.out
              << " (DM prevalence "
              << fixed_dp(ledger["labels"]["dm_prevalence"], 3) << ")\n";
    return 0;
  }

  if (assemble->parsed()) {
    if (global.out.empty()) {
      throw std::runtime_error("assemble: --out samples path is required");
    }
    std::string measurements = asm_measurements, statics = asm_statics;
    if (!asm_data_dir.empty()) {
      measurements = asm_data_dir + "/measurements.csv";
      statics = asm_data_dir + "/statics.csv";
    }
    if (measurements.empty() || statics.empty()) {
      throw std::runtime_error(
          "assemble: give --data or both --measurements and --statics");
    }
    const auto schema =
        f::make_schema(f::schema_variant_from_string(asm_schema));
    const auto cohort_data = cohort::load_cohort(measurements, statics);
    const auto samples = cohort::assemble_samples(cohort_data, schema);
    const auto dstats = samples.empty()
                            ? cohort::DaterangeStats{0, 0.0, {}}
                            : cohort::daterange_stats(samples);
    pipeline::write_samples_csv(
        global.out, samples, schema,
        "syntha1c " + std::string(kToolkitVersion) + " samples, schema=" +
            asm_schema + ", source=" + measurements);
    std::cout << "assembled " << samples.size() << " samples (schema "
              << asm_schema << "), median daterange " << dstats.median_days
              << " days, fraction within 1y " << dstats.fraction_within_365
              << "\n";
    return 0;
  }

  if (train->parsed()) {
    if (global.config_path.empty()) {
      throw std::runtime_error("train: --config run config is required");
    }
    if (global.out.empty()) {
      throw std::runtime_error("train: --out model path is required");
    }
    auto config_doc = read_json_file(global.config_path);
    if (global.seed) config_doc["seed"] = *global.seed;
    const auto config = pipeline::RunConfig::from_json(config_doc);
    const auto schema = f::make_schema(config.schema);
    const auto samples = pipeline::read_samples_csv(train_samples, schema);
    auto result = pipeline::train_model(config, samples);
    pipeline::save_model(result.model, global.out);
    if (!train_log.empty()) write_json_file(train_log, result.log);
    std::cout << "trained " << pipeline::to_string(config.model) << " ("
              << pipeline::to_string(config.task) << ", schema "
              << f::to_string(config.schema) << ") on "
              << result.split.train.size() << " samples -> " << global.out
              << "\n";
    return 0;
  }

  if (evaluate->parsed()) {
    const auto model = pipeline::load_model(eval_model);
    const auto samples =
        pipeline::read_samples_csv(eval_samples, model.schema);
    const auto report =
        pipeline::evaluate_model(model, samples, eval_partition, eval_stratified);
    if (!global.out.empty()) write_json_file(global.out, report);
    if (!eval_csv.empty()) write_report_csv(eval_csv, report);
    if (!eval_scatter.empty()) {
      pipeline::write_scatter_csv(eval_scatter, model, samples, eval_partition);
    }
    if (report.contains("classification")) {
      const auto& c = report["classification"];
      std::cout << "n=" << report["n"] << " recall=" << percent_1dp(c["recall"])
                << " precision=" << percent_1dp(c["precision"])
                << " specificity=" << percent_1dp(c["specificity"])
                << " accuracy=" << percent_1dp(c["accuracy"]) << "\n";
    } else {
      const auto& r = report["regression"];
      std::cout << "n=" << report["n"] << " rmse=" << fixed_dp(r["rmse"], 3)
                << " pcc=" << fixed_dp(r["pcc"], 3) << "\n";
    }
    return 0;
  }

  if (smoothness->parsed()) {
    const auto model = pipeline::load_model(smooth_model);
    const auto samples =
        pipeline::read_samples_csv(smooth_samples, model.schema);
    const auto selected = pipeline::select_partition(
        samples, model.config.split, smooth_partition);
    robustness::SmoothnessConfig config = model.config.smoothness;
    if (global.seed) config.seed = *global.seed;
    if (smooth_q) config.q_samples = *smooth_q;
    if (smooth_radius) config.radius = *smooth_radius;
    if (smooth_cap) config.eval_cap = *smooth_cap;
    const auto report = pipeline::model_smoothness(model, selected, config);
    if (!global.out.empty()) {
      write_json_file(global.out,
                      pipeline::smoothness_report_to_json(report, model.config));
    }
    // x100 is the display convention; the raw value sits alongside.
    std::cout << "M x100 = " << report.global_m * 100.0
              << " (raw M = " << report.global_m << ", n = "
              << report.mu_values.size() << ", cardinality "
              << report.cardinality_tag << ")\n";
    return 0;
  }

  if (shift->parsed()) {
    if (shift_features.empty()) {
      shift_features = {f::kRace, f::kGender, f::kAge, f::kBmi, f::kHbA1c};
    }
    const auto schema_p =
        f::make_schema(f::schema_variant_from_string(shift_schema_p));
    const auto schema_q =
        f::make_schema(f::schema_variant_from_string(shift_schema_q));
    const auto samples_p = pipeline::read_samples_csv(shift_p, schema_p);
    const auto samples_q = pipeline::read_samples_csv(shift_q, schema_q);
    robustness::BinningSpec binning;
    binning.bins = shift_bins;
    binning.smoothing = shift_smoothing;
    binning.joint = shift_joint;
    const auto report = robustness::empirical_kl(
        pipeline::kl_columns(samples_p, schema_p, shift_features),
        pipeline::kl_columns(samples_q, schema_q, shift_features),
        shift_features, binning);
    if (!global.out.empty()) {
      write_json_file(global.out, pipeline::shift_report_to_json(report));
    }
    std::cout << "D_KL(P||Q) = " << report.total << "\n";
    return 0;
  }

  if (score->parsed()) {
    baselines::MultiRuleAnswer answer;
    answer.age_years = score_age;
    answer.sbp = score_sbp;
    answer.dbp = score_dbp;
    answer.bmi = score_bmi;
    if (score_gender == "man") answer.gender = baselines::Gender::Man;
    else if (score_gender == "woman") answer.gender = baselines::Gender::Woman;
    else throw std::runtime_error("score: --gender must be man or woman");
    const int points = baselines::multi_rule_score(answer);
    nlohmann::json result = {
        {"points", points},
        {"dm", baselines::multi_rule_classify(points, f::LabelTask::Dm)
                   ? "positive"
                   : "negative"},
        {"dm_pre_dm",
         baselines::multi_rule_classify(points, f::LabelTask::DmPlusPreDm)
             ? "positive"
             : "negative"}};
    std::cout << result.dump() << "\n";
    if (!global.out.empty()) write_json_file(global.out, result);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    nlohmann::json record = {{"error", e.what()}, {"kind", "runtime"}};
    std::cerr << record.dump() << "\n";
    return 1;
  }
}
