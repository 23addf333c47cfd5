#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "syntha1c/baselines.hpp"
#include "syntha1c/cohort.hpp"
#include "syntha1c/features.hpp"
#include "syntha1c/net.hpp"
#include "syntha1c/robustness.hpp"
#include "syntha1c/trees.hpp"

namespace syntha1c::pipeline {

enum class Task { Dm, DmPlusPreDm, SynthA1c };

Task task_from_string(const std::string& name);
std::string to_string(Task task);

enum class ModelKind { Gbdt, Mlp, Ols, ZeroRule, WeightedRandom, MultiRule };

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

struct RunConfig {
  features::SchemaVariant schema = features::SchemaVariant::R;
  Task task = Task::Dm;
  ModelKind model = ModelKind::Gbdt;
  uint64_t seed = 0;
  cohort::SplitSpec split;  // split.seed defaults to seed when unset
  nlohmann::json hyperparameters = nlohmann::json::object();
  robustness::SmoothnessConfig smoothness;

  // Parses and validates; model/task/schema combinations that make no
  // sense (a rule scorer on the encoder task, multi-rule without blood
  // pressure features) are rejected here.
  static RunConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// Hyperparameter defaults per model/task/schema as shipped.
trees::GbdtConfig default_gbdt_config(Task task,
                                      features::SchemaVariant variant);
net::TrainConfig default_mlp_config(Task task);

// Resolved (defaults + overrides) training configs for a run.
trees::GbdtConfig resolve_gbdt_config(const RunConfig& config);
net::TrainConfig resolve_mlp_config(const RunConfig& config);

struct TrainedModel {
  RunConfig config;
  features::FeatureSchema schema;
  features::StandardizationStats stats;
  double train_positive_rate = 0.0;  // classification tasks only
  ModelKind kind = ModelKind::Gbdt;
  std::optional<trees::GbdtModel> gbdt;
  std::optional<net::MlpModel> mlp;
  std::optional<baselines::OlsModel> ols;

  // Model input encoding for one sample: raw-scale one-hot for trees,
  // standardized one-hot for MLP/OLS.
  std::vector<double> encode_input(const cohort::Sample& sample) const;

  // Probability (classifier), %A1C (encoder), or points (multi-rule).
  std::vector<double> predict_values(
      const std::vector<cohort::Sample>& samples, uint64_t draw_seed) const;
  std::vector<int> predict_labels(const std::vector<cohort::Sample>& samples,
                                  features::LabelTask task,
                                  uint64_t draw_seed) const;
};

struct TrainResult {
  TrainedModel model;
  cohort::SplitResult split;
  nlohmann::json log;  // resolved config, partition sizes, training trace
};

TrainResult train_model(const RunConfig& config,
                        const std::vector<cohort::Sample>& samples);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& doc);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

// Samples file round-trip (CSV; header carries the schema's feature ids).
void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<cohort::Sample>& samples,
                       const features::FeatureSchema& schema,
                       const std::string& provenance);
std::vector<cohort::Sample> read_samples_csv(
    const std::filesystem::path& path, const features::FeatureSchema& schema);

// Evaluation report over one partition of the samples ("train",
// "validation", "holdout" or "all"). For the encoder task this carries the
// regression report, downstream classification under both cutoffs, and the
// Bland-Altman summary; classifiers get the four-metric report.
nlohmann::json evaluate_model(const TrainedModel& model,
                              const std::vector<cohort::Sample>& samples,
                              const std::string& partition,
                              bool with_stratified = false);

// Per-sample scatter/Bland-Altman export rows for external plotting.
void write_scatter_csv(const std::filesystem::path& path,
                       const TrainedModel& model,
                       const std::vector<cohort::Sample>& samples,
                       const std::string& partition);

robustness::SmoothnessReport model_smoothness(
    const TrainedModel& model, const std::vector<cohort::Sample>& samples,
    const robustness::SmoothnessConfig& config);

nlohmann::json smoothness_report_to_json(
    const robustness::SmoothnessReport& report, const RunConfig& config);

// Columns for the KL shift report; feature ids may name schema features,
// "hba1c" (the target), or "bmi" derived from height/weight where needed.
std::map<std::string, robustness::KlColumn> kl_columns(
    const std::vector<cohort::Sample>& samples,
    const features::FeatureSchema& schema,
    const std::vector<std::string>& feature_ids);

nlohmann::json shift_report_to_json(const robustness::ShiftReport& report);

// Partition selector shared by evaluate/smoothness.
std::vector<cohort::Sample> select_partition(
    const std::vector<cohort::Sample>& samples, const cohort::SplitSpec& spec,
    const std::string& partition);

}  // namespace syntha1c::pipeline
