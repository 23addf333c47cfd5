#include "syntha1c/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "syntha1c/csv.hpp"
#include "syntha1c/eval.hpp"
#include "syntha1c/rng.hpp"
#include "syntha1c/version.hpp"

namespace syntha1c::pipeline {

namespace {

namespace f = syntha1c::features;

constexpr uint64_t kDrawStream = 0xD7A3;

nlohmann::json optional_metric(const std::optional<double>& value) {
  if (value.has_value()) return *value;
  return nullptr;
}

nlohmann::json classification_to_json(const eval::ClassificationReport& r) {
  return {{"counts",
           {{"tp", r.counts.tp},
            {"fp", r.counts.fp},
            {"tn", r.counts.tn},
            {"fn", r.counts.fn}}},
          {"recall", optional_metric(r.recall)},
          {"precision", optional_metric(r.precision)},
          {"specificity", optional_metric(r.specificity)},
          {"accuracy", optional_metric(r.accuracy)}};
}

nlohmann::json regression_to_json(const eval::RegressionReport& r) {
  return {{"rmse", r.rmse}, {"pcc", optional_metric(r.pcc)}, {"n", r.n}};
}

}  // namespace

Task task_from_string(const std::string& name) {
  if (name == "dm") return Task::Dm;
  if (name == "dm_pre_dm") return Task::DmPlusPreDm;
  if (name == "syntha1c") return Task::SynthA1c;
  throw std::invalid_argument("unknown task '" + name + "'");
}

std::string to_string(Task task) {
  switch (task) {
    case Task::Dm: return "dm";
    case Task::DmPlusPreDm: return "dm_pre_dm";
    case Task::SynthA1c: return "syntha1c";
  }
  throw std::logic_error("unreachable task");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "gbdt") return ModelKind::Gbdt;
  if (name == "mlp") return ModelKind::Mlp;
  if (name == "ols") return ModelKind::Ols;
  if (name == "zero_rule") return ModelKind::ZeroRule;
  if (name == "weighted_random") return ModelKind::WeightedRandom;
  if (name == "multi_rule") return ModelKind::MultiRule;
  throw std::invalid_argument("unknown model '" + name + "'");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Gbdt: return "gbdt";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Ols: return "ols";
    case ModelKind::ZeroRule: return "zero_rule";
    case ModelKind::WeightedRandom: return "weighted_random";
    case ModelKind::MultiRule: return "multi_rule";
  }
  throw std::logic_error("unreachable model kind");
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  RunConfig config;
  bool split_seed_given = false;
  bool smoothness_seed_given = false;
  for (const auto& [key, value] : doc.items()) {
    if (key == "schema") {
      config.schema = f::schema_variant_from_string(value);
    } else if (key == "task") {
      config.task = task_from_string(value);
    } else if (key == "model") {
      config.model = model_kind_from_string(value);
    } else if (key == "seed") {
      config.seed = value;
    } else if (key == "split") {
      for (const auto& [k, v] : value.items()) {
        if (k == "holdout_count") config.split.holdout_count = v.get<size_t>();
        else if (k == "holdout_fraction") config.split.holdout_fraction = v;
        else if (k == "validation_fraction") config.split.validation_fraction = v;
        else if (k == "k_folds") config.split.k_folds = v;
        else if (k == "seed") { config.split.seed = v; split_seed_given = true; }
        else if (k == "patient_level") config.split.patient_level = v;
        else throw std::invalid_argument("run config: unknown split key '" + k + "'");
      }
      if (config.split.k_folds != 0 && config.split.k_folds < 2) {
        throw std::invalid_argument("run config: k_folds must be >= 2");
      }
    } else if (key == "hyperparameters") {
      config.hyperparameters = value;
    } else if (key == "smoothness") {
      for (const auto& [k, v] : value.items()) {
        if (k == "q_samples") config.smoothness.q_samples = v;
        else if (k == "radius") config.smoothness.radius = v;
        else if (k == "seed") { config.smoothness.seed = v; smoothness_seed_given = true; }
        else if (k == "eval_cap") config.smoothness.eval_cap = v.get<size_t>();
        else throw std::invalid_argument("run config: unknown smoothness key '" + k + "'");
      }
    } else {
      throw std::invalid_argument("run config: unknown key '" + key + "'");
    }
  }
  if (!split_seed_given) config.split.seed = config.seed;
  if (!smoothness_seed_given) config.smoothness.seed = config.seed;

  const bool classification =
      config.task == Task::Dm || config.task == Task::DmPlusPreDm;
  if (config.model == ModelKind::Ols && classification) {
    throw std::invalid_argument(
        "run config: ols is an encoder; use task 'syntha1c'");
  }
  if (!classification && (config.model == ModelKind::ZeroRule ||
                          config.model == ModelKind::WeightedRandom ||
                          config.model == ModelKind::MultiRule)) {
    throw std::invalid_argument(
        "run config: rule/random baselines are classification-only");
  }
  if (config.model == ModelKind::MultiRule) {
    const auto schema = f::make_schema(config.schema);
    const bool has_bmi = schema.has(f::kBmi) ||
                         (schema.has(f::kHeightM) && schema.has(f::kWeightKg));
    if (!schema.has(f::kAge) || !schema.has(f::kSbp) || !schema.has(f::kDbp) ||
        !schema.has(f::kGender) || !has_bmi) {
      throw std::invalid_argument(
          "run config: multi_rule needs age, gender, blood pressure and BMI "
          "features; schema '" +
          f::to_string(config.schema) + "' lacks them");
    }
  }
  return config;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json split_doc = {
      {"holdout_fraction", split.holdout_fraction},
      {"validation_fraction", split.validation_fraction},
      {"k_folds", split.k_folds},
      {"seed", split.seed},
      {"patient_level", split.patient_level}};
  if (split.holdout_count.has_value()) {
    split_doc["holdout_count"] = *split.holdout_count;
  }
  return {{"schema", f::to_string(schema)},
          {"task", to_string(task)},
          {"model", to_string(model)},
          {"seed", seed},
          {"split", std::move(split_doc)},
          {"hyperparameters", hyperparameters},
          {"smoothness",
           {{"q_samples", smoothness.q_samples},
            {"radius", smoothness.radius},
            {"seed", smoothness.seed},
            {"eval_cap", smoothness.eval_cap}}}};
}

trees::GbdtConfig default_gbdt_config(Task task,
                                      features::SchemaVariant variant) {
  trees::GbdtConfig config;
  config.n_trees = 32;
  if (task == Task::SynthA1c) {
    config.objective = Objective::Squared;
    if (variant == f::SchemaVariant::P || variant == f::SchemaVariant::PPrime) {
      config.learning_rate = 0.1;
      config.max_depth = 8;
      config.l1_alpha = 1.0;
      config.l2_lambda = 4.0;
    } else {
      config.learning_rate = 0.25;
      config.max_depth = 6;
      config.l1_alpha = 0.0;
      config.l2_lambda = 1.0;
    }
    return config;
  }
  config.objective = Objective::Logistic;
  switch (variant) {
    case f::SchemaVariant::CdpOnly:
      config.learning_rate = 0.1;
      config.max_depth = 16;
      config.l1_alpha = 2.0;
      config.l2_lambda = 4.0;
      break;
    case f::SchemaVariant::IdpOnly:
      config.learning_rate = 0.3;
      config.max_depth = 16;
      config.l1_alpha = 2.0;
      config.l2_lambda = 4.0;
      break;
    default:
      config.learning_rate = 0.1;
      config.max_depth = 16;
      config.l1_alpha = 1.0;
      config.l2_lambda = 2.0;
      break;
  }
  return config;
}

net::TrainConfig default_mlp_config(Task /*task*/) {
  // One shipped schedule serves both objectives; the encoder task has no
  // separate tuning.
  net::TrainConfig config;
  config.epochs = 150;
  config.learning_rate = 0.01;
  config.lr_step_epochs = 25;
  config.lr_decay = 0.5;
  config.batch_size = 128;
  config.dropout = 0.0;
  return config;
}

trees::GbdtConfig resolve_gbdt_config(const RunConfig& config) {
  trees::GbdtConfig resolved = default_gbdt_config(config.task, config.schema);
  for (const auto& [key, value] : config.hyperparameters.items()) {
    if (key == "n_trees") resolved.n_trees = value;
    else if (key == "learning_rate") resolved.learning_rate = value;
    else if (key == "max_depth") resolved.max_depth = value;
    else if (key == "l1_alpha") resolved.l1_alpha = value;
    else if (key == "l2_lambda") resolved.l2_lambda = value;
    else throw std::invalid_argument("gbdt hyperparameters: unknown key '" + key + "'");
  }
  return resolved;
}

net::TrainConfig resolve_mlp_config(const RunConfig& config) {
  net::TrainConfig resolved = default_mlp_config(config.task);
  resolved.seed = config.seed;
  for (const auto& [key, value] : config.hyperparameters.items()) {
    if (key == "epochs") resolved.epochs = value;
    else if (key == "learning_rate") resolved.learning_rate = value;
    else if (key == "lr_step_epochs") resolved.lr_step_epochs = value;
    else if (key == "lr_decay") resolved.lr_decay = value;
    else if (key == "batch_size") resolved.batch_size = value;
    else if (key == "dropout") resolved.dropout = value;
    else if (key == "hidden_sizes") resolved.hidden_sizes = value.get<std::vector<int>>();
    else if (key == "adam_beta1") resolved.adam_beta1 = value;
    else if (key == "adam_beta2") resolved.adam_beta2 = value;
    else if (key == "adam_epsilon") resolved.adam_epsilon = value;
    else throw std::invalid_argument("mlp hyperparameters: unknown key '" + key + "'");
  }
  return resolved;
}

std::vector<double> TrainedModel::encode_input(
    const cohort::Sample& sample) const {
  if (kind == ModelKind::Gbdt) {
    return f::encode_raw(sample.features, schema);
  }
  return f::encode(sample.features, schema, stats);
}

namespace {

baselines::MultiRuleAnswer answer_from_sample(const cohort::Sample& sample,
                                              const f::FeatureSchema& schema) {
  baselines::MultiRuleAnswer answer{};
  answer.age_years = sample.features[schema.index_of(f::kAge)];
  answer.sbp = sample.features[schema.index_of(f::kSbp)];
  answer.dbp = sample.features[schema.index_of(f::kDbp)];
  if (schema.has(f::kBmi)) {
    answer.bmi = sample.features[schema.index_of(f::kBmi)];
  } else {
    answer.bmi = f::bmi(sample.features[schema.index_of(f::kWeightKg)],
                        sample.features[schema.index_of(f::kHeightM)]);
  }
  const auto gender_code = static_cast<int>(
      sample.features[schema.index_of(f::kGender)]);
  // Gender vocabulary is [male, female].
  answer.gender =
      gender_code == 0 ? baselines::Gender::Man : baselines::Gender::Woman;
  return answer;
}

}  // namespace

std::vector<double> TrainedModel::predict_values(
    const std::vector<cohort::Sample>& samples, uint64_t draw_seed) const {
  std::vector<double> values;
  values.reserve(samples.size());
  switch (kind) {
    case ModelKind::Gbdt:
      for (const auto& s : samples) values.push_back(gbdt->predict(encode_input(s)));
      break;
    case ModelKind::Mlp:
      for (const auto& s : samples) values.push_back(mlp->predict(encode_input(s)));
      break;
    case ModelKind::Ols:
      for (const auto& s : samples) values.push_back(ols->predict(encode_input(s)));
      break;
    case ModelKind::ZeroRule:
      values.assign(samples.size(), 1.0);
      break;
    case ModelKind::WeightedRandom: {
      const auto labels = baselines::weighted_random_predict(
          train_positive_rate, samples.size(),
          Rng::derive_seed(draw_seed, kDrawStream));
      for (int label : labels) values.push_back(static_cast<double>(label));
      break;
    }
    case ModelKind::MultiRule:
      for (const auto& s : samples) {
        values.push_back(static_cast<double>(
            baselines::multi_rule_score(answer_from_sample(s, schema))));
      }
      break;
  }
  return values;
}

std::vector<int> TrainedModel::predict_labels(
    const std::vector<cohort::Sample>& samples, features::LabelTask task,
    uint64_t draw_seed) const {
  const auto values = predict_values(samples, draw_seed);
  std::vector<int> labels;
  labels.reserve(values.size());
  if (config.task == Task::SynthA1c) {
    for (double v : values) {
      labels.push_back(eval::syntha1c_classify(v, task) ? 1 : 0);
    }
    return labels;
  }
  switch (kind) {
    case ModelKind::MultiRule:
      for (double v : values) {
        labels.push_back(
            baselines::multi_rule_classify(static_cast<int>(v), task) ? 1 : 0);
      }
      break;
    case ModelKind::ZeroRule:
    case ModelKind::WeightedRandom:
      for (double v : values) labels.push_back(v >= 0.5 ? 1 : 0);
      break;
    default:
      // Probability threshold 0.5.
      for (double v : values) labels.push_back(v >= 0.5 ? 1 : 0);
      break;
  }
  return labels;
}

TrainResult train_model(const RunConfig& config,
                        const std::vector<cohort::Sample>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("train_model: no samples");
  }
  TrainResult result;
  result.model.config = config;
  result.model.kind = config.model;
  result.model.schema = f::make_schema(config.schema);
  result.split = cohort::split_samples(samples, config.split);

  std::vector<std::vector<double>> train_rows;
  std::vector<double> train_hba1c;
  train_rows.reserve(result.split.train.size());
  for (size_t i : result.split.train) {
    train_rows.push_back(samples[i].features);
    train_hba1c.push_back(samples[i].target_hba1c);
  }
  if (train_rows.size() < 2) {
    throw std::invalid_argument("train_model: training partition too small");
  }
  result.model.stats =
      f::fit_standardization(train_rows, train_hba1c, result.model.schema);

  const bool classification = config.task != Task::SynthA1c;
  std::vector<double> targets;
  targets.reserve(train_rows.size());
  const auto label_task = config.task == Task::DmPlusPreDm
                              ? f::LabelTask::DmPlusPreDm
                              : f::LabelTask::Dm;
  double positives = 0.0;
  for (size_t k = 0; k < train_rows.size(); ++k) {
    if (classification) {
      const double y = f::derive_label(train_hba1c[k], label_task) ? 1.0 : 0.0;
      positives += y;
      targets.push_back(y);
    } else {
      targets.push_back(train_hba1c[k]);
    }
  }
  if (classification) {
    result.model.train_positive_rate =
        positives / static_cast<double>(train_rows.size());
  }

  nlohmann::json log;
  log["toolkit_version"] = kToolkitVersion;
  log["config"] = config.to_json();
  log["partition_sizes"] = {{"train", result.split.train.size()},
                            {"validation", result.split.validation.size()},
                            {"holdout", result.split.holdout.size()}};

  switch (config.model) {
    case ModelKind::Gbdt: {
      const auto gbdt_config = resolve_gbdt_config(config);
      std::vector<std::vector<double>> encoded;
      encoded.reserve(train_rows.size());
      for (const auto& row : train_rows) {
        encoded.push_back(f::encode_raw(row, result.model.schema));
      }
      result.model.gbdt = trees::fit_gbdt(encoded, targets, gbdt_config);
      log["resolved_hyperparameters"] = {
          {"n_trees", gbdt_config.n_trees},
          {"learning_rate", gbdt_config.learning_rate},
          {"max_depth", gbdt_config.max_depth},
          {"l1_alpha", gbdt_config.l1_alpha},
          {"l2_lambda", gbdt_config.l2_lambda},
          {"objective", to_string(gbdt_config.objective)}};
      break;
    }
    case ModelKind::Mlp: {
      const auto mlp_config = resolve_mlp_config(config);
      std::vector<std::vector<double>> encoded;
      encoded.reserve(train_rows.size());
      for (const auto& row : train_rows) {
        encoded.push_back(f::encode(row, result.model.schema, result.model.stats));
      }
      std::vector<double> epoch_loss;
      result.model.mlp = net::train_mlp(
          encoded, targets, mlp_config,
          classification ? Objective::Logistic : Objective::Squared,
          &epoch_loss);
      log["resolved_hyperparameters"] = {
          {"epochs", mlp_config.epochs},
          {"learning_rate", mlp_config.learning_rate},
          {"lr_step_epochs", mlp_config.lr_step_epochs},
          {"lr_decay", mlp_config.lr_decay},
          {"batch_size", mlp_config.batch_size},
          {"dropout", mlp_config.dropout},
          {"hidden_sizes", mlp_config.hidden_sizes},
          {"adam", {{"beta1", mlp_config.adam_beta1},
                    {"beta2", mlp_config.adam_beta2},
                    {"epsilon", mlp_config.adam_epsilon}}}};
      log["epoch_loss"] = epoch_loss;
      break;
    }
    case ModelKind::Ols: {
      std::vector<std::vector<double>> encoded;
      encoded.reserve(train_rows.size());
      for (const auto& row : train_rows) {
        encoded.push_back(f::encode(row, result.model.schema, result.model.stats));
      }
      result.model.ols = baselines::ols_fit(encoded, targets);
      break;
    }
    case ModelKind::ZeroRule:
    case ModelKind::MultiRule:
      break;  // nothing to fit
    case ModelKind::WeightedRandom:
      log["train_positive_rate"] = result.model.train_positive_rate;
      break;
  }

  result.log = std::move(log);
  return result;
}

nlohmann::json model_to_json(const TrainedModel& model) {
  nlohmann::json doc;
  doc["toolkit_version"] = kToolkitVersion;
  doc["config"] = model.config.to_json();
  nlohmann::json continuous = nlohmann::json::array();
  for (size_t j = 0; j < model.schema.size(); ++j) {
    if (model.schema.descriptors[j].dtype == f::FeatureDtype::Categorical) {
      continue;
    }
    continuous.push_back({{"feature", model.schema.descriptors[j].id},
                          {"mean", model.stats.mean[j]},
                          {"sigma", model.stats.sigma[j]}});
  }
  doc["stats"] = {{"continuous", std::move(continuous)},
                  {"sigma_y", model.stats.sigma_y}};
  doc["train_positive_rate"] = model.train_positive_rate;
  nlohmann::json inner;
  inner["kind"] = to_string(model.kind);
  switch (model.kind) {
    case ModelKind::Gbdt: inner["gbdt"] = trees::gbdt_to_json(*model.gbdt); break;
    case ModelKind::Mlp: inner["mlp"] = net::mlp_to_json(*model.mlp); break;
    case ModelKind::Ols:
      inner["ols"] = {{"coefficients", model.ols->coefficients},
                      {"intercept", model.ols->intercept}};
      break;
    default: break;
  }
  doc["model"] = std::move(inner);
  return doc;
}

TrainedModel model_from_json(const nlohmann::json& doc) {
  TrainedModel model;
  model.config = RunConfig::from_json(doc.at("config"));
  model.schema = f::make_schema(model.config.schema);
  model.kind = model.config.model;

  const auto& stats_doc = doc.at("stats");
  model.stats.mean.assign(model.schema.size(),
                          std::numeric_limits<double>::quiet_NaN());
  model.stats.sigma.assign(model.schema.size(),
                           std::numeric_limits<double>::quiet_NaN());
  for (const auto& entry : stats_doc.at("continuous")) {
    const size_t j = model.schema.index_of(entry.at("feature"));
    model.stats.mean[j] = entry.at("mean");
    model.stats.sigma[j] = entry.at("sigma");
  }
  model.stats.sigma_y = stats_doc.at("sigma_y");
  model.train_positive_rate = doc.at("train_positive_rate");

  const auto& inner = doc.at("model");
  if (to_string(model.kind) != inner.at("kind").get<std::string>()) {
    throw std::runtime_error("model_from_json: kind mismatch");
  }
  switch (model.kind) {
    case ModelKind::Gbdt:
      model.gbdt = trees::gbdt_from_json(inner.at("gbdt"));
      break;
    case ModelKind::Mlp:
      model.mlp = net::mlp_from_json(inner.at("mlp"));
      break;
    case ModelKind::Ols: {
      baselines::OlsModel ols;
      ols.coefficients =
          inner.at("ols").at("coefficients").get<std::vector<double>>();
      ols.intercept = inner.at("ols").at("intercept");
      model.ols = std::move(ols);
      break;
    }
    default: break;
  }
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_model: cannot write " + path.string());
  }
  out << model_to_json(model).dump(2) << "\n";
  if (!out) {
    throw std::runtime_error("save_model: write failed for " + path.string());
  }
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_model: cannot open " + path.string());
  }
  nlohmann::json doc;
  in >> doc;
  return model_from_json(doc);
}

void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<cohort::Sample>& samples,
                       const features::FeatureSchema& schema,
                       const std::string& provenance) {
  std::vector<std::string> header = {"patient_id", "target_hba1c",
                                     "target_date", "daterange"};
  for (const auto& d : schema.descriptors) header.push_back(d.id);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    std::vector<std::string> row = {s.patient_id,
                                    csv::format_double(s.target_hba1c),
                                    csv::format_date_days(s.target_date),
                                    std::to_string(s.daterange)};
    for (size_t j = 0; j < schema.size(); ++j) {
      const auto& d = schema.descriptors[j];
      if (d.dtype == f::FeatureDtype::Categorical) {
        row.push_back(d.vocabulary[static_cast<size_t>(s.features[j])]);
      } else {
        row.push_back(csv::format_double(s.features[j]));
      }
    }
    rows.push_back(std::move(row));
  }
  csv::write_csv(path, header, rows, provenance);
}

std::vector<cohort::Sample> read_samples_csv(
    const std::filesystem::path& path,
    const features::FeatureSchema& schema) {
  const auto table = csv::read_csv(path);
  std::vector<std::string> expected = {"patient_id", "target_hba1c",
                                       "target_date", "daterange"};
  for (const auto& d : schema.descriptors) expected.push_back(d.id);
  if (table.header != expected) {
    throw std::runtime_error("read_samples_csv: " + path.string() +
                             " does not match schema '" +
                             f::to_string(schema.variant) + "'");
  }

  std::vector<cohort::Sample> samples;
  samples.reserve(table.rows.size());
  for (size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string context =
        "read_samples_csv: line " + std::to_string(table.line_numbers[r]);
    cohort::Sample s;
    s.patient_id = row[0];
    s.target_hba1c = csv::parse_double(row[1], context);
    if (!(s.target_hba1c > 0.0 && s.target_hba1c < 20.0)) {
      throw std::runtime_error(context + ": HbA1c out of range");
    }
    s.target_date = csv::parse_date_days(row[2]);
    s.daterange = std::stoll(row[3]);
    if (s.daterange < 0) {
      throw std::runtime_error(context + ": negative daterange");
    }
    s.features.reserve(schema.size());
    for (size_t j = 0; j < schema.size(); ++j) {
      const auto& d = schema.descriptors[j];
      const std::string& cell = row[4 + j];
      if (d.dtype == f::FeatureDtype::Categorical) {
        int code = -1;
        for (size_t v = 0; v < d.vocabulary.size(); ++v) {
          if (d.vocabulary[v] == cell) {
            code = static_cast<int>(v);
            break;
          }
        }
        if (code < 0) {
          throw std::runtime_error(context + ": unknown " + d.id + " label '" +
                                   cell + "'");
        }
        s.features.push_back(static_cast<double>(code));
        if (d.id == f::kRace) s.race_code = code;
        if (d.id == f::kGender) s.gender_code = code;
      } else {
        s.features.push_back(csv::parse_double(cell, context));
      }
    }
    if (schema.has(f::kAge)) s.age = s.features[schema.index_of(f::kAge)];
    if (schema.has(f::kBmi)) {
      s.bmi_value = s.features[schema.index_of(f::kBmi)];
    } else if (schema.has(f::kHeightM) && schema.has(f::kWeightKg)) {
      s.bmi_value = f::bmi(s.features[schema.index_of(f::kWeightKg)],
                           s.features[schema.index_of(f::kHeightM)]);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<cohort::Sample> select_partition(
    const std::vector<cohort::Sample>& samples, const cohort::SplitSpec& spec,
    const std::string& partition) {
  if (partition == "all") return samples;
  const auto split = cohort::split_samples(samples, spec);
  const std::vector<size_t>* indices = nullptr;
  if (partition == "train") indices = &split.train;
  else if (partition == "validation") indices = &split.validation;
  else if (partition == "holdout") indices = &split.holdout;
  else {
    throw std::invalid_argument("unknown partition '" + partition + "'");
  }
  std::vector<cohort::Sample> selected;
  selected.reserve(indices->size());
  for (size_t i : *indices) selected.push_back(samples[i]);
  return selected;
}

nlohmann::json evaluate_model(const TrainedModel& model,
                              const std::vector<cohort::Sample>& samples,
                              const std::string& partition,
                              bool with_stratified) {
  const auto selected =
      select_partition(samples, model.config.split, partition);
  if (selected.empty()) {
    throw std::invalid_argument("evaluate_model: empty partition '" +
                                partition + "'");
  }

  nlohmann::json report;
  report["toolkit_version"] = kToolkitVersion;
  report["config"] = model.config.to_json();
  report["partition"] = partition;
  report["n"] = selected.size();

  const auto values =
      model.predict_values(selected, Rng::derive_seed(model.config.seed, 1));

  if (model.config.task == Task::SynthA1c) {
    std::vector<double> truth;
    truth.reserve(selected.size());
    for (const auto& s : selected) truth.push_back(s.target_hba1c);
    report["regression"] =
        regression_to_json(eval::regression_report(values, truth));

    nlohmann::json downstream;
    for (const auto task : {f::LabelTask::Dm, f::LabelTask::DmPlusPreDm}) {
      std::vector<int> predicted, actual;
      predicted.reserve(selected.size());
      actual.reserve(selected.size());
      for (size_t i = 0; i < selected.size(); ++i) {
        predicted.push_back(eval::syntha1c_classify(values[i], task) ? 1 : 0);
        actual.push_back(
            f::derive_label(selected[i].target_hba1c, task) ? 1 : 0);
      }
      downstream[f::to_string(task)] =
          classification_to_json(eval::classification_report(predicted, actual));
    }
    report["downstream_classification"] = std::move(downstream);

    const auto ba = eval::bland_altman(values, truth);
    report["bland_altman"] = {{"bias", ba.bias},
                              {"sd_diff", ba.sd_diff},
                              {"lower_limit", ba.lower_limit},
                              {"upper_limit", ba.upper_limit},
                              {"n", ba.pairs.size()}};

    if (with_stratified) {
      nlohmann::json strat;
      for (const auto key :
           {eval::GroupKey::Gender, eval::GroupKey::Race,
            eval::GroupKey::BmiCategory, eval::GroupKey::AgeDecade}) {
        try {
          nlohmann::json groups;
          for (const auto& [label, rep] :
               eval::stratified_regression_report(selected, values, key).groups) {
            groups[label] = regression_to_json(rep);
          }
          strat[eval::to_string(key)] = std::move(groups);
        } catch (const std::invalid_argument&) {
          // Group key not derivable from this schema; skip the stratum.
        }
      }
      report["stratified"] = std::move(strat);
    }
    return report;
  }

  const auto label_task = model.config.task == Task::DmPlusPreDm
                              ? f::LabelTask::DmPlusPreDm
                              : f::LabelTask::Dm;
  const auto predicted = model.predict_labels(
      selected, label_task, Rng::derive_seed(model.config.seed, 1));
  std::vector<int> actual;
  actual.reserve(selected.size());
  for (const auto& s : selected) {
    actual.push_back(f::derive_label(s.target_hba1c, label_task) ? 1 : 0);
  }
  report["task"] = f::to_string(label_task);
  report["classification"] =
      classification_to_json(eval::classification_report(predicted, actual));

  if (with_stratified) {
    nlohmann::json strat;
    for (const auto key :
         {eval::GroupKey::Gender, eval::GroupKey::Race,
          eval::GroupKey::BmiCategory, eval::GroupKey::AgeDecade}) {
      try {
        nlohmann::json groups;
        for (const auto& [label, rep] :
             eval::stratified_classification_report(selected, predicted,
                                                    actual, key)
                 .groups) {
          groups[label] = classification_to_json(rep);
        }
        strat[eval::to_string(key)] = std::move(groups);
      } catch (const std::invalid_argument&) {
      }
    }
    report["stratified"] = std::move(strat);
  }
  return report;
}

void write_scatter_csv(const std::filesystem::path& path,
                       const TrainedModel& model,
                       const std::vector<cohort::Sample>& samples,
                       const std::string& partition) {
  const auto selected =
      select_partition(samples, model.config.split, partition);
  const auto values =
      model.predict_values(selected, Rng::derive_seed(model.config.seed, 1));

  std::vector<std::vector<std::string>> rows;
  rows.reserve(selected.size());
  for (size_t i = 0; i < selected.size(); ++i) {
    const auto& s = selected[i];
    auto label_or_empty = [&s](eval::GroupKey key) -> std::string {
      try {
        return eval::group_label(s, key);
      } catch (const std::invalid_argument&) {
        return "";
      }
    };
    rows.push_back({s.patient_id, csv::format_double(s.target_hba1c),
                    csv::format_double(values[i]),
                    csv::format_double(0.5 * (values[i] + s.target_hba1c)),
                    csv::format_double(values[i] - s.target_hba1c),
                    label_or_empty(eval::GroupKey::Gender),
                    label_or_empty(eval::GroupKey::Race),
                    label_or_empty(eval::GroupKey::BmiCategory),
                    label_or_empty(eval::GroupKey::AgeDecade)});
  }
  csv::write_csv(path,
                 {"patient_id", "target_hba1c", "prediction", "pair_mean",
                  "pair_diff", "gender", "race", "bmi_category", "age_decade"},
                 rows,
                 "syntha1c " + std::string(kToolkitVersion) +
                     " scatter export, partition=" + partition);
}

robustness::SmoothnessReport model_smoothness(
    const TrainedModel& model, const std::vector<cohort::Sample>& samples,
    const robustness::SmoothnessConfig& config) {
  robustness::PredictFn predict;
  switch (model.kind) {
    case ModelKind::Gbdt:
      predict = [&model](const std::vector<double>& x) {
        return model.gbdt->predict(x);
      };
      break;
    case ModelKind::Mlp:
      predict = [&model](const std::vector<double>& x) {
        return model.mlp->predict(x);
      };
      break;
    case ModelKind::Ols:
      predict = [&model](const std::vector<double>& x) {
        return model.ols->predict(x);
      };
      break;
    case ModelKind::ZeroRule:
      predict = [](const std::vector<double>&) { return 1.0; };
      break;
    default:
      throw std::invalid_argument(
          "model_smoothness: model '" + to_string(model.kind) +
          "' has no smooth prediction surface");
  }

  std::vector<std::vector<double>> points;
  points.reserve(samples.size());
  for (const auto& s : samples) points.push_back(model.encode_input(s));

  robustness::PerturbationSpace space;
  space.input_sigma = f::perturbation_sigmas(model.schema, model.stats,
                                             model.kind == ModelKind::Gbdt);
  space.sigma_y = model.stats.sigma_y;
  return robustness::global_smoothness(predict, points, space, config);
}

nlohmann::json smoothness_report_to_json(
    const robustness::SmoothnessReport& report, const RunConfig& config) {
  return {{"toolkit_version", kToolkitVersion},
          {"config", config.to_json()},
          {"smoothness_config",
           {{"q_samples", report.config.q_samples},
            {"radius", report.config.radius},
            {"seed", report.config.seed},
            {"eval_cap", report.config.eval_cap}}},
          {"cardinality_tag", report.cardinality_tag},
          {"global_m", report.global_m},
          {"global_m_x100", report.global_m * 100.0},
          {"mu_values", report.mu_values}};
}

std::map<std::string, robustness::KlColumn> kl_columns(
    const std::vector<cohort::Sample>& samples,
    const features::FeatureSchema& schema,
    const std::vector<std::string>& feature_ids) {
  std::map<std::string, robustness::KlColumn> columns;
  for (const auto& id : feature_ids) {
    robustness::KlColumn column;
    if (id == f::kHbA1c) {
      for (const auto& s : samples) column.values.push_back(s.target_hba1c);
    } else if (schema.has(id)) {
      const size_t j = schema.index_of(id);
      const auto& d = schema.descriptors[j];
      if (d.dtype == f::FeatureDtype::Categorical) {
        column.categorical = true;
        column.vocab_size = d.vocabulary.size();
      }
      for (const auto& s : samples) column.values.push_back(s.features[j]);
    } else if (id == f::kBmi && schema.has(f::kHeightM) &&
               schema.has(f::kWeightKg)) {
      const size_t h = schema.index_of(f::kHeightM);
      const size_t w = schema.index_of(f::kWeightKg);
      for (const auto& s : samples) {
        column.values.push_back(f::bmi(s.features[w], s.features[h]));
      }
    } else if (id == f::kShad && schema.has(f::kLiverHu) &&
               schema.has(f::kSpleenHu)) {
      const size_t liver = schema.index_of(f::kLiverHu);
      const size_t spleen = schema.index_of(f::kSpleenHu);
      for (const auto& s : samples) {
        column.values.push_back(f::shad(s.features[spleen], s.features[liver]));
      }
    } else {
      throw std::invalid_argument("kl_columns: feature '" + id +
                                  "' not derivable from schema '" +
                                  f::to_string(schema.variant) + "'");
    }
    columns.emplace(id, std::move(column));
  }
  return columns;
}

nlohmann::json shift_report_to_json(const robustness::ShiftReport& report) {
  nlohmann::json per_feature = nlohmann::json::object();
  for (const auto& [id, kl] : report.per_feature) per_feature[id] = kl;
  return {{"toolkit_version", kToolkitVersion},
          {"binning",
           {{"bins", report.binning.bins},
            {"smoothing", report.binning.smoothing},
            {"joint", report.binning.joint}}},
          {"per_feature", std::move(per_feature)},
          {"total", report.total}};
}

}  // namespace syntha1c::pipeline
