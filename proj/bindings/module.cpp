#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "syntha1c/baselines.hpp"
#include "syntha1c/cohort.hpp"
#include "syntha1c/eval.hpp"
#include "syntha1c/features.hpp"
#include "syntha1c/net.hpp"
#include "syntha1c/pipeline.hpp"
#include "syntha1c/robustness.hpp"
#include "syntha1c/synthgen.hpp"
#include "syntha1c/trees.hpp"
#include "syntha1c/version.hpp"

namespace py = pybind11;
using namespace syntha1c;
namespace f = syntha1c::features;

namespace {

py::object json_to_py(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null: return py::none();
    case nlohmann::json::value_t::boolean: return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
      return py::int_(j.get<int64_t>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<uint64_t>());
    case nlohmann::json::value_t::number_float:
      return py::float_(j.get<double>());
    case nlohmann::json::value_t::string:
      return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(json_to_py(item));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (const auto& [key, value] : j.items()) {
        out[py::str(key)] = json_to_py(value);
      }
      return out;
    }
    default: return py::none();
  }
}

nlohmann::json py_to_json(py::handle obj) {
  if (obj.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
  if (py::isinstance<py::int_>(obj)) return obj.cast<int64_t>();
  if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
  if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
  if (py::isinstance<py::dict>(obj)) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& item : obj.cast<py::dict>()) {
      out[item.first.cast<std::string>()] = py_to_json(item.second);
    }
    return out;
  }
  if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& item : obj.cast<py::sequence>()) {
      out.push_back(py_to_json(item));
    }
    return out;
  }
  throw py::type_error("unsupported value in config dict");
}

f::LabelTask parse_task(const std::string& name) {
  return f::label_task_from_string(name);
}

py::dict classification_dict(const eval::ClassificationReport& r) {
  py::dict out;
  out["tp"] = r.counts.tp;
  out["fp"] = r.counts.fp;
  out["tn"] = r.counts.tn;
  out["fn"] = r.counts.fn;
  out["recall"] = r.recall ? py::object(py::float_(*r.recall)) : py::none();
  out["precision"] =
      r.precision ? py::object(py::float_(*r.precision)) : py::none();
  out["specificity"] =
      r.specificity ? py::object(py::float_(*r.specificity)) : py::none();
  out["accuracy"] =
      r.accuracy ? py::object(py::float_(*r.accuracy)) : py::none();
  return out;
}

robustness::KlColumn column_from_py(py::handle spec) {
  robustness::KlColumn column;
  if (py::isinstance<py::dict>(spec)) {
    const auto d = spec.cast<py::dict>();
    column.values = d["values"].cast<std::vector<double>>();
    if (d.contains("categorical")) column.categorical = d["categorical"].cast<bool>();
    if (d.contains("vocab_size")) column.vocab_size = d["vocab_size"].cast<size_t>();
  } else {
    column.values = spec.cast<std::vector<double>>();
  }
  return column;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tabular T2DM risk modeling toolkit: feature assembly, "
            "GBDT/MLP/OLS models, rule baselines, smoothness and shift "
            "analysis.";
  m.attr("__version__") = kToolkitVersion;

  // ---- features --------------------------------------------------------
  m.def("bmi", &f::bmi, py::arg("weight_kg"), py::arg("height_m"));
  m.def("shad", &f::shad, py::arg("spleen_hu"), py::arg("liver_hu"));
  m.def(
      "derive_label",
      [](double hba1c, const std::string& task) {
        return f::derive_label(hba1c, parse_task(task));
      },
      py::arg("hba1c"), py::arg("task") = "dm");
  m.def(
      "syntha1c_classify",
      [](double prediction, const std::string& task) {
        return eval::syntha1c_classify(prediction, parse_task(task));
      },
      py::arg("prediction"), py::arg("task") = "dm");
  m.def("schema_features", [](const std::string& variant) {
    const auto schema = f::make_schema(f::schema_variant_from_string(variant));
    std::vector<std::string> ids;
    for (const auto& d : schema.descriptors) ids.push_back(d.id);
    return ids;
  });

  // ---- baselines -------------------------------------------------------
  m.def("zero_rule_predict", &baselines::zero_rule_predict, py::arg("n"));
  m.def("weighted_random_predict", &baselines::weighted_random_predict,
        py::arg("positive_rate"), py::arg("n"), py::arg("seed") = 0);
  m.def(
      "multi_rule_score",
      [](double age, const std::string& gender, double sbp, double dbp,
         double bmi) {
        baselines::MultiRuleAnswer answer;
        answer.age_years = age;
        answer.sbp = sbp;
        answer.dbp = dbp;
        answer.bmi = bmi;
        if (gender == "man") answer.gender = baselines::Gender::Man;
        else if (gender == "woman") answer.gender = baselines::Gender::Woman;
        else throw py::value_error("gender must be 'man' or 'woman'");
        return baselines::multi_rule_score(answer);
      },
      py::arg("age"), py::arg("gender"), py::arg("sbp"), py::arg("dbp"),
      py::arg("bmi"));
  m.def(
      "multi_rule_classify",
      [](int points, const std::string& task) {
        return baselines::multi_rule_classify(points, parse_task(task));
      },
      py::arg("points"), py::arg("task") = "dm");

  py::class_<baselines::OlsModel>(m, "Ols")
      .def_static("fit", &baselines::ols_fit, py::arg("X"), py::arg("y"))
      .def("predict", &baselines::OlsModel::predict, py::arg("x"))
      .def_readonly("coefficients", &baselines::OlsModel::coefficients)
      .def_readonly("intercept", &baselines::OlsModel::intercept);

  // ---- trees -----------------------------------------------------------
  py::class_<trees::GbdtModel>(m, "Gbdt")
      .def_static(
          "fit",
          [](const std::vector<std::vector<double>>& X,
             const std::vector<double>& y, const std::string& objective,
             int n_trees, int max_depth, double learning_rate, double l1_alpha,
             double l2_lambda) {
            trees::GbdtConfig config;
            config.objective = objective_from_string(objective);
            config.n_trees = n_trees;
            config.max_depth = max_depth;
            config.learning_rate = learning_rate;
            config.l1_alpha = l1_alpha;
            config.l2_lambda = l2_lambda;
            return trees::fit_gbdt(X, y, config);
          },
          py::arg("X"), py::arg("y"), py::arg("objective") = "squared",
          py::arg("n_trees") = 32, py::arg("max_depth") = 16,
          py::arg("learning_rate") = 0.1, py::arg("l1_alpha") = 1.0,
          py::arg("l2_lambda") = 2.0)
      .def("predict",
           [](const trees::GbdtModel& model, const std::vector<double>& x) {
             return model.predict(x);
           },
           py::arg("x"))
      .def("predict_many",
           [](const trees::GbdtModel& model,
              const std::vector<std::vector<double>>& X) {
             std::vector<double> out;
             out.reserve(X.size());
             for (const auto& x : X) out.push_back(model.predict(x));
             return out;
           },
           py::arg("X"))
      .def("to_json",
           [](const trees::GbdtModel& model) {
             return trees::gbdt_to_json(model).dump();
           })
      .def_static("from_json", [](const std::string& text) {
        return trees::gbdt_from_json(nlohmann::json::parse(text));
      })
      .def_property_readonly(
          "n_trees",
          [](const trees::GbdtModel& model) { return model.trees.size(); });

  // ---- net ---------------------------------------------------------------
  py::class_<net::MlpModel>(m, "Mlp")
      .def_static(
          "train",
          [](const std::vector<std::vector<double>>& X,
             const std::vector<double>& y, const std::string& objective,
             int epochs, double learning_rate, int lr_step_epochs,
             double lr_decay, int batch_size, double dropout, uint64_t seed,
             const std::vector<int>& hidden_sizes) {
            net::TrainConfig config;
            config.epochs = epochs;
            config.learning_rate = learning_rate;
            config.lr_step_epochs = lr_step_epochs;
            config.lr_decay = lr_decay;
            config.batch_size = batch_size;
            config.dropout = dropout;
            config.seed = seed;
            config.hidden_sizes = hidden_sizes;
            return net::train_mlp(X, y, config,
                                  objective_from_string(objective));
          },
          py::arg("X"), py::arg("y"), py::arg("objective") = "squared",
          py::arg("epochs") = 150, py::arg("learning_rate") = 0.01,
          py::arg("lr_step_epochs") = 25, py::arg("lr_decay") = 0.5,
          py::arg("batch_size") = 128, py::arg("dropout") = 0.0,
          py::arg("seed") = 0,
          py::arg("hidden_sizes") = std::vector<int>{64, 32})
      .def("predict", &net::MlpModel::predict, py::arg("x"))
      .def("gradient_check",
           [](const net::MlpModel& model, const std::vector<double>& x,
              double target, double h) {
             return net::gradient_check(model, x, target, h);
           },
           py::arg("x"), py::arg("target"), py::arg("h") = 1e-5)
      .def("to_json", [](const net::MlpModel& model) {
        return net::mlp_to_json(model).dump();
      })
      .def_static("from_json", [](const std::string& text) {
        return net::mlp_from_json(nlohmann::json::parse(text));
      });

  // ---- eval --------------------------------------------------------------
  m.def(
      "classification_report",
      [](const std::vector<int>& predicted, const std::vector<int>& truth) {
        return classification_dict(eval::classification_report(predicted, truth));
      },
      py::arg("predicted"), py::arg("truth"));
  m.def(
      "regression_report",
      [](const std::vector<double>& predictions,
         const std::vector<double>& targets) {
        const auto r = eval::regression_report(predictions, targets);
        py::dict out;
        out["rmse"] = r.rmse;
        out["pcc"] = r.pcc ? py::object(py::float_(*r.pcc)) : py::none();
        out["n"] = r.n;
        return out;
      },
      py::arg("predictions"), py::arg("targets"));
  m.def(
      "bland_altman",
      [](const std::vector<double>& predictions,
         const std::vector<double>& targets) {
        const auto r = eval::bland_altman(predictions, targets);
        py::dict out;
        out["bias"] = r.bias;
        out["sd_diff"] = r.sd_diff;
        out["lower_limit"] = r.lower_limit;
        out["upper_limit"] = r.upper_limit;
        out["pairs"] = r.pairs;
        return out;
      },
      py::arg("predictions"), py::arg("targets"));
  m.def("spearman", &eval::spearman_rank_correlation, py::arg("a"),
        py::arg("b"));

  // ---- robustness ----------------------------------------------------------
  m.def(
      "local_smoothness",
      [](const std::function<double(const std::vector<double>&)>& predict,
         const std::vector<double>& point,
         const std::vector<double>& input_sigma, double sigma_y, int q_samples,
         double radius, uint64_t seed) {
        robustness::PerturbationSpace space;
        space.input_sigma = input_sigma;
        space.sigma_y = sigma_y;
        robustness::SmoothnessConfig config;
        config.q_samples = q_samples;
        config.radius = radius;
        config.seed = seed;
        return robustness::local_smoothness(predict, point, space, config);
      },
      py::arg("predict"), py::arg("point"), py::arg("input_sigma"),
      py::arg("sigma_y") = 1.0, py::arg("q_samples") = 128,
      py::arg("radius") = 0.1, py::arg("seed") = 0);
  m.def(
      "global_smoothness",
      [](const std::function<double(const std::vector<double>&)>& predict,
         const std::vector<std::vector<double>>& points,
         const std::vector<double>& input_sigma, double sigma_y, int q_samples,
         double radius, uint64_t seed, size_t eval_cap) {
        robustness::PerturbationSpace space;
        space.input_sigma = input_sigma;
        space.sigma_y = sigma_y;
        robustness::SmoothnessConfig config;
        config.q_samples = q_samples;
        config.radius = radius;
        config.seed = seed;
        config.eval_cap = eval_cap;
        const auto report =
            robustness::global_smoothness(predict, points, space, config);
        py::dict out;
        out["global_m"] = report.global_m;
        out["global_m_x100"] = report.global_m * 100.0;
        out["mu_values"] = report.mu_values;
        out["cardinality_tag"] = report.cardinality_tag;
        return out;
      },
      py::arg("predict"), py::arg("points"), py::arg("input_sigma"),
      py::arg("sigma_y") = 1.0, py::arg("q_samples") = 128,
      py::arg("radius") = 0.1, py::arg("seed") = 0, py::arg("eval_cap") = 0);
  m.def(
      "empirical_kl",
      [](py::dict p_columns, py::dict q_columns,
         const std::vector<std::string>& features, int bins, double smoothing,
         bool joint) {
        std::map<std::string, robustness::KlColumn> p_cols, q_cols;
        for (const auto& item : p_columns) {
          p_cols[item.first.cast<std::string>()] = column_from_py(item.second);
        }
        for (const auto& item : q_columns) {
          q_cols[item.first.cast<std::string>()] = column_from_py(item.second);
        }
        robustness::BinningSpec binning;
        binning.bins = bins;
        binning.smoothing = smoothing;
        binning.joint = joint;
        const auto report =
            robustness::empirical_kl(p_cols, q_cols, features, binning);
        py::dict out;
        out["total"] = report.total;
        py::dict per_feature;
        for (const auto& [id, kl] : report.per_feature) {
          per_feature[py::str(id)] = kl;
        }
        out["per_feature"] = per_feature;
        return out;
      },
      py::arg("p_columns"), py::arg("q_columns"), py::arg("features"),
      py::arg("bins") = 10, py::arg("smoothing") = 0.5,
      py::arg("joint") = false);

  // ---- pipeline ------------------------------------------------------------
  m.def(
      "generate",
      [](const std::string& out_dir, py::object spec) {
        const auto spec_json =
            spec.is_none() ? nlohmann::json::object() : py_to_json(spec);
        return json_to_py(synthgen::generate(
            synthgen::GeneratorSpec::from_json(spec_json), out_dir));
      },
      py::arg("out_dir"), py::arg("spec") = py::none());
  m.def(
      "assemble",
      [](const std::string& measurements, const std::string& statics,
         const std::string& schema_name, const std::string& out_csv) {
        const auto schema =
            f::make_schema(f::schema_variant_from_string(schema_name));
        const auto cohort_data = cohort::load_cohort(measurements, statics);
        const auto samples = cohort::assemble_samples(cohort_data, schema);
        pipeline::write_samples_csv(out_csv, samples, schema,
                                    "syntha1c python assemble");
        return samples.size();
      },
      py::arg("measurements"), py::arg("statics"), py::arg("schema") = "r",
      py::arg("out_csv") = "samples.csv");
  m.def(
      "load_samples",
      [](const std::string& path, const std::string& schema_name) {
        const auto schema =
            f::make_schema(f::schema_variant_from_string(schema_name));
        const auto samples = pipeline::read_samples_csv(path, schema);
        py::dict out;
        std::vector<std::string> patient_ids;
        std::vector<double> targets;
        std::vector<int64_t> dateranges;
        std::vector<std::vector<double>> rows;
        for (const auto& s : samples) {
          patient_ids.push_back(s.patient_id);
          targets.push_back(s.target_hba1c);
          dateranges.push_back(s.daterange);
          rows.push_back(s.features);
        }
        out["patient_id"] = patient_ids;
        out["target_hba1c"] = targets;
        out["daterange"] = dateranges;
        out["features"] = rows;
        std::vector<std::string> ids;
        for (const auto& d : schema.descriptors) ids.push_back(d.id);
        out["feature_ids"] = ids;
        return out;
      },
      py::arg("path"), py::arg("schema") = "r");
  m.def(
      "train",
      [](py::dict config, const std::string& samples_csv,
         const std::string& model_out) {
        const auto run_config = pipeline::RunConfig::from_json(py_to_json(config));
        const auto schema = f::make_schema(run_config.schema);
        const auto samples = pipeline::read_samples_csv(samples_csv, schema);
        auto result = pipeline::train_model(run_config, samples);
        pipeline::save_model(result.model, model_out);
        return json_to_py(result.log);
      },
      py::arg("config"), py::arg("samples_csv"), py::arg("model_out"));
  m.def(
      "evaluate",
      [](const std::string& model_path, const std::string& samples_csv,
         const std::string& partition, bool stratified) {
        const auto model = pipeline::load_model(model_path);
        const auto samples =
            pipeline::read_samples_csv(samples_csv, model.schema);
        return json_to_py(
            pipeline::evaluate_model(model, samples, partition, stratified));
      },
      py::arg("model_path"), py::arg("samples_csv"),
      py::arg("partition") = "holdout", py::arg("stratified") = false);
  m.def(
      "model_smoothness",
      [](const std::string& model_path, const std::string& samples_csv,
         const std::string& partition, int q_samples, double radius,
         uint64_t seed, size_t eval_cap) {
        const auto model = pipeline::load_model(model_path);
        const auto samples =
            pipeline::read_samples_csv(samples_csv, model.schema);
        const auto selected =
            pipeline::select_partition(samples, model.config.split, partition);
        robustness::SmoothnessConfig config;
        config.q_samples = q_samples;
        config.radius = radius;
        config.seed = seed;
        config.eval_cap = eval_cap;
        const auto report = pipeline::model_smoothness(model, selected, config);
        return json_to_py(
            pipeline::smoothness_report_to_json(report, model.config));
      },
      py::arg("model_path"), py::arg("samples_csv"),
      py::arg("partition") = "all", py::arg("q_samples") = 128,
      py::arg("radius") = 0.1, py::arg("seed") = 0, py::arg("eval_cap") = 0);
  m.def(
      "shift",
      [](const std::string& samples_p, const std::string& schema_p,
         const std::string& samples_q, const std::string& schema_q,
         const std::vector<std::string>& features, int bins, double smoothing,
         bool joint) {
        const auto sp = f::make_schema(f::schema_variant_from_string(schema_p));
        const auto sq = f::make_schema(f::schema_variant_from_string(schema_q));
        const auto p = pipeline::read_samples_csv(samples_p, sp);
        const auto q = pipeline::read_samples_csv(samples_q, sq);
        robustness::BinningSpec binning;
        binning.bins = bins;
        binning.smoothing = smoothing;
        binning.joint = joint;
        const auto report = robustness::empirical_kl(
            pipeline::kl_columns(p, sp, features),
            pipeline::kl_columns(q, sq, features), features, binning);
        return json_to_py(pipeline::shift_report_to_json(report));
      },
      py::arg("samples_p"), py::arg("schema_p"), py::arg("samples_q"),
      py::arg("schema_q"),
      py::arg("features") =
          std::vector<std::string>{"race", "gender", "age", "bmi", "hba1c"},
      py::arg("bins") = 10, py::arg("smoothing") = 0.5,
      py::arg("joint") = false);
}
