#include "syntha1c/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace syntha1c::eval {

namespace {

std::optional<double> percent_ratio(size_t numerator, size_t denominator) {
  if (denominator == 0) return std::nullopt;
  return 100.0 * static_cast<double>(numerator) /
         static_cast<double>(denominator);
}

}  // namespace

ClassificationReport classification_report(const std::vector<int>& predicted,
                                           const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument(
        "classification_report: prediction/truth length mismatch");
  }
  ClassificationReport report;
  auto& c = report.counts;
  for (size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++c.tp;
    else if (p && !t) ++c.fp;
    else if (!p && t) ++c.fn;
    else ++c.tn;
  }
  report.recall = percent_ratio(c.tp, c.tp + c.fn);
  report.precision = percent_ratio(c.tp, c.tp + c.fp);
  report.specificity = percent_ratio(c.tn, c.tn + c.fp);
  report.accuracy = percent_ratio(c.tp + c.tn, c.total());
  return report;
}

RegressionReport regression_report(const std::vector<double>& predictions,
                                   const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("regression_report: length mismatch");
  }
  if (predictions.size() < 2) {
    throw std::invalid_argument("regression_report: need at least 2 pairs");
  }
  const size_t n = predictions.size();
  RegressionReport report;
  report.n = n;

  double se = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = predictions[i] - targets[i];
    se += d * d;
  }
  report.rmse = std::sqrt(se / static_cast<double>(n));

  const double mean_p =
      std::accumulate(predictions.begin(), predictions.end(), 0.0) /
      static_cast<double>(n);
  const double mean_t =
      std::accumulate(targets.begin(), targets.end(), 0.0) /
      static_cast<double>(n);
  double cov = 0.0, var_p = 0.0, var_t = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dp = predictions[i] - mean_p;
    const double dt = targets[i] - mean_t;
    cov += dp * dt;
    var_p += dp * dp;
    var_t += dt * dt;
  }
  if (var_p > 0.0 && var_t > 0.0) {
    report.pcc = cov / std::sqrt(var_p * var_t);
  }
  return report;
}

bool syntha1c_classify(double prediction, features::LabelTask task) {
  if (!std::isfinite(prediction)) {
    throw std::invalid_argument("syntha1c_classify: non-finite prediction");
  }
  return features::cutoff_positive(prediction, task);
}

BlandAltmanReport bland_altman(const std::vector<double>& predictions,
                               const std::vector<double>& targets) {
  if (predictions.size() != targets.size() || predictions.size() < 2) {
    throw std::invalid_argument("bland_altman: need >= 2 matched pairs");
  }
  BlandAltmanReport report;
  const size_t n = predictions.size();
  report.pairs.reserve(n);
  double sum_diff = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double mean = 0.5 * (predictions[i] + targets[i]);
    const double diff = predictions[i] - targets[i];
    report.pairs.emplace_back(mean, diff);
    sum_diff += diff;
  }
  report.bias = sum_diff / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& [mean, diff] : report.pairs) {
    ss += (diff - report.bias) * (diff - report.bias);
  }
  report.sd_diff = std::sqrt(ss / static_cast<double>(n));
  report.lower_limit = report.bias - 1.96 * report.sd_diff;
  report.upper_limit = report.bias + 1.96 * report.sd_diff;
  return report;
}

GroupKey group_key_from_string(const std::string& name) {
  if (name == "gender") return GroupKey::Gender;
  if (name == "race") return GroupKey::Race;
  if (name == "bmi_category") return GroupKey::BmiCategory;
  if (name == "age_decade") return GroupKey::AgeDecade;
  throw std::invalid_argument("unknown group key '" + name + "'");
}

std::string to_string(GroupKey key) {
  switch (key) {
    case GroupKey::Gender: return "gender";
    case GroupKey::Race: return "race";
    case GroupKey::BmiCategory: return "bmi_category";
    case GroupKey::AgeDecade: return "age_decade";
  }
  throw std::logic_error("unreachable group key");
}

std::string group_label(const cohort::Sample& sample, GroupKey key) {
  switch (key) {
    case GroupKey::Gender:
      if (sample.gender_code < 0) {
        throw std::invalid_argument("group_label: sample carries no gender");
      }
      return features::gender_vocabulary()[static_cast<size_t>(
          sample.gender_code)];
    case GroupKey::Race:
      if (sample.race_code < 0) {
        throw std::invalid_argument("group_label: sample carries no race");
      }
      return features::race_vocabulary()[static_cast<size_t>(sample.race_code)];
    case GroupKey::BmiCategory: {
      if (!std::isfinite(sample.bmi_value)) {
        throw std::invalid_argument("group_label: sample carries no BMI");
      }
      const double bmi = sample.bmi_value;
      if (bmi >= 40.0) return "extremely_obese";
      if (bmi >= 30.0) return "obese";
      if (bmi >= 25.0) return "overweight";
      return "not_overweight";
    }
    case GroupKey::AgeDecade: {
      if (!std::isfinite(sample.age)) {
        throw std::invalid_argument("group_label: sample carries no age");
      }
      const auto decade = static_cast<long>(std::floor(sample.age / 10.0)) * 10;
      return std::to_string(decade) + "-" + std::to_string(decade + 9);
    }
  }
  throw std::logic_error("unreachable group key");
}

std::map<std::string, std::vector<size_t>> group_indices(
    const std::vector<cohort::Sample>& samples, GroupKey key) {
  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < samples.size(); ++i) {
    groups[group_label(samples[i], key)].push_back(i);
  }
  return groups;
}

StratifiedRegressionReport stratified_regression_report(
    const std::vector<cohort::Sample>& samples,
    const std::vector<double>& predictions, GroupKey key) {
  if (samples.size() != predictions.size()) {
    throw std::invalid_argument(
        "stratified_regression_report: length mismatch");
  }
  StratifiedRegressionReport out;
  for (const auto& [label, indices] : group_indices(samples, key)) {
    if (indices.size() < 2) {
      // A singleton group still gets a row; RMSE is well-defined, PCC not.
      RegressionReport r;
      r.n = indices.size();
      r.rmse = indices.empty()
                   ? 0.0
                   : std::fabs(predictions[indices[0]] -
                               samples[indices[0]].target_hba1c);
      out.groups.emplace(label, r);
      continue;
    }
    std::vector<double> p, t;
    p.reserve(indices.size());
    t.reserve(indices.size());
    for (size_t i : indices) {
      p.push_back(predictions[i]);
      t.push_back(samples[i].target_hba1c);
    }
    out.groups.emplace(label, regression_report(p, t));
  }
  return out;
}

StratifiedClassificationReport stratified_classification_report(
    const std::vector<cohort::Sample>& samples,
    const std::vector<int>& predicted, const std::vector<int>& truth,
    GroupKey key) {
  if (samples.size() != predicted.size() || samples.size() != truth.size()) {
    throw std::invalid_argument(
        "stratified_classification_report: length mismatch");
  }
  StratifiedClassificationReport out;
  for (const auto& [label, indices] : group_indices(samples, key)) {
    std::vector<int> p, t;
    p.reserve(indices.size());
    t.reserve(indices.size());
    for (size_t i : indices) {
      p.push_back(predicted[i]);
      t.push_back(truth[i]);
    }
    out.groups.emplace(label, classification_report(p, t));
  }
  return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("spearman: need >= 2 matched values");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const auto report = regression_report(ra, rb);
  if (!report.pcc.has_value()) {
    throw std::invalid_argument("spearman: constant rank series");
  }
  return *report.pcc;
}

}  // namespace syntha1c::eval
