#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "syntha1c/cohort.hpp"
#include "syntha1c/features.hpp"

namespace syntha1c::eval {

struct ConfusionCounts {
  size_t tp = 0;
  size_t fp = 0;
  size_t tn = 0;
  size_t fn = 0;

  size_t total() const { return tp + fp + tn + fn; }
};

// Metrics in percent, computed at full precision; a ratio with a zero
// denominator is reported as absent rather than 0.
struct ClassificationReport {
  ConfusionCounts counts;
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> specificity;
  std::optional<double> accuracy;
};

ClassificationReport classification_report(const std::vector<int>& predicted,
                                           const std::vector<int>& truth);

struct RegressionReport {
  double rmse = 0.0;
  std::optional<double> pcc;  // absent when either series is constant
  size_t n = 0;
};

RegressionReport regression_report(const std::vector<double>& predictions,
                                   const std::vector<double>& targets);

// The lab cutoffs applied to a model-predicted HbA1c value.
bool syntha1c_classify(double prediction, features::LabelTask task);

struct BlandAltmanReport {
  std::vector<std::pair<double, double>> pairs;  // (mean_i, diff_i)
  double bias = 0.0;
  double sd_diff = 0.0;  // population SD of the differences
  double lower_limit = 0.0;
  double upper_limit = 0.0;
};

BlandAltmanReport bland_altman(const std::vector<double>& predictions,
                               const std::vector<double>& targets);

enum class GroupKey { Gender, Race, BmiCategory, AgeDecade };

GroupKey group_key_from_string(const std::string& name);
std::string to_string(GroupKey key);

// Group label for one sample, e.g. "female", "black", "obese", "50-59".
// Throws when the key is not derivable from the sample.
std::string group_label(const cohort::Sample& sample, GroupKey key);

// Deterministically ordered (by label) partition of sample indices.
std::map<std::string, std::vector<size_t>> group_indices(
    const std::vector<cohort::Sample>& samples, GroupKey key);

struct StratifiedRegressionReport {
  std::map<std::string, RegressionReport> groups;
};

struct StratifiedClassificationReport {
  std::map<std::string, ClassificationReport> groups;
};

StratifiedRegressionReport stratified_regression_report(
    const std::vector<cohort::Sample>& samples,
    const std::vector<double>& predictions, GroupKey key);

StratifiedClassificationReport stratified_classification_report(
    const std::vector<cohort::Sample>& samples,
    const std::vector<int>& predicted, const std::vector<int>& truth,
    GroupKey key);

// Spearman rank correlation; ties receive their average rank.
double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b);

}  // namespace syntha1c::eval
