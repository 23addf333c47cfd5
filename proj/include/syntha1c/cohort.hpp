#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "syntha1c/features.hpp"

namespace syntha1c::cohort {

struct MeasurementEntry {
  double value;
  int64_t date;  // days since 1970-01-01
};

// Longitudinal stream of one feature for one patient, sorted ascending by
// date with unique dates.
struct MeasurementTimeline {
  std::string patient_id;
  std::string feature_id;
  std::vector<MeasurementEntry> entries;
};

struct StaticAttributes {
  std::string patient_id;
  int race_code;
  int gender_code;
};

struct Cohort {
  // patient -> feature -> timeline; std::map keeps iteration canonical.
  std::map<std::string, std::map<std::string, MeasurementTimeline>> timelines;
  std::map<std::string, StaticAttributes> statics;
};

// Reads the long-format measurements CSV (patient_id,feature,value,date)
// and the statics CSV (patient_id,race,gender). Malformed rows, duplicate
// (patient, feature, date) triples and unknown category labels are hard
// errors reported with the source line number.
Cohort load_cohort(const std::filesystem::path& measurements_csv,
                   const std::filesystem::path& statics_csv);

struct Sample {
  std::string patient_id;
  double target_hba1c;
  int64_t target_date;
  // Schema-ordered values; categorical slots hold the vocabulary code.
  std::vector<double> features;
  // Max pairwise day gap among the selected measurement dates (statics and
  // the HbA1c date itself excluded).
  int64_t daterange;
  // Stratification keys, populated when derivable from the raw record.
  double age = features::RawPhenotypes::nan_value();
  double bmi_value = features::RawPhenotypes::nan_value();
  int race_code = -1;
  int gender_code = -1;
};

// Nearest-in-time index into a sorted timeline for a target date; an
// equidistant pair resolves to the earlier-dated entry.
size_t nearest_entry_index(const MeasurementTimeline& timeline,
                           int64_t target_date);

// One sample per HbA1c measurement of every patient that has at least one
// measurement for each stream the schema requires (and statics when the
// schema carries categorical features); patients missing any requirement
// are excluded entirely. Output is ordered by (patient_id, target_date).
std::vector<Sample> assemble_samples(const Cohort& cohort,
                                     const features::FeatureSchema& schema);

struct HistogramBin {
  int64_t lo;  // inclusive
  int64_t hi;  // exclusive
  size_t count;
};

struct DaterangeStats {
  int64_t median_days;  // lower median for even counts
  double fraction_within_365;
  std::vector<HistogramBin> histogram;
};

DaterangeStats daterange_stats(const std::vector<Sample>& samples,
                               int64_t bin_width_days = 30);

struct SplitSpec {
  std::optional<size_t> holdout_count;
  double holdout_fraction = 0.0;  // used when holdout_count is absent
  double validation_fraction = 0.0;
  int k_folds = 0;  // 0 = holdout mode; >= 2 selects k-fold splitting
  uint64_t seed = 0;
  bool patient_level = false;
};

struct SplitResult {
  std::vector<size_t> train;
  std::vector<size_t> validation;
  std::vector<size_t> holdout;
};

// Deterministic given (samples, spec); partitions are disjoint and their
// union is the full index set. Sample-level by default; the patient-level
// mode assigns whole patients to partitions until the requested sizes are
// reached (sizes then overshoot by at most one patient's samples).
SplitResult split_samples(const std::vector<Sample>& samples,
                          const SplitSpec& spec);

// The k-fold arm of the splitting contract: k disjoint folds covering all
// indices, sizes differing by at most one.
std::vector<std::vector<size_t>> kfold_splits(size_t n_samples, int k_folds,
                                              uint64_t seed);
std::vector<std::vector<size_t>> kfold_splits(
    const std::vector<Sample>& samples, const SplitSpec& spec);

}  // namespace syntha1c::cohort
