#include "syntha1c/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "syntha1c/csv.hpp"
#include "syntha1c/rng.hpp"

namespace syntha1c::cohort {

namespace {

int code_for(const std::string& label, const std::vector<std::string>& vocab,
             const std::string& what, size_t line) {
  for (size_t i = 0; i < vocab.size(); ++i) {
    if (vocab[i] == label) return static_cast<int>(i);
  }
  throw std::runtime_error("load_cohort: line " + std::to_string(line) +
                           ": unknown " + what + " label '" + label + "'");
}

}  // namespace

Cohort load_cohort(const std::filesystem::path& measurements_csv,
                   const std::filesystem::path& statics_csv) {
  Cohort cohort;

  const auto measurements = csv::read_csv(measurements_csv);
  const size_t pid_col = measurements.column_index("patient_id");
  const size_t feat_col = measurements.column_index("feature");
  const size_t value_col = measurements.column_index("value");
  const size_t date_col = measurements.column_index("date");

  for (size_t r = 0; r < measurements.rows.size(); ++r) {
    const auto& row = measurements.rows[r];
    const size_t line = measurements.line_numbers[r];
    const std::string& pid = row[pid_col];
    const std::string& feature = row[feat_col];
    if (pid.empty() || feature.empty()) {
      throw std::runtime_error("load_cohort: line " + std::to_string(line) +
                               ": empty patient_id or feature");
    }
    const double value = csv::parse_double(
        row[value_col], "load_cohort: line " + std::to_string(line));
    int64_t date = 0;
    try {
      date = csv::parse_date_days(row[date_col]);
    } catch (const std::exception& e) {
      throw std::runtime_error("load_cohort: line " + std::to_string(line) +
                               ": " + e.what());
    }
    auto& timeline = cohort.timelines[pid][feature];
    if (timeline.entries.empty()) {
      timeline.patient_id = pid;
      timeline.feature_id = feature;
    }
    timeline.entries.push_back({value, date});
  }

  for (auto& [pid, streams] : cohort.timelines) {
    for (auto& [feature, timeline] : streams) {
      std::sort(timeline.entries.begin(), timeline.entries.end(),
                [](const MeasurementEntry& a, const MeasurementEntry& b) {
                  return a.date < b.date;
                });
      for (size_t i = 1; i < timeline.entries.size(); ++i) {
        if (timeline.entries[i].date == timeline.entries[i - 1].date) {
          throw std::runtime_error(
              "load_cohort: duplicate measurement for patient '" + pid +
              "', feature '" + feature + "' on " +
              csv::format_date_days(timeline.entries[i].date));
        }
      }
    }
  }

  const auto statics = csv::read_csv(statics_csv);
  const size_t s_pid_col = statics.column_index("patient_id");
  const size_t race_col = statics.column_index("race");
  const size_t gender_col = statics.column_index("gender");
  for (size_t r = 0; r < statics.rows.size(); ++r) {
    const auto& row = statics.rows[r];
    const size_t line = statics.line_numbers[r];
    const std::string& pid = row[s_pid_col];
    if (cohort.statics.count(pid)) {
      throw std::runtime_error("load_cohort: line " + std::to_string(line) +
                               ": duplicate statics record for patient '" +
                               pid + "'");
    }
    StaticAttributes attrs;
    attrs.patient_id = pid;
    attrs.race_code =
        code_for(row[race_col], features::race_vocabulary(), "race", line);
    attrs.gender_code = code_for(row[gender_col],
                                 features::gender_vocabulary(), "gender", line);
    cohort.statics.emplace(pid, attrs);
  }

  return cohort;
}

size_t nearest_entry_index(const MeasurementTimeline& timeline,
                           int64_t target_date) {
  const auto& entries = timeline.entries;
  if (entries.empty()) {
    throw std::invalid_argument("nearest_entry_index: empty timeline");
  }
  auto it = std::lower_bound(entries.begin(), entries.end(), target_date,
                             [](const MeasurementEntry& e, int64_t d) {
                               return e.date < d;
                             });
  if (it == entries.begin()) return 0;
  if (it == entries.end()) return entries.size() - 1;
  const auto idx = static_cast<size_t>(it - entries.begin());
  const int64_t after = entries[idx].date - target_date;
  const int64_t before = target_date - entries[idx - 1].date;
  // Ties go to the earlier-dated measurement.
  return before <= after ? idx - 1 : idx;
}

std::vector<Sample> assemble_samples(const Cohort& cohort,
                                     const features::FeatureSchema& schema) {
  const auto requirements = schema.measurement_requirements();
  const bool needs_statics = schema.needs_statics();

  // A required stream that no patient carries at all is a schema/data
  // mismatch, not per-patient missingness.
  for (const auto& req : requirements) {
    bool seen = false;
    for (const auto& [pid, streams] : cohort.timelines) {
      if (streams.count(req)) {
        seen = true;
        break;
      }
    }
    if (!seen) {
      throw std::invalid_argument(
          "assemble_samples: schema requires feature '" + req +
          "' which is absent from the cohort");
    }
  }

  std::vector<Sample> samples;
  for (const auto& [pid, streams] : cohort.timelines) {
    const auto hba1c_it = streams.find(features::kHbA1c);
    if (hba1c_it == streams.end() || hba1c_it->second.entries.empty()) {
      continue;  // no targets for this patient
    }

    bool missing = false;
    for (const auto& req : requirements) {
      const auto it = streams.find(req);
      if (it == streams.end() || it->second.entries.empty()) {
        missing = true;
        break;
      }
    }
    const auto statics_it = cohort.statics.find(pid);
    if (needs_statics && statics_it == cohort.statics.end()) {
      missing = true;
    }
    if (missing) continue;  // excluded entirely

    for (const auto& target : hba1c_it->second.entries) {
      if (!(target.value > 0.0 && target.value < 20.0)) {
        throw std::invalid_argument(
            "assemble_samples: HbA1c " + std::to_string(target.value) +
            " for patient '" + pid + "' outside (0, 20)");
      }
      features::RawPhenotypes raw;
      if (statics_it != cohort.statics.end()) {
        raw.race_code = statics_it->second.race_code;
        raw.gender_code = statics_it->second.gender_code;
      }
      int64_t min_date = 0, max_date = 0;
      bool first_date = true;
      for (const auto& req : requirements) {
        const auto& timeline = streams.at(req);
        const size_t idx = nearest_entry_index(timeline, target.date);
        const auto& entry = timeline.entries[idx];
        if (first_date) {
          min_date = max_date = entry.date;
          first_date = false;
        } else {
          min_date = std::min(min_date, entry.date);
          max_date = std::max(max_date, entry.date);
        }
        if (req == features::kAge) raw.age = entry.value;
        else if (req == features::kSbp) raw.sbp = entry.value;
        else if (req == features::kDbp) raw.dbp = entry.value;
        else if (req == features::kHeightM) raw.height_m = entry.value;
        else if (req == features::kWeightKg) raw.weight_kg = entry.value;
        else if (req == features::kSubqFat) raw.subq_fat = entry.value;
        else if (req == features::kViscFat) raw.visc_fat = entry.value;
        else if (req == features::kLiverHu) raw.liver_hu = entry.value;
        else if (req == features::kSpleenHu) raw.spleen_hu = entry.value;
        else {
          throw std::invalid_argument(
              "assemble_samples: unknown measurement stream '" + req + "'");
        }
      }

      Sample sample;
      sample.patient_id = pid;
      sample.target_hba1c = target.value;
      sample.target_date = target.date;
      sample.features = features::project_schema(raw, schema);
      sample.daterange = first_date ? 0 : max_date - min_date;
      sample.age = raw.age;
      if (std::isfinite(raw.height_m) && std::isfinite(raw.weight_kg)) {
        sample.bmi_value = features::bmi(raw.weight_kg, raw.height_m);
      }
      sample.race_code = raw.race_code;
      sample.gender_code = raw.gender_code;
      samples.push_back(std::move(sample));
    }
  }
  // Map iteration already yields (patient_id, target_date) order because
  // timelines are date-sorted, so this is a no-op in practice; kept as the
  // documented canonical ordering guarantee.
  std::stable_sort(samples.begin(), samples.end(),
                   [](const Sample& a, const Sample& b) {
                     if (a.patient_id != b.patient_id)
                       return a.patient_id < b.patient_id;
                     return a.target_date < b.target_date;
                   });
  return samples;
}

DaterangeStats daterange_stats(const std::vector<Sample>& samples,
                               int64_t bin_width_days) {
  if (samples.empty()) {
    throw std::invalid_argument("daterange_stats: empty sample list");
  }
  if (bin_width_days < 1) {
    throw std::invalid_argument("daterange_stats: bin width must be >= 1");
  }
  std::vector<int64_t> ranges;
  ranges.reserve(samples.size());
  size_t within = 0;
  for (const auto& s : samples) {
    ranges.push_back(s.daterange);
    if (s.daterange <= 365) ++within;
  }
  std::sort(ranges.begin(), ranges.end());

  DaterangeStats stats;
  stats.median_days = ranges[(ranges.size() - 1) / 2];
  stats.fraction_within_365 =
      static_cast<double>(within) / static_cast<double>(samples.size());

  const int64_t max_range = ranges.back();
  const auto n_bins = static_cast<size_t>(max_range / bin_width_days) + 1;
  stats.histogram.reserve(n_bins);
  for (size_t b = 0; b < n_bins; ++b) {
    stats.histogram.push_back(
        {static_cast<int64_t>(b) * bin_width_days,
         static_cast<int64_t>(b + 1) * bin_width_days, 0});
  }
  for (int64_t r : ranges) {
    stats.histogram[static_cast<size_t>(r / bin_width_days)].count++;
  }
  return stats;
}

namespace {

size_t resolve_count(const std::optional<size_t>& count, double fraction,
                     size_t n, const char* what) {
  size_t resolved;
  if (count.has_value()) {
    resolved = *count;
  } else {
    if (fraction < 0.0 || fraction >= 1.0) {
      throw std::invalid_argument(std::string("split_samples: ") + what +
                                  " fraction must be in [0,1)");
    }
    resolved = static_cast<size_t>(
        std::llround(fraction * static_cast<double>(n)));
  }
  return resolved;
}

}  // namespace

SplitResult split_samples(const std::vector<Sample>& samples,
                          const SplitSpec& spec) {
  if (spec.k_folds != 0) {
    throw std::invalid_argument(
        "split_samples: spec requests k-fold mode; use kfold_splits");
  }
  const size_t n = samples.size();
  const size_t holdout_n =
      resolve_count(spec.holdout_count, spec.holdout_fraction, n, "holdout");
  if (holdout_n > n) {
    throw std::invalid_argument("split_samples: holdout size " +
                                std::to_string(holdout_n) +
                                " exceeds dataset size " + std::to_string(n));
  }
  if (spec.validation_fraction < 0.0 || spec.validation_fraction >= 1.0) {
    throw std::invalid_argument(
        "split_samples: validation fraction must be in [0,1)");
  }
  const auto validation_n = static_cast<size_t>(std::floor(
      spec.validation_fraction * static_cast<double>(n)));
  if (holdout_n + validation_n > n) {
    throw std::invalid_argument(
        "split_samples: holdout + validation exceed dataset size");
  }

  Rng rng(spec.seed);
  SplitResult result;

  if (!spec.patient_level) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    result.holdout.assign(order.begin(), order.begin() + holdout_n);
    result.validation.assign(order.begin() + holdout_n,
                             order.begin() + holdout_n + validation_n);
    result.train.assign(order.begin() + holdout_n + validation_n, order.end());
  } else {
    std::vector<std::string> patients;
    std::map<std::string, std::vector<size_t>> by_patient;
    for (size_t i = 0; i < n; ++i) {
      auto& bucket = by_patient[samples[i].patient_id];
      if (bucket.empty()) patients.push_back(samples[i].patient_id);
      bucket.push_back(i);
    }
    rng.shuffle(patients);
    for (const auto& pid : patients) {
      const auto& bucket = by_patient[pid];
      auto* dest = &result.train;
      if (result.holdout.size() < holdout_n) {
        dest = &result.holdout;
      } else if (result.validation.size() < validation_n) {
        dest = &result.validation;
      }
      dest->insert(dest->end(), bucket.begin(), bucket.end());
    }
  }

  std::sort(result.train.begin(), result.train.end());
  std::sort(result.validation.begin(), result.validation.end());
  std::sort(result.holdout.begin(), result.holdout.end());
  return result;
}

std::vector<std::vector<size_t>> kfold_splits(
    const std::vector<Sample>& samples, const SplitSpec& spec) {
  return kfold_splits(samples.size(), spec.k_folds, spec.seed);
}

std::vector<std::vector<size_t>> kfold_splits(size_t n_samples, int k_folds,
                                              uint64_t seed) {
  if (k_folds < 2) {
    throw std::invalid_argument("kfold_splits: need k >= 2");
  }
  if (static_cast<size_t>(k_folds) > n_samples) {
    throw std::invalid_argument("kfold_splits: k exceeds sample count");
  }
  std::vector<size_t> order(n_samples);
  for (size_t i = 0; i < n_samples; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::vector<size_t>> folds(static_cast<size_t>(k_folds));
  const size_t base = n_samples / static_cast<size_t>(k_folds);
  const size_t extra = n_samples % static_cast<size_t>(k_folds);
  size_t cursor = 0;
  for (size_t f = 0; f < folds.size(); ++f) {
    const size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + cursor, order.begin() + cursor + size);
    std::sort(folds[f].begin(), folds[f].end());
    cursor += size;
  }
  return folds;
}

}  // namespace syntha1c::cohort
