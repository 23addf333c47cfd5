#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace syntha1c::synthgen {

struct FeatureDist {
  double mean = 0.0;
  double sd = 1.0;
};

struct FeatureShift {
  double mean_sigmas = 0.0;  // additive offset in units of the base SD
  double scale = 1.0;        // multiplies the base SD
};

// HbA1c link: s is a weighted sum of fixed-reference z-scores of BMI, age,
// visceral fat and (negated) SHAD; y = base + linear*s + tanh_amp*tanh(s)
// plus Gaussian noise. Monotone increasing in BMI, age and visceral fat,
// decreasing in SHAD.
struct LinkParams {
  double base = 6.42;
  double linear = 0.35;
  double tanh_amp = 0.55;
  double w_bmi = 1.0;
  double w_age = 0.45;
  double w_visc = 0.8;
  double w_shad = 0.5;
};

struct GeneratorSpec {
  size_t n_patients = 389;
  size_t n_samples = 2077;  // total HbA1c measurements across the cohort
  int min_encounters = 1;
  int max_encounters = 10;
  int64_t date_span_days = 3650;
  int64_t date_jitter_days = 15;
  uint64_t seed = 1;
  double noise_sd = 0.45;
  double target_dm_prevalence = 0.52;  // documentation target, checked in tests
  std::vector<double> race_mix;        // seven categories
  std::vector<double> gender_mix;      // male, female
  std::map<std::string, FeatureDist> base_distributions;
  LinkParams link;
  std::map<std::string, FeatureShift> shifts;

  static GeneratorSpec defaults();
  // Partial override of the defaults; unknown keys are rejected.
  static GeneratorSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// The link's s-value for one set of measured phenotypes, using the fixed
// reference centers/scales recorded in the ledger (never the shifted ones).
double link_signal(const LinkParams& link, double bmi, double age,
                   double visc_fat, double shad);
double link_value(const LinkParams& link, double signal);

// Writes measurements.csv, statics.csv and ledger.json into out_dir.
// Byte-identical for identical (spec, out_dir content); the ledger records
// link parameters, per-group sample counts (as a consumer assembling with
// the r schema will see them) and label prevalences.
nlohmann::json generate(const GeneratorSpec& spec,
                        const std::filesystem::path& out_dir);

}  // namespace syntha1c::synthgen
