#pragma once

#include <string>
#include <vector>

namespace syntha1c::features {

// Measurement stream ids as they appear in the measurements CSV.
inline constexpr const char* kHbA1c = "hba1c";
inline constexpr const char* kAge = "age";
inline constexpr const char* kSbp = "sbp";
inline constexpr const char* kDbp = "dbp";
inline constexpr const char* kHeightM = "height_m";
inline constexpr const char* kWeightKg = "weight_kg";
inline constexpr const char* kSubqFat = "subq_fat";
inline constexpr const char* kViscFat = "visc_fat";
inline constexpr const char* kLiverHu = "liver_hu";
inline constexpr const char* kSpleenHu = "spleen_hu";

// Derived / static feature ids used in schemas.
inline constexpr const char* kRace = "race";
inline constexpr const char* kGender = "gender";
inline constexpr const char* kBmi = "bmi";
inline constexpr const char* kShad = "shad";

const std::vector<std::string>& race_vocabulary();    // seven categories
const std::vector<std::string>& gender_vocabulary();  // male, female

enum class FeatureKind { Cdp, Idp };
enum class FeatureDtype { Continuous, Categorical };

struct FeatureDescriptor {
  std::string id;
  FeatureKind kind;
  FeatureDtype dtype;
  std::vector<std::string> vocabulary;  // empty for continuous
};

enum class SchemaVariant { R, P, PPrime, CdpOnly, IdpOnly };

SchemaVariant schema_variant_from_string(const std::string& name);
std::string to_string(SchemaVariant variant);

struct FeatureSchema {
  SchemaVariant variant;
  std::vector<FeatureDescriptor> descriptors;

  size_t size() const { return descriptors.size(); }
  size_t index_of(const std::string& id) const;  // throws if absent
  bool has(const std::string& id) const;
  // Width of the one-hot expanded vector fed to models.
  size_t encoded_width() const;
  // Measurement stream ids this schema derives its values from, in a
  // deterministic order. Static attributes (race, gender) are not listed.
  std::vector<std::string> measurement_requirements() const;
  bool needs_statics() const;
};

FeatureSchema make_schema(SchemaVariant variant);

enum class LabelTask { Dm, DmPlusPreDm };

LabelTask label_task_from_string(const std::string& name);
std::string to_string(LabelTask task);

inline constexpr double kDiabetesCutoff = 6.5;     // %A1C
inline constexpr double kPrediabetesCutoff = 5.7;  // %A1C

double bmi(double weight_kg, double height_m);
double shad(double spleen_hu, double liver_hu);

// Threshold on an arbitrary finite value; used both for lab labels and for
// downstream classification of model-predicted values.
bool cutoff_positive(double value, LabelTask task);

// Ground-truth label from a lab HbA1c measurement; rejects non-positive
// or non-finite input.
bool derive_label(double hba1c, LabelTask task);

// One patient's raw phenotype values (the r-superset). Continuous fields
// are NaN when absent, category codes are -1 when absent.
struct RawPhenotypes {
  double age = nan_value();
  double sbp = nan_value();
  double dbp = nan_value();
  double height_m = nan_value();
  double weight_kg = nan_value();
  double subq_fat = nan_value();
  double visc_fat = nan_value();
  double liver_hu = nan_value();
  double spleen_hu = nan_value();
  int race_code = -1;
  int gender_code = -1;

  static double nan_value();
};

// Projects raw phenotypes into the schema's ordered feature vector.
// Derived slots (bmi, shad) are computed here; categorical slots carry the
// vocabulary code as a real. Throws if a required raw field is missing.
std::vector<double> project_schema(const RawPhenotypes& raw,
                                   const FeatureSchema& schema);

struct StandardizationStats {
  // Parallel to schema descriptors; entries are meaningful only for
  // continuous features (NaN elsewhere).
  std::vector<double> mean;
  std::vector<double> sigma;
  double sigma_y = 0.0;  // SD of ground-truth targets on the reference set
};

// Population statistics (divide by N) over the reference rows. Rows are
// schema-ordered feature vectors; targets are the ground-truth HbA1c
// values of the same reference set. Throws on a constant continuous
// column, naming the feature.
StandardizationStats fit_standardization(
    const std::vector<std::vector<double>>& rows,
    const std::vector<double>& targets, const FeatureSchema& schema);

// Zero-mean unit-variance continuous slots + one-hot categorical slots.
std::vector<double> encode(const std::vector<double>& row,
                           const FeatureSchema& schema,
                           const StandardizationStats& stats);

// One-hot categorical slots but continuous values left on their raw scale
// (trees are scale-invariant and are trained on raw values).
std::vector<double> encode_raw(const std::vector<double>& row,
                               const FeatureSchema& schema);

// Inverse of encode() for the continuous slots; returns values in schema
// order with NaN in categorical positions.
std::vector<double> decode_continuous(const std::vector<double>& encoded,
                                      const FeatureSchema& schema,
                                      const StandardizationStats& stats);

// Per encoded coordinate: the feature SD in the units the model consumes
// (sigma for raw-scale inputs, 1 for standardized inputs) or 0 for one-hot
// slots, which are never perturbed. Consumed by the smoothness machinery.
std::vector<double> perturbation_sigmas(const FeatureSchema& schema,
                                        const StandardizationStats& stats,
                                        bool raw_scale);

}  // namespace syntha1c::features
