#include "syntha1c/features.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace syntha1c::features {

namespace {

FeatureDescriptor continuous(const char* id, FeatureKind kind) {
  return FeatureDescriptor{id, kind, FeatureDtype::Continuous, {}};
}

FeatureDescriptor categorical(const char* id,
                              const std::vector<std::string>& vocab) {
  return FeatureDescriptor{id, FeatureKind::Cdp, FeatureDtype::Categorical,
                           vocab};
}

}  // namespace

const std::vector<std::string>& race_vocabulary() {
  static const std::vector<std::string> vocab = {
      "white",           "hispanic",        "black",        "asian",
      "pacific_islander", "native_american", "other_unknown"};
  return vocab;
}

const std::vector<std::string>& gender_vocabulary() {
  static const std::vector<std::string> vocab = {"male", "female"};
  return vocab;
}

SchemaVariant schema_variant_from_string(const std::string& name) {
  if (name == "r") return SchemaVariant::R;
  if (name == "p") return SchemaVariant::P;
  if (name == "p_prime") return SchemaVariant::PPrime;
  if (name == "cdp_only") return SchemaVariant::CdpOnly;
  if (name == "idp_only") return SchemaVariant::IdpOnly;
  throw std::invalid_argument("unknown schema variant '" + name + "'");
}

std::string to_string(SchemaVariant variant) {
  switch (variant) {
    case SchemaVariant::R: return "r";
    case SchemaVariant::P: return "p";
    case SchemaVariant::PPrime: return "p_prime";
    case SchemaVariant::CdpOnly: return "cdp_only";
    case SchemaVariant::IdpOnly: return "idp_only";
  }
  throw std::logic_error("unreachable schema variant");
}

size_t FeatureSchema::index_of(const std::string& id) const {
  for (size_t i = 0; i < descriptors.size(); ++i) {
    if (descriptors[i].id == id) return i;
  }
  throw std::invalid_argument("schema '" + to_string(variant) +
                              "' has no feature '" + id + "'");
}

bool FeatureSchema::has(const std::string& id) const {
  for (const auto& d : descriptors) {
    if (d.id == id) return true;
  }
  return false;
}

size_t FeatureSchema::encoded_width() const {
  size_t width = 0;
  for (const auto& d : descriptors) {
    width += d.dtype == FeatureDtype::Categorical ? d.vocabulary.size() : 1;
  }
  return width;
}

std::vector<std::string> FeatureSchema::measurement_requirements() const {
  std::vector<std::string> reqs;
  auto add = [&reqs](const std::string& id) {
    for (const auto& existing : reqs) {
      if (existing == id) return;
    }
    reqs.push_back(id);
  };
  for (const auto& d : descriptors) {
    if (d.dtype == FeatureDtype::Categorical) continue;
    if (d.id == kBmi) {
      add(kHeightM);
      add(kWeightKg);
    } else if (d.id == kShad) {
      add(kLiverHu);
      add(kSpleenHu);
    } else {
      add(d.id);
    }
  }
  return reqs;
}

bool FeatureSchema::needs_statics() const {
  for (const auto& d : descriptors) {
    if (d.dtype == FeatureDtype::Categorical) return true;
  }
  return false;
}

FeatureSchema make_schema(SchemaVariant variant) {
  const auto race = categorical(kRace, race_vocabulary());
  const auto gender = categorical(kGender, gender_vocabulary());
  FeatureSchema schema;
  schema.variant = variant;
  switch (variant) {
    case SchemaVariant::R:
      schema.descriptors = {race,
                            gender,
                            continuous(kAge, FeatureKind::Cdp),
                            continuous(kSbp, FeatureKind::Cdp),
                            continuous(kDbp, FeatureKind::Cdp),
                            continuous(kHeightM, FeatureKind::Cdp),
                            continuous(kWeightKg, FeatureKind::Cdp),
                            continuous(kSubqFat, FeatureKind::Idp),
                            continuous(kViscFat, FeatureKind::Idp),
                            continuous(kLiverHu, FeatureKind::Idp),
                            continuous(kSpleenHu, FeatureKind::Idp)};
      break;
    case SchemaVariant::P:
      schema.descriptors = {race,
                            gender,
                            continuous(kAge, FeatureKind::Cdp),
                            continuous(kSbp, FeatureKind::Cdp),
                            continuous(kDbp, FeatureKind::Cdp),
                            continuous(kBmi, FeatureKind::Cdp),
                            continuous(kSubqFat, FeatureKind::Idp),
                            continuous(kViscFat, FeatureKind::Idp),
                            continuous(kShad, FeatureKind::Idp)};
      break;
    case SchemaVariant::PPrime:
      schema.descriptors = {race, gender, continuous(kAge, FeatureKind::Cdp),
                            continuous(kBmi, FeatureKind::Cdp)};
      break;
    case SchemaVariant::CdpOnly:
      schema.descriptors = {race,
                            gender,
                            continuous(kAge, FeatureKind::Cdp),
                            continuous(kSbp, FeatureKind::Cdp),
                            continuous(kDbp, FeatureKind::Cdp),
                            continuous(kHeightM, FeatureKind::Cdp),
                            continuous(kWeightKg, FeatureKind::Cdp)};
      break;
    case SchemaVariant::IdpOnly:
      schema.descriptors = {continuous(kSubqFat, FeatureKind::Idp),
                            continuous(kViscFat, FeatureKind::Idp),
                            continuous(kLiverHu, FeatureKind::Idp),
                            continuous(kSpleenHu, FeatureKind::Idp)};
      break;
  }
  return schema;
}

LabelTask label_task_from_string(const std::string& name) {
  if (name == "dm") return LabelTask::Dm;
  if (name == "dm_pre_dm") return LabelTask::DmPlusPreDm;
  throw std::invalid_argument("unknown label task '" + name + "'");
}

std::string to_string(LabelTask task) {
  return task == LabelTask::Dm ? "dm" : "dm_pre_dm";
}

double bmi(double weight_kg, double height_m) {
  if (!(weight_kg > 0.0) || !(height_m > 0.0)) {
    throw std::invalid_argument("bmi: weight and height must be positive");
  }
  return weight_kg / (height_m * height_m);
}

double shad(double spleen_hu, double liver_hu) {
  if (!std::isfinite(spleen_hu) || !std::isfinite(liver_hu)) {
    throw std::invalid_argument("shad: inputs must be finite");
  }
  return spleen_hu - liver_hu;
}

bool cutoff_positive(double value, LabelTask task) {
  const double cutoff =
      task == LabelTask::Dm ? kDiabetesCutoff : kPrediabetesCutoff;
  return value >= cutoff;
}

bool derive_label(double hba1c, LabelTask task) {
  if (!std::isfinite(hba1c) || hba1c <= 0.0) {
    throw std::invalid_argument("derive_label: HbA1c must be finite and > 0");
  }
  return cutoff_positive(hba1c, task);
}

double RawPhenotypes::nan_value() {
  return std::numeric_limits<double>::quiet_NaN();
}

namespace {

double require_raw(double value, const char* id) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument(std::string("project_schema: missing raw field '") +
                                id + "'");
  }
  return value;
}

}  // namespace

std::vector<double> project_schema(const RawPhenotypes& raw,
                                   const FeatureSchema& schema) {
  std::vector<double> out;
  out.reserve(schema.size());
  for (const auto& d : schema.descriptors) {
    if (d.id == kRace) {
      if (raw.race_code < 0) {
        throw std::invalid_argument("project_schema: missing race");
      }
      out.push_back(static_cast<double>(raw.race_code));
    } else if (d.id == kGender) {
      if (raw.gender_code < 0) {
        throw std::invalid_argument("project_schema: missing gender");
      }
      out.push_back(static_cast<double>(raw.gender_code));
    } else if (d.id == kBmi) {
      out.push_back(bmi(require_raw(raw.weight_kg, kWeightKg),
                        require_raw(raw.height_m, kHeightM)));
    } else if (d.id == kShad) {
      out.push_back(shad(require_raw(raw.spleen_hu, kSpleenHu),
                         require_raw(raw.liver_hu, kLiverHu)));
    } else if (d.id == kAge) {
      out.push_back(require_raw(raw.age, kAge));
    } else if (d.id == kSbp) {
      out.push_back(require_raw(raw.sbp, kSbp));
    } else if (d.id == kDbp) {
      out.push_back(require_raw(raw.dbp, kDbp));
    } else if (d.id == kHeightM) {
      out.push_back(require_raw(raw.height_m, kHeightM));
    } else if (d.id == kWeightKg) {
      out.push_back(require_raw(raw.weight_kg, kWeightKg));
    } else if (d.id == kSubqFat) {
      out.push_back(require_raw(raw.subq_fat, kSubqFat));
    } else if (d.id == kViscFat) {
      out.push_back(require_raw(raw.visc_fat, kViscFat));
    } else if (d.id == kLiverHu) {
      out.push_back(require_raw(raw.liver_hu, kLiverHu));
    } else if (d.id == kSpleenHu) {
      out.push_back(require_raw(raw.spleen_hu, kSpleenHu));
    } else {
      throw std::logic_error("project_schema: unhandled feature '" + d.id + "'");
    }
  }
  return out;
}

StandardizationStats fit_standardization(
    const std::vector<std::vector<double>>& rows,
    const std::vector<double>& targets, const FeatureSchema& schema) {
  if (rows.size() < 2) {
    throw std::invalid_argument("fit_standardization: need at least 2 rows");
  }
  if (targets.size() != rows.size()) {
    throw std::invalid_argument(
        "fit_standardization: rows/targets size mismatch");
  }
  const size_t n = rows.size();
  const size_t d = schema.size();
  StandardizationStats stats;
  stats.mean.assign(d, std::numeric_limits<double>::quiet_NaN());
  stats.sigma.assign(d, std::numeric_limits<double>::quiet_NaN());

  for (size_t j = 0; j < d; ++j) {
    if (schema.descriptors[j].dtype == FeatureDtype::Categorical) continue;
    double sum = 0.0;
    for (const auto& row : rows) sum += row.at(j);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& row : rows) {
      const double delta = row[j] - mean;
      ss += delta * delta;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(n));
    if (!(sigma > 0.0)) {
      throw std::invalid_argument("fit_standardization: constant column '" +
                                  schema.descriptors[j].id + "'");
    }
    stats.mean[j] = mean;
    stats.sigma[j] = sigma;
  }

  double tsum = 0.0;
  for (double y : targets) tsum += y;
  const double tmean = tsum / static_cast<double>(n);
  double tss = 0.0;
  for (double y : targets) tss += (y - tmean) * (y - tmean);
  stats.sigma_y = std::sqrt(tss / static_cast<double>(n));
  if (!(stats.sigma_y > 0.0)) {
    throw std::invalid_argument("fit_standardization: constant target column");
  }
  return stats;
}

namespace {

std::vector<double> expand(const std::vector<double>& row,
                           const FeatureSchema& schema,
                           const StandardizationStats* stats) {
  if (row.size() != schema.size()) {
    throw std::invalid_argument("encode: row length " +
                                std::to_string(row.size()) +
                                " does not match schema size " +
                                std::to_string(schema.size()));
  }
  std::vector<double> out;
  out.reserve(schema.encoded_width());
  for (size_t j = 0; j < schema.size(); ++j) {
    const auto& d = schema.descriptors[j];
    if (d.dtype == FeatureDtype::Categorical) {
      const double code_real = row[j];
      const auto code = static_cast<long>(code_real);
      if (code < 0 || static_cast<size_t>(code) >= d.vocabulary.size() ||
          static_cast<double>(code) != code_real) {
        throw std::invalid_argument("encode: category code " +
                                    std::to_string(code_real) +
                                    " outside vocabulary of '" + d.id + "'");
      }
      for (size_t v = 0; v < d.vocabulary.size(); ++v) {
        out.push_back(static_cast<size_t>(code) == v ? 1.0 : 0.0);
      }
    } else if (stats) {
      out.push_back((row[j] - stats->mean[j]) / stats->sigma[j]);
    } else {
      out.push_back(row[j]);
    }
  }
  return out;
}

}  // namespace

std::vector<double> encode(const std::vector<double>& row,
                           const FeatureSchema& schema,
                           const StandardizationStats& stats) {
  return expand(row, schema, &stats);
}

std::vector<double> encode_raw(const std::vector<double>& row,
                               const FeatureSchema& schema) {
  return expand(row, schema, nullptr);
}

std::vector<double> decode_continuous(const std::vector<double>& encoded,
                                      const FeatureSchema& schema,
                                      const StandardizationStats& stats) {
  if (encoded.size() != schema.encoded_width()) {
    throw std::invalid_argument("decode_continuous: width mismatch");
  }
  std::vector<double> out(schema.size(),
                          std::numeric_limits<double>::quiet_NaN());
  size_t slot = 0;
  for (size_t j = 0; j < schema.size(); ++j) {
    const auto& d = schema.descriptors[j];
    if (d.dtype == FeatureDtype::Categorical) {
      slot += d.vocabulary.size();
    } else {
      out[j] = encoded[slot] * stats.sigma[j] + stats.mean[j];
      ++slot;
    }
  }
  return out;
}

std::vector<double> perturbation_sigmas(const FeatureSchema& schema,
                                        const StandardizationStats& stats,
                                        bool raw_scale) {
  std::vector<double> sigmas;
  sigmas.reserve(schema.encoded_width());
  for (size_t j = 0; j < schema.size(); ++j) {
    const auto& d = schema.descriptors[j];
    if (d.dtype == FeatureDtype::Categorical) {
      sigmas.insert(sigmas.end(), d.vocabulary.size(), 0.0);
    } else {
      sigmas.push_back(raw_scale ? stats.sigma[j] : 1.0);
    }
  }
  return sigmas;
}

}  // namespace syntha1c::features
