#include "syntha1c/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "syntha1c/cohort.hpp"
#include "syntha1c/csv.hpp"
#include "syntha1c/eval.hpp"
#include "syntha1c/features.hpp"
#include "syntha1c/rng.hpp"
#include "syntha1c/version.hpp"

namespace syntha1c::synthgen {

namespace {

namespace f = syntha1c::features;

// Fixed reference constants for the link's z-scores; these never move with
// shift knobs so a shifted cohort genuinely lands off-distribution.
constexpr double kRefBmiMean = 30.0, kRefBmiSd = 6.0;
constexpr double kRefAgeMean = 57.0, kRefAgeSd = 12.0;
constexpr double kRefViscMean = 2.5, kRefViscSd = 1.0;
constexpr double kRefShadMean = -5.0, kRefShadSd = 11.5;

// Per-encounter measurement noise, in raw units.
constexpr double kHeightMeasSd = 0.004;
constexpr double kBmiMeasSd = 0.6;
constexpr double kSbpMeasSd = 6.0;
constexpr double kDbpMeasSd = 4.0;
constexpr double kLiverMeasSd = 2.0;
constexpr double kSpleenMeasSd = 1.5;
constexpr double kSubqMeasSd = 0.08;
constexpr double kViscMeasSd = 0.08;

struct PatientLatent {
  int race_code;
  int gender_code;
  double base_age;  // years at day 0
  double height_m;
  double bmi;
  double sbp;
  double dbp;
  double subq_fat;
  double visc_fat;
  double liver_hu;
  double spleen_hu;
};

int draw_category(Rng& rng, const std::vector<double>& mix) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (size_t i = 0; i < mix.size(); ++i) {
    acc += mix[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(mix.size()) - 1;
}

double shifted_draw(Rng& rng, const FeatureDist& dist,
                    const FeatureShift& shift) {
  const double mean = dist.mean + shift.mean_sigmas * dist.sd;
  const double sd = dist.sd * shift.scale;
  return rng.normal(mean, sd);
}

struct MeasurementRow {
  std::string patient_id;
  std::string feature;
  double value;
  int64_t date;
};

int64_t unique_date(std::set<int64_t>& used, int64_t wanted) {
  while (used.count(wanted)) ++wanted;
  used.insert(wanted);
  return wanted;
}

}  // namespace

GeneratorSpec GeneratorSpec::defaults() {
  GeneratorSpec spec;
  spec.race_mix = {0.35, 0.02, 0.60, 0.017, 0.003, 0.002, 0.008};
  spec.gender_mix = {0.42, 0.58};
  spec.base_distributions = {
      {"age", {kRefAgeMean, kRefAgeSd}},   {"height_m", {1.70, 0.10}},
      {"bmi", {kRefBmiMean, kRefBmiSd}},   {"sbp", {125.0, 15.0}},
      {"dbp", {78.0, 9.0}},                {"subq_fat", {3.0, 1.2}},
      {"visc_fat", {kRefViscMean, kRefViscSd}},
      {"liver_hu", {55.0, 10.0}},          {"spleen_hu", {50.0, 6.0}}};
  return spec;
}

GeneratorSpec GeneratorSpec::from_json(const nlohmann::json& doc) {
  GeneratorSpec spec = defaults();
  for (const auto& [key, value] : doc.items()) {
    if (key == "n_patients") spec.n_patients = value;
    else if (key == "n_samples") spec.n_samples = value;
    else if (key == "min_encounters") spec.min_encounters = value;
    else if (key == "max_encounters") spec.max_encounters = value;
    else if (key == "date_span_days") spec.date_span_days = value;
    else if (key == "date_jitter_days") spec.date_jitter_days = value;
    else if (key == "seed") spec.seed = value;
    else if (key == "noise_sd") spec.noise_sd = value;
    else if (key == "target_dm_prevalence") spec.target_dm_prevalence = value;
    else if (key == "race_mix") spec.race_mix = value.get<std::vector<double>>();
    else if (key == "gender_mix") spec.gender_mix = value.get<std::vector<double>>();
    else if (key == "base_distributions") {
      for (const auto& [id, dist] : value.items()) {
        if (!spec.base_distributions.count(id)) {
          throw std::invalid_argument("generator spec: unknown feature '" +
                                      id + "'");
        }
        spec.base_distributions[id] = {dist.at("mean"), dist.at("sd")};
      }
    } else if (key == "link") {
      for (const auto& [k, v] : value.items()) {
        if (k == "base") spec.link.base = v;
        else if (k == "linear") spec.link.linear = v;
        else if (k == "tanh_amp") spec.link.tanh_amp = v;
        else if (k == "w_bmi") spec.link.w_bmi = v;
        else if (k == "w_age") spec.link.w_age = v;
        else if (k == "w_visc") spec.link.w_visc = v;
        else if (k == "w_shad") spec.link.w_shad = v;
        else throw std::invalid_argument("generator spec: unknown link key '" + k + "'");
      }
    } else if (key == "shifts") {
      for (const auto& [id, shift] : value.items()) {
        FeatureShift s;
        if (shift.contains("mean_sigmas")) s.mean_sigmas = shift.at("mean_sigmas");
        if (shift.contains("scale")) s.scale = shift.at("scale");
        spec.shifts[id] = s;
      }
    } else {
      throw std::invalid_argument("generator spec: unknown key '" + key + "'");
    }
  }
  return spec;
}

nlohmann::json GeneratorSpec::to_json() const {
  nlohmann::json doc;
  doc["n_patients"] = n_patients;
  doc["n_samples"] = n_samples;
  doc["min_encounters"] = min_encounters;
  doc["max_encounters"] = max_encounters;
  doc["date_span_days"] = date_span_days;
  doc["date_jitter_days"] = date_jitter_days;
  doc["seed"] = seed;
  doc["noise_sd"] = noise_sd;
  doc["target_dm_prevalence"] = target_dm_prevalence;
  doc["race_mix"] = race_mix;
  doc["gender_mix"] = gender_mix;
  nlohmann::json bases;
  for (const auto& [id, dist] : base_distributions) {
    bases[id] = {{"mean", dist.mean}, {"sd", dist.sd}};
  }
  doc["base_distributions"] = std::move(bases);
  doc["link"] = {{"base", link.base},     {"linear", link.linear},
                 {"tanh_amp", link.tanh_amp}, {"w_bmi", link.w_bmi},
                 {"w_age", link.w_age},   {"w_visc", link.w_visc},
                 {"w_shad", link.w_shad}};
  nlohmann::json shifts_doc = nlohmann::json::object();
  for (const auto& [id, shift] : shifts) {
    shifts_doc[id] = {{"mean_sigmas", shift.mean_sigmas},
                      {"scale", shift.scale}};
  }
  doc["shifts"] = std::move(shifts_doc);
  return doc;
}

double link_signal(const LinkParams& link, double bmi, double age,
                   double visc_fat, double shad) {
  return link.w_bmi * (bmi - kRefBmiMean) / kRefBmiSd +
         link.w_age * (age - kRefAgeMean) / kRefAgeSd +
         link.w_visc * (visc_fat - kRefViscMean) / kRefViscSd -
         link.w_shad * (shad - kRefShadMean) / kRefShadSd;
}

double link_value(const LinkParams& link, double signal) {
  return link.base + link.linear * signal + link.tanh_amp * std::tanh(signal);
}

nlohmann::json generate(const GeneratorSpec& spec,
                        const std::filesystem::path& out_dir) {
  if (spec.n_patients == 0 || spec.min_encounters < 1 ||
      spec.max_encounters < spec.min_encounters) {
    throw std::invalid_argument("generate: infeasible generator spec");
  }
  if (spec.n_samples < spec.n_patients * static_cast<size_t>(spec.min_encounters) ||
      spec.n_samples > spec.n_patients * static_cast<size_t>(spec.max_encounters)) {
    throw std::invalid_argument(
        "generate: n_samples infeasible for the encounter bounds");
  }
  auto check_mix = [](const std::vector<double>& mix, size_t expect,
                      const char* what) {
    if (mix.size() != expect) {
      throw std::invalid_argument(std::string("generate: ") + what +
                                  " mix has wrong arity");
    }
    double total = 0.0;
    for (double p : mix) {
      if (p < 0.0) throw std::invalid_argument("generate: negative mix weight");
      total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
      throw std::invalid_argument(std::string("generate: ") + what +
                                  " mix does not sum to 1");
    }
  };
  check_mix(spec.race_mix, f::race_vocabulary().size(), "race");
  check_mix(spec.gender_mix, f::gender_vocabulary().size(), "gender");

  std::filesystem::create_directories(out_dir);

  const auto shift_of = [&spec](const std::string& id) {
    const auto it = spec.shifts.find(id);
    return it == spec.shifts.end() ? FeatureShift{} : it->second;
  };
  const auto dist_of = [&spec](const std::string& id) {
    return spec.base_distributions.at(id);
  };

  // Per-patient encounter counts: uniform in [min,max], then nudged
  // deterministically until the total matches n_samples exactly.
  Rng alloc_rng(Rng::derive_seed(spec.seed, 0xA110C));
  std::vector<int> encounter_counts(spec.n_patients);
  size_t total = 0;
  for (auto& count : encounter_counts) {
    count = spec.min_encounters +
            static_cast<int>(alloc_rng.uniform_index(static_cast<uint64_t>(
                spec.max_encounters - spec.min_encounters + 1)));
    total += static_cast<size_t>(count);
  }
  size_t cursor = 0;
  while (total != spec.n_samples) {
    auto& count = encounter_counts[cursor % spec.n_patients];
    if (total > spec.n_samples && count > spec.min_encounters) {
      --count;
      --total;
    } else if (total < spec.n_samples && count < spec.max_encounters) {
      ++count;
      ++total;
    }
    ++cursor;
  }

  const int id_width =
      std::max(4, static_cast<int>(std::to_string(spec.n_patients).size()));

  std::vector<MeasurementRow> rows;
  std::vector<std::vector<std::string>> static_rows;
  size_t dm_positive = 0, pre_dm_positive = 0, nondiabetic = 0;
  double min_hba1c = 1e30, max_hba1c = -1e30;

  for (size_t p = 0; p < spec.n_patients; ++p) {
    Rng rng(Rng::derive_seed(spec.seed, p + 1));
    std::string pid = std::to_string(p + 1);
    pid = "p" + std::string(static_cast<size_t>(id_width) - pid.size(), '0') + pid;

    PatientLatent latent;
    latent.race_code = draw_category(rng, spec.race_mix);
    latent.gender_code = draw_category(rng, spec.gender_mix);
    latent.base_age =
        std::clamp(shifted_draw(rng, dist_of("age"), shift_of("age")), 20.0, 88.0);
    latent.height_m = std::clamp(
        shifted_draw(rng, dist_of("height_m"), shift_of("height_m")), 1.40, 2.10);
    latent.bmi = std::clamp(
        shifted_draw(rng, dist_of("bmi"), shift_of("bmi")), 15.0, 60.0);
    latent.sbp = std::max(
        70.0, shifted_draw(rng, dist_of("sbp"), shift_of("sbp")) +
                  0.8 * (latent.bmi - kRefBmiMean));
    latent.dbp = std::max(
        40.0, shifted_draw(rng, dist_of("dbp"), shift_of("dbp")) +
                  0.4 * (latent.bmi - kRefBmiMean));
    latent.subq_fat = std::max(
        0.2, shifted_draw(rng, dist_of("subq_fat"), shift_of("subq_fat")) +
                 0.18 * (latent.bmi - kRefBmiMean));
    latent.visc_fat = std::max(
        0.2, shifted_draw(rng, dist_of("visc_fat"), shift_of("visc_fat")) +
                 0.12 * (latent.bmi - kRefBmiMean));
    latent.liver_hu =
        shifted_draw(rng, dist_of("liver_hu"), shift_of("liver_hu"));
    latent.spleen_hu =
        shifted_draw(rng, dist_of("spleen_hu"), shift_of("spleen_hu"));

    static_rows.push_back(
        {pid, f::race_vocabulary()[static_cast<size_t>(latent.race_code)],
         f::gender_vocabulary()[static_cast<size_t>(latent.gender_code)]});

    // Distinct encounter dates across the observation window.
    const int n_encounters = encounter_counts[p];
    std::set<int64_t> encounter_dates;
    while (encounter_dates.size() < static_cast<size_t>(n_encounters)) {
      encounter_dates.insert(static_cast<int64_t>(
          rng.uniform_index(static_cast<uint64_t>(spec.date_span_days))));
    }

    std::map<std::string, std::set<int64_t>> used_dates;
    for (int64_t date : encounter_dates) {
      struct Measured {
        const char* feature;
        double value;
        int64_t date;
      };
      std::vector<Measured> measured;
      auto jittered = [&rng, &spec](int64_t base) {
        return base + static_cast<int64_t>(rng.uniform_index(
                          2 * static_cast<uint64_t>(spec.date_jitter_days) + 1)) -
               spec.date_jitter_days;
      };

      const double height_m = latent.height_m + rng.normal(0.0, kHeightMeasSd);
      const double bmi_at = latent.bmi + rng.normal(0.0, kBmiMeasSd);
      const double weight_kg = bmi_at * height_m * height_m;
      const double sbp = latent.sbp + rng.normal(0.0, kSbpMeasSd);
      const double dbp = latent.dbp + rng.normal(0.0, kDbpMeasSd);
      const double subq = std::max(0.05, latent.subq_fat + rng.normal(0.0, kSubqMeasSd));
      const double visc = std::max(0.05, latent.visc_fat + rng.normal(0.0, kViscMeasSd));
      const double liver = latent.liver_hu + rng.normal(0.0, kLiverMeasSd);
      const double spleen = latent.spleen_hu + rng.normal(0.0, kSpleenMeasSd);

      // The link below consumes the same age value a consumer assembles,
      // so zero generator noise makes HbA1c an exact function of the
      // emitted measurements.
      const int64_t age_date = jittered(date);
      const double age_meas =
          latent.base_age + static_cast<double>(age_date) / 365.25;
      measured.push_back({f::kAge, age_meas, age_date});
      measured.push_back({f::kHeightM, height_m, jittered(date)});
      measured.push_back({f::kWeightKg, weight_kg, jittered(date)});
      measured.push_back({f::kSbp, sbp, jittered(date)});
      measured.push_back({f::kDbp, dbp, jittered(date)});
      measured.push_back({f::kSubqFat, subq, jittered(date)});
      measured.push_back({f::kViscFat, visc, jittered(date)});
      measured.push_back({f::kLiverHu, liver, jittered(date)});
      measured.push_back({f::kSpleenHu, spleen, jittered(date)});

      const double shad_at = spleen - liver;
      const double bmi_meas = weight_kg / (height_m * height_m);
      const double signal =
          link_signal(spec.link, bmi_meas, age_meas, visc, shad_at);
      double hba1c = link_value(spec.link, signal);
      if (spec.noise_sd > 0.0) hba1c += rng.normal(0.0, spec.noise_sd);
      hba1c = std::clamp(hba1c, 0.5, 19.5);
      measured.push_back({f::kHbA1c, hba1c, date});

      min_hba1c = std::min(min_hba1c, hba1c);
      max_hba1c = std::max(max_hba1c, hba1c);
      if (f::cutoff_positive(hba1c, f::LabelTask::Dm)) ++dm_positive;
      if (f::cutoff_positive(hba1c, f::LabelTask::DmPlusPreDm)) {
        ++pre_dm_positive;
      } else {
        ++nondiabetic;
      }

      for (const auto& m : measured) {
        rows.push_back({pid, m.feature, m.value,
                        unique_date(used_dates[m.feature], m.date)});
      }
    }
  }

  // Canonical row order: patient, feature, date.
  std::sort(rows.begin(), rows.end(),
            [](const MeasurementRow& a, const MeasurementRow& b) {
              if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
              if (a.feature != b.feature) return a.feature < b.feature;
              return a.date < b.date;
            });

  const std::string provenance =
      "syntha1c " + std::string(kToolkitVersion) + " synthetic cohort, seed " +
      std::to_string(spec.seed);
  std::vector<std::vector<std::string>> measurement_rows;
  measurement_rows.reserve(rows.size());
  for (const auto& row : rows) {
    measurement_rows.push_back({row.patient_id, row.feature,
                                csv::format_double(row.value),
                                csv::format_date_days(row.date)});
  }
  csv::write_csv(out_dir / "measurements.csv",
                 {"patient_id", "feature", "value", "date"}, measurement_rows,
                 provenance);
  csv::write_csv(out_dir / "statics.csv", {"patient_id", "race", "gender"},
                 static_rows, provenance);

  // Group counts as a consumer will see them: reassemble with the full raw
  // schema and stratify. This keeps the ledger consistent with
  // eval::stratified reports by construction.
  const auto cohort = cohort::load_cohort(out_dir / "measurements.csv",
                                          out_dir / "statics.csv");
  const auto schema = f::make_schema(f::SchemaVariant::R);
  const auto samples = cohort::assemble_samples(cohort, schema);
  if (samples.size() != spec.n_samples) {
    throw std::logic_error("generate: assembled sample count mismatch");
  }

  nlohmann::json group_counts;
  for (const auto key :
       {eval::GroupKey::Gender, eval::GroupKey::Race,
        eval::GroupKey::BmiCategory, eval::GroupKey::AgeDecade}) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [label, indices] : eval::group_indices(samples, key)) {
      counts[label] = indices.size();
    }
    group_counts[eval::to_string(key)] = std::move(counts);
  }

  const auto dstats = cohort::daterange_stats(samples);

  nlohmann::json ledger;
  ledger["toolkit_version"] = kToolkitVersion;
  ledger["spec"] = spec.to_json();
  ledger["n_patients"] = spec.n_patients;
  ledger["n_samples"] = spec.n_samples;
  ledger["link_reference"] = {
      {"bmi", {{"mean", kRefBmiMean}, {"sd", kRefBmiSd}}},
      {"age", {{"mean", kRefAgeMean}, {"sd", kRefAgeSd}}},
      {"visc_fat", {{"mean", kRefViscMean}, {"sd", kRefViscSd}}},
      {"shad", {{"mean", kRefShadMean}, {"sd", kRefShadSd}}}};
  ledger["labels"] = {
      {"dm_positive", dm_positive},
      {"dm_pre_dm_positive", pre_dm_positive},
      {"nondiabetic", nondiabetic},
      {"dm_prevalence",
       static_cast<double>(dm_positive) / static_cast<double>(spec.n_samples)}};
  ledger["hba1c_range"] = {min_hba1c, max_hba1c};
  ledger["group_counts"] = std::move(group_counts);
  ledger["daterange"] = {{"median_days", dstats.median_days},
                         {"fraction_within_365", dstats.fraction_within_365}};

  std::ofstream ledger_out(out_dir / "ledger.json");
  ledger_out << ledger.dump(2) << "\n";
  if (!ledger_out) {
    throw std::runtime_error("generate: cannot write ledger.json");
  }
  return ledger;
}

}  // namespace syntha1c::synthgen
