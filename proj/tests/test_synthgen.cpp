#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "syntha1c/baselines.hpp"
#include "syntha1c/cohort.hpp"
#include "syntha1c/eval.hpp"
#include "syntha1c/pipeline.hpp"
#include "syntha1c/robustness.hpp"
#include "syntha1c/synthgen.hpp"
#include "test_util.hpp"

using namespace syntha1c;
namespace f = syntha1c::features;

TEST_CASE("generation is byte-identical across runs") {
  synthgen::GeneratorSpec spec = synthgen::GeneratorSpec::defaults();
  spec.n_patients = 40;
  spec.n_samples = 160;
  spec.seed = 7;
  testutil::TempDir a("gen_a"), b("gen_b");
  synthgen::generate(spec, a.path());
  synthgen::generate(spec, b.path());
  CHECK(testutil::read_file(a.path() / "measurements.csv") ==
        testutil::read_file(b.path() / "measurements.csv"));
  CHECK(testutil::read_file(a.path() / "statics.csv") ==
        testutil::read_file(b.path() / "statics.csv"));
  CHECK(testutil::read_file(a.path() / "ledger.json") ==
        testutil::read_file(b.path() / "ledger.json"));

  spec.seed = 8;
  testutil::TempDir c("gen_c");
  synthgen::generate(spec, c.path());
  CHECK(testutil::read_file(a.path() / "measurements.csv") !=
        testutil::read_file(c.path() / "measurements.csv"));
}

TEST_CASE("noiseless cohorts are exactly identified by the link basis") {
  synthgen::GeneratorSpec spec = synthgen::GeneratorSpec::defaults();
  spec.n_patients = 120;
  spec.n_samples = 120;
  spec.min_encounters = 1;
  spec.max_encounters = 1;  // assembled values equal the encounter values
  spec.noise_sd = 0.0;
  spec.seed = 3;
  testutil::TempDir dir("gen_noiseless");
  synthgen::generate(spec, dir.path());

  const auto cohort = cohort::load_cohort(dir.path() / "measurements.csv",
                                          dir.path() / "statics.csv");
  const auto schema = f::make_schema(f::SchemaVariant::R);
  const auto samples = cohort::assemble_samples(cohort, schema);
  REQUIRE(samples.size() == 120);

  std::vector<std::vector<double>> basis;
  std::vector<double> targets;
  for (const auto& s : samples) {
    const double bmi = f::bmi(s.features[schema.index_of(f::kWeightKg)],
                              s.features[schema.index_of(f::kHeightM)]);
    const double shad = f::shad(s.features[schema.index_of(f::kSpleenHu)],
                                s.features[schema.index_of(f::kLiverHu)]);
    const double signal = synthgen::link_signal(
        spec.link, bmi, s.features[schema.index_of(f::kAge)],
        s.features[schema.index_of(f::kViscFat)], shad);
    // HbA1c equals the link exactly (up to CSV round-trip, which is exact).
    CHECK(s.target_hba1c ==
          doctest::Approx(synthgen::link_value(spec.link, signal))
              .epsilon(1e-12));
    basis.push_back({signal, std::tanh(signal)});
    targets.push_back(s.target_hba1c);
  }
  // OLS on the true basis recovers the link parameters.
  const auto ols = baselines::ols_fit(basis, targets);
  CHECK(ols.intercept == doctest::Approx(spec.link.base).epsilon(1e-8));
  CHECK(ols.coefficients[0] == doctest::Approx(spec.link.linear).epsilon(1e-8));
  CHECK(ols.coefficients[1] ==
        doctest::Approx(spec.link.tanh_amp).epsilon(1e-8));
}

TEST_CASE("default spec hits the target DM prevalence within 5 points") {
  synthgen::GeneratorSpec spec = synthgen::GeneratorSpec::defaults();
  testutil::TempDir dir("gen_prev");
  const auto ledger = synthgen::generate(spec, dir.path());
  const double prevalence = ledger["labels"]["dm_prevalence"];
  CHECK(std::fabs(prevalence - spec.target_dm_prevalence) < 0.05);
  CHECK(ledger["n_samples"] == 2077);
  CHECK(ledger["n_patients"] == 389);
  const double lo = ledger["hba1c_range"][0];
  const double hi = ledger["hba1c_range"][1];
  CHECK(lo > 0.0);
  CHECK(hi < 20.0);
}

TEST_CASE("ledger group counts equal stratified report group counts") {
  synthgen::GeneratorSpec spec = synthgen::GeneratorSpec::defaults();
  spec.n_patients = 60;
  spec.n_samples = 240;
  spec.seed = 11;
  testutil::TempDir dir("gen_groups");
  const auto ledger = synthgen::generate(spec, dir.path());

  const auto cohort = cohort::load_cohort(dir.path() / "measurements.csv",
                                          dir.path() / "statics.csv");
  const auto samples =
      cohort::assemble_samples(cohort, f::make_schema(f::SchemaVariant::R));
  REQUIRE(samples.size() == 240);
  for (const auto key :
       {eval::GroupKey::Gender, eval::GroupKey::Race,
        eval::GroupKey::BmiCategory, eval::GroupKey::AgeDecade}) {
    const auto groups = eval::group_indices(samples, key);
    const auto& ledger_counts = ledger["group_counts"][eval::to_string(key)];
    CHECK(groups.size() == ledger_counts.size());
    for (const auto& [label, indices] : groups) {
      CHECK(ledger_counts[label] == indices.size());
    }
  }
}

TEST_CASE("a +2 sigma bmi shift beats an iid redraw in >= 19/20 seeds") {
  const auto schema = f::make_schema(f::SchemaVariant::PPrime);
  int ordered = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    synthgen::GeneratorSpec base = synthgen::GeneratorSpec::defaults();
    base.n_patients = 60;
    base.n_samples = 180;
    base.seed = seed;

    synthgen::GeneratorSpec shifted = base;
    shifted.seed = seed + 1000;
    shifted.shifts["bmi"] = {2.0, 1.0};

    synthgen::GeneratorSpec redraw = base;
    redraw.seed = seed + 2000;

    auto assemble = [&schema](const synthgen::GeneratorSpec& spec,
                              const char* tag) {
      testutil::TempDir dir(tag);
      synthgen::generate(spec, dir.path());
      const auto cohort = cohort::load_cohort(dir.path() / "measurements.csv",
                                              dir.path() / "statics.csv");
      return cohort::assemble_samples(cohort, schema);
    };
    const auto base_samples = assemble(base, "shift_base");
    const auto shifted_samples = assemble(shifted, "shift_move");
    const auto redraw_samples = assemble(redraw, "shift_iid");

    const std::vector<std::string> features = {f::kBmi};
    const robustness::BinningSpec binning;
    const double kl_shift =
        robustness::empirical_kl(
            pipeline::kl_columns(shifted_samples, schema, features),
            pipeline::kl_columns(base_samples, schema, features), features,
            binning)
            .total;
    const double kl_redraw =
        robustness::empirical_kl(
            pipeline::kl_columns(redraw_samples, schema, features),
            pipeline::kl_columns(base_samples, schema, features), features,
            binning)
            .total;
    if (kl_shift > kl_redraw) ++ordered;
  }
  CHECK(ordered >= 19);
}

TEST_CASE("infeasible specs are rejected") {
  synthgen::GeneratorSpec spec = synthgen::GeneratorSpec::defaults();
  spec.n_patients = 10;
  spec.n_samples = 5;  // below n_patients * min_encounters
  testutil::TempDir dir("gen_bad");
  CHECK_THROWS_AS(synthgen::generate(spec, dir.path()), std::invalid_argument);

  synthgen::GeneratorSpec bad_mix = synthgen::GeneratorSpec::defaults();
  bad_mix.race_mix = {1.0};
  CHECK_THROWS_AS(synthgen::generate(bad_mix, dir.path()),
                  std::invalid_argument);
}

TEST_CASE("spec json round-trip applies partial overrides") {
  const nlohmann::json overrides = {
      {"n_patients", 50},
      {"n_samples", 200},
      {"seed", 99},
      {"noise_sd", 0.2},
      {"link", {{"base", 6.0}}},
      {"shifts", {{"bmi", {{"mean_sigmas", 1.5}}}}}};
  const auto spec = synthgen::GeneratorSpec::from_json(overrides);
  CHECK(spec.n_patients == 50);
  CHECK(spec.link.base == 6.0);
  CHECK(spec.link.linear == synthgen::GeneratorSpec::defaults().link.linear);
  CHECK(spec.shifts.at("bmi").mean_sigmas == 1.5);
  CHECK(spec.shifts.at("bmi").scale == 1.0);

  CHECK_THROWS_AS(synthgen::GeneratorSpec::from_json({{"bogus", 1}}),
                  std::invalid_argument);

  const auto echoed = synthgen::GeneratorSpec::from_json(spec.to_json());
  CHECK(echoed.to_json() == spec.to_json());
}
