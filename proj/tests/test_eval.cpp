#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "syntha1c/eval.hpp"
#include "syntha1c/rng.hpp"

using namespace syntha1c;
namespace f = syntha1c::features;

TEST_CASE("perfect predictions score 100 across the board") {
  const std::vector<int> truth = {1, 0, 1, 1, 0};
  const auto report = eval::classification_report(truth, truth);
  CHECK(*report.recall == 100.0);
  CHECK(*report.precision == 100.0);
  CHECK(*report.specificity == 100.0);
  CHECK(*report.accuracy == 100.0);
}

TEST_CASE("all-positive predictions reproduce the zero-rule fixed point") {
  std::vector<int> truth(1000, 0);
  for (size_t i = 0; i < 524; ++i) truth[i] = 1;
  const std::vector<int> predicted(1000, 1);
  const auto report = eval::classification_report(predicted, truth);
  CHECK(*report.recall == 100.0);
  CHECK(*report.precision == 52.4);
  CHECK(*report.specificity == 0.0);
  CHECK(*report.accuracy == 52.4);
}

TEST_CASE("zero-denominator metrics are absent, not zero") {
  // No true positives or false negatives: recall undefined.
  const auto no_positives =
      eval::classification_report({0, 0, 0}, {0, 0, 0});
  CHECK_FALSE(no_positives.recall.has_value());
  CHECK_FALSE(no_positives.precision.has_value());
  CHECK(no_positives.specificity.has_value());

  // All-positive truth: specificity undefined.
  const auto all_positive =
      eval::classification_report({1, 1, 1}, {1, 1, 1});
  CHECK_FALSE(all_positive.specificity.has_value());
  CHECK(*all_positive.recall == 100.0);

  CHECK_THROWS_AS(eval::classification_report({1}, {1, 0}),
                  std::invalid_argument);
}

TEST_CASE("classification metrics match a counting oracle on random data") {
  Rng rng(606);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 2 + rng.uniform_index(60);
    std::vector<int> predicted(n), truth(n);
    for (size_t i = 0; i < n; ++i) {
      predicted[i] = rng.bernoulli(0.5) ? 1 : 0;
      truth[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    const auto report = eval::classification_report(predicted, truth);
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (size_t i = 0; i < n; ++i) {
      tp += predicted[i] == 1 && truth[i] == 1;
      fp += predicted[i] == 1 && truth[i] == 0;
      tn += predicted[i] == 0 && truth[i] == 0;
      fn += predicted[i] == 0 && truth[i] == 1;
    }
    CHECK(report.counts.tp == tp);
    CHECK(report.counts.total() == n);
    if (tp + fn > 0) {
      CHECK(*report.recall ==
            doctest::Approx(100.0 * double(tp) / double(tp + fn)).epsilon(1e-12));
    }
    if (tn + fp > 0) {
      CHECK(*report.specificity ==
            doctest::Approx(100.0 * double(tn) / double(tn + fp)).epsilon(1e-12));
    }
    CHECK(*report.accuracy ==
          doctest::Approx(100.0 * double(tp + tn) / double(n)).epsilon(1e-12));
  }
}

TEST_CASE("metrics are invariant under sample permutation") {
  Rng rng(909);
  std::vector<int> predicted(40), truth(40);
  for (size_t i = 0; i < 40; ++i) {
    predicted[i] = rng.bernoulli(0.6) ? 1 : 0;
    truth[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  const auto base = eval::classification_report(predicted, truth);
  std::vector<size_t> order(40);
  for (size_t i = 0; i < 40; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> p2(40), t2(40);
  for (size_t i = 0; i < 40; ++i) {
    p2[i] = predicted[order[i]];
    t2[i] = truth[order[i]];
  }
  const auto permuted = eval::classification_report(p2, t2);
  CHECK(base.counts.tp == permuted.counts.tp);
  CHECK(base.counts.fp == permuted.counts.fp);
  CHECK(base.counts.tn == permuted.counts.tn);
  CHECK(base.counts.fn == permuted.counts.fn);
}

TEST_CASE("regression identity and shift cases") {
  const std::vector<double> targets = {4.0, 5.5, 6.0, 7.25};
  const auto identity = eval::regression_report(targets, targets);
  CHECK(identity.rmse == 0.0);
  CHECK(*identity.pcc == doctest::Approx(1.0));

  std::vector<double> shifted = targets;
  for (auto& v : shifted) v += 1.0;
  const auto shift_report = eval::regression_report(shifted, targets);
  CHECK(shift_report.rmse == doctest::Approx(1.0));
  CHECK(*shift_report.pcc == doctest::Approx(1.0));

  // Constant prediction series: PCC undefined.
  const auto constant =
      eval::regression_report({3.0, 3.0, 3.0}, {1.0, 2.0, 3.0});
  CHECK_FALSE(constant.pcc.has_value());
}

TEST_CASE("regression metrics match direct formulas on random pairs") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 2 + rng.uniform_index(40);
    std::vector<double> p(n), t(n);
    for (size_t i = 0; i < n; ++i) {
      p[i] = rng.normal(6.0, 1.5);
      t[i] = rng.normal(6.0, 1.5);
    }
    const auto report = eval::regression_report(p, t);

    double se = 0.0, mp = 0.0, mt = 0.0;
    for (size_t i = 0; i < n; ++i) {
      se += (p[i] - t[i]) * (p[i] - t[i]);
      mp += p[i];
      mt += t[i];
    }
    mp /= double(n);
    mt /= double(n);
    double cov = 0.0, vp = 0.0, vt = 0.0;
    for (size_t i = 0; i < n; ++i) {
      cov += (p[i] - mp) * (t[i] - mt);
      vp += (p[i] - mp) * (p[i] - mp);
      vt += (t[i] - mt) * (t[i] - mt);
    }
    CHECK(std::fabs(report.rmse - std::sqrt(se / double(n))) < 1e-10);
    CHECK(std::fabs(*report.pcc - cov / std::sqrt(vp * vt)) < 1e-10);
    // RMSE dominates the absolute mean error.
    double mean_err = 0.0;
    for (size_t i = 0; i < n; ++i) mean_err += p[i] - t[i];
    CHECK(report.rmse >= std::fabs(mean_err / double(n)) - 1e-12);
  }
}

TEST_CASE("pcc is invariant under positive affine transforms") {
  Rng rng(27);
  std::vector<double> p(50), t(50);
  for (size_t i = 0; i < 50; ++i) {
    p[i] = rng.normal(0, 1);
    t[i] = 0.7 * p[i] + rng.normal(0, 0.4);
  }
  const auto base = eval::regression_report(p, t);
  std::vector<double> scaled = p;
  for (auto& v : scaled) v = 3.5 * v + 11.0;
  const auto transformed = eval::regression_report(scaled, t);
  CHECK(*transformed.pcc == doctest::Approx(*base.pcc).epsilon(1e-12));
}

TEST_CASE("syntha1c downstream classification mirrors the lab cutoffs") {
  CHECK(eval::syntha1c_classify(6.6, f::LabelTask::Dm));
  CHECK_FALSE(eval::syntha1c_classify(5.8, f::LabelTask::Dm));
  CHECK(eval::syntha1c_classify(5.8, f::LabelTask::DmPlusPreDm));
  // Model outputs may stray below zero; thresholds still apply.
  CHECK_FALSE(eval::syntha1c_classify(-0.5, f::LabelTask::Dm));

  Rng rng(404);
  for (int i = 0; i < 1000; ++i) {
    const double value = rng.uniform(0.5, 15.0);
    for (const auto task : {f::LabelTask::Dm, f::LabelTask::DmPlusPreDm}) {
      CHECK(eval::syntha1c_classify(value, task) ==
            f::derive_label(value, task));
    }
  }
}

TEST_CASE("bland-altman identity, offset and formula oracle") {
  const std::vector<double> targets = {5.0, 6.0, 7.0};
  const auto identity = eval::bland_altman(targets, targets);
  CHECK(identity.bias == 0.0);
  CHECK(identity.sd_diff == 0.0);
  CHECK(identity.lower_limit == 0.0);
  CHECK(identity.upper_limit == 0.0);

  std::vector<double> offset = targets;
  for (auto& v : offset) v += 1.0;
  const auto shifted = eval::bland_altman(offset, targets);
  CHECK(shifted.bias == doctest::Approx(1.0));
  CHECK(shifted.sd_diff == doctest::Approx(0.0));

  Rng rng(33);
  std::vector<double> p(64), t(64);
  for (size_t i = 0; i < 64; ++i) {
    p[i] = rng.normal(6.5, 1.0);
    t[i] = rng.normal(6.5, 1.0);
  }
  const auto report = eval::bland_altman(p, t);
  double bias = 0.0;
  for (size_t i = 0; i < 64; ++i) bias += p[i] - t[i];
  bias /= 64.0;
  double ss = 0.0;
  for (size_t i = 0; i < 64; ++i) {
    ss += (p[i] - t[i] - bias) * (p[i] - t[i] - bias);
  }
  const double sd = std::sqrt(ss / 64.0);
  CHECK(report.bias == doctest::Approx(bias).epsilon(1e-12));
  CHECK(report.sd_diff == doctest::Approx(sd).epsilon(1e-12));
  CHECK(report.upper_limit == doctest::Approx(bias + 1.96 * sd));
  CHECK(report.lower_limit == doctest::Approx(bias - 1.96 * sd));
  REQUIRE(report.pairs.size() == 64);
  CHECK(report.pairs[5].first == doctest::Approx(0.5 * (p[5] + t[5])));
  CHECK(report.pairs[5].second == doctest::Approx(p[5] - t[5]));
}

namespace {

cohort::Sample make_sample(const std::string& pid, double hba1c, double age,
                           double bmi, int race, int gender) {
  cohort::Sample s;
  s.patient_id = pid;
  s.target_hba1c = hba1c;
  s.target_date = 0;
  s.daterange = 0;
  s.age = age;
  s.bmi_value = bmi;
  s.race_code = race;
  s.gender_code = gender;
  return s;
}

}  // namespace

TEST_CASE("group labels and stratified reports") {
  std::vector<cohort::Sample> samples = {
      make_sample("a", 6.0, 45.0, 24.0, 0, 0),
      make_sample("b", 7.0, 52.0, 27.0, 2, 1),
      make_sample("c", 5.5, 58.0, 33.0, 2, 1),
      make_sample("d", 8.0, 61.0, 41.0, 0, 0),
  };
  CHECK(eval::group_label(samples[0], eval::GroupKey::Gender) == "male");
  CHECK(eval::group_label(samples[1], eval::GroupKey::Race) == "black");
  CHECK(eval::group_label(samples[0], eval::GroupKey::BmiCategory) ==
        "not_overweight");
  CHECK(eval::group_label(samples[1], eval::GroupKey::BmiCategory) ==
        "overweight");
  CHECK(eval::group_label(samples[2], eval::GroupKey::BmiCategory) == "obese");
  CHECK(eval::group_label(samples[3], eval::GroupKey::BmiCategory) ==
        "extremely_obese");
  CHECK(eval::group_label(samples[0], eval::GroupKey::AgeDecade) == "40-49");
  CHECK(eval::group_label(samples[3], eval::GroupKey::AgeDecade) == "60-69");

  cohort::Sample no_age = samples[0];
  no_age.age = f::RawPhenotypes::nan_value();
  CHECK_THROWS_AS(eval::group_label(no_age, eval::GroupKey::AgeDecade),
                  std::invalid_argument);

  // Single-group stratification equals the unstratified report.
  const std::vector<double> predictions = {6.1, 6.9, 5.6, 8.2};
  std::vector<cohort::Sample> one_group;
  for (const auto& s : samples) {
    auto copy = s;
    copy.gender_code = 1;
    one_group.push_back(copy);
  }
  const auto strat = eval::stratified_regression_report(
      one_group, predictions, eval::GroupKey::Gender);
  REQUIRE(strat.groups.size() == 1);
  std::vector<double> truth;
  for (const auto& s : one_group) truth.push_back(s.target_hba1c);
  const auto pooled = eval::regression_report(predictions, truth);
  CHECK(strat.groups.at("female").rmse == doctest::Approx(pooled.rmse));
  CHECK(*strat.groups.at("female").pcc == doctest::Approx(*pooled.pcc));

  // Two groups: pooled counts equal the sum of group counts.
  const auto by_gender = eval::stratified_classification_report(
      samples, {1, 1, 0, 1}, {0, 1, 0, 1}, eval::GroupKey::Gender);
  size_t total = 0;
  for (const auto& [label, report] : by_gender.groups) {
    total += report.counts.total();
  }
  CHECK(total == samples.size());
}

TEST_CASE("spearman rank correlation on monotone and tied data") {
  CHECK(eval::spearman_rank_correlation({1, 2, 3, 4}, {10, 20, 30, 40}) ==
        doctest::Approx(1.0));
  CHECK(eval::spearman_rank_correlation({1, 2, 3, 4}, {9, 7, 5, 3}) ==
        doctest::Approx(-1.0));
  // Monotone but nonlinear still ranks perfectly.
  CHECK(eval::spearman_rank_correlation({1, 2, 3, 4}, {1, 8, 27, 64}) ==
        doctest::Approx(1.0));
  // Ties get averaged ranks; result stays in [-1, 1].
  const double rho =
      eval::spearman_rank_correlation({1, 1, 2, 3}, {4, 5, 6, 6});
  CHECK(rho > 0.0);
  CHECK(rho <= 1.0);
}
