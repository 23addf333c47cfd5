#pragma once

#include <cstdint>
#include <vector>

#include "syntha1c/features.hpp"

namespace syntha1c::baselines {

// Labels every case positive.
std::vector<int> zero_rule_predict(size_t n);

// Each label positive independently with the training-set positive rate.
std::vector<int> weighted_random_predict(double positive_rate, size_t n,
                                         uint64_t seed);

enum class Gender { Woman, Man };

// Questionnaire answers for the modified ADA/CDC risk test.
struct MultiRuleAnswer {
  double age_years;
  Gender gender;
  double sbp;
  double dbp;
  double bmi;
};

// Age band (0-3) + man (1) + elevated blood pressure (1) + weight band
// (0-3). Age bands close the questionnaire's gaps at the decade edges:
// [0,40) -> 0, [40,50) -> 1, [50,60) -> 2, [60,inf) -> 3. Weight bands are
// BMI-based: <25 -> 0, [25,30) -> 1, [30,40) -> 2, >=40 -> 3. The blood
// pressure point fires when sbp > 130 or dbp > 80.
int multi_rule_score(const MultiRuleAnswer& answer);

// Positive iff points >= 5 (DM) or points >= 3 (DM + pre-DM).
bool multi_rule_classify(int points, features::LabelTask task);

struct OlsModel {
  std::vector<double> coefficients;
  double intercept = 0.0;

  double predict(const std::vector<double>& x) const;
};

// Least squares over the encoded feature space with an intercept column.
// Solved by a rank-revealing complete orthogonal decomposition, so
// rank-deficient systems (one-hot collinearity) get the minimum-norm
// solution deterministically.
OlsModel ols_fit(const std::vector<std::vector<double>>& rows,
                 const std::vector<double>& targets);

}  // namespace syntha1c::baselines
