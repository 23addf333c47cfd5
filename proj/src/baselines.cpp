#include "syntha1c/baselines.hpp"

#include <stdexcept>

#include <Eigen/Dense>

#include "syntha1c/rng.hpp"

namespace syntha1c::baselines {

std::vector<int> zero_rule_predict(size_t n) {
  return std::vector<int>(n, 1);
}

std::vector<int> weighted_random_predict(double positive_rate, size_t n,
                                         uint64_t seed) {
  if (positive_rate < 0.0 || positive_rate > 1.0) {
    throw std::invalid_argument(
        "weighted_random_predict: rate must be in [0,1]");
  }
  Rng rng(seed);
  std::vector<int> labels(n);
  for (auto& label : labels) {
    label = rng.bernoulli(positive_rate) ? 1 : 0;
  }
  return labels;
}

int multi_rule_score(const MultiRuleAnswer& answer) {
  if (answer.age_years < 0.0 || answer.sbp <= 0.0 || answer.dbp <= 0.0) {
    throw std::invalid_argument("multi_rule_score: invalid answer");
  }
  int points = 0;
  if (answer.age_years >= 60.0) points += 3;
  else if (answer.age_years >= 50.0) points += 2;
  else if (answer.age_years >= 40.0) points += 1;

  if (answer.gender == Gender::Man) points += 1;
  if (answer.sbp > 130.0 || answer.dbp > 80.0) points += 1;

  if (answer.bmi >= 40.0) points += 3;
  else if (answer.bmi >= 30.0) points += 2;
  else if (answer.bmi >= 25.0) points += 1;

  return points;
}

bool multi_rule_classify(int points, features::LabelTask task) {
  return task == features::LabelTask::Dm ? points >= 5 : points >= 3;
}

double OlsModel::predict(const std::vector<double>& x) const {
  if (x.size() != coefficients.size()) {
    throw std::invalid_argument("ols: input width mismatch");
  }
  double acc = intercept;
  for (size_t i = 0; i < x.size(); ++i) acc += coefficients[i] * x[i];
  return acc;
}

OlsModel ols_fit(const std::vector<std::vector<double>>& rows,
                 const std::vector<double>& targets) {
  if (rows.empty() || rows.size() != targets.size()) {
    throw std::invalid_argument("ols_fit: bad training set");
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());

  Eigen::MatrixXd design(n, d + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      design(i, j + 1) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    y(i) = targets[static_cast<size_t>(i)];
  }

  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  const Eigen::VectorXd solution = cod.solve(y);

  OlsModel model;
  model.intercept = solution(0);
  model.coefficients.resize(static_cast<size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    model.coefficients[static_cast<size_t>(j)] = solution(j + 1);
  }
  return model;
}

}  // namespace syntha1c::baselines
