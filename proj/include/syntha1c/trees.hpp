#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace syntha1c {

enum class Objective { Logistic, Squared };

Objective objective_from_string(const std::string& name);
std::string to_string(Objective objective);

namespace trees {

// Flat node storage; left/right index into the owning tree's node vector,
// -1 marks a leaf. Routing rule: go left iff x[feature] < threshold.
struct TreeNode {
  int feature_index = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const std::vector<double>& x) const;
};

struct GbdtConfig {
  Objective objective = Objective::Logistic;
  int n_trees = 32;
  int max_depth = 16;
  double learning_rate = 0.1;
  double l1_alpha = 1.0;
  double l2_lambda = 2.0;
};

struct GbdtModel {
  GbdtConfig config;
  double base_score = 0.0;  // log-odds for logistic, target mean for squared
  size_t n_features = 0;    // training width; predict validates against it
  std::vector<Tree> trees;

  // base_score + eta * sum of tree outputs; optionally truncated to the
  // first n_trees rounds for training-curve inspection.
  double predict_margin(const std::vector<double>& x) const;
  double predict_margin(const std::vector<double>& x, size_t n_trees) const;
  // Probability (logistic) or raw value (squared).
  double predict(const std::vector<double>& x) const;
  double predict(const std::vector<double>& x, size_t n_trees) const;
};

// Second-order boosting with exact greedy splits over sorted unique
// values. No subsampling, no histogramming; deterministic for fixed data
// and config. Candidate thresholds are midpoints between consecutive
// distinct values; equal-gain ties resolve to the lowest feature index,
// then the lowest threshold. Splits with non-positive gain are rejected.
GbdtModel fit_gbdt(const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& targets,
                   const GbdtConfig& config);

nlohmann::json gbdt_to_json(const GbdtModel& model);
GbdtModel gbdt_from_json(const nlohmann::json& doc);

}  // namespace trees
}  // namespace syntha1c
