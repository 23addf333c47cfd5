#include "syntha1c/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace syntha1c {

Objective objective_from_string(const std::string& name) {
  if (name == "logistic") return Objective::Logistic;
  if (name == "squared") return Objective::Squared;
  throw std::invalid_argument("unknown objective '" + name + "'");
}

std::string to_string(Objective objective) {
  return objective == Objective::Logistic ? "logistic" : "squared";
}

namespace trees {

namespace {

constexpr double kProbabilityClamp = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double soft_threshold(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

double leaf_weight(double sum_g, double sum_h, const GbdtConfig& cfg) {
  return -soft_threshold(sum_g, cfg.l1_alpha) / (sum_h + cfg.l2_lambda);
}

double gain_term(double g, double h, double lambda) {
  return g * g / (h + lambda);
}

struct SplitCandidate {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& rows,
              const std::vector<double>& grad, const std::vector<double>& hess,
              const GbdtConfig& cfg)
      : rows_(rows), grad_(grad), hess_(hess), cfg_(cfg) {}

  Tree build() {
    std::vector<size_t> all(rows_.size());
    std::iota(all.begin(), all.end(), size_t{0});
    Tree tree;
    grow(tree, all, 0);
    return tree;
  }

 private:
  int grow(Tree& tree, const std::vector<size_t>& node_rows, int depth) {
    double sum_g = 0.0, sum_h = 0.0;
    for (size_t i : node_rows) {
      sum_g += grad_[i];
      sum_h += hess_[i];
    }

    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});

    SplitCandidate best;
    if (depth < cfg_.max_depth && node_rows.size() > 1) {
      best = find_best_split(node_rows, sum_g, sum_h);
    }

    if (!best.found) {
      tree.nodes[node_index].weight = leaf_weight(sum_g, sum_h, cfg_);
      return node_index;
    }

    std::vector<size_t> left_rows, right_rows;
    left_rows.reserve(node_rows.size());
    right_rows.reserve(node_rows.size());
    for (size_t i : node_rows) {
      if (rows_[i][static_cast<size_t>(best.feature)] < best.threshold) {
        left_rows.push_back(i);
      } else {
        right_rows.push_back(i);
      }
    }

    tree.nodes[node_index].feature_index = best.feature;
    tree.nodes[node_index].threshold = best.threshold;
    const int left = grow(tree, left_rows, depth + 1);
    tree.nodes[node_index].left = left;
    const int right = grow(tree, right_rows, depth + 1);
    tree.nodes[node_index].right = right;
    return node_index;
  }

  SplitCandidate find_best_split(const std::vector<size_t>& node_rows,
                                 double sum_g, double sum_h) {
    SplitCandidate best;
    const double parent_term = gain_term(sum_g, sum_h, cfg_.l2_lambda);
    const size_t n_features = rows_.front().size();

    std::vector<size_t> sorted = node_rows;
    for (size_t f = 0; f < n_features; ++f) {
      // Index tie-break pins the accumulation order of equal values.
      std::sort(sorted.begin(), sorted.end(), [&](size_t a, size_t b) {
        if (rows_[a][f] != rows_[b][f]) return rows_[a][f] < rows_[b][f];
        return a < b;
      });

      double left_g = 0.0, left_h = 0.0;
      for (size_t k = 0; k + 1 < sorted.size(); ++k) {
        left_g += grad_[sorted[k]];
        left_h += hess_[sorted[k]];
        const double value = rows_[sorted[k]][f];
        const double next = rows_[sorted[k + 1]][f];
        if (next <= value) continue;  // not a boundary between distinct values

        const double gain =
            0.5 * (gain_term(left_g, left_h, cfg_.l2_lambda) +
                   gain_term(sum_g - left_g, sum_h - left_h, cfg_.l2_lambda) -
                   parent_term);
        // Strict improvement keeps the lowest (feature, threshold) winner.
        if (gain > best.gain) {
          best.found = true;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (value + next);
          best.gain = gain;
        }
      }
    }
    return best;  // best.gain > 0 is guaranteed: it starts at zero
  }

  const std::vector<std::vector<double>>& rows_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  const GbdtConfig& cfg_;
};

}  // namespace

double Tree::predict(const std::vector<double>& x) const {
  size_t index = 0;
  while (!nodes[index].is_leaf()) {
    const auto& node = nodes[index];
    index = x[static_cast<size_t>(node.feature_index)] < node.threshold
                ? static_cast<size_t>(node.left)
                : static_cast<size_t>(node.right);
  }
  return nodes[index].weight;
}

double GbdtModel::predict_margin(const std::vector<double>& x) const {
  return predict_margin(x, trees.size());
}

double GbdtModel::predict_margin(const std::vector<double>& x,
                                 size_t n_trees) const {
  if (x.size() != n_features) {
    throw std::invalid_argument("gbdt: input width " + std::to_string(x.size()) +
                                " does not match training width " +
                                std::to_string(n_features));
  }
  n_trees = std::min(n_trees, trees.size());
  double margin = base_score;
  for (size_t t = 0; t < n_trees; ++t) {
    margin += config.learning_rate * trees[t].predict(x);
  }
  return margin;
}

double GbdtModel::predict(const std::vector<double>& x) const {
  return predict(x, trees.size());
}

double GbdtModel::predict(const std::vector<double>& x, size_t n_trees) const {
  const double margin = predict_margin(x, n_trees);
  return config.objective == Objective::Logistic ? sigmoid(margin) : margin;
}

GbdtModel fit_gbdt(const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& targets,
                   const GbdtConfig& config) {
  if (rows.empty()) {
    throw std::invalid_argument("fit_gbdt: empty training set");
  }
  if (rows.size() != targets.size()) {
    throw std::invalid_argument("fit_gbdt: rows/targets size mismatch");
  }
  const size_t width = rows.front().size();
  for (const auto& row : rows) {
    if (row.size() != width) {
      throw std::invalid_argument("fit_gbdt: ragged feature matrix");
    }
  }
  for (double y : targets) {
    if (!std::isfinite(y)) {
      throw std::invalid_argument("fit_gbdt: non-finite target");
    }
    if (config.objective == Objective::Logistic && y != 0.0 && y != 1.0) {
      throw std::invalid_argument(
          "fit_gbdt: logistic targets must be 0 or 1");
    }
  }

  GbdtModel model;
  model.config = config;
  model.n_features = width;

  const size_t n = rows.size();
  if (config.objective == Objective::Logistic) {
    double positives = 0.0;
    for (double y : targets) positives += y;
    double rate = positives / static_cast<double>(n);
    rate = std::clamp(rate, kProbabilityClamp, 1.0 - kProbabilityClamp);
    model.base_score = std::log(rate / (1.0 - rate));
  } else {
    double sum = 0.0;
    for (double y : targets) sum += y;
    model.base_score = sum / static_cast<double>(n);
  }

  std::vector<double> margin(n, model.base_score);
  std::vector<double> grad(n), hess(n);
  for (int round = 0; round < config.n_trees; ++round) {
    for (size_t i = 0; i < n; ++i) {
      if (config.objective == Objective::Logistic) {
        const double p = sigmoid(margin[i]);
        grad[i] = p - targets[i];
        hess[i] = p * (1.0 - p);
      } else {
        grad[i] = margin[i] - targets[i];
        hess[i] = 1.0;
      }
    }
    TreeBuilder builder(rows, grad, hess, config);
    Tree tree = builder.build();
    for (size_t i = 0; i < n; ++i) {
      margin[i] += config.learning_rate * tree.predict(rows[i]);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

nlohmann::json gbdt_to_json(const GbdtModel& model) {
  nlohmann::json doc;
  doc["objective"] = to_string(model.config.objective);
  doc["n_trees"] = model.config.n_trees;
  doc["max_depth"] = model.config.max_depth;
  doc["learning_rate"] = model.config.learning_rate;
  doc["l1_alpha"] = model.config.l1_alpha;
  doc["l2_lambda"] = model.config.l2_lambda;
  doc["base_score"] = model.base_score;
  doc["n_features"] = model.n_features;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) {
        nodes.push_back({{"weight", node.weight}});
      } else {
        nodes.push_back({{"feature", node.feature_index},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  doc["trees"] = std::move(trees);
  return doc;
}

GbdtModel gbdt_from_json(const nlohmann::json& doc) {
  GbdtModel model;
  model.config.objective = objective_from_string(doc.at("objective"));
  model.config.n_trees = doc.at("n_trees");
  model.config.max_depth = doc.at("max_depth");
  model.config.learning_rate = doc.at("learning_rate");
  model.config.l1_alpha = doc.at("l1_alpha");
  model.config.l2_lambda = doc.at("l2_lambda");
  model.base_score = doc.at("base_score");
  model.n_features = doc.at("n_features");
  for (const auto& tree_doc : doc.at("trees")) {
    Tree tree;
    for (const auto& node_doc : tree_doc.at("nodes")) {
      TreeNode node;
      if (node_doc.contains("weight")) {
        node.weight = node_doc.at("weight");
      } else {
        node.feature_index = node_doc.at("feature");
        node.threshold = node_doc.at("threshold");
        node.left = node_doc.at("left");
        node.right = node_doc.at("right");
      }
      tree.nodes.push_back(node);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace trees
}  // namespace syntha1c
