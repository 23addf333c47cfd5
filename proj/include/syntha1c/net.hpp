#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "syntha1c/trees.hpp"  // Objective

namespace syntha1c::net {

struct TrainConfig {
  int epochs = 150;
  double learning_rate = 0.01;
  int lr_step_epochs = 25;
  double lr_decay = 0.5;
  int batch_size = 128;
  double dropout = 0.0;
  uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::vector<int> hidden_sizes = {64, 32};
};

// Step decay: learning_rate * decay^floor(epoch / step).
double lr_at_epoch(const TrainConfig& config, int epoch);

// Fully-connected net, ReLU hidden layers, single output unit. The head is
// sigmoid for the logistic objective and identity for squared loss.
struct MlpModel {
  Objective objective = Objective::Squared;
  std::vector<int> layer_sizes;  // input, hidden..., 1
  // weights[l] is row-major (layer_sizes[l+1] x layer_sizes[l]).
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  size_t input_width() const { return static_cast<size_t>(layer_sizes.front()); }
  // Pre-head output.
  double forward_margin(const std::vector<double>& x) const;
  // Probability (logistic) or raw value (squared); dropout is never
  // applied at inference.
  double predict(const std::vector<double>& x) const;
  // Mean loss over one batch; exposed for the gradient oracle.
  double loss(const std::vector<double>& x, double target) const;
};

// Deterministic given the seed: He-uniform fan-in initialization, shuffle
// stream, and dropout masks all come from one seeded stream. Throws if the
// loss turns non-finite, naming the epoch and batch. epoch_loss_out, when
// given, receives the mean training loss of each epoch.
MlpModel train_mlp(const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& targets,
                   const TrainConfig& config, Objective objective,
                   std::vector<double>* epoch_loss_out = nullptr);

// Backprop gradient of the single-sample loss for every parameter,
// compared against central finite differences (f(t+h)-f(t-h))/2h.
// Returns the max relative error, |a-n| / max(|a|, |n|, 1e-4).
double gradient_check(const MlpModel& model, const std::vector<double>& x,
                      double target, double h);

// Gradient of the mean loss over a batch, flattened layer by layer
// (weights then biases); backbone of both training and the check above.
std::vector<double> backprop_gradient(const MlpModel& model,
                                      const std::vector<std::vector<double>>& xs,
                                      const std::vector<double>& targets);

nlohmann::json mlp_to_json(const MlpModel& model);
MlpModel mlp_from_json(const nlohmann::json& doc);

}  // namespace syntha1c::net
