#include "syntha1c/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "syntha1c/rng.hpp"

namespace syntha1c::net {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sample_loss(double margin, double target, Objective objective) {
  if (objective == Objective::Logistic) {
    return softplus(margin) - target * margin;
  }
  const double diff = margin - target;
  return diff * diff;
}

double sample_loss_grad(double margin, double target, Objective objective) {
  if (objective == Objective::Logistic) {
    return sigmoid(margin) - target;
  }
  return 2.0 * (margin - target);
}

struct ForwardState {
  // activations[0] is the input; activations[l+1] the (possibly dropped)
  // post-ReLU output of layer l. preacts[l] holds layer l's affine output.
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> preacts;
  std::vector<std::vector<double>> dropout_scale;  // per hidden unit
  double margin = 0.0;
};

ForwardState forward(const MlpModel& model, const std::vector<double>& x,
                     double dropout, Rng* rng) {
  const size_t n_layers = model.weights.size();
  ForwardState state;
  state.activations.resize(n_layers + 1);
  state.preacts.resize(n_layers);
  state.dropout_scale.resize(n_layers);
  state.activations[0] = x;

  for (size_t l = 0; l < n_layers; ++l) {
    const auto rows = static_cast<size_t>(model.layer_sizes[l + 1]);
    const auto cols = static_cast<size_t>(model.layer_sizes[l]);
    const auto& in = state.activations[l];
    auto& z = state.preacts[l];
    z.assign(rows, 0.0);
    for (size_t r = 0; r < rows; ++r) {
      double acc = model.biases[l][r];
      const double* w = model.weights[l].data() + r * cols;
      for (size_t c = 0; c < cols; ++c) acc += w[c] * in[c];
      z[r] = acc;
    }
    if (l + 1 == n_layers) {
      state.margin = z[0];
      state.activations[l + 1] = z;
    } else {
      auto& out = state.activations[l + 1];
      out.assign(rows, 0.0);
      auto& scale = state.dropout_scale[l];
      scale.assign(rows, 1.0);
      const bool use_dropout = rng != nullptr && dropout > 0.0;
      for (size_t r = 0; r < rows; ++r) {
        double a = z[r] > 0.0 ? z[r] : 0.0;
        if (use_dropout) {
          // Inverted dropout: surviving units are rescaled so inference
          // needs no correction.
          scale[r] = rng->bernoulli(dropout) ? 0.0 : 1.0 / (1.0 - dropout);
          a *= scale[r];
        }
        out[r] = a;
      }
    }
  }
  return state;
}

size_t parameter_count(const MlpModel& model) {
  size_t count = 0;
  for (size_t l = 0; l < model.weights.size(); ++l) {
    count += model.weights[l].size() + model.biases[l].size();
  }
  return count;
}

// Accumulates the gradient of the mean batch loss into grad (flattened as
// W0,b0,W1,b1,...). Returns the mean loss.
double batch_gradient(const MlpModel& model,
                      const std::vector<std::vector<double>>& rows,
                      const std::vector<size_t>& batch,
                      const std::vector<double>& targets, double dropout,
                      Rng* rng, std::vector<double>& grad) {
  const size_t n_layers = model.weights.size();
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;

  for (size_t i : batch) {
    ForwardState state = forward(model, rows[i], dropout, rng);
    loss += sample_loss(state.margin, targets[i], model.objective) * inv_batch;

    // delta starts as dL/dmargin and is pushed back layer by layer.
    std::vector<double> delta{
        sample_loss_grad(state.margin, targets[i], model.objective) *
        inv_batch};
    size_t offset = grad.size();
    for (size_t l = n_layers; l-- > 0;) {
      const auto out_dim = static_cast<size_t>(model.layer_sizes[l + 1]);
      const auto in_dim = static_cast<size_t>(model.layer_sizes[l]);
      offset -= out_dim * in_dim + out_dim;
      double* w_grad = grad.data() + offset;
      double* b_grad = w_grad + out_dim * in_dim;
      const auto& in = state.activations[l];
      for (size_t r = 0; r < out_dim; ++r) {
        b_grad[r] += delta[r];
        double* wg = w_grad + r * in_dim;
        for (size_t c = 0; c < in_dim; ++c) wg[c] += delta[r] * in[c];
      }
      if (l == 0) break;
      std::vector<double> prev(in_dim, 0.0);
      for (size_t c = 0; c < in_dim; ++c) {
        double acc = 0.0;
        for (size_t r = 0; r < out_dim; ++r) {
          acc += model.weights[l][r * in_dim + c] * delta[r];
        }
        // Through the dropout scaling and the ReLU of layer l-1.
        acc *= state.dropout_scale[l - 1][c];
        prev[c] = state.preacts[l - 1][c] > 0.0 ? acc : 0.0;
      }
      delta = std::move(prev);
    }
  }
  return loss;
}

std::vector<double*> parameter_view(MlpModel& model) {
  std::vector<double*> view;
  view.reserve(parameter_count(model));
  for (size_t l = 0; l < model.weights.size(); ++l) {
    for (auto& w : model.weights[l]) view.push_back(&w);
    for (auto& b : model.biases[l]) view.push_back(&b);
  }
  return view;
}

}  // namespace

double lr_at_epoch(const TrainConfig& config, int epoch) {
  const int steps = config.lr_step_epochs > 0 ? epoch / config.lr_step_epochs : 0;
  return config.learning_rate * std::pow(config.lr_decay, steps);
}

double MlpModel::forward_margin(const std::vector<double>& x) const {
  if (x.size() != input_width()) {
    throw std::invalid_argument("mlp: input width " + std::to_string(x.size()) +
                                " does not match model width " +
                                std::to_string(input_width()));
  }
  return forward(*this, x, 0.0, nullptr).margin;
}

double MlpModel::predict(const std::vector<double>& x) const {
  const double margin = forward_margin(x);
  return objective == Objective::Logistic ? sigmoid(margin) : margin;
}

double MlpModel::loss(const std::vector<double>& x, double target) const {
  return sample_loss(forward_margin(x), target, objective);
}

MlpModel train_mlp(const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& targets,
                   const TrainConfig& config, Objective objective,
                   std::vector<double>* epoch_loss_out) {
  if (rows.empty() || rows.size() != targets.size()) {
    throw std::invalid_argument("train_mlp: bad training set");
  }
  if (config.epochs < 1 || config.batch_size < 1 ||
      !(config.lr_decay > 0.0 && config.lr_decay <= 1.0)) {
    throw std::invalid_argument("train_mlp: invalid config");
  }
  if (objective == Objective::Logistic) {
    for (double y : targets) {
      if (y != 0.0 && y != 1.0) {
        throw std::invalid_argument("train_mlp: logistic targets must be 0/1");
      }
    }
  }

  MlpModel model;
  model.objective = objective;
  model.layer_sizes.push_back(static_cast<int>(rows.front().size()));
  for (int h : config.hidden_sizes) {
    if (h < 1) throw std::invalid_argument("train_mlp: bad hidden size");
    model.layer_sizes.push_back(h);
  }
  model.layer_sizes.push_back(1);

  Rng rng(config.seed);
  for (size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
    const auto fan_in = static_cast<size_t>(model.layer_sizes[l]);
    const auto fan_out = static_cast<size_t>(model.layer_sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = rng.uniform(-limit, limit);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }

  auto params = parameter_view(model);
  const size_t n_params = params.size();
  std::vector<double> grad(n_params, 0.0);
  std::vector<double> adam_m(n_params, 0.0), adam_v(n_params, 0.0);
  int64_t step = 0;

  const size_t n = rows.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t batch_index = 0;
    for (size_t start = 0; start < n;
         start += static_cast<size_t>(config.batch_size), ++batch_index) {
      const size_t stop = std::min(n, start + static_cast<size_t>(config.batch_size));
      const std::vector<size_t> batch(order.begin() + start,
                                      order.begin() + stop);
      const double loss = batch_gradient(model, rows, batch, targets,
                                         config.dropout, &rng, grad);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train_mlp: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index));
      }
      epoch_loss += loss * static_cast<double>(batch.size());

      ++step;
      const double bc1 = 1.0 - std::pow(config.adam_beta1, step);
      const double bc2 = 1.0 - std::pow(config.adam_beta2, step);
      for (size_t k = 0; k < n_params; ++k) {
        adam_m[k] = config.adam_beta1 * adam_m[k] +
                    (1.0 - config.adam_beta1) * grad[k];
        adam_v[k] = config.adam_beta2 * adam_v[k] +
                    (1.0 - config.adam_beta2) * grad[k] * grad[k];
        const double m_hat = adam_m[k] / bc1;
        const double v_hat = adam_v[k] / bc2;
        *params[k] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
      }
    }
    if (epoch_loss_out) {
      epoch_loss_out->push_back(epoch_loss / static_cast<double>(n));
    }
  }
  return model;
}

std::vector<double> backprop_gradient(
    const MlpModel& model, const std::vector<std::vector<double>>& xs,
    const std::vector<double>& targets) {
  if (xs.empty() || xs.size() != targets.size()) {
    throw std::invalid_argument("backprop_gradient: bad batch");
  }
  std::vector<double> grad(parameter_count(model), 0.0);
  std::vector<size_t> batch(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) batch[i] = i;
  batch_gradient(model, xs, batch, targets, 0.0, nullptr, grad);
  return grad;
}

double gradient_check(const MlpModel& model, const std::vector<double>& x,
                      double target, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("gradient_check: h must be positive");
  }
  const std::vector<double> analytic =
      backprop_gradient(model, {x}, {target});

  MlpModel probe = model;
  auto params = parameter_view(probe);
  double max_rel = 0.0;
  for (size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + h;
    const double plus = probe.loss(x, target);
    *params[k] = saved - h;
    const double minus = probe.loss(x, target);
    *params[k] = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double denom =
        std::max({std::fabs(analytic[k]), std::fabs(numeric), 1e-4});
    max_rel = std::max(max_rel, std::fabs(analytic[k] - numeric) / denom);
  }
  return max_rel;
}

nlohmann::json mlp_to_json(const MlpModel& model) {
  nlohmann::json doc;
  doc["objective"] = to_string(model.objective);
  doc["layer_sizes"] = model.layer_sizes;
  doc["weights"] = model.weights;
  doc["biases"] = model.biases;
  return doc;
}

MlpModel mlp_from_json(const nlohmann::json& doc) {
  MlpModel model;
  model.objective = objective_from_string(doc.at("objective"));
  model.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
  model.weights = doc.at("weights").get<std::vector<std::vector<double>>>();
  model.biases = doc.at("biases").get<std::vector<std::vector<double>>>();
  if (model.weights.size() + 1 != model.layer_sizes.size() ||
      model.biases.size() != model.weights.size()) {
    throw std::runtime_error("mlp_from_json: inconsistent layer document");
  }
  return model;
}

}  // namespace syntha1c::net
