#include "syntha1c/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "syntha1c/rng.hpp"

namespace syntha1c::robustness {

namespace {

constexpr double kMinPerturbationNorm = 1e-9;

}  // namespace

size_t PerturbationSpace::cardinality_tag() const {
  size_t count = 0;
  for (double s : input_sigma) {
    if (s > 0.0) ++count;
  }
  return count;
}

double local_smoothness(const PredictFn& predict,
                        const std::vector<double>& point,
                        const PerturbationSpace& space,
                        const SmoothnessConfig& config) {
  if (point.size() != space.input_sigma.size()) {
    throw std::invalid_argument("local_smoothness: point width mismatch");
  }
  if (config.q_samples < 1 || !(config.radius > 0.0)) {
    throw std::invalid_argument("local_smoothness: invalid config");
  }
  if (!(space.sigma_y > 0.0)) {
    throw std::invalid_argument("local_smoothness: sigma_y must be positive");
  }
  if (space.cardinality_tag() == 0) {
    throw std::invalid_argument(
        "local_smoothness: no perturbable (continuous) coordinate");
  }

  Rng rng(config.seed);
  const double y_center = predict(point);
  std::vector<double> perturbed(point.size());

  double total = 0.0;
  for (int k = 0; k < config.q_samples; ++k) {
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      perturbed = point;
      for (size_t j = 0; j < point.size(); ++j) {
        if (space.input_sigma[j] <= 0.0) continue;  // categorical slot
        const double dz = rng.normal(0.0, config.radius);
        perturbed[j] += dz * space.input_sigma[j];
        norm_sq += dz * dz;
      }
    } while (std::sqrt(norm_sq) < kMinPerturbationNorm);

    const double dy = std::fabs(predict(perturbed) - y_center) / space.sigma_y;
    total += dy / std::sqrt(norm_sq);
  }
  return total / static_cast<double>(config.q_samples);
}

SmoothnessReport global_smoothness(
    const PredictFn& predict, const std::vector<std::vector<double>>& points,
    const PerturbationSpace& space, const SmoothnessConfig& config) {
  if (points.empty()) {
    throw std::invalid_argument("global_smoothness: empty dataset");
  }

  std::vector<size_t> selected(points.size());
  std::iota(selected.begin(), selected.end(), size_t{0});
  if (config.eval_cap > 0 && config.eval_cap < points.size()) {
    Rng rng(Rng::derive_seed(config.seed, 0));
    rng.shuffle(selected);
    selected.resize(config.eval_cap);
    std::sort(selected.begin(), selected.end());
  }

  SmoothnessReport report;
  report.config = config;
  report.cardinality_tag = space.cardinality_tag();
  report.mu_values.reserve(selected.size());
  for (size_t rank = 0; rank < selected.size(); ++rank) {
    SmoothnessConfig point_config = config;
    // Per-point substream keyed by dataset index, not evaluation order.
    point_config.seed = Rng::derive_seed(config.seed, selected[rank] + 1);
    report.mu_values.push_back(
        local_smoothness(predict, points[selected[rank]], space, point_config));
  }
  report.global_m =
      std::accumulate(report.mu_values.begin(), report.mu_values.end(), 0.0) /
      static_cast<double>(report.mu_values.size());
  return report;
}

void require_comparable(const SmoothnessReport& a, const SmoothnessReport& b) {
  if (a.cardinality_tag != b.cardinality_tag) {
    throw std::invalid_argument(
        "smoothness reports are not comparable: feature-set cardinality " +
        std::to_string(a.cardinality_tag) + " vs " +
        std::to_string(b.cardinality_tag));
  }
}

namespace {

// Histogram cell probabilities with lambda smoothing added to every cell.
std::vector<double> smoothed_distribution(const std::vector<size_t>& counts,
                                          size_t n_values, double smoothing) {
  std::vector<double> probs(counts.size());
  const double denom = static_cast<double>(n_values) +
                       smoothing * static_cast<double>(counts.size());
  for (size_t i = 0; i < counts.size(); ++i) {
    probs[i] = (static_cast<double>(counts[i]) + smoothing) / denom;
  }
  return probs;
}

double kl_between(const std::vector<double>& p, const std::vector<double>& q) {
  double total = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    total += p[i] * std::log(p[i] / q[i]);
  }
  return total;
}

struct CellAssigner {
  size_t n_cells = 0;
  double lo = 0.0;
  double width = 0.0;
  bool categorical = false;

  size_t cell_of(double value) const {
    if (categorical) {
      const auto code = static_cast<long>(value);
      if (code < 0 || static_cast<size_t>(code) >= n_cells) {
        throw std::invalid_argument("empirical_kl: category code out of range");
      }
      return static_cast<size_t>(code);
    }
    if (width <= 0.0) return 0;  // constant support collapses to one cell
    auto cell = static_cast<long>((value - lo) / width);
    cell = std::clamp(cell, 0L, static_cast<long>(n_cells) - 1);
    return static_cast<size_t>(cell);
  }
};

CellAssigner make_assigner(const KlColumn& p, const KlColumn& q,
                           const BinningSpec& binning) {
  CellAssigner assigner;
  if (p.categorical) {
    assigner.categorical = true;
    assigner.n_cells = std::max(p.vocab_size, q.vocab_size);
    return assigner;
  }
  double lo = p.values.front(), hi = p.values.front();
  for (double v : p.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : q.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  assigner.n_cells = static_cast<size_t>(binning.bins);
  assigner.lo = lo;
  assigner.width = (hi - lo) / static_cast<double>(binning.bins);
  return assigner;
}

}  // namespace

ShiftReport empirical_kl(const std::map<std::string, KlColumn>& p_columns,
                         const std::map<std::string, KlColumn>& q_columns,
                         const std::vector<std::string>& feature_ids,
                         const BinningSpec& binning) {
  if (feature_ids.empty()) {
    throw std::invalid_argument("empirical_kl: no features listed");
  }
  if (binning.bins < 1 || !(binning.smoothing > 0.0)) {
    throw std::invalid_argument("empirical_kl: invalid binning spec");
  }

  std::vector<CellAssigner> assigners;
  std::vector<const KlColumn*> p_cols, q_cols;
  for (const auto& id : feature_ids) {
    const auto p_it = p_columns.find(id);
    const auto q_it = q_columns.find(id);
    if (p_it == p_columns.end() || q_it == q_columns.end()) {
      throw std::invalid_argument("empirical_kl: feature '" + id +
                                  "' absent from a dataset");
    }
    if (p_it->second.values.empty() || q_it->second.values.empty()) {
      throw std::invalid_argument("empirical_kl: feature '" + id +
                                  "' has no values");
    }
    if (p_it->second.categorical != q_it->second.categorical) {
      throw std::invalid_argument("empirical_kl: feature '" + id +
                                  "' dtype disagrees between datasets");
    }
    p_cols.push_back(&p_it->second);
    q_cols.push_back(&q_it->second);
    assigners.push_back(make_assigner(p_it->second, q_it->second, binning));
  }

  ShiftReport report;
  report.binning = binning;

  if (!binning.joint) {
    for (size_t f = 0; f < feature_ids.size(); ++f) {
      const auto& assigner = assigners[f];
      std::vector<size_t> p_counts(assigner.n_cells, 0);
      std::vector<size_t> q_counts(assigner.n_cells, 0);
      for (double v : p_cols[f]->values) ++p_counts[assigner.cell_of(v)];
      for (double v : q_cols[f]->values) ++q_counts[assigner.cell_of(v)];
      const double kl = kl_between(
          smoothed_distribution(p_counts, p_cols[f]->values.size(),
                                binning.smoothing),
          smoothed_distribution(q_counts, q_cols[f]->values.size(),
                                binning.smoothing));
      report.per_feature[feature_ids[f]] = kl;
      report.total += kl;
    }
    return report;
  }

  // Joint mode: one cell per tuple of per-feature cells.
  size_t n_cells = 1;
  for (const auto& assigner : assigners) n_cells *= assigner.n_cells;
  if (n_cells > (1u << 24)) {
    throw std::invalid_argument("empirical_kl: joint histogram too large");
  }
  const size_t p_n = p_cols.front()->values.size();
  const size_t q_n = q_cols.front()->values.size();
  for (size_t f = 0; f < feature_ids.size(); ++f) {
    if (p_cols[f]->values.size() != p_n || q_cols[f]->values.size() != q_n) {
      throw std::invalid_argument(
          "empirical_kl: joint mode needs aligned columns");
    }
  }
  std::vector<size_t> p_counts(n_cells, 0), q_counts(n_cells, 0);
  auto tuple_cell = [&](const std::vector<const KlColumn*>& cols, size_t row) {
    size_t cell = 0;
    for (size_t f = 0; f < cols.size(); ++f) {
      cell = cell * assigners[f].n_cells +
             assigners[f].cell_of(cols[f]->values[row]);
    }
    return cell;
  };
  for (size_t i = 0; i < p_n; ++i) ++p_counts[tuple_cell(p_cols, i)];
  for (size_t i = 0; i < q_n; ++i) ++q_counts[tuple_cell(q_cols, i)];
  report.total = kl_between(
      smoothed_distribution(p_counts, p_n, binning.smoothing),
      smoothed_distribution(q_counts, q_n, binning.smoothing));
  return report;
}

}  // namespace syntha1c::robustness
