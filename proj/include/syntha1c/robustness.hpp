#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace syntha1c::robustness {

using PredictFn = std::function<double(const std::vector<double>&)>;

struct SmoothnessConfig {
  int q_samples = 128;    // Monte-Carlo draws per neighborhood
  double radius = 0.1;    // perturbation scale in per-feature-normalized units
  uint64_t seed = 0;
  size_t eval_cap = 0;    // 0 = evaluate every dataset point
};

// How each input coordinate of the model may be perturbed: sigma 0 marks a
// categorical one-hot slot (never perturbed, contributes nothing to the
// perturbation norm); a positive sigma is the feature's SD expressed in the
// units the model consumes (1 for standardized inputs, the raw-scale SD
// otherwise). sigma_y normalizes output deviations.
struct PerturbationSpace {
  std::vector<double> input_sigma;
  double sigma_y = 1.0;
  // Reports are comparable only within one feature set; the tag is the
  // count of perturbable coordinates.
  size_t cardinality_tag() const;
};

// Monte-Carlo local smoothness at one point: mean over Q draws of the
// normalized output deviation divided by the normalized perturbation norm.
// Continuous normalized coordinates are drawn i.i.d. Normal(0, radius^2);
// draws with norm < 1e-9 are rejected and redrawn.
double local_smoothness(const PredictFn& predict,
                        const std::vector<double>& point,
                        const PerturbationSpace& space,
                        const SmoothnessConfig& config);

struct SmoothnessReport {
  std::vector<double> mu_values;
  double global_m = 0.0;  // arithmetic mean of mu_values
  SmoothnessConfig config;
  size_t cardinality_tag = 0;
};

// Mean mu over min(N, eval_cap) dataset points; the capped subset is a
// deterministic seeded subsample. Each point's perturbations come from a
// per-point derived stream, so results do not depend on evaluation order.
SmoothnessReport global_smoothness(const PredictFn& predict,
                                   const std::vector<std::vector<double>>& points,
                                   const PerturbationSpace& space,
                                   const SmoothnessConfig& config);

// Guards the Monte-Carlo normalization caveat: smoothness values from
// feature sets of different cardinality must not be compared.
void require_comparable(const SmoothnessReport& a, const SmoothnessReport& b);

struct KlColumn {
  bool categorical = false;
  size_t vocab_size = 0;  // categorical only
  std::vector<double> values;
};

struct BinningSpec {
  int bins = 10;          // equal-width bins over the combined support
  double smoothing = 0.5; // additive count per cell
  bool joint = false;     // joint histogram over all features instead of
                          // the per-feature marginal sum
};

struct ShiftReport {
  std::map<std::string, double> per_feature;  // empty in joint mode
  double total = 0.0;
  BinningSpec binning;
};

// Empirical D_KL(P || Q) from binned histograms with additive smoothing.
// Default mode sums per-feature marginal divergences; joint mode bins the
// full feature tuple.
ShiftReport empirical_kl(const std::map<std::string, KlColumn>& p_columns,
                         const std::map<std::string, KlColumn>& q_columns,
                         const std::vector<std::string>& feature_ids,
                         const BinningSpec& binning);

}  // namespace syntha1c::robustness
