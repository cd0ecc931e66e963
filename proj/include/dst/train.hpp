#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dst/cascade.hpp"
#include "dst/features.hpp"
#include "dst/matrix_tree.hpp"

namespace dst {

struct ParameterVector {
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }
  static ParameterVector zeros(int m) {
    return ParameterVector{std::vector<double>(static_cast<size_t>(m), 0.0)};
  }
};

enum class TrainMode { contrastive, supervised };
enum class InitScheme { zeros, uniform_small };

struct TrainConfig {
  TrainMode mode = TrainMode::contrastive;
  double learning_rate = 5e-3;
  int iterations = 1500;
  double l2_lambda = 0.0;
  InitScheme init = InitScheme::zeros;
  int convergence_report_window = 2;
  int workers = 0;        // 0 = hardware concurrency
  unsigned init_seed = 1; // for uniform_small initialization
};

struct TrainExample {
  Cascade cascade;
  std::optional<Arborescence> gold;
};

struct TrainReport {
  std::vector<double> objective_trace;  // one entry per iteration run
  ParameterVector final_theta;
  bool converged = false;
  double final_objective = 0.0;  // objective re-evaluated at final_theta
  int skipped_cascades = 0;      // infeasible under the constraint mask
};

// log Z_C - log Z: log-probability that a tree drawn from the model
// satisfies the constraints. Both partition functions share one shift.
// Throws NoValidTree when the constrained mask admits no tree.
double contrastive_log_likelihood(const Cascade& cascade, const ParameterVector& theta,
                                  const FeatureConfig& config,
                                  const ConstraintSet& constraints,
                                  FeatureAlphabet& alphabet);

// Log-probability of the gold tree under the unconstrained distribution.
double supervised_log_likelihood(const Cascade& cascade, const Arborescence& gold,
                                 const ParameterVector& theta,
                                 const FeatureConfig& config,
                                 FeatureAlphabet& alphabet);

struct ObjectiveResult {
  double objective = 0.0;
  std::vector<double> gradient;
  int skipped = 0;
};

// Sum of per-cascade log-likelihoods minus l2_lambda * ||theta||^2, with
// the matching gradient. Cascades whose constrained mask admits no tree
// are skipped and counted; throws if every cascade skips. Requires a
// frozen alphabet.
ObjectiveResult total_objective_and_gradient(const std::vector<TrainExample>& dataset,
                                             const ParameterVector& theta,
                                             const TrainConfig& config,
                                             const FeatureConfig& feature_config,
                                             const ConstraintSet& constraints,
                                             FeatureAlphabet& alphabet);

// Batch gradient ascent with a fixed learning rate. Feature extraction
// happens once up front (freezing the alphabet if needed); the objective
// is recorded every iteration before the step is taken.
TrainReport fit(const std::vector<TrainExample>& dataset, const TrainConfig& config,
                const FeatureConfig& feature_config, const ConstraintSet& constraints,
                FeatureAlphabet& alphabet,
                std::optional<ParameterVector> initial = std::nullopt);

struct Model {
  FeatureConfig feature_config;
  FeatureAlphabet alphabet;
  ParameterVector theta;
};

// Plain-text model file: '#'-prefixed header lines (feature set, bin
// configuration, alphabet hash) followed by one "name<TAB>weight" line per
// parameter in index order. Weights round-trip exactly.
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace dst
