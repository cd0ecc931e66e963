#include "dst/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "dst/errors.hpp"
#include "dst/parallel.hpp"

namespace dst {

namespace {

BoolMatrix full_mask(int n) {
  BoolMatrix mask = BoolMatrix::Constant(n + 1, n + 1, false);
  for (int j = 0; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) mask(j, i) = (j != i);
  }
  return mask;
}

BoolMatrix constraint_mask(const Cascade& cascade, const ConstraintSet& constraints) {
  const int n = cascade.size();
  BoolMatrix mask = BoolMatrix::Constant(n + 1, n + 1, false);
  for (int j = 0; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) {
      if (j != i) mask(j, i) = constraints.allows(cascade, j, i);
    }
  }
  return mask;
}

struct Prepared {
  const Cascade* cascade = nullptr;
  EdgeFeatureTable table;
  BoolMatrix constrained;
  BoolMatrix full;
  std::optional<Arborescence> gold;
  bool skip = false;  // constrained mask admits no tree; discovered lazily

  Prepared(const Cascade& c, const FeatureConfig& config, FeatureAlphabet& alphabet,
           const ConstraintSet& constraints)
      : cascade(&c),
        table(c, config, alphabet),
        constrained(constraint_mask(c, constraints)),
        full(full_mask(c.size())) {}
};

Eigen::MatrixXd score_matrix(const Prepared& ex, const std::vector<double>& weights) {
  const int n = ex.table.size();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int j = 0; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) {
      if (j != i) s(j, i) = ex.table.score(j, i, weights);
    }
  }
  return s;
}

// Adds one cascade's log-likelihood and gradient; returns false when the
// cascade is infeasible under its constraint mask and must be skipped.
bool accumulate_example(Prepared& ex, const std::vector<double>& weights,
                        TrainMode mode, double& objective,
                        std::vector<double>& gradient) {
  if (ex.skip) return false;
  const int n = ex.table.size();
  EdgeScores scores;
  scores.s = score_matrix(ex, weights);
  scores.mask = ex.full;

  double shift = scores.s(0, 1);
  for (int j = 0; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) {
      if (j != i) shift = std::max(shift, scores.s(j, i));
    }
  }

  LaplacianWorkspace ws_full;
  try {
    ws_full = factorize(scores, shift);
  } catch (const NoValidTree&) {
    throw NumericalError("unconstrained partition function vanished for cascade '" +
                         ex.cascade->id() + "'");
  }
  const EdgeMarginals full_marginals = edge_marginals(ws_full, ex.full);

  if (mode == TrainMode::contrastive) {
    scores.mask = ex.constrained;
    LaplacianWorkspace ws_cons;
    try {
      ws_cons = factorize(scores, shift);
    } catch (const NoValidTree&) {
      ex.skip = true;
      return false;
    }
    objective += ws_cons.log_det - ws_full.log_det;
    const EdgeMarginals cons_marginals = edge_marginals(ws_cons, ex.constrained);
    for (int j = 0; j <= n; ++j) {
      for (int i = 1; i <= n; ++i) {
        const double coef = cons_marginals.p(j, i) - full_marginals.p(j, i);
        if (coef == 0.0) continue;
        for (std::uint32_t idx : ex.table.features(j, i)) gradient[idx] += coef;
      }
    }
  } else {
    const Arborescence& gold = *ex.gold;
    double gold_score = 0.0;
    for (int i = 1; i <= n; ++i) gold_score += scores.s(gold.parent_of(i), i);
    objective += gold_score - ws_full.log_partition();
    for (int i = 1; i <= n; ++i) {
      for (std::uint32_t idx : ex.table.features(gold.parent_of(i), i)) {
        gradient[idx] += 1.0;
      }
    }
    for (int j = 0; j <= n; ++j) {
      for (int i = 1; i <= n; ++i) {
        const double p = full_marginals.p(j, i);
        if (p == 0.0) continue;
        for (std::uint32_t idx : ex.table.features(j, i)) gradient[idx] -= p;
      }
    }
  }
  return true;
}

struct BlockResult {
  double objective = 0.0;
  std::vector<double> gradient;
  int skipped = 0;
};

ObjectiveResult evaluate_dataset(std::vector<Prepared>& prepared,
                                 const std::vector<double>& weights,
                                 const TrainConfig& config) {
  const long count = static_cast<long>(prepared.size());
  auto blocks = parallel_blocks<BlockResult>(
      count, config.workers, [&](long begin, long end) {
        BlockResult block;
        block.gradient.assign(weights.size(), 0.0);
        for (long k = begin; k < end; ++k) {
          if (!accumulate_example(prepared[static_cast<size_t>(k)], weights,
                                  config.mode, block.objective, block.gradient)) {
            ++block.skipped;
          }
        }
        return block;
      });

  ObjectiveResult result;
  result.gradient.assign(weights.size(), 0.0);
  for (const BlockResult& block : blocks) {
    result.objective += block.objective;
    result.skipped += block.skipped;
    for (size_t k = 0; k < weights.size(); ++k) {
      result.gradient[k] += block.gradient[k];
    }
  }
  if (result.skipped == static_cast<int>(prepared.size())) {
    throw NoValidTree("every cascade was skipped: no constraint-valid trees");
  }
  if (config.l2_lambda > 0.0) {
    double norm2 = 0.0;
    for (size_t k = 0; k < weights.size(); ++k) {
      norm2 += weights[k] * weights[k];
      result.gradient[k] -= 2.0 * config.l2_lambda * weights[k];
    }
    result.objective -= config.l2_lambda * norm2;
  }
  return result;
}

std::vector<Prepared> prepare_dataset(const std::vector<TrainExample>& dataset,
                                      const TrainConfig& config,
                                      const FeatureConfig& feature_config,
                                      const ConstraintSet& constraints,
                                      FeatureAlphabet& alphabet) {
  if (dataset.empty()) throw DataError("training dataset is empty");
  std::vector<Prepared> prepared;
  prepared.reserve(dataset.size());
  for (const TrainExample& example : dataset) {
    prepared.emplace_back(example.cascade, feature_config, alphabet, constraints);
    if (config.mode == TrainMode::supervised) {
      if (!example.gold) {
        throw DataError("supervised training requires gold links for cascade '" +
                        example.cascade.id() + "'");
      }
      if (!validate_arborescence(example.cascade, *example.gold,
                                 ConstraintSet::unconstrained())) {
        throw InvalidGoldTree("gold structure of cascade '" + example.cascade.id() +
                              "' is not a valid arborescence");
      }
      prepared.back().gold = example.gold;
    }
  }
  return prepared;
}

void check_theta(const ParameterVector& theta, const FeatureAlphabet& alphabet) {
  if (theta.size() != alphabet.size()) {
    throw DataError("parameter dimension " + std::to_string(theta.size()) +
                    " does not match alphabet size " + std::to_string(alphabet.size()));
  }
}

}  // namespace

double contrastive_log_likelihood(const Cascade& cascade, const ParameterVector& theta,
                                  const FeatureConfig& config,
                                  const ConstraintSet& constraints,
                                  FeatureAlphabet& alphabet) {
  check_theta(theta, alphabet);
  EdgeScores constrained = build_scores(cascade, theta.weights, config, constraints, alphabet);
  EdgeScores full = constrained.with_full_mask();
  double shift = full.s(0, 1);
  for (int j = 0; j <= full.n(); ++j) {
    for (int i = 1; i <= full.n(); ++i) {
      if (j != i) shift = std::max(shift, full.s(j, i));
    }
  }
  const double log_z_constrained = log_partition(constrained, shift);
  const double log_z = log_partition(full, shift);
  return log_z_constrained - log_z;
}

double supervised_log_likelihood(const Cascade& cascade, const Arborescence& gold,
                                 const ParameterVector& theta,
                                 const FeatureConfig& config,
                                 FeatureAlphabet& alphabet) {
  check_theta(theta, alphabet);
  if (!validate_arborescence(cascade, gold, ConstraintSet::unconstrained())) {
    throw InvalidGoldTree("gold structure of cascade '" + cascade.id() +
                          "' is not a valid arborescence");
  }
  EdgeScores full = build_scores(cascade, theta.weights, config,
                                 ConstraintSet::unconstrained(), alphabet);
  double gold_score = 0.0;
  for (int i = 1; i <= cascade.size(); ++i) {
    gold_score += full.s(gold.parent_of(i), i);
  }
  return gold_score - log_partition(full);
}

ObjectiveResult total_objective_and_gradient(const std::vector<TrainExample>& dataset,
                                             const ParameterVector& theta,
                                             const TrainConfig& config,
                                             const FeatureConfig& feature_config,
                                             const ConstraintSet& constraints,
                                             FeatureAlphabet& alphabet) {
  if (!alphabet.frozen()) {
    throw DataError("total_objective_and_gradient requires a frozen alphabet");
  }
  check_theta(theta, alphabet);
  std::vector<Prepared> prepared =
      prepare_dataset(dataset, config, feature_config, constraints, alphabet);
  return evaluate_dataset(prepared, theta.weights, config);
}

TrainReport fit(const std::vector<TrainExample>& dataset, const TrainConfig& config,
                const FeatureConfig& feature_config, const ConstraintSet& constraints,
                FeatureAlphabet& alphabet, std::optional<ParameterVector> initial) {
  if (config.iterations < 1) throw DataError("iterations must be >= 1");
  if (config.learning_rate <= 0.0) throw DataError("learning_rate must be positive");
  feature_config.validate();

  std::vector<Prepared> prepared =
      prepare_dataset(dataset, config, feature_config, constraints, alphabet);
  alphabet.freeze();

  ParameterVector theta;
  if (initial) {
    check_theta(*initial, alphabet);
    theta = std::move(*initial);
  } else if (config.init == InitScheme::zeros) {
    theta = ParameterVector::zeros(alphabet.size());
  } else {
    theta = ParameterVector::zeros(alphabet.size());
    std::mt19937 rng(config.init_seed);
    std::uniform_real_distribution<double> dist(-1e-3, 1e-3);
    for (size_t k = 1; k < theta.weights.size(); ++k) theta.weights[k] = dist(rng);
  }

  TrainReport report;
  report.objective_trace.reserve(static_cast<size_t>(config.iterations));
  int last_skipped = 0;
  for (int t = 0; t < config.iterations; ++t) {
    ObjectiveResult step = evaluate_dataset(prepared, theta.weights, config);
    if (!std::isfinite(step.objective)) {
      throw DivergenceDetected("objective became non-finite at iteration " +
                               std::to_string(t + 1));
    }
    report.objective_trace.push_back(step.objective);
    last_skipped = step.skipped;
    for (size_t k = 0; k < theta.weights.size(); ++k) {
      theta.weights[k] += config.learning_rate * step.gradient[k];
    }
  }

  report.final_objective = evaluate_dataset(prepared, theta.weights, config).objective;
  report.skipped_cascades = last_skipped;

  const int window = std::max(2, config.convergence_report_window);
  const auto& trace = report.objective_trace;
  if (trace.size() >= 2) {
    report.converged = true;
    const size_t first = trace.size() >= static_cast<size_t>(window)
                             ? trace.size() - static_cast<size_t>(window)
                             : 0;
    for (size_t k = first + 1; k < trace.size(); ++k) {
      const double delta = std::abs(trace[k] - trace[k - 1]);
      if (delta > 1e-6 * std::max(1.0, std::abs(trace[k]))) {
        report.converged = false;
        break;
      }
    }
  }
  report.final_theta = std::move(theta);
  return report;
}

void save_model(const std::string& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  char buf[64];
  out << "#dst_model\t1\n";
  out << "#feature_set\t"
      << (model.feature_config.feature_set == FeatureSet::basic ? "basic" : "enhanced")
      << '\n';
  out << "#time_bin_edges\t";
  for (size_t k = 0; k < model.feature_config.time_bin_edges.size(); ++k) {
    if (k) out << ',';
    out << model.feature_config.time_bin_edges[k];
  }
  out << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", model.feature_config.jaccard_bin_width);
  out << "#jaccard_bin_width\t" << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(model.alphabet.hash()));
  out << "#alphabet_hash\t" << buf << '\n';
  if (model.theta.size() != model.alphabet.size()) {
    throw DataError("model weights do not match alphabet size");
  }
  for (int k = 0; k < model.alphabet.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", model.theta.weights[static_cast<size_t>(k)]);
    out << model.alphabet.name(k) << '\t' << buf << '\n';
  }
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  Model model;
  model.feature_config.time_bin_edges.clear();
  std::string expected_hash;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected key<TAB>value", line_no);
    const std::string key = line.substr(0, tab);
    const std::string value = line.substr(tab + 1);
    if (key.size() > 1 && key[0] == '#') {
      const std::string name = key.substr(1);
      if (name == "dst_model") {
        header_seen = true;
      } else if (name == "feature_set") {
        if (value == "basic") {
          model.feature_config.feature_set = FeatureSet::basic;
        } else if (value == "enhanced") {
          model.feature_config.feature_set = FeatureSet::enhanced;
        } else {
          throw ParseError("unknown feature_set '" + value + "'", line_no);
        }
      } else if (name == "time_bin_edges") {
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          model.feature_config.time_bin_edges.push_back(std::stoll(item));
        }
      } else if (name == "jaccard_bin_width") {
        model.feature_config.jaccard_bin_width = std::stod(value);
      } else if (name == "alphabet_hash") {
        expected_hash = value;
      } else {
        throw ParseError("unknown header field '" + name + "'", line_no);
      }
      continue;
    }
    if (!header_seen) throw ParseError("missing #dst_model header", line_no);
    const int idx = model.alphabet.intern(key);
    if (idx != model.theta.size()) {
      throw ParseError("duplicate or out-of-order feature name '" + key + "'", line_no);
    }
    model.theta.weights.push_back(std::stod(value));
  }
  if (!header_seen) throw DataError("'" + path + "' is not a model file");
  model.alphabet.freeze();
  model.feature_config.validate();
  if (model.theta.size() != model.alphabet.size()) {
    throw ValidationError("model weights do not match alphabet entries");
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(model.alphabet.hash()));
  if (!expected_hash.empty() && expected_hash != buf) {
    throw ValidationError("alphabet hash mismatch: file is corrupt or edited");
  }
  return model;
}

}  // namespace dst
