#include "dst/matrix_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dst {

namespace {

constexpr double kLogZeroDet = -690.0;  // log(1e-300), the zero-determinant tolerance

}  // namespace

EdgeScores EdgeScores::make(int n) {
  EdgeScores scores;
  scores.s = Eigen::MatrixXd::Zero(n + 1, n + 1);
  scores.mask = BoolMatrix::Constant(n + 1, n + 1, false);
  for (int j = 0; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) {
      scores.mask(j, i) = (j != i);
    }
  }
  return scores;
}

EdgeScores EdgeScores::with_full_mask() const {
  EdgeScores full = EdgeScores::make(n());
  full.s = s;
  return full;
}

EdgeScores build_scores(const Cascade& cascade, const std::vector<double>& weights,
                        const FeatureConfig& config, const ConstraintSet& constraints,
                        FeatureAlphabet& alphabet) {
  if (!alphabet.frozen()) {
    throw DataError("build_scores requires a frozen alphabet");
  }
  if (static_cast<int>(weights.size()) != alphabet.size()) {
    throw DataError("weight dimension does not match alphabet size");
  }
  EdgeFeatureTable table(cascade, config, alphabet);
  return scores_from_table(table, weights, cascade, constraints);
}

EdgeScores scores_from_table(const EdgeFeatureTable& table,
                             const std::vector<double>& weights,
                             const Cascade& cascade,
                             const ConstraintSet& constraints) {
  const int n = table.size();
  EdgeScores scores;
  scores.s = Eigen::MatrixXd::Zero(n + 1, n + 1);
  scores.mask = BoolMatrix::Constant(n + 1, n + 1, false);
  for (int j = 0; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) {
      if (j == i) continue;
      scores.s(j, i) = table.score(j, i, weights);
      scores.mask(j, i) = constraints.allows(cascade, j, i);
    }
  }
  return scores;
}

LaplacianWorkspace factorize(const EdgeScores& scores,
                             std::optional<double> shift_opt) {
  const int n = scores.n();
  LaplacianWorkspace ws;

  double shift = 0.0;
  if (shift_opt) {
    shift = *shift_opt;
  } else {
    shift = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= n; ++j) {
      for (int i = 1; i <= n; ++i) {
        if (scores.mask(j, i)) shift = std::max(shift, scores.s(j, i));
      }
    }
    if (!std::isfinite(shift)) shift = 0.0;  // empty mask; determinant will be 0
  }
  ws.shift = shift;

  ws.u = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int j = 0; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) {
      if (scores.mask(j, i)) ws.u(j, i) = std::exp(scores.s(j, i) - shift);
    }
  }

  ws.laplacian = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i <= n; ++i) {
    double total_in = 0.0;
    for (int k = 0; k <= n; ++k) {
      if (k != i) total_in += ws.u(k, i);
    }
    ws.laplacian(i - 1, i - 1) = total_in;
    for (int j = 1; j <= n; ++j) {
      if (j != i) ws.laplacian(j - 1, i - 1) = -ws.u(j, i);
    }
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(ws.laplacian);
  double log_abs_det = 0.0;
  double sign = lu.permutationP().determinant();  // +1 or -1
  for (int k = 0; k < n; ++k) {
    const double d = lu.matrixLU()(k, k);
    if (d == 0.0) {
      throw NoValidTree("constraint mask admits no arborescence (singular Laplacian)");
    }
    log_abs_det += std::log(std::abs(d));
    if (d < 0.0) sign = -sign;
  }
  if (log_abs_det < kLogZeroDet) {
    throw NoValidTree("constraint mask admits no arborescence (vanishing determinant)");
  }
  if (sign < 0.0) {
    throw NumericalError("negative Laplacian determinant");
  }
  ws.log_det = log_abs_det;
  ws.inverse = lu.inverse();
  return ws;
}

double log_partition(const EdgeScores& scores, std::optional<double> shift) {
  return factorize(scores, shift).log_partition();
}

EdgeMarginals edge_marginals(const LaplacianWorkspace& workspace,
                             const BoolMatrix& mask) {
  const int n = workspace.n();
  EdgeMarginals marginals;
  marginals.p = Eigen::MatrixXd::Zero(n + 1, n + 1);
  const Eigen::MatrixXd& inv = workspace.inverse;
  for (int i = 1; i <= n; ++i) {
    const double diag = inv(i - 1, i - 1);
    for (int j = 0; j <= n; ++j) {
      if (j == i || !mask(j, i)) continue;
      double p = (j == 0) ? workspace.u(0, i) * diag
                          : workspace.u(j, i) * (diag - inv(i - 1, j - 1));
      marginals.p(j, i) = std::clamp(p, 0.0, 1.0);
    }
  }
  return marginals;
}

EdgeMarginals edge_marginals(const EdgeScores& scores) {
  return edge_marginals(factorize(scores), scores.mask);
}

std::vector<double> log_partition_gradient(const EdgeFeatureTable& table,
                                           const EdgeScores& scores,
                                           int weight_count) {
  const EdgeMarginals marginals = edge_marginals(scores);
  std::vector<double> gradient(static_cast<size_t>(weight_count), 0.0);
  const int n = scores.n();
  for (int j = 0; j <= n; ++j) {
    for (int i = 1; i <= n; ++i) {
      const double p = marginals.p(j, i);
      if (p == 0.0) continue;
      for (std::uint32_t idx : table.features(j, i)) gradient[idx] += p;
    }
  }
  return gradient;
}

std::vector<double> log_partition_gradient(const Cascade& cascade,
                                           const EdgeScores& scores,
                                           const FeatureConfig& config,
                                           FeatureAlphabet& alphabet) {
  EdgeFeatureTable table(cascade, config, alphabet);
  return log_partition_gradient(table, scores, alphabet.size());
}

double brute_force_log_partition(const EdgeScores& scores) {
  double max_score = -std::numeric_limits<double>::infinity();
  std::vector<double> tree_scores;
  for_each_valid_tree(scores, [&](const std::vector<int>&, double score) {
    tree_scores.push_back(score);
    max_score = std::max(max_score, score);
  });
  if (tree_scores.empty()) {
    throw NoValidTree("constraint mask admits no arborescence");
  }
  double sum = 0.0;
  for (double score : tree_scores) sum += std::exp(score - max_score);
  return max_score + std::log(sum);
}

}  // namespace dst
