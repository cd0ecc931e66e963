#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "dst/cascade.hpp"
#include "dst/errors.hpp"
#include "dst/features.hpp"

namespace dst {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Log-scores and admissibility mask for every candidate edge of one
// cascade. Row j in 0..n is the parent (0 = dummy root), column i in 1..n
// the child; column 0 is unused padding so indices match node indices.
struct EdgeScores {
  Eigen::MatrixXd s;
  BoolMatrix mask;

  int n() const { return static_cast<int>(s.rows()) - 1; }

  // Zero scores, all edges allowed except self-loops.
  static EdgeScores make(int n);
  // Same scores with the all-edges-except-self-loops mask.
  EdgeScores with_full_mask() const;
};

EdgeScores build_scores(const Cascade& cascade, const std::vector<double>& weights,
                        const FeatureConfig& config, const ConstraintSet& constraints,
                        FeatureAlphabet& alphabet);

EdgeScores scores_from_table(const EdgeFeatureTable& table,
                             const std::vector<double>& weights,
                             const Cascade& cascade,
                             const ConstraintSet& constraints);

// Reduced Laplacian of the edge potentials u(j,i) = exp(s(j,i) - shift)
// with the root row and column deleted. By Tutte's directed matrix-tree
// theorem its determinant is the partition function over all masked-in
// arborescences (up to the n*shift correction, since every arborescence
// has exactly n edges).
struct LaplacianWorkspace {
  double shift = 0.0;
  Eigen::MatrixXd u;          // (n+1)x(n+1); 0 on masked-out edges
  Eigen::MatrixXd laplacian;  // n x n reduced
  Eigen::MatrixXd inverse;    // n x n
  double log_det = 0.0;

  int n() const { return static_cast<int>(laplacian.rows()); }
  double log_partition() const { return shift * n() + log_det; }
};

// Throws NoValidTree when the mask admits no arborescence (zero
// determinant), NumericalError when the determinant comes out negative
// beyond tolerance. The shift defaults to the max allowed edge score.
LaplacianWorkspace factorize(const EdgeScores& scores,
                             std::optional<double> shift = std::nullopt);

double log_partition(const EdgeScores& scores,
                     std::optional<double> shift = std::nullopt);

// Posterior probability of each allowed edge under the arborescence
// distribution; zero on masked-out edges. Rows of p follow EdgeScores
// layout.
struct EdgeMarginals {
  Eigen::MatrixXd p;

  int n() const { return static_cast<int>(p.rows()) - 1; }
};

EdgeMarginals edge_marginals(const EdgeScores& scores);
EdgeMarginals edge_marginals(const LaplacianWorkspace& workspace,
                             const BoolMatrix& mask);

// Expected feature vector under the arborescence distribution, i.e. the
// gradient of log Z with respect to the weights.
std::vector<double> log_partition_gradient(const EdgeFeatureTable& table,
                                           const EdgeScores& scores,
                                           int weight_count);
std::vector<double> log_partition_gradient(const Cascade& cascade,
                                           const EdgeScores& scores,
                                           const FeatureConfig& config,
                                           FeatureAlphabet& alphabet);

// Enumeration over all masked-in arborescences; usable only for tiny
// instances (n <= 8). fn(parents, tree_log_score) is called once per tree
// with parents[i-1] the parent of child i.
template <typename Fn>
void for_each_valid_tree(const EdgeScores& scores, Fn&& fn) {
  const int n = scores.n();
  if (n > 8) {
    throw InstanceTooLarge("tree enumeration is limited to n <= 8, got n = " +
                           std::to_string(n));
  }
  std::vector<int> parents(static_cast<size_t>(n), 0);
  std::vector<int> hops;
  auto acyclic = [&]() {
    for (int i = 1; i <= n; ++i) {
      int v = i;
      int steps = 0;
      while (v != 0) {
        v = parents[static_cast<size_t>(v - 1)];
        if (++steps > n) return false;
      }
    }
    return true;
  };
  auto recurse = [&](auto&& self, int child) -> void {
    if (child > n) {
      if (!acyclic()) return;
      double score = 0.0;
      for (int i = 1; i <= n; ++i) {
        score += scores.s(parents[static_cast<size_t>(i - 1)], i);
      }
      fn(parents, score);
      return;
    }
    for (int j = 0; j <= n; ++j) {
      if (j == child || !scores.mask(j, child)) continue;
      parents[static_cast<size_t>(child - 1)] = j;
      self(self, child + 1);
    }
  };
  recurse(recurse, 1);
}

// Exhaustive log-sum-exp over all masked-in arborescences (n <= 8 guard).
double brute_force_log_partition(const EdgeScores& scores);

}  // namespace dst
