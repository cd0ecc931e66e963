#pragma once

#include <compare>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dst/cascade.hpp"
#include "dst/matrix_tree.hpp"

namespace dst {

// A directed site-level edge, optionally tagged with a day bucket
// (day = -1 for static networks).
struct SiteEdge {
  std::string src;
  std::string dst;
  int day = -1;

  auto operator<=>(const SiteEdge&) const = default;
};

struct LinkSet {
  std::set<SiteEdge> edges;
};

struct RankedEntry {
  std::string src;
  std::string dst;
  double score = 0.0;
  int day = -1;
};

// Entries sorted by score descending; ties broken by (src, dst, day).
struct RankedEdgeList {
  std::vector<RankedEntry> entries;
};

struct MetricsReport {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double average_precision = 0.0;
  long true_positives = 0;
  long predicted = 0;
  long gold = 0;
};

// Micro-averaged link recovery over a set of cascades. A predicted edge
// is correct when the gold structure contains it; a predicted root
// attachment is correct when the child is a true seed. DAG gold credits a
// prediction matching any gold parent, so precision and recall
// denominators differ; on tree gold they coincide.
MetricsReport eval_cascade_level(const std::vector<Arborescence>& predictions,
                                 const std::vector<GoldStructure>& golds,
                                 const std::vector<Cascade>& cascades);

// Attach the earliest node to the root and everything else to it.
Arborescence naive_baseline(const Cascade& cascade);

enum class NetworkGranularity { static_network, per_day };

// Sums edge posteriors onto (parent site, child site) pairs, skipping
// root edges and same-site pairs. per_day buckets by the child's UTC day;
// top_k keeps the highest-scoring entries per bucket (0 keeps all).
RankedEdgeList network_from_marginals(const std::vector<EdgeMarginals>& marginals,
                                      const std::vector<Cascade>& cascades,
                                      int top_k, NetworkGranularity granularity);

// Set-level precision/recall/F1 plus ranked-retrieval average precision.
// Throws EmptyGold when the gold set is empty.
MetricsReport eval_network(const RankedEdgeList& predicted, const LinkSet& gold);

struct FoldSplit {
  std::vector<int> train;  // indices into the input cascade list
  std::vector<int> test;
};

// Interleaved round-robin assignment: cascade i (in sorted-id order) goes
// to fold i mod k; each split holds one fold out as the test set.
std::vector<FoldSplit> round_robin_folds(const std::vector<Cascade>& cascades, int k);

}  // namespace dst
