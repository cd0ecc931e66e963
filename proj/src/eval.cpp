#include "dst/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "dst/errors.hpp"

namespace dst {

namespace {

double safe_ratio(long num, long den) {
  return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

double f1_of(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

std::int64_t utc_day(std::int64_t timestamp) {
  // Floor division so pre-epoch timestamps still bucket consistently.
  std::int64_t day = timestamp / 86400;
  if (timestamp % 86400 < 0) --day;
  return day;
}

}  // namespace

MetricsReport eval_cascade_level(const std::vector<Arborescence>& predictions,
                                 const std::vector<GoldStructure>& golds,
                                 const std::vector<Cascade>& cascades) {
  if (predictions.size() != golds.size() || predictions.size() != cascades.size()) {
    throw DataError("predictions, golds, and cascades must be aligned");
  }
  MetricsReport report;
  for (size_t c = 0; c < cascades.size(); ++c) {
    const int n = cascades[c].size();
    if (predictions[c].size() != n || golds[c].size() != n) {
      throw DataError("prediction or gold size mismatch for cascade '" +
                      cascades[c].id() + "'");
    }
    report.predicted += n;
    report.gold += golds[c].link_count();
    for (int i = 1; i <= n; ++i) {
      const int p = predictions[c].parent_of(i);
      const auto& gold_parents = golds[c].parents[static_cast<size_t>(i - 1)];
      const bool correct =
          (p == 0) ? gold_parents.empty()
                   : std::binary_search(gold_parents.begin(), gold_parents.end(), p);
      if (correct) ++report.true_positives;
    }
  }
  report.precision = safe_ratio(report.true_positives, report.predicted);
  report.recall = safe_ratio(report.true_positives, report.gold);
  report.f1 = f1_of(report.precision, report.recall);
  return report;
}

Arborescence naive_baseline(const Cascade& cascade) {
  const int earliest = earliest_node(cascade);
  Arborescence tree;
  tree.parent.assign(static_cast<size_t>(cascade.size()), earliest);
  tree.parent[static_cast<size_t>(earliest - 1)] = 0;
  return tree;
}

RankedEdgeList network_from_marginals(const std::vector<EdgeMarginals>& marginals,
                                      const std::vector<Cascade>& cascades,
                                      int top_k, NetworkGranularity granularity) {
  if (marginals.size() != cascades.size()) {
    throw DataError("marginals and cascades must be aligned");
  }
  std::map<SiteEdge, double> scores;
  for (size_t c = 0; c < cascades.size(); ++c) {
    const Cascade& cascade = cascades[c];
    const int n = cascade.size();
    for (int j = 1; j <= n; ++j) {
      for (int i = 1; i <= n; ++i) {
        if (i == j) continue;
        const double p = marginals[c].p(j, i);
        if (p <= 0.0) continue;
        const Node& parent = cascade.node(j);
        const Node& child = cascade.node(i);
        if (parent.site == child.site) continue;
        SiteEdge edge{parent.site, child.site, -1};
        if (granularity == NetworkGranularity::per_day) {
          edge.day = static_cast<int>(utc_day(child.timestamp));
        }
        scores[edge] += p;
      }
    }
  }

  std::map<int, std::vector<RankedEntry>> buckets;
  for (const auto& [edge, score] : scores) {
    buckets[edge.day].push_back(RankedEntry{edge.src, edge.dst, score, edge.day});
  }
  RankedEdgeList ranked;
  for (auto& [day, entries] : buckets) {
    std::sort(entries.begin(), entries.end(),
              [](const RankedEntry& a, const RankedEntry& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.src != b.src) return a.src < b.src;
                return a.dst < b.dst;
              });
    const size_t keep = top_k > 0 ? std::min(entries.size(), static_cast<size_t>(top_k))
                                  : entries.size();
    ranked.entries.insert(ranked.entries.end(), entries.begin(),
                          entries.begin() + static_cast<long>(keep));
  }
  std::sort(ranked.entries.begin(), ranked.entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.src != b.src) return a.src < b.src;
              if (a.dst != b.dst) return a.dst < b.dst;
              return a.day < b.day;
            });
  return ranked;
}

MetricsReport eval_network(const RankedEdgeList& predicted, const LinkSet& gold) {
  if (gold.edges.empty()) {
    throw EmptyGold("gold link set is empty");
  }
  MetricsReport report;
  report.gold = static_cast<long>(gold.edges.size());
  report.predicted = static_cast<long>(predicted.entries.size());

  long hits = 0;
  double ap_sum = 0.0;
  long rank = 0;
  for (const RankedEntry& entry : predicted.entries) {
    ++rank;
    if (gold.edges.count(SiteEdge{entry.src, entry.dst, entry.day})) {
      ++hits;
      ap_sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  report.true_positives = hits;
  report.precision = safe_ratio(hits, report.predicted);
  report.recall = safe_ratio(hits, report.gold);
  report.f1 = f1_of(report.precision, report.recall);
  report.average_precision = ap_sum / static_cast<double>(report.gold);
  return report;
}

std::vector<FoldSplit> round_robin_folds(const std::vector<Cascade>& cascades, int k) {
  if (k < 2) throw DataError("fold count must be at least 2");
  if (static_cast<int>(cascades.size()) < k) {
    throw DataError("fewer cascades than folds");
  }
  std::vector<int> order(cascades.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return cascades[static_cast<size_t>(a)].id() < cascades[static_cast<size_t>(b)].id();
  });

  std::vector<FoldSplit> splits(static_cast<size_t>(k));
  for (size_t pos = 0; pos < order.size(); ++pos) {
    const int fold = static_cast<int>(pos) % k;
    for (int f = 0; f < k; ++f) {
      if (f == fold) {
        splits[static_cast<size_t>(f)].test.push_back(order[pos]);
      } else {
        splits[static_cast<size_t>(f)].train.push_back(order[pos]);
      }
    }
  }
  return splits;
}

}  // namespace dst
