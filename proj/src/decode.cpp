#include "dst/decode.hpp"

#include <algorithm>
#include <vector>

#include "dst/errors.hpp"

namespace dst {

namespace {

// One level of Chu-Liu-Edmonds over nodes 0..m (0 = root). Returns the
// best parent of each node 1..m; entry 0 is unused. Each recursion
// contracts one cycle, so the depth is at most m.
std::vector<int> solve(const Eigen::MatrixXd& score, const BoolMatrix& allowed) {
  const int m = static_cast<int>(score.rows()) - 1;

  std::vector<int> best(static_cast<size_t>(m) + 1, -1);
  for (int i = 1; i <= m; ++i) {
    int arg = -1;
    double val = 0.0;
    for (int j = 0; j <= m; ++j) {
      if (j == i || !allowed(j, i)) continue;
      if (arg < 0 || score(j, i) > val) {
        arg = j;
        val = score(j, i);
      }
    }
    if (arg < 0) {
      throw NoValidTree("node has no admissible parent");
    }
    best[static_cast<size_t>(i)] = arg;
  }

  // Look for a cycle among the greedy picks.
  std::vector<int> color(static_cast<size_t>(m) + 1, 0);  // 0 new, 1 on path, 2 done
  color[0] = 2;
  std::vector<int> cycle;
  for (int start = 1; start <= m && cycle.empty(); ++start) {
    if (color[static_cast<size_t>(start)] != 0) continue;
    std::vector<int> path;
    int v = start;
    while (color[static_cast<size_t>(v)] == 0) {
      color[static_cast<size_t>(v)] = 1;
      path.push_back(v);
      v = best[static_cast<size_t>(v)];
    }
    if (color[static_cast<size_t>(v)] == 1) {
      auto it = std::find(path.begin(), path.end(), v);
      cycle.assign(it, path.end());
    }
    for (int u : path) color[static_cast<size_t>(u)] = 2;
  }
  if (cycle.empty()) return best;

  std::sort(cycle.begin(), cycle.end());
  std::vector<char> in_cycle(static_cast<size_t>(m) + 1, 0);
  for (int v : cycle) in_cycle[static_cast<size_t>(v)] = 1;

  // Contract the cycle into one supernode with the highest new index.
  std::vector<int> new_id(static_cast<size_t>(m) + 1, -1);
  std::vector<int> old_id{0};
  new_id[0] = 0;
  for (int v = 1; v <= m; ++v) {
    if (!in_cycle[static_cast<size_t>(v)]) {
      new_id[static_cast<size_t>(v)] = static_cast<int>(old_id.size());
      old_id.push_back(v);
    }
  }
  const int cyc = static_cast<int>(old_id.size());
  const int m2 = cyc;  // nodes 0..m2 in the contracted problem

  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(m2 + 1, m2 + 1);
  BoolMatrix a2 = BoolMatrix::Constant(m2 + 1, m2 + 1, false);
  std::vector<int> entry(static_cast<size_t>(m) + 1, -1);  // per external parent j
  std::vector<int> exit_from(static_cast<size_t>(m) + 1, -1);   // per external child w

  for (int j = 0; j <= m; ++j) {
    if (in_cycle[static_cast<size_t>(j)]) continue;
    for (int i = 1; i <= m; ++i) {
      if (i == j || in_cycle[static_cast<size_t>(i)] || !allowed(j, i)) continue;
      s2(new_id[static_cast<size_t>(j)], new_id[static_cast<size_t>(i)]) = score(j, i);
      a2(new_id[static_cast<size_t>(j)], new_id[static_cast<size_t>(i)]) = true;
    }
  }

  // Edges into the cycle: entering at v means dropping the cycle edge
  // (best[v], v), so the adjusted score is score(j,v) - score(best[v],v).
  // The dropped constant cycle total is the same for every choice.
  for (int j = 0; j <= m; ++j) {
    if (in_cycle[static_cast<size_t>(j)]) continue;
    int arg = -1;
    double val = 0.0;
    for (int v : cycle) {
      if (!allowed(j, v)) continue;
      const double adjusted =
          score(j, v) - score(best[static_cast<size_t>(v)], v);
      if (arg < 0 || adjusted > val) {
        arg = v;
        val = adjusted;
      }
    }
    if (arg >= 0) {
      s2(new_id[static_cast<size_t>(j)], cyc) = val;
      a2(new_id[static_cast<size_t>(j)], cyc) = true;
      entry[static_cast<size_t>(j)] = arg;
    }
  }

  // Edges out of the cycle keep the best originating member.
  for (int w = 1; w <= m; ++w) {
    if (in_cycle[static_cast<size_t>(w)]) continue;
    int arg = -1;
    double val = 0.0;
    for (int v : cycle) {
      if (!allowed(v, w)) continue;
      if (arg < 0 || score(v, w) > val) {
        arg = v;
        val = score(v, w);
      }
    }
    if (arg >= 0) {
      s2(cyc, new_id[static_cast<size_t>(w)]) = val;
      a2(cyc, new_id[static_cast<size_t>(w)]) = true;
      exit_from[static_cast<size_t>(w)] = arg;
    }
  }

  const std::vector<int> sub = solve(s2, a2);

  std::vector<int> parent(static_cast<size_t>(m) + 1, -1);
  for (int w = 1; w <= m; ++w) {
    if (in_cycle[static_cast<size_t>(w)]) continue;
    const int p2 = sub[static_cast<size_t>(new_id[static_cast<size_t>(w)])];
    parent[static_cast<size_t>(w)] =
        (p2 == cyc) ? exit_from[static_cast<size_t>(w)] : old_id[static_cast<size_t>(p2)];
  }
  const int into = old_id[static_cast<size_t>(sub[static_cast<size_t>(cyc)])];
  const int broken = entry[static_cast<size_t>(into)];
  for (int v : cycle) {
    parent[static_cast<size_t>(v)] =
        (v == broken) ? into : best[static_cast<size_t>(v)];
  }
  return parent;
}

}  // namespace

Arborescence best_tree(const EdgeScores& scores) {
  const std::vector<int> parent = solve(scores.s, scores.mask);
  Arborescence tree;
  tree.parent.assign(parent.begin() + 1, parent.end());
  return tree;
}

}  // namespace dst
