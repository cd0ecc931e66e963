#include "dst/cascade.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "dst/errors.hpp"

namespace dst {

Cascade::Cascade(std::string cascade_id, std::vector<Node> nodes,
                 std::int64_t root_window_seconds)
    : id_(std::move(cascade_id)),
      nodes_(std::move(nodes)),
      root_window_seconds_(root_window_seconds) {
  if (nodes_.empty()) {
    throw ValidationError("cascade '" + id_ + "' has no nodes");
  }
  std::sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.id < b.id;
  });
  std::unordered_set<std::string> seen;
  for (const Node& node : nodes_) {
    if (!seen.insert(node.id).second) {
      throw ValidationError("duplicate node id '" + node.id + "' in cascade '" +
                            id_ + "'");
    }
  }
}

int Cascade::index_of(const std::string& node_id) const {
  for (int i = 1; i <= size(); ++i) {
    if (node(i).id == node_id) return i;
  }
  return 0;
}

bool GoldStructure::is_tree() const {
  for (const auto& p : parents) {
    if (p.size() > 1) return false;
  }
  return true;
}

long GoldStructure::link_count() const {
  long count = 0;
  for (const auto& p : parents) {
    count += p.empty() ? 1 : static_cast<long>(p.size());
  }
  return count;
}

std::optional<Arborescence> GoldStructure::as_arborescence() const {
  Arborescence tree;
  tree.parent.reserve(parents.size());
  for (const auto& p : parents) {
    if (p.size() > 1) return std::nullopt;
    tree.parent.push_back(p.empty() ? 0 : p.front());
  }
  return tree;
}

bool ConstraintSet::allows(const Cascade& cascade, int parent, int child) const {
  if (parent == child || child < 1 || child > cascade.size() || parent < 0 ||
      parent > cascade.size()) {
    return false;
  }
  if (parent == 0) {
    if (!opts_.root_window) return true;
    return cascade.node(child).timestamp - cascade.start_time() <=
           cascade.root_window_seconds();
  }
  const std::int64_t lag =
      cascade.node(child).timestamp - cascade.node(parent).timestamp;
  if (opts_.time_order && lag <= 0) return false;
  if (opts_.max_lag_seconds > 0 && std::abs(lag) > opts_.max_lag_seconds) {
    return false;
  }
  return true;
}

bool validate_arborescence(const Cascade& cascade, const Arborescence& tree,
                           const ConstraintSet& constraints) {
  const int n = cascade.size();
  if (tree.size() != n) return false;
  for (int i = 1; i <= n; ++i) {
    const int j = tree.parent_of(i);
    if (j < 0 || j > n || j == i) return false;
    if (!constraints.allows(cascade, j, i)) return false;
  }
  // Acyclic iff every node reaches the root by following parents.
  for (int i = 1; i <= n; ++i) {
    int hops = 0;
    int v = i;
    while (v != 0) {
      v = tree.parent_of(v);
      if (++hops > n) return false;
    }
  }
  return true;
}

int earliest_node(const Cascade& cascade) { return cascade.earliest(); }

MergeResult merge_cascades(const std::vector<Cascade>& cascades,
                           std::int64_t window_seconds) {
  MergeResult result;
  const int m = static_cast<int>(cascades.size());
  if (m == 0) return result;

  // Sort positions by start time; a sweep over sorted starts chains groups
  // whose consecutive gaps are within the window, which is exactly the
  // transitive closure of the pairwise "starts within window" relation.
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (cascades[a].start_time() != cascades[b].start_time())
      return cascades[a].start_time() < cascades[b].start_time();
    return cascades[a].id() < cascades[b].id();
  });

  std::vector<std::vector<int>> groups;
  for (int pos : order) {
    if (!groups.empty()) {
      const int prev = groups.back().back();
      if (cascades[pos].start_time() - cascades[prev].start_time() <=
          window_seconds) {
        groups.back().push_back(pos);
        continue;
      }
    }
    groups.push_back({pos});
  }

  for (auto& group : groups) {
    std::vector<int> members = group;
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      return cascades[a].id() < cascades[b].id();
    });

    std::string merged_id;
    std::vector<Node> nodes;
    std::int64_t window = cascades[members.front()].root_window_seconds();
    std::unordered_map<std::string, std::pair<int, int>> source;
    for (int pos : members) {
      const Cascade& c = cascades[pos];
      if (!merged_id.empty()) merged_id += '+';
      merged_id += c.id();
      for (int i = 1; i <= c.size(); ++i) {
        const Node& node = c.node(i);
        if (!source.emplace(node.id, std::make_pair(pos, i)).second) {
          throw ValidationError("node id '" + node.id +
                                "' occurs in more than one merged cascade");
        }
        nodes.push_back(node);
      }
    }

    Cascade merged(merged_id, std::move(nodes), window);
    std::vector<std::pair<int, int>> origin;
    origin.reserve(static_cast<size_t>(merged.size()));
    for (int i = 1; i <= merged.size(); ++i) {
      origin.push_back(source.at(merged.node(i).id));
    }
    result.cascades.push_back(std::move(merged));
    result.members.push_back(std::move(members));
    result.origin.push_back(std::move(origin));
  }
  return result;
}

}  // namespace dst
