#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dst {

using TokenSet = std::set<std::string>;

struct Node {
  std::string id;
  std::string site;
  std::int64_t timestamp = 0;  // seconds since epoch
  std::optional<std::string> language;
  std::optional<std::string> content_type;
  std::optional<TokenSet> text_tokens;
};

// A set of activated nodes, indexed 1..n. Index 0 is the implicit dummy
// root that seed nodes attach to. Nodes are kept sorted by (timestamp, id)
// so matrix indices are reproducible across runs.
class Cascade {
 public:
  Cascade(std::string cascade_id, std::vector<Node> nodes,
          std::int64_t root_window_seconds = 3600);

  const std::string& id() const { return id_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int i) const { return nodes_.at(static_cast<size_t>(i - 1)); }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::int64_t root_window_seconds() const { return root_window_seconds_; }
  std::int64_t start_time() const { return nodes_.front().timestamp; }

  // Index of the node with minimum (timestamp, id). Always 1 after sorting.
  int earliest() const { return 1; }

  // 1-based index of a node id, or 0 if absent.
  int index_of(const std::string& node_id) const;

 private:
  std::string id_;
  std::vector<Node> nodes_;
  std::int64_t root_window_seconds_;
};

// Parent assignment: parent_of(i) in 0..n for each child i in 1..n.
// The struct itself is just a map; use validate_arborescence to check
// acyclicity and constraints.
struct Arborescence {
  std::vector<int> parent;  // parent[i-1] is the parent of child i

  int size() const { return static_cast<int>(parent.size()); }
  int parent_of(int i) const { return parent.at(static_cast<size_t>(i - 1)); }
};

// Ground-truth structure over a cascade: per-child sets of gold parent
// indices. A child with no gold parent is a seed whose gold attachment is
// the dummy root. Tree-shaped gold has at most one parent per child.
struct GoldStructure {
  std::vector<std::vector<int>> parents;  // parents[i-1]: sorted, may be empty

  int size() const { return static_cast<int>(parents.size()); }
  bool is_seed(int i) const { return parents.at(static_cast<size_t>(i - 1)).empty(); }
  bool is_tree() const;
  // Total gold links, counting one root link per seed.
  long link_count() const;
  // Tree-shaped gold as a parent map (seeds -> 0); nullopt for DAG gold.
  std::optional<Arborescence> as_arborescence() const;
};

struct ConstraintOptions {
  bool time_order = true;   // parents must strictly precede children
  bool root_window = true;  // root edges only within the window of cascade start
  // Optional cap on the parent-to-child lag ("avoid long gaps");
  // 0 disables the cap.
  std::int64_t max_lag_seconds = 0;
};

// Deterministic edge admissibility predicate. The standard constraints
// require timestamp(parent) < timestamp(child) for node parents (equal
// timestamps forbid the edge in either direction), and admit a root edge
// (0, i) only when node i falls within root_window_seconds of the
// cascade's first timestamp. A max-lag cap additionally forbids node
// edges spanning more than max_lag_seconds.
class ConstraintSet {
 public:
  static ConstraintSet standard(ConstraintOptions opts = {}) {
    return ConstraintSet(opts);
  }
  // All edges except self-loops.
  static ConstraintSet unconstrained() {
    return ConstraintSet(ConstraintOptions{false, false});
  }

  bool allows(const Cascade& cascade, int parent, int child) const;

 private:
  explicit ConstraintSet(ConstraintOptions opts) : opts_(opts) {}
  ConstraintOptions opts_;
};

bool validate_arborescence(const Cascade& cascade, const Arborescence& tree,
                           const ConstraintSet& constraints);

int earliest_node(const Cascade& cascade);

// Transitive closure of "starts within window_seconds" over cascade start
// times; each group is unioned into one cascade with nodes re-sorted and
// the id formed by joining member ids with '+' in sorted order.
struct MergeResult {
  std::vector<Cascade> cascades;
  // Per merged cascade, sorted positions of the source cascades it absorbed.
  std::vector<std::vector<int>> members;
  // Per merged cascade and per node index i (entry i-1), the
  // (source cascade position, source node index) the node came from.
  std::vector<std::vector<std::pair<int, int>>> origin;
};

MergeResult merge_cascades(const std::vector<Cascade>& cascades,
                           std::int64_t window_seconds);

}  // namespace dst
