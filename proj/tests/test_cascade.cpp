#include <doctest.h>

#include <random>

#include "dst/cascade.hpp"
#include "dst/errors.hpp"
#include "helpers.hpp"

using namespace dst;
using testutil::make_cascade;
using testutil::make_node;

namespace {

// Every node choosing any strictly-earlier parent (or the root, when
// admissible) is automatically acyclic, so the number of valid trees is
// the product of per-child choice counts.
long expected_tree_count(const Cascade& cascade, const ConstraintSet& constraints) {
  long count = 1;
  for (int i = 1; i <= cascade.size(); ++i) {
    long options = 0;
    for (int j = 0; j <= cascade.size(); ++j) {
      if (j != i && constraints.allows(cascade, j, i)) ++options;
    }
    count *= options;
  }
  return count;
}

std::string cascade_earliest_id(
    const std::vector<std::pair<std::string, std::int64_t>>& entries) {
  std::vector<Node> nodes;
  for (const auto& [id, ts] : entries) nodes.push_back(make_node(id, "s", ts));
  Cascade cascade("earliest", std::move(nodes), 3600);
  return cascade.node(earliest_node(cascade)).id;
}

long brute_force_tree_count(const Cascade& cascade, const ConstraintSet& constraints) {
  const int n = cascade.size();
  long count = 0;
  std::vector<int> parent(static_cast<size_t>(n), 0);
  auto recurse = [&](auto&& self, int child) -> void {
    if (child > n) {
      Arborescence tree{parent};
      if (validate_arborescence(cascade, tree, constraints)) ++count;
      return;
    }
    for (int j = 0; j <= n; ++j) {
      if (j == child) continue;
      parent[static_cast<size_t>(child - 1)] = j;
      self(self, child + 1);
    }
  };
  recurse(recurse, 1);
  return count;
}

}  // namespace

TEST_CASE("single node attaches to root") {
  Cascade cascade = make_cascade({100});
  Arborescence tree{{0}};
  CHECK(validate_arborescence(cascade, tree, ConstraintSet::standard()));
}

TEST_CASE("two-cycle is rejected") {
  Cascade cascade = make_cascade({100, 200});
  Arborescence tree{{2, 1}};
  CHECK_FALSE(validate_arborescence(cascade, tree, ConstraintSet::standard()));
}

TEST_CASE("chain over increasing timestamps is valid") {
  Cascade cascade = make_cascade({10, 20, 30});
  Arborescence tree{{0, 1, 2}};
  CHECK(validate_arborescence(cascade, tree, ConstraintSet::standard()));
  // Cross-check against exhaustive enumeration: the chain is among the
  // counted valid trees and the count matches the closed form.
  CHECK(brute_force_tree_count(cascade, ConstraintSet::standard()) ==
        expected_tree_count(cascade, ConstraintSet::standard()));
}

TEST_CASE("self parent and out-of-range parents are invalid") {
  Cascade cascade = make_cascade({10, 20});
  CHECK_FALSE(validate_arborescence(cascade, Arborescence{{1, 1}},
                                    ConstraintSet::standard()));
  CHECK_FALSE(validate_arborescence(cascade, Arborescence{{0, 3}},
                                    ConstraintSet::standard()));
  CHECK_FALSE(
      validate_arborescence(cascade, Arborescence{{0}}, ConstraintSet::standard()));
}

TEST_CASE("equal timestamps forbid edges in both directions") {
  std::vector<Node> nodes = {make_node("a", "s0", 100), make_node("b", "s1", 100)};
  Cascade cascade("tie", nodes, 3600);
  const ConstraintSet constraints = ConstraintSet::standard();
  CHECK_FALSE(constraints.allows(cascade, 1, 2));
  CHECK_FALSE(constraints.allows(cascade, 2, 1));
  CHECK(constraints.allows(cascade, 0, 1));
  CHECK(constraints.allows(cascade, 0, 2));
}

TEST_CASE("max lag forbids long gaps") {
  Cascade cascade = make_cascade({0, 100, 5000}, 3600);
  ConstraintOptions opts;
  opts.max_lag_seconds = 600;
  const ConstraintSet capped = ConstraintSet::standard(opts);
  CHECK(capped.allows(cascade, 1, 2));        // 100 s gap
  CHECK_FALSE(capped.allows(cascade, 1, 3));  // 5000 s gap
  CHECK_FALSE(capped.allows(cascade, 2, 3));  // 4900 s gap
  CHECK(capped.allows(cascade, 0, 1));        // root edges are uncapped
  const ConstraintSet standard = ConstraintSet::standard();
  CHECK(standard.allows(cascade, 1, 3));
}

TEST_CASE("root window limits root attachments") {
  Cascade cascade = make_cascade({0, 1800, 4000}, 3600);
  const ConstraintSet constraints = ConstraintSet::standard();
  CHECK(constraints.allows(cascade, 0, 1));
  CHECK(constraints.allows(cascade, 0, 2));
  CHECK_FALSE(constraints.allows(cascade, 0, 3));  // 4000 > 3600
  ConstraintOptions open;
  open.root_window = false;
  CHECK(ConstraintSet::standard(open).allows(cascade, 0, 3));
}

TEST_CASE("valid tree count matches brute force on random instances") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 4);
    std::vector<std::int64_t> timestamps;
    std::int64_t t = 0;
    for (int k = 0; k < n; ++k) {
      t += 1 + static_cast<std::int64_t>(rng() % 900);
      timestamps.push_back(t);
    }
    Cascade cascade = make_cascade(timestamps, 3600);
    const ConstraintSet constraints = ConstraintSet::standard();
    CHECK(brute_force_tree_count(cascade, constraints) ==
          expected_tree_count(cascade, constraints));
  }
}

TEST_CASE("earliest node is found by timestamp then id") {
  CHECK(cascade_earliest_id({{"n1", 5}}) == "n1");
  CHECK(cascade_earliest_id({{"n1", 30}, {"n2", 10}, {"n3", 20}}) == "n2");
  // tie on timestamp broken by id
  CHECK(cascade_earliest_id({{"b", 10}, {"a", 10}, {"c", 20}}) == "a");
}

TEST_CASE("nodes are sorted deterministically") {
  std::vector<Node> nodes = {make_node("b", "s", 10), make_node("a", "s", 10),
                             make_node("c", "s", 5)};
  Cascade cascade("sorted", nodes, 3600);
  CHECK(cascade.node(1).id == "c");
  CHECK(cascade.node(2).id == "a");
  CHECK(cascade.node(3).id == "b");
  CHECK(earliest_node(cascade) == 1);
}

TEST_CASE("duplicate node ids are rejected") {
  std::vector<Node> nodes = {make_node("a", "s", 10), make_node("a", "s", 20)};
  CHECK_THROWS_AS(Cascade("dup", nodes, 3600), ValidationError);
}

TEST_CASE("empty cascade is rejected") {
  CHECK_THROWS_AS(Cascade("empty", {}, 3600), ValidationError);
}

TEST_CASE("merging groups cascades within the window") {
  Cascade a("a", {make_node("a1", "s0", 0)}, 3600);
  Cascade b("b", {make_node("b1", "s1", 1800)}, 3600);
  MergeResult merged = merge_cascades({a, b}, 3600);
  REQUIRE(merged.cascades.size() == 1);
  CHECK(merged.cascades[0].id() == "a+b");
  CHECK(merged.cascades[0].size() == 2);
}

TEST_CASE("cascades outside the window stay separate") {
  Cascade a("a", {make_node("a1", "s0", 0)}, 3600);
  Cascade b("b", {make_node("b1", "s1", 7200)}, 3600);
  MergeResult merged = merge_cascades({a, b}, 3600);
  CHECK(merged.cascades.size() == 2);
}

TEST_CASE("merge closure chains across the window") {
  Cascade a("a", {make_node("a1", "s0", 0)}, 3600);
  Cascade b("b", {make_node("b1", "s1", 3000)}, 3600);
  Cascade c("c", {make_node("c1", "s2", 6000)}, 3600);
  // a-b within an hour, b-c within an hour, a-c not: closure merges all.
  MergeResult merged = merge_cascades({a, b, c}, 3600);
  REQUIRE(merged.cascades.size() == 1);
  CHECK(merged.cascades[0].id() == "a+b+c");
  // brute-force pairwise grouping gives the same partition
  CHECK(merged.members[0] == std::vector<int>{0, 1, 2});
}

TEST_CASE("merge is idempotent") {
  std::vector<Cascade> cascades;
  std::mt19937 rng(11);
  for (int k = 0; k < 12; ++k) {
    const std::int64_t start = static_cast<std::int64_t>(rng() % 100000);
    cascades.emplace_back("c" + std::to_string(k),
                          std::vector<Node>{make_node("n" + std::to_string(k),
                                                      "s" + std::to_string(k), start)},
                          3600);
  }
  MergeResult once = merge_cascades(cascades, 3600);
  MergeResult twice = merge_cascades(once.cascades, 3600);
  REQUIRE(once.cascades.size() == twice.cascades.size());
  for (size_t g = 0; g < once.cascades.size(); ++g) {
    CHECK(once.cascades[g].id() == twice.cascades[g].id());
    CHECK(once.cascades[g].size() == twice.cascades[g].size());
  }
}

TEST_CASE("merging an empty list yields an empty list") {
  CHECK(merge_cascades({}, 3600).cascades.empty());
}

TEST_CASE("merge preserves node origins") {
  Cascade a("a", {make_node("a1", "s0", 0), make_node("a2", "s1", 50)}, 3600);
  Cascade b("b", {make_node("b1", "s2", 20)}, 3600);
  MergeResult merged = merge_cascades({a, b}, 3600);
  REQUIRE(merged.cascades.size() == 1);
  const Cascade& m = merged.cascades[0];
  for (int i = 1; i <= m.size(); ++i) {
    const auto [src, idx] = merged.origin[0][static_cast<size_t>(i - 1)];
    const Cascade& source = src == 0 ? a : b;
    CHECK(source.node(idx).id == m.node(i).id);
  }
}
