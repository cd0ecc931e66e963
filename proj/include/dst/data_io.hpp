#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dst/cascade.hpp"
#include "dst/eval.hpp"

namespace dst {

// File-facing cascade shape: one JSON object per line, text kept as a raw
// string and normalized only when a Cascade is instantiated.
struct NodeRecord {
  std::string id;
  std::string site;
  std::int64_t timestamp = 0;
  std::optional<std::string> language;
  std::optional<std::string> content_type;
  std::optional<std::string> text;

  bool operator==(const NodeRecord&) const = default;
};

struct GoldLink {
  std::string parent_id;
  std::string child_id;

  bool operator==(const GoldLink&) const = default;
  auto operator<=>(const GoldLink&) const = default;
};

struct CascadeRecord {
  std::string cascade_id;
  std::vector<NodeRecord> nodes;
  std::optional<std::vector<GoldLink>> gold_links;

  bool operator==(const CascadeRecord&) const = default;
};

// Nodes sorted by (timestamp, id), gold links sorted and deduplicated.
CascadeRecord canonicalize(CascadeRecord record);

std::vector<CascadeRecord> read_records(const std::string& path);
void write_records(const std::string& path, const std::vector<CascadeRecord>& records);

struct CascadeInstance {
  Cascade cascade;
  std::optional<GoldStructure> gold;
};

CascadeInstance instantiate(const CascadeRecord& record,
                            std::int64_t root_window_seconds = 3600);

std::vector<CascadeInstance> read_cascades(const std::string& path,
                                           std::int64_t root_window_seconds = 3600);

// merge_cascades plus gold remapping: true links are carried through
// unchanged and every original seed remains attached to the dummy root.
std::vector<CascadeInstance> merge_instances(const std::vector<CascadeInstance>& instances,
                                             std::int64_t window_seconds);

struct GeneratorConfig {
  int n_cascades = 100;
  std::pair<int, int> size_range = {5, 100};
  double flat_fraction = 0.84;
  int sites_pool_size = 50;
  int vocab_size = 2000;
  int tokens_per_doc = 12;        // seed document token-set size
  double copy_noise = 0.1;        // per-token mutation probability along an edge
  double lag_log_median = 3600.0; // median of the log-normal edge lag, seconds
  double lag_log_sigma = 1.0;
  bool tree_only = true;          // false adds occasional extra gold parents (DAG gold)
  std::uint64_t seed = 1;
};

// Synthetic cascades with known gold structure: a seed node plus either a
// flat star or a preferential-attachment tree, log-normal timestamp lags,
// and child token sets copied from the parent with per-token noise so
// text similarity correlates with true edges. Deterministic per seed.
std::vector<CascadeRecord> generate_cascades(const GeneratorConfig& config);

// Site-level gold network implied by the records' gold links; per_day
// tags each edge with the child post's UTC day.
LinkSet gold_network(const std::vector<CascadeRecord>& records, bool per_day);

// CSV "source_site,dest_site[,day]" per line.
void write_link_csv(const std::string& path, const LinkSet& links);
LinkSet read_link_csv(const std::string& path, bool keep_days);

// CSV "source,dest,score" (plus ",day" when tagged) per line, rank order.
void write_ranked_csv(const std::string& path, const RankedEdgeList& ranked);

}  // namespace dst
