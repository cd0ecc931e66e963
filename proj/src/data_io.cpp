#include "dst/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "dst/errors.hpp"
#include "dst/features.hpp"

namespace dst {

namespace {

using nlohmann::json;

void check_identifier(const std::string& value, const std::string& what, long line) {
  if (value.empty()) throw ParseError(what + " must be non-empty", line);
  for (char c : value) {
    if (c == '\t' || c == '\n' || c == '\r' || c == ',') {
      throw ParseError(what + " '" + value + "' contains a forbidden character", line);
    }
  }
}

CascadeRecord record_from_json(const json& j, long line) {
  CascadeRecord record;
  try {
    record.cascade_id = j.at("cascade_id").get<std::string>();
    for (const json& jn : j.at("nodes")) {
      NodeRecord node;
      node.id = jn.at("id").get<std::string>();
      node.site = jn.at("site").get<std::string>();
      node.timestamp = jn.at("timestamp").get<std::int64_t>();
      if (jn.contains("language")) node.language = jn["language"].get<std::string>();
      if (jn.contains("content_type")) {
        node.content_type = jn["content_type"].get<std::string>();
      }
      if (jn.contains("text")) node.text = jn["text"].get<std::string>();
      record.nodes.push_back(std::move(node));
    }
    if (j.contains("gold_links")) {
      std::vector<GoldLink> links;
      for (const json& jl : j["gold_links"]) {
        links.push_back(GoldLink{jl.at("parent_id").get<std::string>(),
                                 jl.at("child_id").get<std::string>()});
      }
      record.gold_links = std::move(links);
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line);
  }
  check_identifier(record.cascade_id, "cascade_id", line);
  if (record.nodes.empty()) throw ParseError("cascade has no nodes", line);
  for (const NodeRecord& node : record.nodes) {
    check_identifier(node.id, "node id", line);
    check_identifier(node.site, "site", line);
  }
  return record;
}

json record_to_json(const CascadeRecord& record) {
  json j;
  j["cascade_id"] = record.cascade_id;
  json nodes = json::array();
  for (const NodeRecord& node : record.nodes) {
    json jn;
    jn["id"] = node.id;
    jn["site"] = node.site;
    jn["timestamp"] = node.timestamp;
    if (node.language) jn["language"] = *node.language;
    if (node.content_type) jn["content_type"] = *node.content_type;
    if (node.text) jn["text"] = *node.text;
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  if (record.gold_links) {
    json links = json::array();
    for (const GoldLink& link : *record.gold_links) {
      links.push_back(json{{"parent_id", link.parent_id}, {"child_id", link.child_id}});
    }
    j["gold_links"] = std::move(links);
  }
  return j;
}

}  // namespace

CascadeRecord canonicalize(CascadeRecord record) {
  std::sort(record.nodes.begin(), record.nodes.end(),
            [](const NodeRecord& a, const NodeRecord& b) {
              if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
              return a.id < b.id;
            });
  if (record.gold_links) {
    std::sort(record.gold_links->begin(), record.gold_links->end());
    record.gold_links->erase(
        std::unique(record.gold_links->begin(), record.gold_links->end()),
        record.gold_links->end());
  }
  return record;
}

std::vector<CascadeRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<CascadeRecord> records;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    records.push_back(record_from_json(j, line_no));
  }
  return records;
}

void write_records(const std::string& path, const std::vector<CascadeRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (const CascadeRecord& record : records) {
    out << record_to_json(record).dump() << '\n';
  }
}

CascadeInstance instantiate(const CascadeRecord& record,
                            std::int64_t root_window_seconds) {
  std::vector<Node> nodes;
  nodes.reserve(record.nodes.size());
  std::unordered_map<std::string, std::string> site_of;
  for (const NodeRecord& nr : record.nodes) {
    Node node;
    node.id = nr.id;
    node.site = nr.site;
    node.timestamp = nr.timestamp;
    node.language = nr.language;
    node.content_type = nr.content_type;
    if (nr.text) node.text_tokens = normalize_text(*nr.text);
    if (!site_of.emplace(nr.id, nr.site).second) {
      throw ValidationError("duplicate node id '" + nr.id + "' in cascade '" +
                            record.cascade_id + "'");
    }
    nodes.push_back(std::move(node));
  }

  Cascade cascade(record.cascade_id, std::move(nodes), root_window_seconds);

  std::optional<GoldStructure> gold;
  if (record.gold_links) {
    std::unordered_map<std::string, int> index;
    for (int i = 1; i <= cascade.size(); ++i) index[cascade.node(i).id] = i;
    GoldStructure structure;
    structure.parents.assign(static_cast<size_t>(cascade.size()), {});
    for (const GoldLink& link : *record.gold_links) {
      auto parent_it = index.find(link.parent_id);
      auto child_it = index.find(link.child_id);
      if (parent_it == index.end() || child_it == index.end()) {
        throw ValidationError("gold link references unknown node in cascade '" +
                              record.cascade_id + "'");
      }
      if (link.parent_id == link.child_id) {
        throw ValidationError("gold self-link on node '" + link.parent_id + "'");
      }
      if (site_of.at(link.parent_id) == site_of.at(link.child_id)) {
        throw ValidationError("same-site gold link " + link.parent_id + " -> " +
                              link.child_id);
      }
      structure.parents[static_cast<size_t>(child_it->second - 1)].push_back(
          parent_it->second);
    }
    for (auto& parents : structure.parents) {
      std::sort(parents.begin(), parents.end());
      parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
    }
    gold = std::move(structure);
  }
  return CascadeInstance{std::move(cascade), std::move(gold)};
}

std::vector<CascadeInstance> read_cascades(const std::string& path,
                                           std::int64_t root_window_seconds) {
  std::vector<CascadeInstance> instances;
  for (const CascadeRecord& record : read_records(path)) {
    instances.push_back(instantiate(record, root_window_seconds));
  }
  return instances;
}

std::vector<CascadeInstance> merge_instances(const std::vector<CascadeInstance>& instances,
                                             std::int64_t window_seconds) {
  std::vector<Cascade> cascades;
  cascades.reserve(instances.size());
  for (const CascadeInstance& instance : instances) {
    cascades.push_back(instance.cascade);
  }
  MergeResult merged = merge_cascades(cascades, window_seconds);

  std::vector<CascadeInstance> out;
  out.reserve(merged.cascades.size());
  for (size_t g = 0; g < merged.cascades.size(); ++g) {
    const Cascade& cascade = merged.cascades[g];
    bool all_gold = true;
    for (int member : merged.members[g]) {
      all_gold = all_gold && instances[static_cast<size_t>(member)].gold.has_value();
    }
    std::optional<GoldStructure> gold;
    if (all_gold) {
      // Map (source cascade, source node) -> merged index, then pull each
      // node's gold parents through the mapping.
      std::map<std::pair<int, int>, int> to_merged;
      for (int i = 1; i <= cascade.size(); ++i) {
        to_merged[merged.origin[g][static_cast<size_t>(i - 1)]] = i;
      }
      GoldStructure structure;
      structure.parents.assign(static_cast<size_t>(cascade.size()), {});
      for (int i = 1; i <= cascade.size(); ++i) {
        const auto [src, idx] = merged.origin[g][static_cast<size_t>(i - 1)];
        const GoldStructure& source_gold = *instances[static_cast<size_t>(src)].gold;
        for (int parent : source_gold.parents[static_cast<size_t>(idx - 1)]) {
          structure.parents[static_cast<size_t>(i - 1)].push_back(
              to_merged.at({src, parent}));
        }
        std::sort(structure.parents[static_cast<size_t>(i - 1)].begin(),
                  structure.parents[static_cast<size_t>(i - 1)].end());
      }
      gold = std::move(structure);
    }
    out.push_back(CascadeInstance{cascade, std::move(gold)});
  }
  return out;
}

namespace {

constexpr std::int64_t kBaseEpoch = 1294876800;  // 2011-01-13T00:00:00Z
constexpr std::int64_t kStartHorizon = 30 * 86400;

std::string pad_number(long value, int width) {
  std::string digits = std::to_string(value);
  while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
  return digits;
}

std::string join_tokens(const std::set<int>& tokens) {
  std::string text;
  for (int token : tokens) {
    if (!text.empty()) text += ' ';
    text += "tok" + pad_number(token, 5);
  }
  return text;
}

}  // namespace

std::vector<CascadeRecord> generate_cascades(const GeneratorConfig& config) {
  if (config.n_cascades < 0) throw ValidationError("n_cascades must be >= 0");
  if (config.size_range.first < 1 || config.size_range.second > 100 ||
      config.size_range.first > config.size_range.second) {
    throw ValidationError("size_range must lie within [1, 100]");
  }
  if (config.flat_fraction < 0.0 || config.flat_fraction > 1.0 ||
      config.copy_noise < 0.0 || config.copy_noise > 1.0) {
    throw ValidationError("probabilities must lie in [0, 1]");
  }
  if (config.sites_pool_size < 2) throw ValidationError("need at least 2 sites");
  if (config.vocab_size < 1) throw ValidationError("vocab_size must be >= 1");
  if (config.tokens_per_doc < 1) throw ValidationError("tokens_per_doc must be >= 1");
  if (config.lag_log_median <= 0.0 || config.lag_log_sigma <= 0.0) {
    throw ValidationError("lag distribution parameters must be positive");
  }

  const std::vector<std::string> languages = {"en", "es", "de", "fr"};
  const std::vector<std::string> content_types = {"blog", "news", "social"};
  const double lag_mu = std::log(config.lag_log_median);
  const int id_width = std::max(4, static_cast<int>(std::to_string(
                                        std::max(config.n_cascades - 1, 1)).size()));

  std::vector<CascadeRecord> records;
  records.reserve(static_cast<size_t>(config.n_cascades));
  for (int c = 0; c < config.n_cascades; ++c) {
    // Per-cascade derived stream so generation order never matters.
    std::mt19937_64 rng(config.seed ^
                        (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(c) + 1)));
    std::uniform_int_distribution<int> size_dist(config.size_range.first,
                                                 config.size_range.second);
    std::uniform_int_distribution<int> site_dist(0, config.sites_pool_size - 1);
    std::uniform_int_distribution<int> vocab_dist(0, config.vocab_size - 1);
    std::uniform_int_distribution<std::int64_t> start_dist(0, kStartHorizon);
    std::lognormal_distribution<double> lag_dist(lag_mu, config.lag_log_sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int size = size_dist(rng);
    const bool flat = unit(rng) < config.flat_fraction;
    const std::string& language = languages[static_cast<size_t>(
        std::uniform_int_distribution<int>(0, static_cast<int>(languages.size()) - 1)(rng))];

    CascadeRecord record;
    record.cascade_id = "c" + pad_number(c, id_width);

    std::vector<int> parent_pos(static_cast<size_t>(size), -1);
    std::vector<int> child_count(static_cast<size_t>(size), 0);
    std::vector<std::int64_t> timestamps(static_cast<size_t>(size), 0);
    std::vector<int> sites(static_cast<size_t>(size), 0);
    std::vector<std::set<int>> tokens(static_cast<size_t>(size));

    timestamps[0] = kBaseEpoch + start_dist(rng);
    sites[0] = site_dist(rng);
    const int seed_tokens = std::min(config.tokens_per_doc, config.vocab_size);
    while (static_cast<int>(tokens[0].size()) < seed_tokens) {
      tokens[0].insert(vocab_dist(rng));
    }

    for (int k = 1; k < size; ++k) {
      int parent = 0;
      if (!flat) {
        // Preferential attachment: weight 1 + current child count.
        int total = 0;
        for (int p = 0; p < k; ++p) total += 1 + child_count[static_cast<size_t>(p)];
        int pick = std::uniform_int_distribution<int>(0, total - 1)(rng);
        for (int p = 0; p < k; ++p) {
          pick -= 1 + child_count[static_cast<size_t>(p)];
          if (pick < 0) {
            parent = p;
            break;
          }
        }
      }
      parent_pos[static_cast<size_t>(k)] = parent;
      ++child_count[static_cast<size_t>(parent)];
      const std::int64_t lag =
          std::max<std::int64_t>(1, std::llround(lag_dist(rng)));
      timestamps[static_cast<size_t>(k)] = timestamps[static_cast<size_t>(parent)] + lag;

      int site = site_dist(rng);
      while (site == sites[static_cast<size_t>(parent)]) site = site_dist(rng);
      sites[static_cast<size_t>(k)] = site;

      std::set<int> copied;
      for (int token : tokens[static_cast<size_t>(parent)]) {
        copied.insert(unit(rng) < config.copy_noise ? vocab_dist(rng) : token);
      }
      tokens[static_cast<size_t>(k)] = std::move(copied);
    }

    std::vector<GoldLink> links;
    for (int k = 0; k < size; ++k) {
      NodeRecord node;
      node.id = record.cascade_id + "_n" + pad_number(k, 3);
      node.site = "site" + pad_number(sites[static_cast<size_t>(k)], 3);
      node.timestamp = timestamps[static_cast<size_t>(k)];
      node.language = language;
      node.content_type = content_types[static_cast<size_t>(
          std::uniform_int_distribution<int>(0, static_cast<int>(content_types.size()) - 1)(rng))];
      node.text = join_tokens(tokens[static_cast<size_t>(k)]);
      record.nodes.push_back(std::move(node));
      if (parent_pos[static_cast<size_t>(k)] >= 0) {
        links.push_back(GoldLink{
            record.cascade_id + "_n" + pad_number(parent_pos[static_cast<size_t>(k)], 3),
            record.cascade_id + "_n" + pad_number(k, 3)});
      }
    }

    if (!config.tree_only) {
      // Occasionally add a second gold parent so the gold becomes a DAG.
      for (int k = 1; k < size; ++k) {
        if (unit(rng) >= 0.15) continue;
        std::vector<int> candidates;
        for (int p = 0; p < size; ++p) {
          if (p == k || p == parent_pos[static_cast<size_t>(k)]) continue;
          if (timestamps[static_cast<size_t>(p)] >= timestamps[static_cast<size_t>(k)])
            continue;
          if (sites[static_cast<size_t>(p)] == sites[static_cast<size_t>(k)]) continue;
          candidates.push_back(p);
        }
        if (candidates.empty()) continue;
        const int extra = candidates[static_cast<size_t>(
            std::uniform_int_distribution<int>(
                0, static_cast<int>(candidates.size()) - 1)(rng))];
        links.push_back(
            GoldLink{record.cascade_id + "_n" + pad_number(extra, 3),
                     record.cascade_id + "_n" + pad_number(k, 3)});
      }
    }

    record.gold_links = std::move(links);
    records.push_back(canonicalize(std::move(record)));
  }
  return records;
}

LinkSet gold_network(const std::vector<CascadeRecord>& records, bool per_day) {
  LinkSet links;
  for (const CascadeRecord& record : records) {
    if (!record.gold_links) continue;
    std::unordered_map<std::string, const NodeRecord*> by_id;
    for (const NodeRecord& node : record.nodes) by_id[node.id] = &node;
    for (const GoldLink& link : *record.gold_links) {
      const NodeRecord* parent = by_id.at(link.parent_id);
      const NodeRecord* child = by_id.at(link.child_id);
      if (parent->site == child->site) continue;
      SiteEdge edge{parent->site, child->site, -1};
      if (per_day) {
        std::int64_t day = child->timestamp / 86400;
        if (child->timestamp % 86400 < 0) --day;
        edge.day = static_cast<int>(day);
      }
      links.edges.insert(std::move(edge));
    }
  }
  return links;
}

void write_link_csv(const std::string& path, const LinkSet& links) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (const SiteEdge& edge : links.edges) {
    out << edge.src << ',' << edge.dst;
    if (edge.day >= 0) out << ',' << edge.day;
    out << '\n';
  }
}

LinkSet read_link_csv(const std::string& path, bool keep_days) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  LinkSet links;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string src, dst, day;
    if (!std::getline(ss, src, ',') || !std::getline(ss, dst, ',')) {
      throw ParseError("expected source_site,dest_site[,day]", line_no);
    }
    SiteEdge edge{src, dst, -1};
    if (std::getline(ss, day, ',') && keep_days) {
      try {
        edge.day = std::stoi(day);
      } catch (const std::exception&) {
        throw ParseError("bad day value '" + day + "'", line_no);
      }
    }
    links.edges.insert(std::move(edge));
  }
  return links;
}

void write_ranked_csv(const std::string& path, const RankedEdgeList& ranked) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  char buf[64];
  for (const RankedEntry& entry : ranked.entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", entry.score);
    out << entry.src << ',' << entry.dst << ',' << buf;
    if (entry.day >= 0) out << ',' << entry.day;
    out << '\n';
  }
}

}  // namespace dst
