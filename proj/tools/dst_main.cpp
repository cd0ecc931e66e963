#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dst/data_io.hpp"
#include "dst/decode.hpp"
#include "dst/errors.hpp"
#include "dst/eval.hpp"
#include "dst/matrix_tree.hpp"
#include "dst/parallel.hpp"
#include "dst/train.hpp"

namespace {

using nlohmann::json;

struct LoadOpts {
  std::string input;
  std::int64_t root_window = 3600;
  std::int64_t merge_window = 0;  // 0 disables merging
  std::int64_t max_lag = 0;       // 0 disables the lag cap
  bool no_root_window = false;
  bool no_time_order = false;
};

void add_load_options(CLI::App* cmd, LoadOpts& opts) {
  cmd->add_option("--input", opts.input, "Cascade JSONL file")->required();
  cmd->add_option("--root-window", opts.root_window,
                  "Root attachment window in seconds");
  cmd->add_option("--merge-window", opts.merge_window,
                  "Merge cascades starting within this many seconds (0 = off)");
  cmd->add_option("--max-lag", opts.max_lag,
                  "Forbid node edges spanning more than this many seconds (0 = off)");
  cmd->add_flag("--no-root-window", opts.no_root_window,
                "Allow every node to attach to the root");
  cmd->add_flag("--no-time-order", opts.no_time_order,
                "Drop the strict chronological-order constraint");
}

std::vector<dst::CascadeInstance> load_instances(const LoadOpts& opts) {
  std::vector<dst::CascadeInstance> instances =
      dst::read_cascades(opts.input, opts.root_window);
  if (opts.merge_window > 0) {
    instances = dst::merge_instances(instances, opts.merge_window);
  }
  return instances;
}

dst::ConstraintSet constraints_from(const LoadOpts& opts) {
  dst::ConstraintOptions copts;
  copts.root_window = !opts.no_root_window;
  copts.time_order = !opts.no_time_order;
  copts.max_lag_seconds = opts.max_lag;
  return dst::ConstraintSet::standard(copts);
}

json metrics_to_json(const dst::MetricsReport& report) {
  return json{{"recall", report.recall},
              {"precision", report.precision},
              {"f1", report.f1},
              {"average_precision", report.average_precision},
              {"true_positives", report.true_positives},
              {"predicted", report.predicted},
              {"gold", report.gold}};
}

void emit_json(const json& j, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << j.dump() << std::endl;
  } else {
    std::ofstream out(out_path);
    if (!out) throw dst::DataError("cannot open '" + out_path + "' for writing");
    out << j.dump() << '\n';
  }
}

void write_trees(const std::string& path,
                 const std::vector<dst::CascadeInstance>& instances,
                 const std::vector<std::optional<dst::Arborescence>>& trees) {
  std::ofstream out(path);
  if (!out) throw dst::DataError("cannot open '" + path + "' for writing");
  for (size_t c = 0; c < instances.size(); ++c) {
    if (!trees[c]) continue;
    const dst::Cascade& cascade = instances[c].cascade;
    json edges = json::array();
    for (int i = 1; i <= cascade.size(); ++i) {
      const int p = trees[c]->parent_of(i);
      json edge;
      edge["child"] = cascade.node(i).id;
      if (p == 0) {
        edge["parent"] = nullptr;
      } else {
        edge["parent"] = cascade.node(p).id;
      }
      edges.push_back(std::move(edge));
    }
    out << json{{"cascade_id", cascade.id()}, {"edges", std::move(edges)}}.dump()
        << '\n';
  }
}

std::unordered_map<std::string, std::map<std::string, std::string>> read_trees(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dst::DataError("cannot open '" + path + "'");
  std::unordered_map<std::string, std::map<std::string, std::string>> trees;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw dst::ParseError(e.what(), line_no);
    }
    try {
      std::map<std::string, std::string> parents;
      for (const json& edge : j.at("edges")) {
        const std::string child = edge.at("child").get<std::string>();
        const json& parent = edge.at("parent");
        parents[child] = parent.is_null() ? std::string() : parent.get<std::string>();
      }
      trees[j.at("cascade_id").get<std::string>()] = std::move(parents);
    } catch (const json::exception& e) {
      throw dst::ParseError(e.what(), line_no);
    }
  }
  return trees;
}

// Rows: cascade_id,parent_id,child_id,probability with an empty parent_id
// for root edges.
struct MarginalRow {
  std::string parent_id;
  std::string child_id;
  double p = 0.0;
};

std::unordered_map<std::string, std::vector<MarginalRow>> read_marginal_rows(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dst::DataError("cannot open '" + path + "'");
  std::unordered_map<std::string, std::vector<MarginalRow>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cascade_id, parent, child, p;
    if (!std::getline(ss, cascade_id, ',') || !std::getline(ss, parent, ',') ||
        !std::getline(ss, child, ',') || !std::getline(ss, p, ',')) {
      throw dst::ParseError("expected cascade_id,parent_id,child_id,probability",
                            line_no);
    }
    try {
      rows[cascade_id].push_back(MarginalRow{parent, child, std::stod(p)});
    } catch (const std::exception&) {
      throw dst::ParseError("bad probability '" + p + "'", line_no);
    }
  }
  return rows;
}

dst::EdgeMarginals marginals_from_rows(const dst::Cascade& cascade,
                                       const std::vector<MarginalRow>& rows) {
  dst::EdgeMarginals marginals;
  marginals.p = Eigen::MatrixXd::Zero(cascade.size() + 1, cascade.size() + 1);
  std::unordered_map<std::string, int> index;
  for (int i = 1; i <= cascade.size(); ++i) index[cascade.node(i).id] = i;
  for (const MarginalRow& row : rows) {
    const auto child_it = index.find(row.child_id);
    if (child_it == index.end()) {
      throw dst::DataError("marginal row references unknown node '" + row.child_id +
                           "' in cascade '" + cascade.id() + "'");
    }
    int parent = 0;
    if (!row.parent_id.empty()) {
      const auto parent_it = index.find(row.parent_id);
      if (parent_it == index.end()) {
        throw dst::DataError("marginal row references unknown node '" +
                             row.parent_id + "' in cascade '" + cascade.id() + "'");
      }
      parent = parent_it->second;
    }
    marginals.p(parent, child_it->second) = row.p;
  }
  return marginals;
}

// ---------------------------------------------------------------------------

struct GenerateOpts {
  dst::GeneratorConfig config;
  int size_min = 5;
  int size_max = 100;
  bool dag = false;
  std::string out;
  std::string gold_network_out;
};

int run_generate(const GenerateOpts& opts) {
  dst::GeneratorConfig config = opts.config;
  config.size_range = {opts.size_min, opts.size_max};
  config.tree_only = !opts.dag;
  const std::vector<dst::CascadeRecord> records = dst::generate_cascades(config);
  dst::write_records(opts.out, records);
  if (!opts.gold_network_out.empty()) {
    dst::write_link_csv(opts.gold_network_out, dst::gold_network(records, true));
  }
  std::cerr << "generated " << records.size() << " cascades -> " << opts.out << '\n';
  return 0;
}

struct TrainOpts {
  LoadOpts load;
  std::string model_out;
  std::string report_out;
  std::string mode = "contrastive";
  std::string feature_set = "enhanced";
  std::string init = "zeros";
  dst::TrainConfig config;
  std::string time_bin_edges;
  double jaccard_bin_width = 0.1;
};

dst::FeatureConfig feature_config_from(const std::string& feature_set,
                                       const std::string& time_bin_edges,
                                       double jaccard_bin_width) {
  dst::FeatureConfig config;
  if (feature_set == "basic") {
    config.feature_set = dst::FeatureSet::basic;
  } else if (feature_set == "enhanced") {
    config.feature_set = dst::FeatureSet::enhanced;
  } else {
    throw dst::DataError("unknown feature set '" + feature_set + "'");
  }
  if (!time_bin_edges.empty()) {
    config.time_bin_edges.clear();
    std::stringstream ss(time_bin_edges);
    std::string item;
    while (std::getline(ss, item, ',')) {
      config.time_bin_edges.push_back(std::stoll(item));
    }
  }
  config.jaccard_bin_width = jaccard_bin_width;
  config.validate();
  return config;
}

int run_train(const TrainOpts& opts) {
  dst::TrainConfig config = opts.config;
  if (opts.mode == "contrastive") {
    config.mode = dst::TrainMode::contrastive;
  } else if (opts.mode == "supervised") {
    config.mode = dst::TrainMode::supervised;
  } else {
    throw dst::DataError("unknown mode '" + opts.mode + "'");
  }
  if (opts.init == "zeros") {
    config.init = dst::InitScheme::zeros;
  } else if (opts.init == "uniform-small") {
    config.init = dst::InitScheme::uniform_small;
  } else {
    throw dst::DataError("unknown init scheme '" + opts.init + "'");
  }
  const dst::FeatureConfig feature_config = feature_config_from(
      opts.feature_set, opts.time_bin_edges, opts.jaccard_bin_width);

  const std::vector<dst::CascadeInstance> instances = load_instances(opts.load);
  std::vector<dst::TrainExample> dataset;
  dataset.reserve(instances.size());
  for (const dst::CascadeInstance& instance : instances) {
    dst::TrainExample example{instance.cascade, std::nullopt};
    if (config.mode == dst::TrainMode::supervised) {
      if (!instance.gold) {
        throw dst::DataError("supervised mode requires gold_links for cascade '" +
                             instance.cascade.id() + "'");
      }
      example.gold = instance.gold->as_arborescence();
      if (!example.gold) {
        throw dst::InvalidGoldTree("gold of cascade '" + instance.cascade.id() +
                                   "' is not tree-shaped");
      }
    }
    dataset.push_back(std::move(example));
  }

  dst::FeatureAlphabet alphabet;
  const dst::TrainReport report =
      dst::fit(dataset, config, feature_config, constraints_from(opts.load), alphabet);

  dst::save_model(opts.model_out,
                  dst::Model{feature_config, alphabet, report.final_theta});

  if (!opts.report_out.empty()) {
    json j{{"mode", opts.mode},
           {"feature_set", opts.feature_set},
           {"learning_rate", config.learning_rate},
           {"iterations", config.iterations},
           {"l2_lambda", config.l2_lambda},
           {"converged", report.converged},
           {"final_objective", report.final_objective},
           {"skipped_cascades", report.skipped_cascades},
           {"objective_trace", report.objective_trace}};
    emit_json(j, opts.report_out);
  }
  std::cerr << "trained on " << dataset.size() << " cascades, "
            << alphabet.size() << " features, converged="
            << (report.converged ? "true" : "false")
            << ", final objective " << report.final_objective << '\n';
  return 0;
}

struct InferOpts {
  LoadOpts load;
  std::string model_path;
  std::string trees_out;
  std::string marginals_out;
  std::string objective_out;
  int workers = 0;
};

int run_infer(const InferOpts& opts) {
  const dst::Model model = dst::load_model(opts.model_path);
  const std::vector<dst::CascadeInstance> instances = load_instances(opts.load);
  const dst::ConstraintSet constraints = constraints_from(opts.load);

  struct Result {
    std::optional<dst::Arborescence> tree;
    std::optional<dst::EdgeMarginals> marginals;
    double log_likelihood = 0.0;
    bool skipped = false;
  };
  std::vector<Result> results(instances.size());

  dst::FeatureAlphabet alphabet = model.alphabet;  // frozen; shared read-only
  const bool want_marginals = !opts.marginals_out.empty();
  const bool want_objective = !opts.objective_out.empty();

  dst::parallel_blocks<int>(
      static_cast<long>(instances.size()), opts.workers, [&](long begin, long end) {
        for (long k = begin; k < end; ++k) {
          const dst::Cascade& cascade = instances[static_cast<size_t>(k)].cascade;
          Result& result = results[static_cast<size_t>(k)];
          const dst::EdgeScores scores = dst::build_scores(
              cascade, model.theta.weights, model.feature_config, constraints,
              alphabet);
          try {
            result.tree = dst::best_tree(scores);
            if (want_marginals) result.marginals = dst::edge_marginals(scores);
            if (want_objective) {
              const dst::EdgeScores full = scores.with_full_mask();
              double shift = full.s(0, 1);
              for (int j = 0; j <= full.n(); ++j) {
                for (int i = 1; i <= full.n(); ++i) {
                  if (j != i) shift = std::max(shift, full.s(j, i));
                }
              }
              result.log_likelihood = dst::log_partition(scores, shift) -
                                      dst::log_partition(full, shift);
            }
          } catch (const dst::NoValidTree&) {
            result.skipped = true;
          }
        }
        return 0;
      });

  int skipped = 0;
  for (const Result& result : results) skipped += result.skipped ? 1 : 0;

  if (!opts.trees_out.empty()) {
    std::vector<std::optional<dst::Arborescence>> trees;
    trees.reserve(results.size());
    for (const Result& result : results) trees.push_back(result.tree);
    write_trees(opts.trees_out, instances, trees);
  }

  if (want_marginals) {
    std::ofstream out(opts.marginals_out);
    if (!out) {
      throw dst::DataError("cannot open '" + opts.marginals_out + "' for writing");
    }
    char buf[64];
    for (size_t c = 0; c < instances.size(); ++c) {
      if (!results[c].marginals) continue;
      const dst::Cascade& cascade = instances[c].cascade;
      const Eigen::MatrixXd& p = results[c].marginals->p;
      for (int j = 0; j <= cascade.size(); ++j) {
        for (int i = 1; i <= cascade.size(); ++i) {
          if (j == i || p(j, i) <= 0.0) continue;
          std::snprintf(buf, sizeof(buf), "%.17g", p(j, i));
          out << cascade.id() << ','
              << (j == 0 ? std::string() : cascade.node(j).id) << ','
              << cascade.node(i).id << ',' << buf << '\n';
        }
      }
    }
  }

  if (want_objective) {
    double total = 0.0;
    for (const Result& result : results) {
      if (!result.skipped) total += result.log_likelihood;
    }
    emit_json(json{{"contrastive_log_likelihood", total},
                   {"cascades", instances.size()},
                   {"skipped", skipped}},
              opts.objective_out);
  }
  std::cerr << "inferred " << (instances.size() - static_cast<size_t>(skipped))
            << " cascades (" << skipped << " skipped)" << '\n';
  return 0;
}

struct BaselineOpts {
  LoadOpts load;
  std::string trees_out;
};

int run_baseline(const BaselineOpts& opts) {
  const std::vector<dst::CascadeInstance> instances = load_instances(opts.load);
  std::vector<std::optional<dst::Arborescence>> trees;
  trees.reserve(instances.size());
  for (const dst::CascadeInstance& instance : instances) {
    trees.push_back(dst::naive_baseline(instance.cascade));
  }
  write_trees(opts.trees_out, instances, trees);
  std::cerr << "baseline trees for " << instances.size() << " cascades -> "
            << opts.trees_out << '\n';
  return 0;
}

struct EvalOpts {
  LoadOpts load;
  std::string mode = "cascade";
  std::string trees_path;
  std::string marginals_path;
  bool from_marginals = false;
  std::string gold_network_path;
  std::string ranked_out;
  int top_k = 0;
  std::string out;
};

dst::Arborescence argmax_tree_from_marginals(const dst::Cascade& cascade,
                                             const dst::EdgeMarginals& marginals) {
  dst::Arborescence tree;
  tree.parent.assign(static_cast<size_t>(cascade.size()), 0);
  for (int i = 1; i <= cascade.size(); ++i) {
    int arg = 0;
    double best = marginals.p(0, i);
    for (int j = 1; j <= cascade.size(); ++j) {
      if (j == i) continue;
      if (marginals.p(j, i) > best) {
        best = marginals.p(j, i);
        arg = j;
      }
    }
    tree.parent[static_cast<size_t>(i - 1)] = arg;
  }
  return tree;
}

int run_eval(const EvalOpts& opts) {
  const std::vector<dst::CascadeInstance> instances = load_instances(opts.load);

  if (opts.mode == "cascade") {
    std::vector<dst::Cascade> cascades;
    std::vector<dst::GoldStructure> golds;
    std::vector<dst::Arborescence> predictions;
    for (const dst::CascadeInstance& instance : instances) {
      if (!instance.gold) {
        throw dst::DataError("cascade '" + instance.cascade.id() +
                             "' has no gold links to evaluate against");
      }
    }

    if (opts.from_marginals) {
      if (opts.marginals_path.empty()) {
        throw dst::DataError("--from-marginals requires --marginals");
      }
      auto rows = read_marginal_rows(opts.marginals_path);
      for (const dst::CascadeInstance& instance : instances) {
        auto it = rows.find(instance.cascade.id());
        if (it == rows.end()) continue;  // skipped at inference time
        const dst::EdgeMarginals marginals =
            marginals_from_rows(instance.cascade, it->second);
        predictions.push_back(argmax_tree_from_marginals(instance.cascade, marginals));
        cascades.push_back(instance.cascade);
        golds.push_back(*instance.gold);
      }
    } else {
      if (opts.trees_path.empty()) {
        throw dst::DataError("cascade evaluation requires --trees");
      }
      auto trees = read_trees(opts.trees_path);
      for (const dst::CascadeInstance& instance : instances) {
        auto it = trees.find(instance.cascade.id());
        if (it == trees.end()) continue;
        const dst::Cascade& cascade = instance.cascade;
        dst::Arborescence tree;
        tree.parent.assign(static_cast<size_t>(cascade.size()), -1);
        for (int i = 1; i <= cascade.size(); ++i) {
          const std::string& child_id = cascade.node(i).id;
          auto parent_it = it->second.find(child_id);
          if (parent_it == it->second.end()) {
            throw dst::DataError("prediction for cascade '" + cascade.id() +
                                 "' misses node '" + child_id + "'");
          }
          if (parent_it->second.empty()) {
            tree.parent[static_cast<size_t>(i - 1)] = 0;
          } else {
            const int p = cascade.index_of(parent_it->second);
            if (p == 0) {
              throw dst::DataError("prediction references unknown parent '" +
                                   parent_it->second + "'");
            }
            tree.parent[static_cast<size_t>(i - 1)] = p;
          }
        }
        predictions.push_back(std::move(tree));
        cascades.push_back(cascade);
        golds.push_back(*instance.gold);
      }
    }
    const dst::MetricsReport report =
        dst::eval_cascade_level(predictions, golds, cascades);
    json j = metrics_to_json(report);
    j["mode"] = "cascade";
    j["cascades"] = cascades.size();
    emit_json(j, opts.out);
    return 0;
  }

  if (opts.mode != "network-static" && opts.mode != "network-per-day") {
    throw dst::DataError("unknown eval mode '" + opts.mode + "'");
  }
  const bool per_day = opts.mode == "network-per-day";
  if (opts.marginals_path.empty() || opts.gold_network_path.empty()) {
    throw dst::DataError("network evaluation requires --marginals and --gold-network");
  }

  auto rows = read_marginal_rows(opts.marginals_path);
  std::vector<dst::Cascade> cascades;
  std::vector<dst::EdgeMarginals> marginals;
  for (const dst::CascadeInstance& instance : instances) {
    auto it = rows.find(instance.cascade.id());
    if (it == rows.end()) continue;
    cascades.push_back(instance.cascade);
    marginals.push_back(marginals_from_rows(instance.cascade, it->second));
    rows.erase(it);
  }
  if (!rows.empty()) {
    throw dst::DataError("marginals file contains unknown cascade '" +
                         rows.begin()->first + "'");
  }

  const dst::RankedEdgeList ranked = dst::network_from_marginals(
      marginals, cascades, opts.top_k,
      per_day ? dst::NetworkGranularity::per_day
              : dst::NetworkGranularity::static_network);
  if (!opts.ranked_out.empty()) dst::write_ranked_csv(opts.ranked_out, ranked);

  const dst::LinkSet gold = dst::read_link_csv(opts.gold_network_path, per_day);

  if (!per_day) {
    const dst::MetricsReport report = dst::eval_network(ranked, gold);
    json j = metrics_to_json(report);
    j["mode"] = opts.mode;
    emit_json(j, opts.out);
    return 0;
  }

  std::map<int, dst::LinkSet> gold_by_day;
  for (const dst::SiteEdge& edge : gold.edges) {
    if (edge.day < 0) {
      throw dst::DataError("per-day evaluation requires a day column in the gold file");
    }
    gold_by_day[edge.day].edges.insert(edge);
  }
  std::map<int, dst::RankedEdgeList> ranked_by_day;
  for (const dst::RankedEntry& entry : ranked.entries) {
    ranked_by_day[entry.day].entries.push_back(entry);
  }
  json days = json::array();
  double recall_sum = 0.0;
  double precision_sum = 0.0;
  double ap_sum = 0.0;
  for (const auto& [day, day_gold] : gold_by_day) {
    const dst::RankedEdgeList empty;
    const auto it = ranked_by_day.find(day);
    const dst::MetricsReport report =
        dst::eval_network(it == ranked_by_day.end() ? empty : it->second, day_gold);
    json j = metrics_to_json(report);
    j["day"] = day;
    days.push_back(std::move(j));
    recall_sum += report.recall;
    precision_sum += report.precision;
    ap_sum += report.average_precision;
  }
  const double day_count = static_cast<double>(gold_by_day.size());
  json j{{"mode", opts.mode},
         {"days", std::move(days)},
         {"macro_recall", day_count > 0 ? recall_sum / day_count : 0.0},
         {"macro_precision", day_count > 0 ? precision_sum / day_count : 0.0},
         {"macro_average_precision", day_count > 0 ? ap_sum / day_count : 0.0}};
  emit_json(j, opts.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directed spanning tree model of information cascades"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI config file");

  GenerateOpts generate_opts;
  CLI::App* generate = app.add_subcommand("generate", "Generate synthetic cascades");
  generate->add_option("--out", generate_opts.out, "Output cascade JSONL path")
      ->required();
  generate->add_option("--gold-network", generate_opts.gold_network_out,
                       "Optional gold site-network CSV path (with day column)");
  generate->add_option("--n", generate_opts.config.n_cascades, "Number of cascades");
  generate->add_option("--seed", generate_opts.config.seed, "Random seed");
  generate->add_option("--sites", generate_opts.config.sites_pool_size, "Site pool size");
  generate->add_option("--vocab", generate_opts.config.vocab_size, "Vocabulary size");
  generate->add_option("--tokens-per-doc", generate_opts.config.tokens_per_doc,
                       "Seed document token-set size");
  generate->add_option("--flat-fraction", generate_opts.config.flat_fraction,
                       "Probability a cascade is a flat star");
  generate->add_option("--copy-noise", generate_opts.config.copy_noise,
                       "Per-token mutation probability along an edge");
  generate->add_option("--size-min", generate_opts.size_min, "Minimum cascade size");
  generate->add_option("--size-max", generate_opts.size_max, "Maximum cascade size");
  generate->add_option("--lag-median", generate_opts.config.lag_log_median,
                       "Median edge lag in seconds");
  generate->add_option("--lag-sigma", generate_opts.config.lag_log_sigma,
                       "Log-space sigma of the edge lag");
  generate->add_flag("--dag", generate_opts.dag,
                     "Occasionally add extra gold parents (DAG gold)");

  TrainOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "Train model parameters");
  add_load_options(train, train_opts.load);
  train->add_option("--model", train_opts.model_out, "Output model path")->required();
  train->add_option("--report", train_opts.report_out, "Output training report JSON");
  train->add_option("--mode", train_opts.mode, "contrastive | supervised");
  train->add_option("--feature-set", train_opts.feature_set, "basic | enhanced");
  train->add_option("--learning-rate", train_opts.config.learning_rate,
                    "Fixed gradient-ascent step size");
  train->add_option("--iterations", train_opts.config.iterations, "Iteration count");
  train->add_option("--l2", train_opts.config.l2_lambda, "L2 penalty weight");
  train->add_option("--init", train_opts.init, "zeros | uniform-small");
  train->add_option("--init-seed", train_opts.config.init_seed,
                    "Seed for uniform-small initialization");
  train->add_option("--workers", train_opts.config.workers,
                    "Worker threads (0 = hardware)");
  train->add_option("--time-bin-edges", train_opts.time_bin_edges,
                    "Comma-separated lag bin edges in seconds");
  train->add_option("--jaccard-bin-width", train_opts.jaccard_bin_width,
                    "Width of each Jaccard distance bin");

  InferOpts infer_opts;
  CLI::App* infer = app.add_subcommand("infer", "Decode trees and edge marginals");
  add_load_options(infer, infer_opts.load);
  infer->add_option("--model", infer_opts.model_path, "Trained model path")->required();
  infer->add_option("--trees", infer_opts.trees_out, "Output MAP trees JSONL");
  infer->add_option("--marginals", infer_opts.marginals_out,
                    "Output edge marginals CSV");
  infer->add_option("--objective", infer_opts.objective_out,
                    "Output contrastive objective JSON");
  infer->add_option("--workers", infer_opts.workers, "Worker threads (0 = hardware)");

  BaselineOpts baseline_opts;
  CLI::App* baseline =
      app.add_subcommand("baseline", "Attach-everything-to-earliest baseline trees");
  add_load_options(baseline, baseline_opts.load);
  baseline->add_option("--trees", baseline_opts.trees_out, "Output trees JSONL")
      ->required();

  EvalOpts eval_opts;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate predictions");
  add_load_options(eval, eval_opts.load);
  eval->add_option("--mode", eval_opts.mode,
                   "cascade | network-static | network-per-day");
  eval->add_option("--trees", eval_opts.trees_path, "Predicted trees JSONL");
  eval->add_option("--marginals", eval_opts.marginals_path, "Edge marginals CSV");
  eval->add_flag("--from-marginals", eval_opts.from_marginals,
                 "Score per-child argmax of marginals instead of MAP trees");
  eval->add_option("--gold-network", eval_opts.gold_network_path,
                   "Gold site-network CSV");
  eval->add_option("--top-k", eval_opts.top_k,
                   "Keep only the k highest-scoring edges per bucket (0 = all)");
  eval->add_option("--ranked-out", eval_opts.ranked_out, "Write the ranked edge CSV");
  eval->add_option("--out", eval_opts.out, "Metrics JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    // Echo the fully-resolved configuration for reproducibility.
    std::cerr << "# resolved configuration\n" << app.config_to_str(true, false);
    if (generate->parsed()) return run_generate(generate_opts);
    if (train->parsed()) return run_train(train_opts);
    if (infer->parsed()) return run_infer(infer_opts);
    if (baseline->parsed()) return run_baseline(baseline_opts);
    if (eval->parsed()) return run_eval(eval_opts);
  } catch (const dst::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const dst::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
