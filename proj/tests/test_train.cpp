#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "dst/errors.hpp"
#include "dst/train.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dst;
using testutil::make_cascade;
using testutil::make_node;

namespace {

Cascade text_cascade(const std::string& id, std::int64_t base,
                     std::int64_t root_window = 3600) {
  std::vector<Node> nodes = {
      make_node(id + "_n1", "siteA", base, "en", "blog", "alpha beta gamma delta"),
      make_node(id + "_n2", "siteB", base + 600, "en", "news", "alpha beta gamma"),
      make_node(id + "_n3", "siteC", base + 5000, "de", "blog", "alpha zeta"),
      make_node(id + "_n4", "siteD", base + 90000, "de", "social", "eta theta"),
  };
  return Cascade(id, std::move(nodes), root_window);
}

FeatureAlphabet alphabet_for(const std::vector<TrainExample>& dataset,
                             const FeatureConfig& config) {
  FeatureAlphabet alphabet;
  for (const TrainExample& example : dataset) {
    EdgeFeatureTable table(example.cascade, config, alphabet);
  }
  alphabet.freeze();
  return alphabet;
}

}  // namespace

TEST_CASE("contrastive likelihood is zero when constraints allow everything") {
  Cascade cascade = text_cascade("c1", 0);
  FeatureConfig config;
  std::vector<TrainExample> dataset{{cascade, std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ParameterVector theta = ParameterVector::zeros(alphabet.size());
  for (double& w : theta.weights) w = dist(rng);
  const double ll = contrastive_log_likelihood(cascade, theta, config,
                                               ConstraintSet::unconstrained(), alphabet);
  CHECK(ll == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("a single constraint-valid tree out of sixteen") {
  // Timestamps 0, 5, 5 with a zero root window: node 1 must attach to the
  // root, nodes 2 and 3 (equal timestamps) can only attach to node 1.
  std::vector<Node> nodes = {make_node("n1", "sA", 0), make_node("n2", "sB", 5),
                             make_node("n3", "sC", 5)};
  Cascade cascade("single", std::move(nodes), 0);
  FeatureConfig config;
  std::vector<TrainExample> dataset{{cascade, std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  ParameterVector theta = ParameterVector::zeros(alphabet.size());
  const double ll = contrastive_log_likelihood(cascade, theta, config,
                                               ConstraintSet::standard(), alphabet);
  CHECK(ll == doctest::Approx(std::log(1.0 / 16.0)).epsilon(1e-10));
}

TEST_CASE("contrastive likelihood matches enumeration on random weights") {
  Cascade cascade = text_cascade("c1", 0);
  FeatureConfig config;
  std::vector<TrainExample> dataset{{cascade, std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    ParameterVector theta = ParameterVector::zeros(alphabet.size());
    for (double& w : theta.weights) w = dist(rng);
    const ConstraintSet constraints = ConstraintSet::standard();
    EdgeScores constrained =
        build_scores(cascade, theta.weights, config, constraints, alphabet);
    EdgeScores full = constrained.with_full_mask();
    const double expected = oracle::log_partition(constrained) -
                            oracle::log_partition(full);
    const double actual = contrastive_log_likelihood(cascade, theta, config,
                                                     constraints, alphabet);
    CHECK(std::abs(actual - expected) <= 1e-8 * std::max(1.0, std::abs(expected)));
    CHECK(actual <= 0.0);  // constrained trees are a subset of all trees
  }
}

TEST_CASE("supervised likelihood is zero for a forced single tree") {
  Cascade cascade("one", {make_node("n1", "sA", 0, "en", "blog", "alpha")}, 3600);
  FeatureConfig config;
  std::vector<TrainExample> dataset{{cascade, std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  ParameterVector theta = ParameterVector::zeros(alphabet.size());
  for (double& w : theta.weights) w = dist(rng);
  const double ll =
      supervised_log_likelihood(cascade, Arborescence{{0}}, theta, config, alphabet);
  CHECK(ll == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("supervised likelihood under uniform scores is -log 16") {
  std::vector<Node> nodes = {make_node("n1", "sA", 0), make_node("n2", "sB", 5),
                             make_node("n3", "sC", 9)};
  Cascade cascade("sup", std::move(nodes), 3600);
  FeatureConfig config;
  config.feature_set = FeatureSet::basic;
  FeatureAlphabet alphabet;
  alphabet.freeze();  // empty alphabet: every feature is unknown, weight 0
  ParameterVector theta = ParameterVector::zeros(alphabet.size());
  const double ll = supervised_log_likelihood(cascade, Arborescence{{0, 1, 2}},
                                              theta, config, alphabet);
  CHECK(ll == doctest::Approx(std::log(1.0 / 16.0)).epsilon(1e-10));
}

TEST_CASE("supervised likelihood matches enumerated tree probability") {
  Cascade cascade = text_cascade("c1", 0);
  FeatureConfig config;
  std::vector<TrainExample> dataset{{cascade, std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ParameterVector theta = ParameterVector::zeros(alphabet.size());
  for (double& w : theta.weights) w = dist(rng);
  const Arborescence gold{{0, 1, 1, 3}};
  EdgeScores full = build_scores(cascade, theta.weights, config,
                                 ConstraintSet::unconstrained(), alphabet);
  double gold_score = 0.0;
  for (int i = 1; i <= cascade.size(); ++i) gold_score += full.s(gold.parent_of(i), i);
  const double expected = gold_score - oracle::log_partition(full);
  const double actual =
      supervised_log_likelihood(cascade, gold, theta, config, alphabet);
  CHECK(std::abs(actual - expected) <= 1e-8 * std::max(1.0, std::abs(expected)));
  CHECK(actual <= 0.0);  // a single tree never exceeds the whole mass
}

TEST_CASE("invalid gold trees are rejected") {
  Cascade cascade = text_cascade("c1", 0);
  FeatureConfig config;
  std::vector<TrainExample> dataset{{cascade, std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  ParameterVector theta = ParameterVector::zeros(alphabet.size());
  CHECK_THROWS_AS(supervised_log_likelihood(cascade, Arborescence{{2, 1, 0, 0}},
                                            theta, config, alphabet),
                  InvalidGoldTree);
}

TEST_CASE("zero weights and an open constraint give zero objective and gradient") {
  FeatureConfig config;
  std::vector<TrainExample> dataset{{text_cascade("c1", 0), std::nullopt},
                                    {text_cascade("c2", 500), std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  TrainConfig tconfig;
  tconfig.workers = 1;
  const ObjectiveResult result = total_objective_and_gradient(
      dataset, ParameterVector::zeros(alphabet.size()), tconfig, config,
      ConstraintSet::unconstrained(), alphabet);
  CHECK(result.objective == doctest::Approx(0.0).epsilon(1e-12));
  for (double g : result.gradient) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("a one-cascade dataset equals the per-cascade objective") {
  FeatureConfig config;
  Cascade cascade = text_cascade("c1", 0);
  std::vector<TrainExample> dataset{{cascade, std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  ParameterVector theta = ParameterVector::zeros(alphabet.size());
  for (double& w : theta.weights) w = dist(rng);
  TrainConfig tconfig;
  tconfig.workers = 1;
  const ObjectiveResult result = total_objective_and_gradient(
      dataset, theta, tconfig, config, ConstraintSet::standard(), alphabet);
  const double single = contrastive_log_likelihood(cascade, theta, config,
                                                   ConstraintSet::standard(), alphabet);
  CHECK(result.objective == doctest::Approx(single).epsilon(1e-12));
}

TEST_CASE("total gradient matches finite differences in both modes") {
  FeatureConfig config;
  std::vector<TrainExample> dataset{{text_cascade("c1", 0), std::nullopt},
                                    {text_cascade("c2", 1000), std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  REQUIRE(alphabet.size() >= 20);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> dist(-0.3, 0.3);

  for (const TrainMode mode : {TrainMode::contrastive, TrainMode::supervised}) {
    std::vector<TrainExample> examples = dataset;
    if (mode == TrainMode::supervised) {
      for (TrainExample& example : examples) {
        example.gold = Arborescence{{0, 1, 2, 3}};
      }
    }
    TrainConfig tconfig;
    tconfig.mode = mode;
    tconfig.workers = 1;
    tconfig.l2_lambda = 0.01;
    ParameterVector theta = ParameterVector::zeros(alphabet.size());
    for (double& w : theta.weights) w = dist(rng);

    const ConstraintSet constraints = ConstraintSet::standard();
    const ObjectiveResult result = total_objective_and_gradient(
        examples, theta, tconfig, config, constraints, alphabet);
    const double step = 1e-5;
    for (int k = 0; k < alphabet.size(); ++k) {
      ParameterVector plus = theta;
      ParameterVector minus = theta;
      plus.weights[static_cast<size_t>(k)] += step;
      minus.weights[static_cast<size_t>(k)] -= step;
      const double fd =
          (total_objective_and_gradient(examples, plus, tconfig, config, constraints,
                                        alphabet)
               .objective -
           total_objective_and_gradient(examples, minus, tconfig, config, constraints,
                                        alphabet)
               .objective) /
          (2.0 * step);
      CHECK(std::abs(result.gradient[static_cast<size_t>(k)] - fd) < 1e-5);
    }
  }
}

TEST_CASE("infeasible cascades are skipped and counted") {
  // A negative root window forbids every root attachment, so even the
  // earliest node has no admissible parent. (Any non-negative window
  // always admits at least the star on the earliest node.)
  std::vector<Node> nodes = {make_node("n1", "sA", 0), make_node("n2", "sB", 100)};
  Cascade infeasible("dead", std::move(nodes), -1);
  // With distinct timestamps the same window still admits a chain.
  Cascade alive = text_cascade("alive", 0, 3600);
  FeatureConfig config;
  std::vector<TrainExample> dataset{{infeasible, std::nullopt}, {alive, std::nullopt}};
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  TrainConfig tconfig;
  tconfig.workers = 1;
  const ObjectiveResult result = total_objective_and_gradient(
      dataset, ParameterVector::zeros(alphabet.size()), tconfig, config,
      ConstraintSet::standard(), alphabet);
  CHECK(result.skipped == 1);

  std::vector<TrainExample> all_dead{{infeasible, std::nullopt}};
  FeatureAlphabet alphabet2 = alphabet_for(all_dead, config);
  CHECK_THROWS_AS(total_objective_and_gradient(
                      all_dead, ParameterVector::zeros(alphabet2.size()), tconfig,
                      config, ConstraintSet::standard(), alphabet2),
                  NoValidTree);
}

TEST_CASE("fit rejects bad configurations") {
  FeatureConfig config;
  std::vector<TrainExample> dataset{{text_cascade("c1", 0), std::nullopt}};
  FeatureAlphabet alphabet;
  TrainConfig tconfig;
  tconfig.iterations = 0;
  CHECK_THROWS_AS(
      fit(dataset, tconfig, config, ConstraintSet::standard(), alphabet),
      DataError);
  tconfig.iterations = 1;
  tconfig.learning_rate = 0.0;
  CHECK_THROWS_AS(
      fit(dataset, tconfig, config, ConstraintSet::standard(), alphabet),
      DataError);
  TrainConfig ok;
  CHECK_THROWS_AS(fit({}, ok, config, ConstraintSet::standard(), alphabet), DataError);
}

TEST_CASE("supervised fit on forced gold increases towards zero") {
  // Zero root window plus tied timestamps make the gold stars the only
  // constraint-valid trees; supervision drives their probability up.
  std::vector<TrainExample> dataset;
  for (int c = 0; c < 3; ++c) {
    std::vector<Node> nodes = {
        make_node("f" + std::to_string(c) + "_n1", "sA", c * 100000, "en", "blog",
                  "alpha beta"),
        make_node("f" + std::to_string(c) + "_n2", "sB", c * 100000 + 50, "en",
                  "news", "alpha beta"),
        make_node("f" + std::to_string(c) + "_n3", "sC", c * 100000 + 50, "de",
                  "blog", "gamma delta"),
    };
    Cascade cascade("f" + std::to_string(c), std::move(nodes), 0);
    dataset.push_back({cascade, Arborescence{{0, 1, 1}}});
  }
  TrainConfig tconfig;
  tconfig.mode = TrainMode::supervised;
  tconfig.iterations = 300;
  tconfig.learning_rate = 0.05;
  tconfig.workers = 1;
  FeatureConfig config;
  FeatureAlphabet alphabet;
  const TrainReport report =
      fit(dataset, tconfig, config, ConstraintSet::standard(), alphabet);
  REQUIRE(report.objective_trace.size() == 300);
  for (size_t t = 1; t < report.objective_trace.size(); ++t) {
    CHECK(report.objective_trace[t] >= report.objective_trace[t - 1] - 1e-9);
  }
  CHECK(report.final_objective > report.objective_trace.front());
  CHECK(report.final_objective < 0.0);
  CHECK(report.final_objective > -0.5);  // close to certainty on 3 cascades
}

TEST_CASE("parallel accumulation matches sequential accumulation") {
  FeatureConfig config;
  std::vector<TrainExample> dataset;
  for (int c = 0; c < 7; ++c) {
    dataset.push_back({text_cascade("p" + std::to_string(c), c * 777), std::nullopt});
  }
  FeatureAlphabet alphabet = alphabet_for(dataset, config);
  std::mt19937 rng(19);
  std::uniform_real_distribution<double> dist(-0.4, 0.4);
  ParameterVector theta = ParameterVector::zeros(alphabet.size());
  for (double& w : theta.weights) w = dist(rng);

  TrainConfig sequential;
  sequential.workers = 1;
  TrainConfig parallel;
  parallel.workers = 4;
  const ObjectiveResult a = total_objective_and_gradient(
      dataset, theta, sequential, config, ConstraintSet::standard(), alphabet);
  const ObjectiveResult b = total_objective_and_gradient(
      dataset, theta, parallel, config, ConstraintSet::standard(), alphabet);
  CHECK(std::abs(a.objective - b.objective) < 1e-10);
  for (size_t k = 0; k < a.gradient.size(); ++k) {
    CHECK(std::abs(a.gradient[k] - b.gradient[k]) < 1e-10);
  }
}

TEST_CASE("l2 with a gradient-free objective keeps weights at zero") {
  FeatureConfig config;
  std::vector<TrainExample> dataset{{text_cascade("c1", 0), std::nullopt}};
  FeatureAlphabet alphabet;
  TrainConfig tconfig;
  tconfig.iterations = 25;
  tconfig.l2_lambda = 0.1;
  tconfig.workers = 1;
  const TrainReport report =
      fit(dataset, tconfig, config, ConstraintSet::unconstrained(), alphabet);
  for (double w : report.final_theta.weights) CHECK(w == 0.0);
  CHECK(report.converged);
}

TEST_CASE("divergence is detected") {
  FeatureConfig config;
  std::vector<TrainExample> dataset{{text_cascade("c1", 0), std::nullopt}};
  FeatureAlphabet alphabet;
  for (const TrainExample& example : dataset) {
    EdgeFeatureTable table(example.cascade, config, alphabet);
  }
  alphabet.freeze();
  ParameterVector bad = ParameterVector::zeros(alphabet.size());
  bad.weights[1] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tconfig;
  tconfig.workers = 1;
  CHECK_THROWS_AS(fit(dataset, tconfig, config, ConstraintSet::standard(), alphabet,
                      bad),
                  DivergenceDetected);
}

TEST_CASE("uniform_small initialization is deterministic and small") {
  FeatureConfig config;
  std::vector<TrainExample> dataset{{text_cascade("c1", 0), std::nullopt}};
  TrainConfig tconfig;
  tconfig.iterations = 1;
  tconfig.init = InitScheme::uniform_small;
  tconfig.init_seed = 99;
  tconfig.workers = 1;
  FeatureAlphabet a1;
  const TrainReport r1 =
      fit(dataset, tconfig, config, ConstraintSet::standard(), a1);
  FeatureAlphabet a2;
  const TrainReport r2 =
      fit(dataset, tconfig, config, ConstraintSet::standard(), a2);
  CHECK(r1.objective_trace == r2.objective_trace);
  CHECK(r1.final_theta.weights == r2.final_theta.weights);
}

TEST_CASE("model files round-trip exactly") {
  FeatureConfig config;
  config.feature_set = FeatureSet::basic;
  config.jaccard_bin_width = 0.2;
  FeatureAlphabet alphabet;
  alphabet.intern("parent_site=siteA");
  alphabet.intern("dt_bin_3");
  alphabet.intern("root_edge");
  alphabet.freeze();
  ParameterVector theta = ParameterVector::zeros(alphabet.size());
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (double& w : theta.weights) w = dist(rng);
  theta.weights[1] = 0.1 + 0.2;  // a value without a short decimal form

  const std::string path = "model_roundtrip.tsv";
  save_model(path, Model{config, alphabet, theta});
  const Model loaded = load_model(path);
  CHECK(loaded.feature_config.feature_set == FeatureSet::basic);
  CHECK(loaded.feature_config.jaccard_bin_width == config.jaccard_bin_width);
  CHECK(loaded.feature_config.time_bin_edges == config.time_bin_edges);
  CHECK(loaded.alphabet.size() == alphabet.size());
  CHECK(loaded.alphabet.hash() == alphabet.hash());
  REQUIRE(loaded.theta.size() == theta.size());
  for (size_t k = 0; k < theta.weights.size(); ++k) {
    CHECK(loaded.theta.weights[k] == theta.weights[k]);  // bit-exact
  }
  std::remove(path.c_str());
}

TEST_CASE("tampered model files are rejected") {
  FeatureConfig config;
  FeatureAlphabet alphabet;
  alphabet.intern("root_edge");
  alphabet.freeze();
  const std::string path = "model_tamper.tsv";
  save_model(path, Model{config, alphabet, ParameterVector::zeros(alphabet.size())});
  {
    std::FILE* f = std::fopen(path.c_str(), "a");
    std::fputs("sneaky_feature\t1.5\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_model(path), ValidationError);
  std::remove(path.c_str());
}
