#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dst/cascade.hpp"

namespace dst {

enum class FeatureSet { basic, enhanced };

struct FeatureConfig {
  FeatureSet feature_set = FeatureSet::enhanced;
  // Upper bin edges in seconds; lags beyond the last edge fall into an
  // overflow bin. Defaults: 1min, 10min, 1h, 6h, 1d, 1w.
  std::vector<std::int64_t> time_bin_edges = {60, 600, 3600, 21600, 86400, 604800};
  double jaccard_bin_width = 0.1;

  void validate() const;
  int time_bin(std::int64_t lag) const;  // lag >= 0
  int jaccard_bin(double distance) const;
  int jaccard_bin_count() const;
};

// Bijective feature-name interner. While unfrozen, unseen names get fresh
// indices; once frozen, they collapse onto the reserved unknown index so a
// trained model never grows at test time.
class FeatureAlphabet {
 public:
  static constexpr int kUnknownIndex = 0;
  static constexpr const char* kUnknownName = "__unknown__";

  FeatureAlphabet();

  int intern(const std::string& name);
  std::optional<int> lookup(const std::string& name) const;
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const { return names_.at(static_cast<size_t>(index)); }

  std::uint64_t hash() const;  // FNV-1a over names in index order

  // Plain text, one "name<TAB>index" line per entry, sorted by index.
  void save(const std::string& path) const;
  static FeatureAlphabet load(const std::string& path);  // returned frozen

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> names_;
  bool frozen_ = false;
};

// Sparse one-hot feature vector; entries sorted by index, no zeros stored.
struct FeatureVector {
  std::vector<std::pair<int, double>> entries;

  void set(int index, double value);
  double dot(const std::vector<double>& weights) const;
  bool contains(int index) const;
};

TokenSet normalize_text(const std::string& raw);

// 1 - |a ∩ b| / |a ∪ b|; two empty sets count as maximally dissimilar (1.0).
double jaccard_distance(const TokenSet& a, const TokenSet& b);

FeatureVector extract_edge_features(const Cascade& cascade, int parent, int child,
                                    const FeatureConfig& config,
                                    FeatureAlphabet& alphabet);

// All edge features of one cascade extracted once, CSR-packed. Extraction
// is theta-independent, so training loops reuse the table across
// iterations. Relies on every feature value being 1.
class EdgeFeatureTable {
 public:
  EdgeFeatureTable(const Cascade& cascade, const FeatureConfig& config,
                   FeatureAlphabet& alphabet);

  int size() const { return n_; }
  std::span<const std::uint32_t> features(int parent, int child) const;
  double score(int parent, int child, const std::vector<double>& weights) const;

 private:
  int n_;
  std::vector<std::uint32_t> flat_;
  std::vector<std::uint32_t> offsets_;
};

}  // namespace dst
