#include "dst/features.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cmath>
#include <fstream>

#include "dst/errors.hpp"

namespace dst {

void FeatureConfig::validate() const {
  for (size_t k = 1; k < time_bin_edges.size(); ++k) {
    if (time_bin_edges[k] <= time_bin_edges[k - 1]) {
      throw ValidationError("time_bin_edges must be strictly ascending");
    }
  }
  if (jaccard_bin_width <= 0.0 || jaccard_bin_width > 1.0) {
    throw ValidationError("jaccard_bin_width must be in (0, 1]");
  }
  const double bins = 1.0 / jaccard_bin_width;
  if (std::abs(bins - std::round(bins)) > 1e-9) {
    throw ValidationError("jaccard_bin_width must divide [0,1] evenly");
  }
}

int FeatureConfig::time_bin(std::int64_t lag) const {
  int k = 0;
  for (std::int64_t edge : time_bin_edges) {
    if (lag <= edge) return k;
    ++k;
  }
  return k;  // overflow bin
}

int FeatureConfig::jaccard_bin(double distance) const {
  const int bins = jaccard_bin_count();
  int k = static_cast<int>(std::floor(distance / jaccard_bin_width));
  return std::clamp(k, 0, bins - 1);
}

int FeatureConfig::jaccard_bin_count() const {
  return static_cast<int>(std::round(1.0 / jaccard_bin_width));
}

FeatureAlphabet::FeatureAlphabet() {
  names_.push_back(kUnknownName);
  index_.emplace(kUnknownName, kUnknownIndex);
}

int FeatureAlphabet::intern(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  if (frozen_) return kUnknownIndex;
  const int idx = static_cast<int>(names_.size());
  names_.push_back(name);
  index_.emplace(name, idx);
  return idx;
}

std::optional<int> FeatureAlphabet::lookup(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t FeatureAlphabet::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const std::string& name : names_) {
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 1099511628211ull;
  }
  return h;
}

void FeatureAlphabet::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (size_t i = 0; i < names_.size(); ++i) {
    out << names_[i] << '\t' << i << '\n';
  }
}

FeatureAlphabet FeatureAlphabet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  FeatureAlphabet alphabet;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected name<TAB>index", line_no);
    const std::string name = line.substr(0, tab);
    const int idx = std::stoi(line.substr(tab + 1));
    if (idx == kUnknownIndex) {
      if (name != kUnknownName) throw ParseError("index 0 is reserved", line_no);
      continue;
    }
    if (idx != alphabet.size()) throw ParseError("indices must be dense and sorted", line_no);
    if (alphabet.intern(name) != idx) throw ParseError("duplicate feature name", line_no);
  }
  alphabet.freeze();
  return alphabet;
}

void FeatureVector::set(int index, double value) {
  if (value == 0.0) return;
  auto it = std::lower_bound(
      entries.begin(), entries.end(), index,
      [](const std::pair<int, double>& e, int idx) { return e.first < idx; });
  if (it != entries.end() && it->first == index) {
    it->second = value;
  } else {
    entries.insert(it, {index, value});
  }
}

double FeatureVector::dot(const std::vector<double>& weights) const {
  double sum = 0.0;
  for (const auto& [idx, value] : entries) {
    sum += weights[static_cast<size_t>(idx)] * value;
  }
  return sum;
}

bool FeatureVector::contains(int index) const {
  auto it = std::lower_bound(
      entries.begin(), entries.end(), index,
      [](const std::pair<int, double>& e, int idx) { return e.first < idx; });
  return it != entries.end() && it->first == index;
}

TokenSet normalize_text(const std::string& raw) {
  TokenSet tokens;
  std::string current;
  for (unsigned char c : raw) {
    if (c >= 0x80) {
      current.push_back(static_cast<char>(c));  // keep multibyte sequences intact
    } else if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      if (!current.empty()) tokens.insert(std::move(current));
      current.clear();
    }
    // ASCII punctuation is dropped without splitting the token
  }
  if (!current.empty()) tokens.insert(std::move(current));
  return tokens;
}

double jaccard_distance(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const size_t unions = a.size() + b.size() - common;
  return 1.0 - static_cast<double>(common) / static_cast<double>(unions);
}

namespace {

void emit(FeatureVector& fv, FeatureAlphabet& alphabet, const std::string& name) {
  fv.set(alphabet.intern(name), 1.0);
}

}  // namespace

FeatureVector extract_edge_features(const Cascade& cascade, int parent, int child,
                                    const FeatureConfig& config,
                                    FeatureAlphabet& alphabet) {
  FeatureVector fv;
  const Node& child_node = cascade.node(child);
  const int earliest = cascade.earliest();

  if (parent == 0) {
    // Root edges live in their own namespace: the lag from the dummy root
    // is undefined, so we bin time from the cascade start instead.
    emit(fv, alphabet, "root_edge");
    const std::int64_t lag = child_node.timestamp - cascade.start_time();
    emit(fv, alphabet, "root_lag_bin_" + std::to_string(config.time_bin(lag)));
    emit(fv, alphabet, "root_child_site=" + child_node.site);
  } else {
    const Node& parent_node = cascade.node(parent);
    emit(fv, alphabet, "parent_site=" + parent_node.site);
    emit(fv, alphabet, "child_site=" + child_node.site);
    // Absolute lag: an edge and its reversal share the same bin, so the
    // model sees direction only through the other features.
    const std::int64_t lag =
        std::abs(child_node.timestamp - parent_node.timestamp);
    emit(fv, alphabet, "dt_bin_" + std::to_string(config.time_bin(lag)));
  }

  if (config.feature_set == FeatureSet::enhanced) {
    if (child == earliest) emit(fv, alphabet, "child_is_earliest");
    if (parent >= 1) {
      const Node& parent_node = cascade.node(parent);
      if (parent == earliest) emit(fv, alphabet, "parent_is_earliest");
      if (parent_node.language && child_node.language) {
        emit(fv, alphabet,
             "lang_pair=" + *parent_node.language + "|" + *child_node.language);
      }
      if (parent_node.content_type && child_node.content_type) {
        emit(fv, alphabet, "ctype_pair=" + *parent_node.content_type + "|" +
                               *child_node.content_type);
      }
      if (parent_node.text_tokens && child_node.text_tokens) {
        const double d =
            jaccard_distance(*parent_node.text_tokens, *child_node.text_tokens);
        emit(fv, alphabet, "jaccard_bin_" + std::to_string(config.jaccard_bin(d)));
      }
    }
  }
  return fv;
}

EdgeFeatureTable::EdgeFeatureTable(const Cascade& cascade,
                                   const FeatureConfig& config,
                                   FeatureAlphabet& alphabet)
    : n_(cascade.size()) {
  const size_t stride = static_cast<size_t>(n_) + 1;
  const size_t slots = stride * stride;
  offsets_.assign(slots + 1, 0);
  flat_.reserve(slots * 4);
  for (size_t slot = 0; slot < slots; ++slot) {
    const int j = static_cast<int>(slot / stride);
    const int i = static_cast<int>(slot % stride);
    if (i >= 1 && j != i) {
      FeatureVector fv = extract_edge_features(cascade, j, i, config, alphabet);
      for (const auto& [idx, value] : fv.entries) {
        assert(value == 1.0);
        (void)value;
        flat_.push_back(static_cast<std::uint32_t>(idx));
      }
    }
    offsets_[slot + 1] = static_cast<std::uint32_t>(flat_.size());
  }
}

std::span<const std::uint32_t> EdgeFeatureTable::features(int parent,
                                                          int child) const {
  const size_t slot = static_cast<size_t>(parent) * (n_ + 1) + child;
  return {flat_.data() + offsets_[slot], flat_.data() + offsets_[slot + 1]};
}

double EdgeFeatureTable::score(int parent, int child,
                               const std::vector<double>& weights) const {
  double sum = 0.0;
  for (std::uint32_t idx : features(parent, child)) sum += weights[idx];
  return sum;
}

}  // namespace dst
