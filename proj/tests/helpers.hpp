#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dst/cascade.hpp"
#include "dst/features.hpp"

namespace testutil {

inline dst::Node make_node(std::string id, std::string site, std::int64_t timestamp,
                           std::optional<std::string> language = std::nullopt,
                           std::optional<std::string> content_type = std::nullopt,
                           std::optional<std::string> text = std::nullopt) {
  dst::Node node;
  node.id = std::move(id);
  node.site = std::move(site);
  node.timestamp = timestamp;
  node.language = std::move(language);
  node.content_type = std::move(content_type);
  if (text) node.text_tokens = dst::normalize_text(*text);
  return node;
}

// Nodes "n1".."nk" on alternating sites with the given timestamps.
inline dst::Cascade make_cascade(const std::vector<std::int64_t>& timestamps,
                                 std::int64_t root_window = 3600,
                                 const std::string& id = "test") {
  std::vector<dst::Node> nodes;
  for (size_t k = 0; k < timestamps.size(); ++k) {
    nodes.push_back(make_node("n" + std::to_string(k + 1),
                              "site" + std::to_string(k % 3), timestamps[k]));
  }
  return dst::Cascade(id, std::move(nodes), root_window);
}

}  // namespace testutil
