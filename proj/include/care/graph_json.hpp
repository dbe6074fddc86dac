#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "care/graph.hpp"

namespace care {

/// Canonical graph document: keys in fixed order, nodes sorted by id, edges by
/// (src, dst, kind). Serializing a deserialized document reproduces it byte for
/// byte.
nlohmann::ordered_json graph_to_json(const ManualGraph& graph);
std::string serialize_graph(const ManualGraph& graph);

/// Parses and validates a canonical graph document. The result is frozen.
ManualGraph graph_from_json(const nlohmann::json& doc);
ManualGraph deserialize_graph(std::string_view text);

ManualGraph load_graph(const std::string& path);
void save_graph(const ManualGraph& graph, const std::string& path);

}  // namespace care
