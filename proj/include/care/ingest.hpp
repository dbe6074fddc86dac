#pragma once

// Manual annotation documents (JSON or YAML, same schema) compiled into
// heterogeneous graphs.
//
//   manual_id: string
//   text: string
//   entities:   [EntitySpec]
//   procedures: [[ActionSpec]]            (or [{actions: [ActionSpec]}])
//
//   EntitySpec: {id?, surface, span: [s, e], args?: [ArgSpec], sub_entities?: [EntitySpec]}
//   ActionSpec: {surface, span, agent?: EntityRef, patient?: EntityRef, args?: [ArgSpec]}
//   ArgSpec:    {role, surface, span, pata_targets?: [EntityRef], arg_args?: [ArgSpec]}
//   EntityRef:  an entity id or surface, or an inline EntitySpec (implicit entity)
//
// Spans are half-open code point offsets into `text`.

#include <string>
#include <string_view>

#include <json.hpp>

#include "care/graph.hpp"

namespace care {

/// Builds the unfused, unfrozen graph for an annotation document. A "User"
/// entity is injected when none is declared.
ManualGraph build_graph(const nlohmann::json& annotation);

/// Merges Entity and Argument nodes whose surfaces are byte-identical (same
/// kind; arguments must also share the role). The node with the smallest span
/// keeps its id and collects every mention span; duplicate edges are dropped.
/// Action nodes are never merged.
ManualGraph fuse_coreferences(ManualGraph graph);

/// build_graph + fuse_coreferences + freeze.
ManualGraph parse_manual(const nlohmann::json& annotation);

/// Reads a .json, .yaml or .yml annotation file into the JSON document model.
nlohmann::json load_annotation(const std::string& path);
nlohmann::json parse_annotation_text(std::string_view text, bool yaml);

}  // namespace care
