#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "care/encoder.hpp"
#include "care/graph.hpp"

namespace care {

enum class CandidateSet {
    All,           // every node
    ActionEntity,  // ablation: skip argument nodes
};

struct AlignmentResult {
    NodeId node;
    // Candidate ids (ascending) with their softmax probability.
    std::vector<std::pair<NodeId, double>> distribution;
    // Top-1 minus top-2 probability; 1 for a single candidate.
    double score_margin = 0.0;
};

/// Logits n_emb . y for every candidate, in candidate order.
Vector alignment_logits(const NodeEmbeddings& embeddings, std::span<const double> y);

/// Question-clue node: argmax over candidates of softmax(n_emb . (W q)) with
/// q = encode(question). Ties go to the smallest id.
AlignmentResult align(std::string_view question, const ManualGraph& graph,
                      const NodeEmbeddings& embeddings, const Matrix& w, const TextEncoder& encoder,
                      CandidateSet candidates = CandidateSet::All);

/// Numerically stable softmax.
Vector softmax(std::span<const double> logits);

nlohmann::ordered_json alignment_to_json(const AlignmentResult& result, const ManualGraph& graph,
                                         std::size_t top_k = 5);

}  // namespace care
