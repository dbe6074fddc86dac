#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "care/encoder.hpp"
#include "care/graph.hpp"
#include "care/model.hpp"

namespace care {

enum class ChainKind { Procedural, Factual };

std::string_view to_string(ChainKind kind) noexcept;

struct Hop {
    NodeId node;
    RelationKind relation;
    Direction direction;
    std::string text;  // recomposed clue
    double score = 0.0;
};

/// Question clue -> transitional clues -> response clue. The last hop is the
/// response; a self-loop chain has a single SelfLoop hop back to the question
/// clue.
struct ClueChain {
    ChainKind kind = ChainKind::Factual;
    NodeId question_node;
    std::string question_text;
    std::vector<Hop> hops;
    bool fallback = false;

    const Hop& response() const { return hops.back(); }
};

/// r = Wr (encode(qc_text) - nq_emb).
Vector link_info(std::string_view qc_text, std::span<const double> nq_emb, const Matrix& wr,
                 const TextEncoder& encoder);

/// Self-loop check followed by a procedural beam (Next edges, both
/// directions) and a factual beam (all other edges, both directions). A path
/// ends at the first node whose score reaches delta. Results are deduplicated
/// by response node and sorted by score, descending. When nothing reaches
/// delta the best visited node comes back as a single chain flagged fallback.
std::vector<ClueChain> infer_chains(const ManualGraph& graph, const NodeEmbeddings& embeddings,
                                    NodeId question_node, const ModelParams& params,
                                    const TextEncoder& encoder, const InferenceParams& options);

/// Same, with params.inference as options.
std::vector<ClueChain> infer_chains(const ManualGraph& graph, const NodeEmbeddings& embeddings,
                                    NodeId question_node, const ModelParams& params,
                                    const TextEncoder& encoder);

/// Highlight spans: mention spans of the question node, every transitional
/// node and the response node, tagged accordingly.
nlohmann::ordered_json chain_to_json(const ClueChain& chain, const ManualGraph& graph);

}  // namespace care
