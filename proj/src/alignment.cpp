#include "care/alignment.hpp"

#include <algorithm>
#include <cmath>

#include "care/error.hpp"
#include "care/kernels.hpp"

namespace care {

Vector softmax(std::span<const double> logits) {
    Vector p(logits.size());
    if (logits.empty()) return p;
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
    for (double& x : p) x /= z;
    return p;
}

Vector alignment_logits(const NodeEmbeddings& embeddings, std::span<const double> y) {
    Vector out(embeddings.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = kernels::dot(embeddings.fused.row(i), y);
    return out;
}

AlignmentResult align(std::string_view question, const ManualGraph& graph,
                      const NodeEmbeddings& embeddings, const Matrix& w, const TextEncoder& encoder,
                      CandidateSet candidates) {
    if (graph.size() == 0 || embeddings.size() == 0) throw Error(ErrorCode::EmptyGraph, "graph has no nodes");
    if (embeddings.fingerprint != encoder.fingerprint())
        throw Error(ErrorCode::EncoderMismatch,
                    "embeddings built with '" + embeddings.fingerprint + "', encoder is '" +
                        encoder.fingerprint() + "'");
    if (embeddings.size() != graph.size())
        throw Error(ErrorCode::EncoderMismatch, "embeddings do not belong to this graph");

    const Vector y = project_question(w, encoder.encode(question));
    if (y.size() != embeddings.dimension())
        throw Error(ErrorCode::DimensionMismatch, "projection output does not match embedding dimension");
    const Vector all = alignment_logits(embeddings, y);

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < graph.size(); ++i) {
        if (candidates == CandidateSet::ActionEntity && graph.nodes()[i].kind == NodeKind::Argument) continue;
        idx.push_back(i);
    }
    if (idx.empty()) throw Error(ErrorCode::EmptyGraph, "no candidate nodes");

    Vector logits;
    logits.reserve(idx.size());
    for (std::size_t i : idx) logits.push_back(all[i]);
    const Vector p = softmax(logits);

    AlignmentResult out;
    // ids ascend with index, so the first maximum has the smallest id.
    std::size_t best = 0;
    for (std::size_t j = 1; j < idx.size(); ++j)
        if (logits[j] > logits[best]) best = j;
    out.node = embeddings.ids[idx[best]];
    double second = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        out.distribution.emplace_back(embeddings.ids[idx[j]], p[j]);
        if (j != best) second = std::max(second, p[j]);
    }
    out.score_margin = p[best] - second;
    return out;
}

nlohmann::ordered_json alignment_to_json(const AlignmentResult& result, const ManualGraph& graph,
                                         std::size_t top_k) {
    auto ranked = result.distribution;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > top_k) ranked.resize(top_k);

    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    doc["node"] = result.node.value;
    doc["text"] = recompose(graph, result.node);
    doc["score_margin"] = result.score_margin;
    doc["top"] = nlohmann::ordered_json::array();
    for (const auto& [id, prob] : ranked) {
        doc["top"].push_back({{"node", id.value},
                              {"kind", to_string(graph.node(id).kind)},
                              {"text", recompose(graph, id)},
                              {"probability", prob}});
    }
    return doc;
}

}  // namespace care
