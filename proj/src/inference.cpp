#include "care/inference.hpp"

#include <algorithm>
#include <optional>
#include <unordered_set>

#include "care/error.hpp"
#include "care/kernels.hpp"
#include "care/scorer.hpp"

namespace care {

std::string_view to_string(ChainKind kind) noexcept {
    return kind == ChainKind::Procedural ? "Procedural" : "Factual";
}

Vector link_info(std::string_view qc_text, std::span<const double> nq_emb, const Matrix& wr,
                 const TextEncoder& encoder) {
    Vector diff = encoder.encode(qc_text);
    if (diff.size() != nq_emb.size() || wr.cols() != diff.size())
        throw Error(ErrorCode::DimensionMismatch, "link projection expects " + std::to_string(wr.cols()) +
                                                      " entries, got " + std::to_string(nq_emb.size()));
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= nq_emb[i];
    Vector r(wr.rows());
    kernels::gemv(wr, diff, r);
    return r;
}

namespace {

struct Partial {
    std::vector<Hop> hops;
    NodeId last;
    double score = 0.0;
};

// Higher score first, then shorter, then smaller frontier id.
bool ranks_before(const Partial& a, const Partial& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.hops.size() != b.hops.size()) return a.hops.size() < b.hops.size();
    return a.last < b.last;
}

class Searcher {
public:
    Searcher(const ManualGraph& graph, const NodeEmbeddings& emb, NodeId nq, const ModelParams& params,
             const TextEncoder& encoder, const InferenceParams& opt)
        : graph_(graph), emb_(emb), nq_(nq), params_(params), opt_(opt) {
        qc_ = recompose(graph, nq);
        head_ = emb.of(nq);
        r_ = link_info(qc_, head_, params.wr, encoder);
        if (!opt.rolling_head) {
            fixed_[0] = query_vector(head_, r_, Bank::Procedural, params.scorer);
            fixed_[1] = query_vector(head_, r_, Bank::Factual, params.scorer);
        }
    }

    std::vector<ClueChain> run() {
        const double self = score(nq_, nq_, Bank::Factual);
        Partial loop{{Hop{nq_, RelationKind::SelfLoop, Direction::Forward, qc_, self}}, nq_, self};
        consider_fallback(loop, ChainKind::Factual);
        if (self >= opt_.delta) emit(loop, ChainKind::Factual);

        beam(ChainKind::Procedural);
        beam(ChainKind::Factual);

        if (chains_.empty() && best_) {
            ClueChain c = make_chain(best_->first, best_->second);
            c.fallback = true;
            return {c};
        }

        // One chain per response node, the best one.
        std::stable_sort(chains_.begin(), chains_.end(), [](const ClueChain& a, const ClueChain& b) {
            if (a.response().score != b.response().score) return a.response().score > b.response().score;
            if (a.hops.size() != b.hops.size()) return a.hops.size() < b.hops.size();
            return a.response().node < b.response().node;
        });
        std::vector<ClueChain> out;
        std::unordered_set<NodeId> seen;
        for (auto& c : chains_)
            if (seen.insert(c.response().node).second) out.push_back(std::move(c));
        return out;
    }

private:
    double score(NodeId head, NodeId tail, Bank bank) const {
        const auto t = emb_.of(tail);
        if (!opt_.rolling_head) return sigmoid(kernels::dot(fixed_[static_cast<int>(bank)], t));
        const Vector q = query_vector(emb_.of(head), r_, bank, params_.scorer);
        return sigmoid(kernels::dot(q, t));
    }

    ClueChain make_chain(const Partial& p, ChainKind kind) const {
        ClueChain c;
        c.kind = kind;
        c.question_node = nq_;
        c.question_text = qc_;
        c.hops = p.hops;
        return c;
    }

    void emit(const Partial& p, ChainKind kind) { chains_.push_back(make_chain(p, kind)); }

    void consider_fallback(const Partial& p, ChainKind kind) {
        if (!best_ || ranks_before(p, best_->first)) best_ = {p, kind};
    }

    void beam(ChainKind kind) {
        const bool procedural = kind == ChainKind::Procedural;
        const Bank bank = procedural ? Bank::Procedural : Bank::Factual;
        std::unordered_set<NodeId> visited{nq_};
        std::vector<Partial> frontier{Partial{{}, nq_, 0.0}};

        for (std::size_t depth = 0; depth < opt_.max_depth && !frontier.empty(); ++depth) {
            std::vector<Partial> next;
            for (const Partial& p : frontier) {
                for (const Adjacency& adj : graph_.adjacent(p.last)) {
                    if (is_procedural(adj.kind) != procedural) continue;
                    if (procedural && graph_.node(adj.node).kind != NodeKind::Action) continue;
                    if (!visited.insert(adj.node).second) continue;
                    const double s = score(p.last, adj.node, bank);
                    Partial q{p.hops, adj.node, s};
                    q.hops.push_back(Hop{adj.node, adj.kind, adj.direction, recompose(graph_, adj.node), s});
                    consider_fallback(q, kind);
                    if (s >= opt_.delta)
                        emit(q, kind);
                    else
                        next.push_back(std::move(q));
                }
            }
            std::sort(next.begin(), next.end(), ranks_before);
            if (next.size() > opt_.beam) next.resize(opt_.beam);
            frontier = std::move(next);
        }
    }

    const ManualGraph& graph_;
    const NodeEmbeddings& emb_;
    NodeId nq_;
    const ModelParams& params_;
    const InferenceParams& opt_;
    std::string qc_;
    std::span<const double> head_;
    Vector r_;
    Vector fixed_[2];
    std::vector<ClueChain> chains_;
    std::optional<std::pair<Partial, ChainKind>> best_;
};

}  // namespace

std::vector<ClueChain> infer_chains(const ManualGraph& graph, const NodeEmbeddings& embeddings,
                                    NodeId question_node, const ModelParams& params,
                                    const TextEncoder& encoder, const InferenceParams& options) {
    options.validate();
    if (embeddings.fingerprint != encoder.fingerprint())
        throw Error(ErrorCode::EncoderMismatch, "embeddings and encoder disagree");
    if (!graph.contains(question_node)) throw Error(ErrorCode::UnknownNode, "question node not in graph");
    return Searcher(graph, embeddings, question_node, params, encoder, options).run();
}

std::vector<ClueChain> infer_chains(const ManualGraph& graph, const NodeEmbeddings& embeddings,
                                    NodeId question_node, const ModelParams& params,
                                    const TextEncoder& encoder) {
    return infer_chains(graph, embeddings, question_node, params, encoder, params.inference);
}

nlohmann::ordered_json chain_to_json(const ClueChain& chain, const ManualGraph& graph) {
    using nlohmann::ordered_json;
    ordered_json doc = ordered_json::object();
    doc["kind"] = to_string(chain.kind);
    doc["fallback"] = chain.fallback;
    doc["question_clue"] = {{"node", chain.question_node.value}, {"text", chain.question_text}};
    doc["hops"] = ordered_json::array();
    for (const Hop& h : chain.hops) {
        doc["hops"].push_back({{"node", h.node.value},
                               {"relation", to_string(h.relation)},
                               {"direction", to_string(h.direction)},
                               {"text", h.text},
                               {"score", h.score}});
    }
    const Hop& resp = chain.response();
    doc["response_clue"] = {{"node", resp.node.value}, {"text", resp.text}, {"score", resp.score}};

    ordered_json spans = ordered_json::array();
    auto add = [&](NodeId id, const char* tag) {
        for (const Span& s : graph.node(id).mention_spans)
            spans.push_back({{"start", s.start}, {"end", s.end}, {"tag", tag}, {"node", id.value}});
    };
    add(chain.question_node, "question");
    for (std::size_t i = 0; i + 1 < chain.hops.size(); ++i) add(chain.hops[i].node, "transitional");
    add(resp.node, "response");
    doc["highlights"] = std::move(spans);
    return doc;
}

}  // namespace care
