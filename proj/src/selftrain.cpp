#include "care/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "care/alignment.hpp"
#include "care/kernels.hpp"
#include "care/scorer.hpp"

namespace care {

using nlohmann::json;
using nlohmann::ordered_json;

// ---- templates and sample generation ---------------------------------------

const std::string& QuestionTemplates::pattern(const ArgumentRole& role) const {
    switch (role.tag) {
        case ArgumentRole::Tag::Time: return time;
        case ArgumentRole::Tag::Location: return location;
        case ArgumentRole::Tag::Manner: return manner;
        case ArgumentRole::Tag::State: return state;
        case ArgumentRole::Tag::Other: return other;
    }
    return other;
}

std::string QuestionTemplates::render(const ArgumentRole& role, std::string_view agent,
                                      std::string_view clue) const {
    std::string out = pattern(role);
    auto replace = [&](std::string_view key, std::string_view value) {
        for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
            out.replace(pos, key.size(), value);
    };
    replace("{agent}", agent);
    replace("{clue}", clue);
    return out;
}

std::optional<NodeId> argument_parent(const ManualGraph& graph, NodeId argument) {
    for (const Adjacency& a : graph.adjacent(argument)) {
        if (a.direction != Direction::Backward) continue;
        if (a.kind == RelationKind::ActionArg || a.kind == RelationKind::EntityArg ||
            a.kind == RelationKind::ArgArg)
            return a.node;  // adjacency is sorted by node id
    }
    return std::nullopt;
}

namespace {

std::unordered_set<NodeId> neighbourhood(const ManualGraph& graph, NodeId n) {
    std::unordered_set<NodeId> out{n};
    for (const Adjacency& a : graph.adjacent(n)) out.insert(a.node);
    return out;
}

// Parent clue text without its agent and without the masked argument.
std::string parent_clue(const ManualGraph& graph, NodeId parent, NodeId masked) {
    std::vector<const Node*> parts{&graph.node(parent)};
    for (const Adjacency& a : graph.adjacent(parent)) {
        if (a.direction != Direction::Forward || a.node == masked) continue;
        if (a.kind == RelationKind::PAT || a.kind == RelationKind::ActionArg ||
            a.kind == RelationKind::EntityArg)
            parts.push_back(&graph.node(a.node));
    }
    std::sort(parts.begin(), parts.end(), [](const Node* a, const Node* b) {
        return std::tie(a->span.start, a->span.end, a->id) < std::tie(b->span.start, b->span.end, b->id);
    });
    std::string out;
    for (const Node* p : parts) {
        if (!out.empty()) out.push_back(' ');
        out += p->surface;
    }
    return out;
}

std::string agent_of(const ManualGraph& graph, NodeId parent) {
    if (graph.node(parent).kind == NodeKind::Action)
        for (const Adjacency& a : graph.adjacent(parent))
            if (a.kind == RelationKind::AGT && a.direction == Direction::Forward) return graph.node(a.node).surface;
    return "User";
}

NodeId pick(const std::vector<NodeId>& pool, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
}

}  // namespace

std::vector<NodeId> procedural_candidates(const ManualGraph& graph, NodeId argument) {
    const auto parent = argument_parent(graph, argument);
    if (!parent || graph.node(*parent).kind != NodeKind::Action) return {};
    const auto near = neighbourhood(graph, argument);
    std::vector<NodeId> out;
    for (auto step = graph.next_of(*parent); step; step = graph.next_of(*step))
        if (!near.count(*step)) out.push_back(*step);
    for (auto step = graph.previous_of(*parent); step; step = graph.previous_of(*step))
        if (!near.count(*step)) out.push_back(*step);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<NodeId> factual_candidates(const ManualGraph& graph, NodeId argument) {
    const auto near = neighbourhood(graph, argument);
    std::unordered_map<NodeId, std::size_t> depth{{argument, 0}};
    std::deque<NodeId> queue{argument};
    std::vector<NodeId> out;
    while (!queue.empty()) {
        const NodeId n = queue.front();
        queue.pop_front();
        if (depth[n] == 3) continue;
        for (const Adjacency& a : graph.adjacent(n)) {
            if (is_procedural(a.kind) || depth.count(a.node)) continue;
            depth[a.node] = depth[n] + 1;
            queue.push_back(a.node);
            const NodeKind k = graph.node(a.node).kind;
            if (!near.count(a.node) && (k == NodeKind::Action || k == NodeKind::Entity)) out.push_back(a.node);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<TrainingSample> generate_samples(const ManualGraph& graph, const QuestionTemplates& templates,
                                             std::mt19937_64& rng, std::vector<std::string>* warnings) {
    std::vector<TrainingSample> out;
    for (const Node& node : graph.nodes()) {
        if (node.kind != NodeKind::Argument) continue;
        const auto parent = argument_parent(graph, node.id);
        const auto proc = procedural_candidates(graph, node.id);
        const auto fact = factual_candidates(graph, node.id);
        if (!parent || (proc.empty() && fact.empty())) {
            if (warnings)
                warnings->push_back(std::string(to_string(ErrorCode::NoValidClueNode)) + ": argument " +
                                    std::to_string(node.id.value) + " ('" + node.surface + "') in " +
                                    graph.manual_id());
            continue;
        }
        const std::string question =
            templates.render(*node.role, agent_of(graph, *parent), parent_clue(graph, *parent, node.id));
        if (!proc.empty())
            out.push_back({graph.manual_id(), question, pick(proc, rng), node.id, *parent, ChainKind::Procedural});
        if (!fact.empty())
            out.push_back({graph.manual_id(), question, pick(fact, rng), node.id, *parent, ChainKind::Factual});
    }
    return out;
}

ordered_json sample_to_json(const TrainingSample& s) {
    ordered_json j = ordered_json::object();
    j["graph_id"] = s.graph_id;
    j["question"] = s.question;
    j["clue"] = s.clue.value;
    j["answer"] = s.answer.value;
    j["anchor"] = s.anchor.value;
    j["kind"] = to_string(s.kind);
    return j;
}

TrainingSample sample_from_json(const json& doc) {
    try {
        TrainingSample s;
        s.graph_id = doc.at("graph_id").get<std::string>();
        s.question = doc.at("question").get<std::string>();
        s.clue = NodeId{doc.at("clue").get<std::uint32_t>()};
        s.answer = NodeId{doc.at("answer").get<std::uint32_t>()};
        s.anchor = NodeId{doc.at("anchor").get<std::uint32_t>()};
        const auto kind = doc.at("kind").get<std::string>();
        if (kind == "Procedural")
            s.kind = ChainKind::Procedural;
        else if (kind == "Factual")
            s.kind = ChainKind::Factual;
        else
            throw Error(ErrorCode::MalformedDocument, "unknown sample kind '" + kind + "'");
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("sample: ") + e.what());
    }
}

std::vector<TrainingSample> read_samples_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::vector<TrainingSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(sample_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::MalformedDocument, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_samples_jsonl(const std::vector<TrainingSample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
}

// ---- configuration ------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw Error(ErrorCode::InvalidArgument, "learning_rate must be finite and non-negative");
    if (negatives < 1) throw Error(ErrorCode::InvalidArgument, "negatives must be at least 1");
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be at least 1");
    if (!(align_weight >= 0.0)) throw Error(ErrorCode::InvalidArgument, "align_weight must be non-negative");
}

ordered_json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate}, {"epochs", epochs},       {"negatives", negatives},
            {"seed", seed},                   {"batch_size", batch_size}, {"align_weight", align_weight},
            {"beta1", beta1},                 {"beta2", beta2},         {"adam_epsilon", adam_epsilon}};
}

TrainConfig TrainConfig::from_json(const json& doc) {
    TrainConfig c;
    try {
        c.learning_rate = doc.value("learning_rate", c.learning_rate);
        c.epochs = doc.value("epochs", c.epochs);
        c.negatives = doc.value("negatives", c.negatives);
        c.seed = doc.value("seed", c.seed);
        c.batch_size = doc.value("batch_size", c.batch_size);
        c.align_weight = doc.value("align_weight", c.align_weight);
        c.beta1 = doc.value("beta1", c.beta1);
        c.beta2 = doc.value("beta2", c.beta2);
        c.adam_epsilon = doc.value("adam_epsilon", c.adam_epsilon);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

Corpus build_corpus(std::vector<ManualGraph> graphs, const TextEncoder& encoder) {
    Corpus corpus;
    for (auto& g : graphs) {
        std::string id = g.manual_id();
        if (corpus.count(id)) throw Error(ErrorCode::InvalidArgument, "duplicate manual_id '" + id + "'");
        NodeEmbeddings emb = encode_nodes(g, encoder);
        corpus.emplace(std::move(id), GraphContext{std::move(g), std::move(emb)});
    }
    return corpus;
}

// ---- loss and gradients ----------------------------------------------------------

ParamGrads ParamGrads::zeros_like(const ModelParams& p) {
    return {Matrix(p.w.rows(), p.w.cols()), Matrix(p.wr.rows(), p.wr.cols()),
            Matrix(p.scorer.ws.rows(), p.scorer.ws.cols()), Vector(p.scorer.bs.size(), 0.0)};
}

void ParamGrads::scale(double f) {
    for (double& x : w.flat()) x *= f;
    for (double& x : wr.flat()) x *= f;
    for (double& x : ws.flat()) x *= f;
    for (double& x : bs) x *= f;
}

void ParamGrads::add(const ParamGrads& o) {
    kernels::axpy(1.0, o.w.flat(), w.flat());
    kernels::axpy(1.0, o.wr.flat(), wr.flat());
    kernels::axpy(1.0, o.ws.flat(), ws.flat());
    kernels::axpy(1.0, o.bs, bs);
}

LossTerms sample_loss(const TrainingSample& sample, std::span<const double> question_vec,
                      std::span<const NodeId> negatives, const ModelParams& params, const GraphContext& ctx,
                      double align_weight, ParamGrads* grads) {
    const NodeEmbeddings& emb = ctx.embeddings;
    const ScorerGeometry& g = params.scorer.geometry;
    const std::size_t ci = emb.index_of(sample.clue);
    const auto head = emb.fused.row(ci);
    const Bank bank = sample.kind == ChainKind::Procedural ? Bank::Procedural : Bank::Factual;

    // r = Wr (encode(recompose(clue)) - head); the base embedding is exactly
    // that encoding.
    Vector delta(emb.base[ci]);
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= head[i];
    Vector r(params.wr.rows());
    kernels::gemv(params.wr, delta, r);

    QueryTrace tr;
    const Vector v = query_vector(head, r, bank, params.scorer, grads ? &tr : nullptr);

    LossTerms out;
    Vector dv(v.size(), 0.0);
    auto term = [&](NodeId t, bool positive) {
        const auto te = emb.of(t);
        const double z = kernels::dot(v, te);
        out.link += positive ? softplus(-z) : softplus(z);
        if (grads) kernels::axpy(positive ? sigmoid(z) - 1.0 : sigmoid(z), te, dv);
    };
    term(sample.answer, true);
    for (NodeId n : negatives) term(n, false);

    // Alignment: -log softmax(E (W q))[anchor].
    const std::size_t ai = emb.index_of(sample.anchor);
    const Vector y = project_question(params.w, question_vec);
    const Vector logits = alignment_logits(emb, y);
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - m);
    out.align = (m + std::log(z)) - logits[ai];
    out.total = out.link + align_weight * out.align;

    if (!grads) return out;

    // Scorer backward.
    Vector dpre(dv.size());
    for (std::size_t i = 0; i < dv.size(); ++i) dpre[i] = tr.hidden_pre[i] > 0.0 ? dv[i] : 0.0;
    kernels::rank1(grads->ws, 1.0, dpre, tr.features);
    kernels::axpy(1.0, dpre, grads->bs);
    Vector dfeat(tr.features.size());
    kernels::gemv_t(params.scorer.ws, dpre, dfeat);
    for (std::size_t i = 0; i < dfeat.size(); ++i)
        if (!(tr.conv_pre[i] > 0.0)) dfeat[i] = 0.0;
    Vector dr(r.size(), 0.0);
    const std::size_t bank_offset = static_cast<std::size_t>(bank) * g.bank_size();
    const auto shape = g.conv_shape();
    for (std::size_t l = 0; l < g.filters; ++l)
        kernels::active().xcorr2d_filter_grad(head.data(), dfeat.data() + l * g.map_size(), shape,
                                              dr.data() + bank_offset + l * g.filter_size());
    kernels::rank1(grads->wr, 1.0, dr, delta);

    // Alignment backward: dy = E^T (p - onehot), dW = dy q^T.
    if (align_weight != 0.0) {
        Vector coeff(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) coeff[i] = align_weight * std::exp(logits[i] - m) / z;
        coeff[ai] -= align_weight;
        Vector dy(y.size());
        kernels::gemv_t(emb.fused, coeff, dy);
        kernels::rank1(grads->w, 1.0, dy, question_vec);
    }
    return out;
}

std::vector<NodeId> draw_negatives(const ManualGraph& graph, const TrainingSample& sample, std::size_t k,
                                   std::mt19937_64& rng) {
    std::vector<NodeId> pool;
    for (const Node& n : graph.nodes())
        if (n.id != sample.answer && n.id != sample.clue) pool.push_back(n.id);
    if (pool.empty()) throw Error(ErrorCode::InvalidArgument, "graph too small for negatives");
    std::vector<NodeId> out;
    if (pool.size() >= k) {
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> d(i, pool.size() - 1);
            std::swap(pool[i], pool[d(rng)]);
            out.push_back(pool[i]);
        }
    } else {
        std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
        for (std::size_t i = 0; i < k; ++i) out.push_back(pool[d(rng)]);
    }
    return out;
}

namespace {

const GraphContext& context_for(const Corpus& corpus, const TrainingSample& s) {
    auto it = corpus.find(s.graph_id);
    if (it == corpus.end()) throw Error(ErrorCode::UnknownNode, "sample refers to unknown graph '" + s.graph_id + "'");
    return it->second;
}

struct AdamSlot {
    Vector m, v;
    explicit AdamSlot(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> p, std::span<const double> g, const TrainConfig& c, std::size_t t) {
        const double b1t = 1.0 - std::pow(c.beta1, static_cast<double>(t));
        const double b2t = 1.0 - std::pow(c.beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            p[i] -= c.learning_rate * (m[i] / b1t) / (std::sqrt(v[i] / b2t) + c.adam_epsilon);
        }
    }
};

}  // namespace

TrainResult train(const std::vector<TrainingSample>& samples, const Corpus& corpus, const TextEncoder& encoder,
                  ModelParams initial, const TrainConfig& config) {
    config.validate();
    initial.validate();
    if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no training samples");
    if (initial.encoder_fingerprint != encoder.fingerprint())
        throw Error(ErrorCode::EncoderMismatch, "parameters were built for '" + initial.encoder_fingerprint + "'");

    std::mt19937_64 rng(config.seed);
    std::vector<const GraphContext*> ctx;
    std::vector<Vector> questions;
    std::vector<std::vector<NodeId>> negatives;
    for (const auto& s : samples) {
        ctx.push_back(&context_for(corpus, s));
        if (ctx.back()->embeddings.fingerprint != encoder.fingerprint())
            throw Error(ErrorCode::EncoderMismatch, "corpus embeddings do not match the encoder");
        questions.push_back(encoder.encode(s.question));
        negatives.push_back(draw_negatives(ctx.back()->graph, s, config.negatives, rng));
    }

    TrainResult result{std::move(initial), {}};
    ModelParams& p = result.params;
    AdamSlot sw(p.w.size()), swr(p.wr.size()), sws(p.scorer.ws.size()), sbs(p.scorer.bs.size());
    std::size_t t = 0;
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<LossTerms> per_sample(samples.size());

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            ParamGrads g = ParamGrads::zeros_like(p);
            for (std::size_t j = start; j < end; ++j) {
                const std::size_t i = order[j];
                per_sample[i] = sample_loss(samples[i], questions[i], negatives[i], p, *ctx[i],
                                            config.align_weight, &g);
                if (!std::isfinite(per_sample[i].total))
                    throw DivergenceDetected("non-finite loss at epoch " + std::to_string(epoch), result);
            }
            g.scale(1.0 / static_cast<double>(end - start));
            const ModelParams before = p;
            ++t;
            sw.step(p.w.flat(), g.w.flat(), config, t);
            swr.step(p.wr.flat(), g.wr.flat(), config, t);
            sws.step(p.scorer.ws.flat(), g.ws.flat(), config, t);
            sbs.step(p.scorer.bs, g.bs, config, t);
            if (!p.finite()) {
                p = before;
                throw DivergenceDetected("non-finite parameters at epoch " + std::to_string(epoch), result);
            }
        }
        EpochLoss e;
        for (const auto& l : per_sample) {
            e.link += l.link;
            e.align += l.align;
            e.total += l.total;
        }
        const double n = static_cast<double>(samples.size());
        result.trace.push_back({e.link / n, e.align / n, e.total / n});
    }
    return result;
}

double mean_link_loss(const std::vector<TrainingSample>& samples, const Corpus& corpus, const ModelParams& params,
                      std::size_t k, std::uint64_t seed) {
    if (samples.empty()) return 0.0;
    std::mt19937_64 rng(seed);
    const Vector no_question(params.w.cols(), 0.0);
    double sum = 0.0;
    for (const auto& s : samples) {
        const GraphContext& c = context_for(corpus, s);
        const auto neg = draw_negatives(c.graph, s, k, rng);
        sum += sample_loss(s, no_question, neg, params, c, 0.0).link;
    }
    return sum / static_cast<double>(samples.size());
}

RetrievalReport retrieval_accuracy(const std::vector<TrainingSample>& samples, const Corpus& corpus,
                                   const ModelParams& params) {
    RetrievalReport rep;
    for (const auto& s : samples) {
        const GraphContext& c = context_for(corpus, s);
        const NodeEmbeddings& emb = c.embeddings;
        const std::size_t ci = emb.index_of(s.clue);
        const auto head = emb.fused.row(ci);
        Vector delta(emb.base[ci]);
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= head[i];
        Vector r(params.wr.rows());
        kernels::gemv(params.wr, delta, r);
        const Bank bank = s.kind == ChainKind::Procedural ? Bank::Procedural : Bank::Factual;
        const Vector v = query_vector(head, r, bank, params.scorer);

        std::optional<std::pair<double, NodeId>> best;
        for (std::size_t i = 0; i < emb.size(); ++i) {
            if (i == ci) continue;
            const double z = kernels::dot(v, emb.fused.row(i));
            // Strictly greater keeps the smallest id on ties.
            if (!best || z > best->first) best = {z, emb.ids[i]};
        }
        rep.accuracy += (best && best->second == s.answer) ? 1.0 : 0.0;
        rep.uniform_baseline += 1.0 / static_cast<double>(emb.size() - 1);
        ++rep.samples;
    }
    if (rep.samples) {
        rep.accuracy /= static_cast<double>(rep.samples);
        rep.uniform_baseline /= static_cast<double>(rep.samples);
    }
    return rep;
}

std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> split_samples(
    std::vector<TrainingSample> samples, double fraction, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
    std::vector<TrainingSample> rest(samples.begin(), samples.end() - static_cast<std::ptrdiff_t>(held));
    std::vector<TrainingSample> out(samples.end() - static_cast<std::ptrdiff_t>(held), samples.end());
    return {std::move(rest), std::move(out)};
}

}  // namespace care
