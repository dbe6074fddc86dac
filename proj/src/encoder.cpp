#include "care/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "care/error.hpp"
#include "care/kernels.hpp"
#include "care/utf8.hpp"

namespace care {
namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_gram(std::u32string_view gram, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed + gram.size());
    for (char32_t cp : gram) {
        for (int shift = 0; shift < 32; shift += 8) {
            h ^= (cp >> shift) & 0xFFu;
            h *= 0x100000001b3ULL;
        }
    }
    return mix64(h);
}

}  // namespace

HashNGramEncoder::HashNGramEncoder(std::size_t dimension, std::uint64_t seed, std::size_t min_n,
                                   std::size_t max_n)
    : dimension_(dimension), seed_(seed), min_n_(min_n), max_n_(max_n) {
    if (dimension_ == 0 || min_n_ == 0 || max_n_ < min_n_)
        throw Error(ErrorCode::InvalidArgument, "bad hash encoder configuration");
}

Vector HashNGramEncoder::encode(std::string_view text) const {
    Vector v(dimension_, 0.0);
    std::u32string cps = utf8::decode(text);
    for (char32_t& cp : cps)
        if (cp >= U'A' && cp <= U'Z') cp = cp - U'A' + U'a';
    const std::u32string_view view(cps);
    for (std::size_t n = min_n_; n <= max_n_; ++n) {
        if (cps.size() < n) break;
        for (std::size_t i = 0; i + n <= cps.size(); ++i) {
            const std::uint64_t h = hash_gram(view.substr(i, n), seed_);
            v[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
        }
    }
    const double norm = std::sqrt(kernels::dot(v, v));
    if (norm > 0.0)
        for (double& x : v) x /= norm;
    return v;
}

std::string HashNGramEncoder::fingerprint() const {
    return "hash-ngram/v1;d=" + std::to_string(dimension_) + ";n=" + std::to_string(min_n_) + "-" +
           std::to_string(max_n_) + ";seed=" + std::to_string(seed_);
}

std::size_t NodeEmbeddings::index_of(NodeId id) const {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) throw Error(ErrorCode::UnknownNode, "no embedding for node");
    return static_cast<std::size_t>(it - ids.begin());
}

NodeEmbeddings encode_nodes(const ManualGraph& graph, const TextEncoder& encoder) {
    const std::size_t n = graph.size();
    const std::size_t d = encoder.dimension();
    const auto& nodes = graph.nodes();

    NodeEmbeddings out;
    out.fingerprint = encoder.fingerprint();
    out.ids.reserve(n);
    for (const Node& node : nodes) out.ids.push_back(node.id);

    // rank[i]: position of node i in canonical order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return canonical_less(nodes[a], nodes[b]); });
    std::vector<std::size_t> rank(n);
    for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

    out.base.reserve(n);
    for (const Node& node : nodes) out.base.push_back(encoder.encode(recompose(graph, node.id)));

    auto set_mean = [&](std::vector<NodeId> members) {
        std::vector<std::size_t> idx;
        idx.reserve(members.size());
        for (NodeId m : members) idx.push_back(graph.index_of(m));
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
        Vector s(d, 0.0);
        for (std::size_t i : idx) kernels::axpy(1.0, out.base[i], s);
        const double inv = 1.0 / static_cast<double>(idx.size());
        for (double& x : s) x *= inv;
        return s;
    };

    std::vector<bool> has_p(n), has_f(n);
    out.procedural.resize(n);
    out.factual.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto p = procedural_neighbors(graph, nodes[i].id);
        auto f = factual_neighbors(graph, nodes[i].id);
        has_p[i] = p.size() > 1;
        has_f[i] = f.size() > 1;
        out.procedural[i] = set_mean(std::move(p));
        out.factual[i] = set_mean(std::move(f));
    }

    Vector total_p(d, 0.0), total_f(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        kernels::axpy(1.0, out.procedural[order[r]], total_p);
        kernels::axpy(1.0, out.factual[order[r]], total_f);
    }
    Vector ratio_p(d), ratio_f(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double denom = total_p[k] + total_f[k] + kFusionEpsilon;
        ratio_p[k] = total_p[k] / denom;
        ratio_f[k] = total_f[k] / denom;
    }

    out.weights.resize(n);
    out.fused = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        FusionWeights w;
        if (has_p[i] && has_f[i]) {
            const double lp = kernels::dot(out.procedural[i], ratio_p) / static_cast<double>(d);
            const double lf = kernels::dot(out.factual[i], ratio_f) / static_cast<double>(d);
            const double m = std::max(lp, lf);
            const double ep = std::exp(lp - m);
            const double ef = std::exp(lf - m);
            w.procedural = ep / (ep + ef);
            w.factual = 1.0 - w.procedural;
        } else if (has_p[i]) {
            w = {1.0, 0.0};
        } else if (has_f[i]) {
            w = {0.0, 1.0};
        }
        out.weights[i] = w;
        auto row = out.fused.row(i);
        if (!has_p[i] && !has_f[i]) {
            std::copy(out.base[i].begin(), out.base[i].end(), row.begin());
            continue;
        }
        for (std::size_t k = 0; k < d; ++k) {
            const double a = out.procedural[i][k];
            const double b = out.factual[i][k];
            // Clamp away the last-ulp rounding so the result is an exact convex
            // combination coordinate-wise.
            row[k] = std::clamp(w.procedural * a + w.factual * b, std::min(a, b), std::max(a, b));
        }
    }
    return out;
}

Vector project_question(const Matrix& w, std::span<const double> q) {
    if (w.cols() != q.size())
        throw Error(ErrorCode::DimensionMismatch, "projection has " + std::to_string(w.cols()) +
                                                      " columns but question has " +
                                                      std::to_string(q.size()) + " entries");
    Vector out(w.rows());
    kernels::gemv(w, q, out);
    return out;
}

nlohmann::ordered_json embeddings_to_json(const NodeEmbeddings& emb) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < emb.size(); ++i) {
        auto row = emb.fused.row(i);
        doc[std::to_string(emb.ids[i].value)] = std::vector<double>(row.begin(), row.end());
    }
    return doc;
}

}  // namespace care
