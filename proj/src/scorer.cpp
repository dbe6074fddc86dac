#include "care/scorer.hpp"

#include <cmath>
#include <string>

#include "care/error.hpp"

namespace care {

void ScorerGeometry::validate() const {
    if (reshape_h == 0 || reshape_w == 0 || filters == 0 || filter_h == 0 || filter_w == 0)
        throw Error(ErrorCode::GeometryMismatch, "scorer extents must be positive");
    if (filter_h > reshape_h || filter_w > reshape_w)
        throw Error(ErrorCode::GeometryMismatch,
                    "filter " + std::to_string(filter_h) + "x" + std::to_string(filter_w) +
                        " does not fit the " + std::to_string(reshape_h) + "x" +
                        std::to_string(reshape_w) + " grid");
}

ScorerParams ScorerParams::zeros(const ScorerGeometry& g) {
    g.validate();
    return ScorerParams{g, Matrix(g.dimension(), g.feature_dimension()), Vector(g.dimension(), 0.0)};
}

void ScorerParams::validate() const {
    geometry.validate();
    if (ws.rows() != geometry.dimension() || ws.cols() != geometry.feature_dimension() ||
        bs.size() != geometry.dimension())
        throw Error(ErrorCode::GeometryMismatch, "scorer weights do not match geometry");
}

std::span<const double> bank_slice(std::span<const double> link, Bank bank,
                                   const ScorerGeometry& g) noexcept {
    return link.subspan(static_cast<std::size_t>(bank) * g.bank_size(), g.bank_size());
}

Vector query_vector(std::span<const double> head, std::span<const double> link, Bank bank,
                    const ScorerParams& params, QueryTrace* trace) {
    const ScorerGeometry& g = params.geometry;
    if (head.size() != g.dimension())
        throw Error(ErrorCode::GeometryMismatch, "head has " + std::to_string(head.size()) +
                                                     " entries, geometry expects " +
                                                     std::to_string(g.dimension()));
    if (link.size() != g.link_dimension())
        throw Error(ErrorCode::GeometryMismatch, "link has " + std::to_string(link.size()) +
                                                     " entries, geometry expects " +
                                                     std::to_string(g.link_dimension()));

    const auto& k = kernels::active();
    const auto shape = g.conv_shape();
    const auto filters = bank_slice(link, bank, g);

    Vector conv(g.feature_dimension());
    for (std::size_t l = 0; l < g.filters; ++l)
        k.xcorr2d(head.data(), filters.data() + l * g.filter_size(), shape,
                  conv.data() + l * g.map_size());
    Vector features(conv.size());
    for (std::size_t i = 0; i < conv.size(); ++i) features[i] = conv[i] > 0.0 ? conv[i] : 0.0;

    Vector hidden(g.dimension());
    kernels::gemv(params.ws, features, hidden);
    for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] += params.bs[i];
    Vector query(hidden.size());
    for (std::size_t i = 0; i < hidden.size(); ++i) query[i] = hidden[i] > 0.0 ? hidden[i] : 0.0;

    if (trace) {
        trace->conv_pre = std::move(conv);
        trace->features = std::move(features);
        trace->hidden_pre = std::move(hidden);
        trace->query = query;
    }
    return query;
}

double triple_logit(std::span<const double> head, std::span<const double> link,
                    std::span<const double> tail, RelationKind edge_kind, const ScorerParams& params) {
    if (tail.size() != params.geometry.dimension())
        throw Error(ErrorCode::GeometryMismatch, "tail dimension does not match geometry");
    const Vector q = query_vector(head, link, bank_for(edge_kind), params);
    return kernels::dot(q, tail);
}

double score_triple(std::span<const double> head, std::span<const double> link,
                    std::span<const double> tail, RelationKind edge_kind, const ScorerParams& params) {
    return sigmoid(triple_logit(head, link, tail, edge_kind, params));
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) noexcept {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

}  // namespace care
