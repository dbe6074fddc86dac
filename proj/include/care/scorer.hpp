#pragma once

// Adaptive-convolution triple scoring.
//
// The head embedding is reshaped into a reshape_h x reshape_w grid S. The link
// vector r is split into two banks (procedural, factual) of `filters` filters,
// each filter_h x filter_w, laid out bank-major then filter-major then
// row-major. For the bank selected by the relation kind:
//
//   C_l   = ReLU(S (*) R_l)                 valid cross-correlation
//   c     = concat(flatten(C_1) ... flatten(C_c))
//   query = ReLU(W_s c + b_s)
//   score = sigmoid(query . t)
//
// The query depends only on (head, r, bank), so callers scoring many tails
// compute it once.

#include <cstddef>
#include <span>

#include "care/graph.hpp"
#include "care/kernels.hpp"
#include "care/tensor.hpp"

namespace care {

enum class Bank { Procedural = 0, Factual = 1 };

/// Next edges select the procedural bank; every other relation, including the
/// inference-time self loop, selects the factual bank.
inline Bank bank_for(RelationKind kind) noexcept {
    return kind == RelationKind::Next ? Bank::Procedural : Bank::Factual;
}

struct ScorerGeometry {
    std::size_t reshape_h = 16;
    std::size_t reshape_w = 8;
    std::size_t filters = 8;  // per bank
    std::size_t filter_h = 3;
    std::size_t filter_w = 3;

    std::size_t dimension() const noexcept { return reshape_h * reshape_w; }
    std::size_t filter_size() const noexcept { return filter_h * filter_w; }
    std::size_t bank_size() const noexcept { return filters * filter_size(); }
    std::size_t link_dimension() const noexcept { return 2 * bank_size(); }
    std::size_t out_h() const noexcept { return reshape_h - filter_h + 1; }
    std::size_t out_w() const noexcept { return reshape_w - filter_w + 1; }
    std::size_t map_size() const noexcept { return out_h() * out_w(); }
    std::size_t feature_dimension() const noexcept { return filters * map_size(); }
    kernels::ConvShape conv_shape() const noexcept {
        return {reshape_h, reshape_w, filter_h, filter_w};
    }

    /// Throws GeometryMismatch unless every extent is positive and the filters
    /// fit inside the reshaped grid.
    void validate() const;

    friend bool operator==(const ScorerGeometry&, const ScorerGeometry&) = default;
};

struct ScorerParams {
    ScorerGeometry geometry;
    Matrix ws;  // dimension x feature_dimension
    Vector bs;  // dimension

    static ScorerParams zeros(const ScorerGeometry& g);
    void validate() const;
};

/// Intermediate values of one query evaluation, kept for backpropagation.
struct QueryTrace {
    Vector conv_pre;    // feature_dimension, before ReLU
    Vector features;    // feature_dimension
    Vector hidden_pre;  // dimension, before ReLU
    Vector query;       // dimension
};

/// Filters of one bank inside the link vector.
std::span<const double> bank_slice(std::span<const double> link, Bank bank,
                                   const ScorerGeometry& g) noexcept;

/// ReLU(W_s c + b_s) for the given head and link vector.
Vector query_vector(std::span<const double> head, std::span<const double> link, Bank bank,
                    const ScorerParams& params, QueryTrace* trace = nullptr);

/// Pre-sigmoid score: query . tail.
double triple_logit(std::span<const double> head, std::span<const double> link,
                    std::span<const double> tail, RelationKind edge_kind, const ScorerParams& params);

/// Plausibility in (0, 1).
double score_triple(std::span<const double> head, std::span<const double> link,
                    std::span<const double> tail, RelationKind edge_kind, const ScorerParams& params);

double sigmoid(double z) noexcept;
/// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept;

}  // namespace care
