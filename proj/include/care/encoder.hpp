#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "care/graph.hpp"
#include "care/tensor.hpp"

namespace care {

inline constexpr std::size_t kDefaultDimension = 128;
inline constexpr double kFusionEpsilon = 1e-8;

class TextEncoder {
public:
    virtual ~TextEncoder() = default;

    /// Deterministic and total.
    virtual Vector encode(std::string_view text) const = 0;
    virtual std::size_t dimension() const noexcept = 0;
    /// Identifies the encoder family, its configuration and seed.
    virtual std::string fingerprint() const = 0;
};

/// Feature-hashed bag of character n-grams. Each n-gram adds +1 or -1 (sign
/// taken from the hash) to one bucket; the result is L2-normalised. ASCII
/// letters are lower-cased first. encode("") is the zero vector.
class HashNGramEncoder final : public TextEncoder {
public:
    static constexpr std::uint64_t kDefaultSeed = 0x5eed'ca4e'2024'0001ULL;

    explicit HashNGramEncoder(std::size_t dimension = kDefaultDimension,
                              std::uint64_t seed = kDefaultSeed, std::size_t min_n = 1,
                              std::size_t max_n = 3);

    Vector encode(std::string_view text) const override;
    std::size_t dimension() const noexcept override { return dimension_; }
    std::string fingerprint() const override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
    std::size_t min_n_;
    std::size_t max_n_;
};

/// Attention weights of one node; they always sum to one.
struct FusionWeights {
    double procedural = 0.5;
    double factual = 0.5;
};

/// Per-node vectors of one graph, indexed like graph.nodes().
struct NodeEmbeddings {
    std::string fingerprint;
    std::vector<NodeId> ids;
    std::vector<Vector> base;         // encode(recompose(n))
    std::vector<Vector> procedural;   // mean of base over P(n)
    std::vector<Vector> factual;      // mean of base over F(n)
    std::vector<FusionWeights> weights;
    Matrix fused;                     // row i: embedding of ids[i]

    std::size_t size() const noexcept { return ids.size(); }
    std::size_t dimension() const noexcept { return fused.cols(); }
    std::size_t index_of(NodeId id) const;
    std::span<const double> of(NodeId id) const { return fused.row(index_of(id)); }
};

/// Two-step fusion: set embeddings are means over the self-inclusive neighbour
/// sets, and the node embedding is alpha_P * s_P + alpha_F * s_F where
///
///   l_P(n) = mean_i s_P(n)[i] * S_P[i] / (S_P[i] + S_F[i] + eps)
///   l_F(n) = mean_i s_F(n)[i] * S_F[i] / (S_P[i] + S_F[i] + eps)
///   (alpha_P, alpha_F) = softmax(l_P, l_F)
///
/// with S_P, S_F the sums of all set embeddings of the graph. A node with no
/// procedural neighbour takes alpha = (0, 1), one with no factual neighbour
/// (1, 0), and an isolated node keeps its base embedding.
///
/// All sums run in canonical node order, so the result does not depend on the
/// order nodes were inserted.
NodeEmbeddings encode_nodes(const ManualGraph& graph, const TextEncoder& encoder);

/// W * q.
Vector project_question(const Matrix& w, std::span<const double> q);

nlohmann::ordered_json embeddings_to_json(const NodeEmbeddings& emb);

}  // namespace care
