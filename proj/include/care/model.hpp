#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "care/scorer.hpp"
#include "care/tensor.hpp"

namespace care {

inline constexpr double kDefaultDelta = 0.5;
inline constexpr std::size_t kDefaultBeam = 4;
inline constexpr std::size_t kDefaultMaxDepth = 3;

struct InferenceParams {
    double delta = kDefaultDelta;
    std::size_t beam = kDefaultBeam;
    std::size_t max_depth = kDefaultMaxDepth;
    // Ablation: score each hop with the previous frontier node as head instead
    // of the question clue.
    bool rolling_head = false;

    /// Throws InvalidArgument unless delta is in (0, 1), beam >= 1 and
    /// max_depth >= 1.
    void validate() const;

    friend bool operator==(const InferenceParams&, const InferenceParams&) = default;
};

/// Every learnable plus the hyperparameters needed to use them.
struct ModelParams {
    std::string encoder_fingerprint;
    Matrix w;   // d x d, question space -> graph space
    Matrix wr;  // d_r x d, link projection
    ScorerParams scorer;
    InferenceParams inference;

    std::size_t dimension() const noexcept { return scorer.geometry.dimension(); }

    /// W = I; Wr, W_s drawn from seeded Gaussians (std 1 and sqrt(2 / fan_in));
    /// b_s = 0.
    static ModelParams initialize(const ScorerGeometry& geometry, std::string encoder_fingerprint,
                                  std::uint64_t seed);
    /// Every learnable zero except W = I. All triple scores are exactly 0.5.
    static ModelParams zeros(const ScorerGeometry& geometry, std::string encoder_fingerprint);

    /// Shapes agree with the geometry and every entry is finite.
    void validate() const;
    bool finite() const noexcept;
};

nlohmann::ordered_json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& doc);
std::string serialize_params(const ModelParams& params);
ModelParams load_params(const std::string& path);
void save_params(const ModelParams& params, const std::string& path);

}  // namespace care
