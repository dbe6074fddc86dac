#pragma once

// Self-supervised training. Each argument node is masked in turn; a clue node
// that is not directly connected to it is picked, and a templated question is
// produced from the argument's parent. The model learns to score the masked
// argument above random negatives when the clue is the head.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "care/encoder.hpp"
#include "care/error.hpp"
#include "care/graph.hpp"
#include "care/inference.hpp"
#include "care/model.hpp"

namespace care {

struct TrainingSample {
    std::string graph_id;
    std::string question;
    NodeId clue;    // question-clue node, never adjacent to the answer
    NodeId answer;  // the masked argument
    NodeId anchor;  // the answer's parent, which the question is phrased from
    ChainKind kind = ChainKind::Factual;

    friend bool operator==(const TrainingSample&, const TrainingSample&) = default;
};

struct QuestionTemplates {
    std::string time = "When should the {agent} {clue}?";
    std::string location = "Where should the {agent} {clue}?";
    std::string manner = "How should the {agent} {clue}?";
    std::string state = "Why can't I {clue}?";
    std::string other = "What about {clue}?";

    const std::string& pattern(const ArgumentRole& role) const;
    std::string render(const ArgumentRole& role, std::string_view agent, std::string_view clue) const;
};

/// Source of the argument's smallest-id incoming ActionArg, EntityArg or
/// ArgArg edge.
std::optional<NodeId> argument_parent(const ManualGraph& graph, NodeId argument);

/// Procedural candidates: actions reachable from the parent by one or more
/// Next hops (either direction). Factual candidates: actions and entities
/// reachable from the argument within three non-Next hops. Neither set holds
/// the argument or anything adjacent to it.
std::vector<NodeId> procedural_candidates(const ManualGraph& graph, NodeId argument);
std::vector<NodeId> factual_candidates(const ManualGraph& graph, NodeId argument);

/// One procedural and one factual sample per argument when candidates exist,
/// in argument id order. Arguments without any candidate are skipped and
/// noted in `warnings`.
std::vector<TrainingSample> generate_samples(const ManualGraph& graph, const QuestionTemplates& templates,
                                             std::mt19937_64& rng,
                                             std::vector<std::string>* warnings = nullptr);

nlohmann::ordered_json sample_to_json(const TrainingSample& s);
TrainingSample sample_from_json(const nlohmann::json& doc);
std::vector<TrainingSample> read_samples_jsonl(const std::string& path);
void write_samples_jsonl(const std::vector<TrainingSample>& samples, const std::string& path);

struct TrainConfig {
    static constexpr double kPaperLearningRate = 1e-5;

    double learning_rate = 1e-3;
    std::size_t epochs = 5;
    std::size_t negatives = 5;
    std::uint64_t seed = 1;
    std::size_t batch_size = 1;
    // Weight of the optional question-to-anchor alignment term, the only term
    // that reaches W. Off by default: the objective is the link BCE alone.
    double align_weight = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static TrainConfig from_json(const nlohmann::json& doc);
};

/// A graph and the embeddings its samples are scored against.
struct GraphContext {
    ManualGraph graph;
    NodeEmbeddings embeddings;
};

using Corpus = std::map<std::string, GraphContext>;

Corpus build_corpus(std::vector<ManualGraph> graphs, const TextEncoder& encoder);

struct ParamGrads {
    Matrix w, wr, ws;
    Vector bs;

    static ParamGrads zeros_like(const ModelParams& p);
    void scale(double factor);
    void add(const ParamGrads& other);
};

struct LossTerms {
    double link = 0.0;
    double align = 0.0;
    double total = 0.0;
};

/// softplus(-z_answer) + sum softplus(z_negative), the binary cross entropy
/// of the answer against the negatives, plus align_weight times the softmax
/// cross entropy of aligning the question to the anchor node. Accumulates
/// gradients into `grads` when given.
LossTerms sample_loss(const TrainingSample& sample, std::span<const double> question_vec,
                      std::span<const NodeId> negatives, const ModelParams& params,
                      const GraphContext& ctx, double align_weight, ParamGrads* grads = nullptr);

/// k uniform draws (without replacement while the pool allows) from nodes
/// other than the answer and the clue.
std::vector<NodeId> draw_negatives(const ManualGraph& graph, const TrainingSample& sample,
                                   std::size_t k, std::mt19937_64& rng);

struct EpochLoss {
    double link = 0.0;
    double align = 0.0;
    double total = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochLoss> trace;  // mean over samples, one entry per epoch
};

/// Thrown when a loss or parameter turns non-finite; carries the parameters
/// from before the failing step.
class DivergenceDetected : public Error {
public:
    DivergenceDetected(std::string msg, TrainResult last_good)
        : Error(ErrorCode::DivergenceDetected, std::move(msg)), last_good_(std::move(last_good)) {}
    const TrainResult& last_good() const noexcept { return last_good_; }

private:
    TrainResult last_good_;
};

/// Adam over W, Wr, W_s and b_s. Negatives are drawn once per sample from the
/// seed; sample order is reshuffled every epoch.
TrainResult train(const std::vector<TrainingSample>& samples, const Corpus& corpus,
                  const TextEncoder& encoder, ModelParams initial, const TrainConfig& config);

/// Mean link loss with fixed negatives drawn from `seed`.
double mean_link_loss(const std::vector<TrainingSample>& samples, const Corpus& corpus,
                      const ModelParams& params, std::size_t k, std::uint64_t seed);

struct RetrievalReport {
    double accuracy = 0.0;
    double uniform_baseline = 0.0;  // mean of 1 / (N - 1)
    std::size_t samples = 0;
};

/// Top-1 retrieval of the masked argument among every node except the clue,
/// with the clue as head and the bank of the sample's kind.
RetrievalReport retrieval_accuracy(const std::vector<TrainingSample>& samples, const Corpus& corpus,
                                   const ModelParams& params);

/// Deterministic shuffle then split; the second part holds `fraction` of the
/// samples (rounded).
std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> split_samples(
    std::vector<TrainingSample> samples, double fraction, std::uint64_t seed);

}  // namespace care
