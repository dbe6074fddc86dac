#pragma once

// Serving state: loaded manuals, their embeddings and the active parameters.
// Readers take a snapshot and never see a half-updated state; writers build a
// new state and swap it in.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

#include "care/encoder.hpp"
#include "care/graph.hpp"
#include "care/model.hpp"

namespace care {

struct ServedManual {
    ManualGraph graph;
    NodeEmbeddings embeddings;
    std::string canonical;  // serialize_graph(graph)
};

struct EngineState {
    std::map<std::string, std::shared_ptr<const ServedManual>> manuals;
    std::shared_ptr<const ModelParams> params;
    std::string fingerprint;
};

/// Manual ids double as file names, so they are limited to [A-Za-z0-9._-].
bool valid_manual_id(std::string_view id);

/// Reads request overrides {delta, beam, max_depth} on top of `base`.
/// Throws InvalidArgument on a wrong type or an out-of-range value.
InferenceParams apply_overrides(const nlohmann::json& overrides, InferenceParams base);

class Engine {
public:
    /// With a non-empty data_dir, graphs are persisted under
    /// <data_dir>/manuals/<id>.json and the ones already there are loaded.
    Engine(std::shared_ptr<const TextEncoder> encoder, ModelParams params,
           std::filesystem::path data_dir = {});

    std::shared_ptr<const EngineState> snapshot() const;

    /// Parses, fuses, freezes, embeds and persists an annotation. Returns the
    /// manual id. Throws DuplicateManual when the id is taken.
    std::string add_manual(const nlohmann::json& annotation);
    /// Same for an already compiled graph.
    std::string add_graph(ManualGraph graph);

    /// Alignment plus inference. The body has no timing field, so identical
    /// requests give identical bodies.
    nlohmann::ordered_json ask(std::string_view manual_id, std::string_view question,
                               const InferenceParams& options) const;
    nlohmann::ordered_json ask(std::string_view manual_id, std::string_view question) const;

    /// Canonical graph JSON. Throws UnknownManual.
    std::string graph_json(std::string_view manual_id) const;

    nlohmann::ordered_json health() const;

    /// Atomic swap of the model parameters. The fingerprint must match.
    void reload_params(ModelParams params);

    const TextEncoder& encoder() const noexcept { return *encoder_; }

private:
    std::shared_ptr<const ServedManual> find(const EngineState& state, std::string_view id) const;
    void persist(const ServedManual& manual) const;
    void install(std::shared_ptr<const EngineState> next);

    std::shared_ptr<const TextEncoder> encoder_;
    std::filesystem::path data_dir_;
    mutable std::mutex state_mu_;
    std::mutex write_mu_;  // serialises writers
    std::shared_ptr<const EngineState> state_;
};

}  // namespace care
