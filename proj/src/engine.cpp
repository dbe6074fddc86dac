#include "care/engine.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "care/alignment.hpp"
#include "care/error.hpp"
#include "care/graph_json.hpp"
#include "care/inference.hpp"
#include "care/ingest.hpp"

namespace care {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

bool valid_manual_id(std::string_view id) {
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
               c == '_' || c == '-';
    });
}

InferenceParams apply_overrides(const json& overrides, InferenceParams base) {
    if (overrides.is_null()) return base;
    if (!overrides.is_object()) throw Error(ErrorCode::InvalidArgument, "overrides must be an object");
    for (const auto& [key, value] : overrides.items()) {
        if (key == "delta") {
            if (!value.is_number()) throw Error(ErrorCode::InvalidArgument, "overrides.delta must be a number");
            base.delta = value.get<double>();
        } else if (key == "beam" || key == "max_depth") {
            if (!value.is_number_integer() || value.get<long long>() < 1)
                throw Error(ErrorCode::InvalidArgument, "overrides." + key + " must be a positive integer");
            (key == "beam" ? base.beam : base.max_depth) = value.get<std::size_t>();
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown override '" + key + "'");
        }
    }
    base.validate();
    return base;
}

Engine::Engine(std::shared_ptr<const TextEncoder> encoder, ModelParams params, fs::path data_dir)
    : encoder_(std::move(encoder)), data_dir_(std::move(data_dir)) {
    if (!encoder_) throw Error(ErrorCode::InvalidArgument, "engine needs an encoder");
    params.validate();
    if (params.encoder_fingerprint != encoder_->fingerprint())
        throw Error(ErrorCode::EncoderMismatch, "parameters were trained under " + params.encoder_fingerprint);

    auto state = std::make_shared<EngineState>();
    state->params = std::make_shared<const ModelParams>(std::move(params));
    state->fingerprint = encoder_->fingerprint();

    if (!data_dir_.empty()) {
        const fs::path dir = data_dir_ / "manuals";
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto m = std::make_shared<ServedManual>();
            m->graph = load_graph(f.string());
            m->embeddings = encode_nodes(m->graph, *encoder_);
            m->canonical = serialize_graph(m->graph);
            state->manuals[m->graph.manual_id()] = std::move(m);
        }
    }
    state_ = std::move(state);
}

std::shared_ptr<const EngineState> Engine::snapshot() const {
    std::lock_guard lock(state_mu_);
    return state_;
}

void Engine::install(std::shared_ptr<const EngineState> next) {
    std::lock_guard lock(state_mu_);
    state_ = std::move(next);
}

std::string Engine::add_manual(const json& annotation) { return add_graph(parse_manual(annotation)); }

std::string Engine::add_graph(ManualGraph graph) {
    const std::string id = graph.manual_id();
    if (!valid_manual_id(id))
        throw Error(ErrorCode::MalformedDocument, "manual_id: '" + id + "' must match [A-Za-z0-9._-]+");
    if (!graph.frozen()) graph.freeze();

    std::lock_guard writer(write_mu_);
    auto current = snapshot();
    if (current->manuals.count(id)) throw Error(ErrorCode::DuplicateManual, "manual '" + id + "' already loaded");

    auto m = std::make_shared<ServedManual>();
    m->embeddings = encode_nodes(graph, *encoder_);
    m->canonical = serialize_graph(graph);
    m->graph = std::move(graph);
    persist(*m);

    auto next = std::make_shared<EngineState>(*current);
    next->manuals[id] = std::move(m);
    install(std::move(next));
    return id;
}

void Engine::persist(const ServedManual& manual) const {
    if (data_dir_.empty()) return;
    const fs::path dir = data_dir_ / "manuals";
    const fs::path tmp = dir / (manual.graph.manual_id() + ".json.tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        out << manual.canonical;
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, dir / (manual.graph.manual_id() + ".json"), ec);
    if (ec) throw Error(ErrorCode::Io, "cannot persist manual: " + ec.message());
}

std::shared_ptr<const ServedManual> Engine::find(const EngineState& state, std::string_view id) const {
    auto it = state.manuals.find(std::string(id));
    if (it == state.manuals.end()) throw Error(ErrorCode::UnknownManual, "no manual '" + std::string(id) + "'");
    return it->second;
}

ordered_json Engine::ask(std::string_view manual_id, std::string_view question) const {
    return ask(manual_id, question, snapshot()->params->inference);
}

ordered_json Engine::ask(std::string_view manual_id, std::string_view question,
                         const InferenceParams& options) const {
    const auto state = snapshot();
    const auto manual = find(*state, manual_id);
    const auto& q = question;
    if (std::all_of(q.begin(), q.end(), [](unsigned char c) { return std::isspace(c); }))
        throw Error(ErrorCode::InvalidArgument, "question is empty");
    options.validate();

    const ModelParams& params = *state->params;
    const ManualGraph& g = manual->graph;
    const AlignmentResult al = align(question, g, manual->embeddings, params.w, *encoder_);
    const auto chains = infer_chains(g, manual->embeddings, al.node, params, *encoder_, options);

    const Node& qn = g.node(al.node);
    ordered_json spans = ordered_json::array();
    for (const Span& s : qn.mention_spans) spans.push_back({{"start", s.start}, {"end", s.end}});

    double prob = 0.0;
    for (const auto& [id, p] : al.distribution)
        if (id == al.node) prob = p;

    ordered_json out = ordered_json::object();
    out["manual_id"] = g.manual_id();
    out["question"] = std::string(question);
    out["question_clue"] = {{"node", al.node.value}, {"text", recompose(g, al.node)}, {"spans", spans},
                            {"probability", prob}, {"margin", al.score_margin}};
    ordered_json list = ordered_json::array();
    bool fallback = false;
    for (const auto& c : chains) {
        list.push_back(chain_to_json(c, g));
        fallback = fallback || c.fallback;
    }
    out["chains"] = std::move(list);
    out["fallback"] = fallback;
    out["params"] = {{"delta", options.delta}, {"beam", options.beam}, {"max_depth", options.max_depth}};
    return out;
}

std::string Engine::graph_json(std::string_view manual_id) const {
    const auto state = snapshot();
    return find(*state, manual_id)->canonical;
}

ordered_json Engine::health() const {
    const auto state = snapshot();
    return {{"status", "ok"}, {"fingerprint", state->fingerprint}, {"manuals", state->manuals.size()}};
}

void Engine::reload_params(ModelParams params) {
    params.validate();
    if (params.encoder_fingerprint != encoder_->fingerprint())
        throw Error(ErrorCode::EncoderMismatch, "parameters were trained under " + params.encoder_fingerprint);
    std::lock_guard writer(write_mu_);
    auto next = std::make_shared<EngineState>(*snapshot());
    next->params = std::make_shared<const ModelParams>(std::move(params));
    install(std::move(next));
}

}  // namespace care
