#include "care/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "care/error.hpp"
#include "care/utf8.hpp"

namespace care {

using nlohmann::json;

namespace {

constexpr std::string_view kDefaultUser = "User";

class Builder {
public:
    explicit Builder(const json& doc) : doc_(doc) {}

    ManualGraph run() {
        if (!doc_.is_object()) fail(ErrorCode::MalformedDocument, "", "document must be an object");
        graph_ = ManualGraph(text_field(doc_, "manual_id", ""), text_field(doc_, "text", ""));

        const json* entities = optional_array(doc_, "entities", "");
        if (entities) {
            for (std::size_t i = 0; i < entities->size(); ++i)
                declare_entity((*entities)[i], "entities[" + std::to_string(i) + "]", std::nullopt);
        }
        inject_user();

        const json& procs = required(doc_, "procedures", "");
        if (!procs.is_array()) fail(ErrorCode::MalformedDocument, "procedures", "must be an array");
        for (std::size_t p = 0; p < procs.size(); ++p) build_procedure(procs[p], p);

        for (std::size_t i = 0; i < pending_.size(); ++i) attach_entity_args(pending_[i]);
        return std::move(graph_);
    }

private:
    struct PendingEntity {
        NodeId id;
        const json* spec;
        std::string path;
    };

    [[noreturn]] void fail(ErrorCode code, const std::string& path, const std::string& msg) const {
        throw Error(code, (path.empty() ? std::string("document") : path) + ": " + msg);
    }

    const json& required(const json& obj, const char* key, const std::string& path) const {
        if (!obj.is_object() || !obj.contains(key))
            fail(ErrorCode::MalformedDocument, path, std::string("missing '") + key + "'");
        return obj.at(key);
    }

    const json* optional_array(const json& obj, const char* key, const std::string& path) const {
        if (!obj.contains(key) || obj.at(key).is_null()) return nullptr;
        if (!obj.at(key).is_array())
            fail(ErrorCode::MalformedDocument, path, std::string("'") + key + "' must be an array");
        return &obj.at(key);
    }

    std::string text_field(const json& obj, const char* key, const std::string& path) const {
        const json& v = required(obj, key, path);
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return v.dump();
        fail(ErrorCode::MalformedDocument, path, std::string("'") + key + "' must be a string");
    }

    Span span_field(const json& obj, const std::string& path) const {
        const json& v = required(obj, "span", path);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
            fail(ErrorCode::MalformedDocument, path, "span must be [start, end]");
        const long long s = v[0].get<long long>();
        const long long e = v[1].get<long long>();
        if (s < 0 || e < 0) fail(ErrorCode::SpanOutOfBounds, path, "negative span");
        return Span{static_cast<std::size_t>(s), static_cast<std::size_t>(e)};
    }

    template <class F>
    auto at(const std::string& path, F&& f) -> decltype(f()) {
        try {
            return f();
        } catch (const Error& e) {
            throw Error(e.code(), path + ": " + e.message());
        }
    }

    NodeId add_node(NodeKind kind, const json& spec, const std::string& path,
                    std::optional<ArgumentRole> role = std::nullopt) {
        std::string surface = text_field(spec, "surface", path);
        const Span span = span_field(spec, path);
        return at(path, [&] { return graph_.add_node(kind, std::move(surface), span, role); });
    }

    void add_edge(NodeId s, NodeId d, RelationKind k, const std::string& path) {
        at(path, [&] {
            graph_.add_edge(s, d, k);
            return 0;
        });
    }

    NodeId declare_entity(const json& spec, const std::string& path, std::optional<NodeId> parent) {
        if (!spec.is_object()) fail(ErrorCode::MalformedDocument, path, "entity must be an object");
        const NodeId id = add_node(NodeKind::Entity, spec, path);
        const std::string surface = graph_.node(id).surface;
        if (spec.contains("id")) {
            const std::string key = text_field(spec, "id", path);
            if (by_key_.count(key)) fail(ErrorCode::MalformedDocument, path, "duplicate entity id '" + key + "'");
            by_key_[key] = id;
        }
        by_surface_.emplace(surface, id);
        if (parent) add_edge(*parent, id, RelationKind::SUB, path);
        pending_.push_back({id, &spec, path});
        if (const json* subs = optional_array(spec, "sub_entities", path)) {
            for (std::size_t i = 0; i < subs->size(); ++i)
                declare_entity((*subs)[i], path + ".sub_entities[" + std::to_string(i) + "]", id);
        }
        return id;
    }

    void inject_user() {
        if (by_surface_.count(std::string(kDefaultUser))) return;
        // Use the first literal mention when the text has one.
        const std::u32string cps = utf8::decode(graph_.text());
        const std::u32string needle = utf8::decode(kDefaultUser);
        const auto pos = cps.find(needle);
        NodeId id = pos == std::u32string::npos
                        ? graph_.add_implicit_node(NodeKind::Entity, std::string(kDefaultUser))
                        : graph_.add_node(NodeKind::Entity, std::string(kDefaultUser),
                                          Span{pos, pos + needle.size()});
        by_surface_.emplace(std::string(kDefaultUser), id);
    }

    NodeId resolve(const json& ref, const std::string& path) {
        if (ref.is_string()) {
            const std::string key = ref.get<std::string>();
            if (auto it = by_key_.find(key); it != by_key_.end()) return it->second;
            if (auto it = by_surface_.find(key); it != by_surface_.end()) return it->second;
            fail(ErrorCode::UnresolvedReference, path, "no entity '" + key + "'");
        }
        if (ref.is_object()) {
            if (ref.contains("id") && !ref.contains("surface")) return resolve(ref.at("id"), path);
            return declare_entity(ref, path, std::nullopt);
        }
        fail(ErrorCode::MalformedDocument, path, "entity reference must be a string or object");
    }

    void build_args(NodeId owner, RelationKind rel, const json& owner_spec, const std::string& path,
                    const char* key) {
        const json* args = optional_array(owner_spec, key, path);
        if (!args) return;
        for (std::size_t i = 0; i < args->size(); ++i) {
            const json& a = (*args)[i];
            const std::string ap = path + "." + key + "[" + std::to_string(i) + "]";
            if (!a.is_object()) fail(ErrorCode::MalformedDocument, ap, "argument must be an object");
            const ArgumentRole role = ArgumentRole::parse(text_field(a, "role", ap));
            const NodeId arg = add_node(NodeKind::Argument, a, ap, role);
            add_edge(owner, arg, rel, ap);
            if (const json* targets = optional_array(a, "pata_targets", ap)) {
                if (role.tag != ArgumentRole::Tag::State && !targets->empty())
                    fail(ErrorCode::KindConstraintViolated, ap, "pata_targets on a non-State argument");
                for (std::size_t t = 0; t < targets->size(); ++t) {
                    const std::string tp = ap + ".pata_targets[" + std::to_string(t) + "]";
                    add_edge(arg, resolve((*targets)[t], tp), RelationKind::PATA, tp);
                }
            }
            build_args(arg, RelationKind::ArgArg, a, ap, "arg_args");
        }
    }

    void build_procedure(const json& proc, std::size_t p) {
        const std::string path = "procedures[" + std::to_string(p) + "]";
        const json* actions = &proc;
        if (proc.is_object()) actions = &required(proc, "actions", path);
        if (!actions->is_array()) fail(ErrorCode::MalformedDocument, path, "procedure must be a list of actions");
        if (actions->empty()) fail(ErrorCode::EmptyProcedure, path, "procedure has no actions");
        std::optional<NodeId> prev;
        for (std::size_t i = 0; i < actions->size(); ++i) {
            const json& spec = (*actions)[i];
            const std::string ap = path + "[" + std::to_string(i) + "]";
            if (!spec.is_object()) fail(ErrorCode::MalformedDocument, ap, "action must be an object");
            const NodeId act = add_node(NodeKind::Action, spec, ap);
            if (prev) add_edge(*prev, act, RelationKind::Next, ap);
            if (spec.contains("agent") && !spec.at("agent").is_null())
                add_edge(act, resolve(spec.at("agent"), ap + ".agent"), RelationKind::AGT, ap + ".agent");
            if (spec.contains("patient") && !spec.at("patient").is_null())
                add_edge(act, resolve(spec.at("patient"), ap + ".patient"), RelationKind::PAT,
                         ap + ".patient");
            build_args(act, RelationKind::ActionArg, spec, ap, "args");
            prev = act;
        }
    }

    void attach_entity_args(PendingEntity pe) {
        build_args(pe.id, RelationKind::EntityArg, *pe.spec, pe.path, "args");
    }

    const json& doc_;
    ManualGraph graph_;
    std::map<std::string, NodeId> by_key_;
    std::multimap<std::string, NodeId> by_surface_;
    std::vector<PendingEntity> pending_;
};

json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined: return nullptr;
        case YAML::NodeType::Sequence: {
            json arr = json::array();
            for (const auto& child : node) arr.push_back(yaml_to_json(child));
            return arr;
        }
        case YAML::NodeType::Map: {
            json obj = json::object();
            for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return obj;
        }
        case YAML::NodeType::Scalar: {
            const std::string& s = node.Scalar();
            // Plain (untagged) all-digit scalars are integers; everything else
            // stays text so surfaces keep their exact bytes.
            if (node.Tag() == "?" && !s.empty() && s.size() < 19 &&
                std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
                return std::stoll(s);
            return s;
        }
    }
    return nullptr;
}

}  // namespace

ManualGraph build_graph(const json& annotation) { return Builder(annotation).run(); }

ManualGraph fuse_coreferences(ManualGraph graph) {
    // Group by (kind, surface, role); the smallest span keeps its id.
    std::map<std::tuple<NodeKind, std::string, std::string>, std::vector<NodeId>> groups;
    for (const Node& n : graph.nodes()) {
        if (n.kind == NodeKind::Action) continue;
        groups[{n.kind, n.surface, n.role ? n.role->name() : std::string()}].push_back(n.id);
    }
    for (auto& [key, ids] : groups) {
        if (ids.size() < 2) continue;
        auto first_span = [&](NodeId id) {
            const Node& n = graph.node(id);
            // Implicit nodes have no mention and sort after real mentions.
            return std::make_tuple(n.mention_spans.empty(), n.span, id);
        };
        std::sort(ids.begin(), ids.end(),
                  [&](NodeId a, NodeId b) { return first_span(a) < first_span(b); });
        for (std::size_t i = 1; i < ids.size(); ++i) graph.merge_into(ids.front(), ids[i]);
    }
    return graph;
}

ManualGraph parse_manual(const json& annotation) {
    ManualGraph g = fuse_coreferences(build_graph(annotation));
    g.freeze();
    return g;
}

json parse_annotation_text(std::string_view text, bool yaml) {
    if (yaml) {
        try {
            return yaml_to_json(YAML::Load(std::string(text)));
        } catch (const YAML::Exception& e) {
            throw Error(ErrorCode::MalformedDocument, std::string("yaml: ") + e.what());
        }
    }
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("json: ") + e.what());
    }
}

json load_annotation(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const bool yaml = path.ends_with(".yaml") || path.ends_with(".yml");
    return parse_annotation_text(ss.str(), yaml);
}

}  // namespace care
