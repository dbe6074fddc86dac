#include "care/graph_json.hpp"

#include <fstream>
#include <sstream>

#include "care/error.hpp"

namespace care {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json span_json(Span s) { return ordered_json::array({s.start, s.end}); }

Span span_from(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer() ||
        j[0].get<long long>() < 0 || j[1].get<long long>() < 0)
        throw Error(ErrorCode::MalformedDocument, "span must be [start, end]");
    return Span{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

ordered_json graph_to_json(const ManualGraph& graph) {
    ordered_json doc;
    doc["manual_id"] = graph.manual_id();
    doc["text"] = graph.text();
    ordered_json nodes = ordered_json::array();
    for (const Node& n : graph.nodes()) {
        ordered_json jn;
        jn["id"] = n.id.value;
        jn["kind"] = to_string(n.kind);
        jn["surface"] = n.surface;
        jn["span"] = span_json(n.span);
        if (n.role) jn["role"] = n.role->name();
        ordered_json mentions = ordered_json::array();
        for (const Span& s : n.mention_spans) mentions.push_back(span_json(s));
        jn["mention_spans"] = std::move(mentions);
        nodes.push_back(std::move(jn));
    }
    doc["nodes"] = std::move(nodes);
    ordered_json edges = ordered_json::array();
    for (const Edge& e : graph.edges()) {
        ordered_json je;
        je["src"] = e.src.value;
        je["dst"] = e.dst.value;
        je["kind"] = to_string(e.kind);
        edges.push_back(std::move(je));
    }
    doc["edges"] = std::move(edges);
    return doc;
}

std::string serialize_graph(const ManualGraph& graph) { return graph_to_json(graph).dump() + "\n"; }

ManualGraph graph_from_json(const json& doc) {
    try {
        std::vector<Node> nodes;
        for (const json& jn : doc.at("nodes")) {
            Node n;
            n.id = NodeId{jn.at("id").get<std::uint32_t>()};
            n.kind = parse_node_kind(jn.at("kind").get<std::string>());
            n.surface = jn.at("surface").get<std::string>();
            n.span = span_from(jn.at("span"));
            if (jn.contains("role")) n.role = ArgumentRole::parse(jn.at("role").get<std::string>());
            if (jn.contains("mention_spans")) {
                for (const json& s : jn.at("mention_spans")) n.mention_spans.push_back(span_from(s));
            } else {
                n.mention_spans = {n.span};
            }
            nodes.push_back(std::move(n));
        }
        std::vector<Edge> edges;
        for (const json& je : doc.at("edges")) {
            edges.push_back(Edge{NodeId{je.at("src").get<std::uint32_t>()},
                                 NodeId{je.at("dst").get<std::uint32_t>()},
                                 parse_relation_kind(je.at("kind").get<std::string>())});
        }
        ManualGraph g = ManualGraph::from_parts(doc.at("manual_id").get<std::string>(),
                                                doc.at("text").get<std::string>(), std::move(nodes),
                                                std::move(edges));
        g.freeze();
        return g;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("graph document: ") + e.what());
    }
}

ManualGraph deserialize_graph(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedDocument, e.what());
    }
    return graph_from_json(doc);
}

ManualGraph load_graph(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_graph(ss.str());
}

void save_graph(const ManualGraph& graph, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << serialize_graph(graph);
}

}  // namespace care
