#include "care/graph.hpp"

#include <algorithm>
#include <cctype>
#include <queue>
#include <set>
#include <sstream>

#include "care/error.hpp"
#include "care/utf8.hpp"

namespace care {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::SpanOutOfBounds: return "SpanOutOfBounds";
        case ErrorCode::RoleMismatch: return "RoleMismatch";
        case ErrorCode::KindConstraintViolated: return "KindConstraintViolated";
        case ErrorCode::DuplicateEdge: return "DuplicateEdge";
        case ErrorCode::NextCycle: return "NextCycle";
        case ErrorCode::NextBranch: return "NextBranch";
        case ErrorCode::SubCycle: return "SubCycle";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::GraphFrozen: return "GraphFrozen";
        case ErrorCode::UnresolvedReference: return "UnresolvedReference";
        case ErrorCode::SpanMismatch: return "SpanMismatch";
        case ErrorCode::EmptyProcedure: return "EmptyProcedure";
        case ErrorCode::MalformedDocument: return "MalformedDocument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::GeometryMismatch: return "GeometryMismatch";
        case ErrorCode::EmptyGraph: return "EmptyGraph";
        case ErrorCode::EncoderMismatch: return "EncoderMismatch";
        case ErrorCode::NoValidClueNode: return "NoValidClueNode";
        case ErrorCode::DivergenceDetected: return "DivergenceDetected";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
        case ErrorCode::UnknownManual: return "UnknownManual";
        case ErrorCode::DuplicateManual: return "DuplicateManual";
    }
    return "Unknown";
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string describe(NodeId id) { return "#" + std::to_string(id.value); }

}  // namespace

ArgumentRole ArgumentRole::parse(std::string_view text) {
    const std::string l = lower(text);
    if (l == "time") return time();
    if (l == "location") return location();
    if (l == "manner") return manner();
    if (l == "state") return state();
    return other(std::string(text));
}

std::string ArgumentRole::name() const {
    switch (tag) {
        case Tag::Time: return "Time";
        case Tag::Location: return "Location";
        case Tag::Manner: return "Manner";
        case Tag::State: return "State";
        case Tag::Other: return label;
    }
    return label;
}

std::string_view to_string(NodeKind kind) noexcept {
    switch (kind) {
        case NodeKind::Action: return "Action";
        case NodeKind::Entity: return "Entity";
        case NodeKind::Argument: return "Argument";
    }
    return "?";
}

std::string_view to_string(RelationKind kind) noexcept {
    switch (kind) {
        case RelationKind::Next: return "Next";
        case RelationKind::AGT: return "AGT";
        case RelationKind::PAT: return "PAT";
        case RelationKind::PATA: return "PATA";
        case RelationKind::SUB: return "SUB";
        case RelationKind::ActionArg: return "ActionArg";
        case RelationKind::EntityArg: return "EntityArg";
        case RelationKind::ArgArg: return "ArgArg";
        case RelationKind::SelfLoop: return "SelfLoop";
    }
    return "?";
}

std::string_view to_string(Direction dir) noexcept {
    return dir == Direction::Forward ? "forward" : "backward";
}

NodeKind parse_node_kind(std::string_view text) {
    for (NodeKind k : {NodeKind::Action, NodeKind::Entity, NodeKind::Argument})
        if (to_string(k) == text) return k;
    throw Error(ErrorCode::MalformedDocument, "unknown node kind '" + std::string(text) + "'");
}

RelationKind parse_relation_kind(std::string_view text) {
    for (RelationKind k :
         {RelationKind::Next, RelationKind::AGT, RelationKind::PAT, RelationKind::PATA,
          RelationKind::SUB, RelationKind::ActionArg, RelationKind::EntityArg, RelationKind::ArgArg,
          RelationKind::SelfLoop})
        if (to_string(k) == text) return k;
    throw Error(ErrorCode::MalformedDocument, "unknown relation kind '" + std::string(text) + "'");
}

ManualGraph::ManualGraph(std::string manual_id, std::string text)
    : manual_id_(std::move(manual_id)), text_(std::move(text)), boundaries_(utf8::boundaries(text_)) {}

std::string_view ManualGraph::slice(Span span) const {
    if (span.start > span.end || span.end > text_length())
        throw Error(ErrorCode::SpanOutOfBounds, "span out of bounds");
    const std::size_t b = boundaries_[span.start];
    return std::string_view(text_).substr(b, boundaries_[span.end] - b);
}

void ManualGraph::require_mutable() const {
    if (frozen_) throw Error(ErrorCode::GraphFrozen, "graph '" + manual_id_ + "' is frozen");
}

void ManualGraph::validate_span(Span span, std::string_view surface) const {
    if (span.start >= span.end || span.end > text_length()) {
        std::ostringstream os;
        os << "span [" << span.start << "," << span.end << ") for '" << surface
           << "' outside text of length " << text_length();
        throw Error(ErrorCode::SpanOutOfBounds, os.str());
    }
    if (slice(span) != surface) {
        std::ostringstream os;
        os << "surface '" << surface << "' differs from text '" << slice(span) << "' at ["
           << span.start << "," << span.end << ")";
        throw Error(ErrorCode::SpanMismatch, os.str());
    }
}

NodeId ManualGraph::add_node(NodeKind kind, std::string surface, Span span,
                             std::optional<ArgumentRole> role) {
    require_mutable();
    if (role.has_value() != (kind == NodeKind::Argument)) {
        throw Error(ErrorCode::RoleMismatch,
                    role ? "role given for " + std::string(to_string(kind)) + " node '" + surface + "'"
                         : "argument node '" + surface + "' has no role");
    }
    if (surface.empty()) throw Error(ErrorCode::SpanMismatch, "empty surface");
    validate_span(span, surface);
    Node n;
    n.id = NodeId{next_id_++};
    n.kind = kind;
    n.surface = std::move(surface);
    n.span = span;
    n.role = std::move(role);
    n.mention_spans = {span};
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
}

NodeId ManualGraph::add_implicit_node(NodeKind kind, std::string surface) {
    require_mutable();
    if (kind == NodeKind::Argument) throw Error(ErrorCode::RoleMismatch, "implicit argument node");
    if (surface.empty()) throw Error(ErrorCode::SpanMismatch, "empty surface");
    Node n;
    n.id = NodeId{next_id_++};
    n.kind = kind;
    n.surface = std::move(surface);
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
}

std::size_t ManualGraph::index_of(NodeId id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                               [](const Node& n, NodeId v) { return n.id < v; });
    if (it == nodes_.end() || it->id != id)
        throw Error(ErrorCode::UnknownNode, "no node " + describe(id));
    return static_cast<std::size_t>(it - nodes_.begin());
}

bool ManualGraph::contains(NodeId id) const noexcept {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                               [](const Node& n, NodeId v) { return n.id < v; });
    return it != nodes_.end() && it->id == id;
}

const Node& ManualGraph::node(NodeId id) const { return nodes_[index_of(id)]; }

Node& ManualGraph::mutable_node(NodeId id) { return nodes_[index_of(id)]; }

std::optional<NodeId> ManualGraph::next_of(NodeId id) const {
    for (const Edge& e : edges_)
        if (e.kind == RelationKind::Next && e.src == id) return e.dst;
    return std::nullopt;
}

std::optional<NodeId> ManualGraph::previous_of(NodeId id) const {
    for (const Edge& e : edges_)
        if (e.kind == RelationKind::Next && e.dst == id) return e.src;
    return std::nullopt;
}

void ManualGraph::check_edge(NodeId src, NodeId dst, RelationKind kind) const {
    const Node& s = node(src);
    const Node& d = node(dst);
    auto violated = [&](std::string_view expected) {
        std::ostringstream os;
        os << to_string(kind) << " edge " << describe(src) << " (" << to_string(s.kind) << ") -> "
           << describe(dst) << " (" << to_string(d.kind) << "); expected " << expected;
        throw Error(ErrorCode::KindConstraintViolated, os.str());
    };
    const auto is = [](const Node& n, NodeKind k) { return n.kind == k; };
    switch (kind) {
        case RelationKind::Next:
            if (!is(s, NodeKind::Action) || !is(d, NodeKind::Action)) violated("Action -> Action");
            break;
        case RelationKind::AGT:
        case RelationKind::PAT:
            if (!is(s, NodeKind::Action) || !is(d, NodeKind::Entity)) violated("Action -> Entity");
            break;
        case RelationKind::ActionArg:
            if (!is(s, NodeKind::Action) || !is(d, NodeKind::Argument)) violated("Action -> Argument");
            break;
        case RelationKind::EntityArg:
            if (!is(s, NodeKind::Entity) || !is(d, NodeKind::Argument)) violated("Entity -> Argument");
            break;
        case RelationKind::SUB:
            if (!is(s, NodeKind::Entity) || !is(d, NodeKind::Entity)) violated("Entity -> Entity");
            break;
        case RelationKind::PATA:
            if (!is(s, NodeKind::Argument) || !s.role || s.role->tag != ArgumentRole::Tag::State ||
                !is(d, NodeKind::Entity))
                violated("Argument(State) -> Entity");
            break;
        case RelationKind::ArgArg:
            if (!is(s, NodeKind::Argument) || !is(d, NodeKind::Argument))
                violated("Argument -> Argument");
            break;
        case RelationKind::SelfLoop:
            throw Error(ErrorCode::KindConstraintViolated,
                        "SelfLoop edges exist only transiently during inference");
    }
    if (src == dst) throw Error(ErrorCode::KindConstraintViolated, "edge from a node to itself");

    const Edge probe{src, dst, kind};
    if (std::binary_search(edges_.begin(), edges_.end(), probe)) {
        throw Error(ErrorCode::DuplicateEdge, std::string(to_string(kind)) + " edge " +
                                                  describe(src) + " -> " + describe(dst));
    }

    if (kind == RelationKind::Next) {
        // Walking forward from dst must not reach src.
        std::optional<NodeId> cur = dst;
        std::size_t guard = 0;
        while (cur && guard++ <= nodes_.size()) {
            if (*cur == src)
                throw Error(ErrorCode::NextCycle,
                            "Next edge " + describe(src) + " -> " + describe(dst) + " closes a cycle");
            cur = next_of(*cur);
        }
        if (next_of(src) || previous_of(dst))
            throw Error(ErrorCode::NextBranch, "Next edge " + describe(src) + " -> " + describe(dst) +
                                                   " would branch a procedure");
    }
    if (kind == RelationKind::SUB) {
        // dst must not already reach src through SUB edges.
        std::vector<NodeId> stack{dst};
        std::set<NodeId> seen;
        while (!stack.empty()) {
            NodeId cur = stack.back();
            stack.pop_back();
            if (cur == src)
                throw Error(ErrorCode::SubCycle,
                            "SUB edge " + describe(src) + " -> " + describe(dst) + " closes a cycle");
            if (!seen.insert(cur).second) continue;
            for (const Edge& e : edges_)
                if (e.kind == RelationKind::SUB && e.src == cur) stack.push_back(e.dst);
        }
    }
}

void ManualGraph::insert_edge_sorted(const Edge& e) {
    edges_.insert(std::upper_bound(edges_.begin(), edges_.end(), e), e);
}

void ManualGraph::add_edge(NodeId src, NodeId dst, RelationKind kind) {
    require_mutable();
    check_edge(src, dst, kind);
    insert_edge_sorted(Edge{src, dst, kind});
}

void ManualGraph::merge_into(NodeId keep, NodeId drop) {
    require_mutable();
    if (keep == drop) return;
    Node& k = mutable_node(keep);
    const Node d = node(drop);
    std::vector<Span> spans = k.mention_spans;
    spans.insert(spans.end(), d.mention_spans.begin(), d.mention_spans.end());
    std::sort(spans.begin(), spans.end());
    spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
    k.mention_spans = std::move(spans);

    std::vector<Edge> old = std::move(edges_);
    edges_.clear();
    nodes_.erase(nodes_.begin() + static_cast<std::ptrdiff_t>(index_of(drop)));
    for (Edge e : old) {
        if (e.src == drop) e.src = keep;
        if (e.dst == drop) e.dst = keep;
        if (e.src == e.dst) continue;
        if (std::binary_search(edges_.begin(), edges_.end(), e)) continue;
        if (e.kind == RelationKind::SUB) {
            try {
                check_edge(e.src, e.dst, e.kind);
            } catch (const Error&) {
                warnings_.push_back("dropped SUB edge " + describe(e.src) + " -> " +
                                    describe(e.dst) + " that fusion turned into a cycle");
                continue;
            }
        }
        insert_edge_sorted(e);
    }
}

std::vector<Adjacency> ManualGraph::adjacent(NodeId id) const {
    const std::size_t idx = index_of(id);
    if (frozen_) return adjacency_[idx];
    std::vector<Adjacency> out;
    for (const Edge& e : edges_) {
        if (e.src == id) out.push_back({e.dst, e.kind, Direction::Forward});
        if (e.dst == id) out.push_back({e.src, e.kind, Direction::Backward});
    }
    std::sort(out.begin(), out.end(), [](const Adjacency& a, const Adjacency& b) {
        return std::tie(a.node, a.kind, a.direction) < std::tie(b.node, b.kind, b.direction);
    });
    return out;
}

bool ManualGraph::adjacent_to(NodeId a, NodeId b) const {
    for (const Adjacency& adj : adjacent(a))
        if (adj.node == b) return true;
    return false;
}

void ManualGraph::build_adjacency() {
    adjacency_.assign(nodes_.size(), {});
    for (const Edge& e : edges_) {
        adjacency_[index_of(e.src)].push_back({e.dst, e.kind, Direction::Forward});
        adjacency_[index_of(e.dst)].push_back({e.src, e.kind, Direction::Backward});
    }
    for (auto& list : adjacency_) {
        std::sort(list.begin(), list.end(), [](const Adjacency& a, const Adjacency& b) {
            return std::tie(a.node, a.kind, a.direction) < std::tie(b.node, b.kind, b.direction);
        });
    }
}

void ManualGraph::record_components() {
    if (nodes_.empty()) return;
    std::vector<int> comp(nodes_.size(), -1);
    int count = 0;
    for (std::size_t s = 0; s < nodes_.size(); ++s) {
        if (comp[s] >= 0) continue;
        std::queue<std::size_t> q;
        q.push(s);
        comp[s] = count;
        while (!q.empty()) {
            const std::size_t cur = q.front();
            q.pop();
            for (const Adjacency& a : adjacency_[cur]) {
                const std::size_t j = index_of(a.node);
                if (comp[j] < 0) {
                    comp[j] = count;
                    q.push(j);
                }
            }
        }
        ++count;
    }
    if (count <= 1) return;
    for (int c = 0; c < count; ++c) {
        std::ostringstream os;
        os << "manual '" << manual_id_ << "' component " << c + 1 << "/" << count << ":";
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (comp[i] == c) os << " " << describe(nodes_[i].id);
        warnings_.push_back(os.str());
    }
}

void ManualGraph::freeze() {
    if (frozen_) return;
    build_adjacency();
    record_components();
    frozen_ = true;
}

ManualGraph ManualGraph::from_parts(std::string manual_id, std::string text, std::vector<Node> nodes,
                                    std::vector<Edge> edges) {
    ManualGraph g(std::move(manual_id), std::move(text));
    std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (nodes[i].id == nodes[i - 1].id)
            throw Error(ErrorCode::MalformedDocument, "duplicate node id " + describe(nodes[i].id));
    for (const Node& n : nodes) {
        if (n.role.has_value() != (n.kind == NodeKind::Argument))
            throw Error(ErrorCode::RoleMismatch, "node " + describe(n.id) + " role/kind mismatch");
        if (n.surface.empty()) throw Error(ErrorCode::SpanMismatch, "empty surface");
        if (!n.mention_spans.empty()) g.validate_span(n.span, n.surface);
        for (const Span& s : n.mention_spans) {
            if (s.start >= s.end || s.end > g.text_length())
                throw Error(ErrorCode::SpanOutOfBounds, "mention span of " + describe(n.id));
        }
    }
    g.nodes_ = std::move(nodes);
    g.next_id_ = g.nodes_.empty() ? 0 : g.nodes_.back().id.value + 1;
    for (const Edge& e : edges) g.add_edge(e.src, e.dst, e.kind);
    return g;
}

std::vector<NodeId> procedural_neighbors(const ManualGraph& graph, NodeId n) {
    std::vector<NodeId> out{n};
    for (const Adjacency& a : graph.adjacent(n))
        if (is_procedural(a.kind)) out.push_back(a.node);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<NodeId> factual_neighbors(const ManualGraph& graph, NodeId n) {
    std::vector<NodeId> out{n};
    for (const Adjacency& a : graph.adjacent(n))
        if (!is_procedural(a.kind)) out.push_back(a.node);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string recompose(const ManualGraph& graph, NodeId n) {
    std::vector<const Node*> parts{&graph.node(n)};
    for (const Adjacency& a : graph.adjacent(n)) {
        if (a.direction != Direction::Forward) continue;
        switch (a.kind) {
            case RelationKind::AGT:
            case RelationKind::PAT:
            case RelationKind::ActionArg:
            case RelationKind::EntityArg: parts.push_back(&graph.node(a.node)); break;
            default: break;
        }
    }
    std::sort(parts.begin(), parts.end(), [](const Node* a, const Node* b) {
        return std::tie(a->span.start, a->span.end, a->id) <
               std::tie(b->span.start, b->span.end, b->id);
    });
    std::string out;
    for (const Node* p : parts) {
        if (!out.empty()) out.push_back(' ');
        out += p->surface;
    }
    return out;
}

bool canonical_less(const Node& a, const Node& b) {
    return std::tie(a.span, a.kind, a.surface, a.id) < std::tie(b.span, b.kind, b.surface, b.id);
}

}  // namespace care
