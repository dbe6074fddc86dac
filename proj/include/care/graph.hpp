#pragma once

// Heterogeneous manual graph: action, entity and argument nodes joined by typed
// relations. "Next" is the only procedural relation; every other relation is
// factual.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace care {

struct NodeId {
    std::uint32_t value = 0;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class NodeKind { Action, Entity, Argument };

enum class RelationKind { Next, AGT, PAT, PATA, SUB, ActionArg, EntityArg, ArgArg, SelfLoop };

/// Semantic role of an argument node. `label` is only meaningful for Other.
struct ArgumentRole {
    enum class Tag { Time, Location, Manner, State, Other };

    Tag tag = Tag::Other;
    std::string label;

    static ArgumentRole time() { return {Tag::Time, {}}; }
    static ArgumentRole location() { return {Tag::Location, {}}; }
    static ArgumentRole manner() { return {Tag::Manner, {}}; }
    static ArgumentRole state() { return {Tag::State, {}}; }
    static ArgumentRole other(std::string label) { return {Tag::Other, std::move(label)}; }

    /// "Time", "Location", "Manner", "State" (case-insensitive) map to their
    /// tags; anything else becomes Other(text).
    static ArgumentRole parse(std::string_view text);
    std::string name() const;

    friend bool operator==(const ArgumentRole&, const ArgumentRole&) = default;
};

/// Half-open interval [start, end) of code points in the manual text.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end - start; }
    bool empty() const noexcept { return start == end; }

    friend auto operator<=>(const Span&, const Span&) = default;
};

struct Node {
    NodeId id;
    NodeKind kind = NodeKind::Action;
    std::string surface;
    Span span;
    std::optional<ArgumentRole> role;
    // Every mention of this node. Equal to {span} unless fusion merged
    // mentions; empty for the implicit "User" entity when the text never
    // names it.
    std::vector<Span> mention_spans;
};

struct Edge {
    NodeId src;
    NodeId dst;
    RelationKind kind = RelationKind::Next;

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class Direction { Forward, Backward };

/// One incident edge seen from a node: `node` is the other endpoint.
struct Adjacency {
    NodeId node;
    RelationKind kind;
    Direction direction;  // Forward when the edge leaves the origin node
};

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(RelationKind kind) noexcept;
std::string_view to_string(Direction dir) noexcept;
NodeKind parse_node_kind(std::string_view text);
RelationKind parse_relation_kind(std::string_view text);

inline bool is_procedural(RelationKind kind) noexcept { return kind == RelationKind::Next; }

class ManualGraph {
public:
    ManualGraph() = default;
    ManualGraph(std::string manual_id, std::string text);

    const std::string& manual_id() const noexcept { return manual_id_; }
    const std::string& text() const noexcept { return text_; }
    /// Length of the text in code points.
    std::size_t text_length() const noexcept { return boundaries_.size() - 1; }
    /// Text covered by a code-point span.
    std::string_view slice(Span span) const;

    NodeId add_node(NodeKind kind, std::string surface, Span span,
                    std::optional<ArgumentRole> role = std::nullopt);
    /// Node with no mention in the text (used for the default "User" entity).
    NodeId add_implicit_node(NodeKind kind, std::string surface);
    void add_edge(NodeId src, NodeId dst, RelationKind kind);

    /// Ends construction. Afterwards the graph is immutable and its adjacency
    /// lists are built; connectivity warnings are recorded here.
    void freeze();
    bool frozen() const noexcept { return frozen_; }

    bool contains(NodeId id) const noexcept;
    const Node& node(NodeId id) const;
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    /// Position of a node in nodes(); nodes are kept sorted by id.
    std::size_t index_of(NodeId id) const;

    /// Incident edges in both directions, sorted by (node, kind, direction).
    std::vector<Adjacency> adjacent(NodeId id) const;
    bool adjacent_to(NodeId a, NodeId b) const;

    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    /// Next edge ends of an action, if any.
    std::optional<NodeId> next_of(NodeId id) const;
    std::optional<NodeId> previous_of(NodeId id) const;

    // Used by coreference fusion; only valid before freeze().
    void merge_into(NodeId keep, NodeId drop);

    /// Rebuilds a graph from already-validated parts (deserialization).
    static ManualGraph from_parts(std::string manual_id, std::string text, std::vector<Node> nodes,
                                  std::vector<Edge> edges);

private:
    void require_mutable() const;
    void validate_span(Span span, std::string_view surface) const;
    void check_edge(NodeId src, NodeId dst, RelationKind kind) const;
    void insert_edge_sorted(const Edge& e);
    void build_adjacency();
    void record_components();
    Node& mutable_node(NodeId id);

    std::string manual_id_;
    std::string text_;
    std::vector<std::size_t> boundaries_{0};
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::uint32_t next_id_ = 0;
    bool frozen_ = false;
    std::vector<std::vector<Adjacency>> adjacency_;  // by node index, after freeze
    std::vector<std::string> warnings_;
};

/// P(n): n plus every node joined to n by a Next edge in either direction.
std::vector<NodeId> procedural_neighbors(const ManualGraph& graph, NodeId n);

/// F(n): n plus every node joined to n by a non-Next edge in either direction.
std::vector<NodeId> factual_neighbors(const ManualGraph& graph, NodeId n);

/// Clue text of a node: its surface and the surfaces of its outgoing AGT, PAT,
/// ActionArg and EntityArg targets, ordered by span start and joined by single
/// spaces.
std::string recompose(const ManualGraph& graph, NodeId n);

/// Ordering used wherever results must not depend on node ids: (span, kind,
/// surface, id).
bool canonical_less(const Node& a, const Node& b);

}  // namespace care

template <>
struct std::hash<care::NodeId> {
    std::size_t operator()(const care::NodeId& id) const noexcept {
        return std::hash<std::uint32_t>{}(id.value);
    }
};
