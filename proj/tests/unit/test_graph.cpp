#include <doctest.h>

#include <random>

#include "care/graph.hpp"
#include "care/graph_json.hpp"
#include "testing.hpp"

using namespace care;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("edge kinds are checked against node kinds") {
    ManualGraph g("m", "open the form now later");
    const NodeId a = g.add_node(NodeKind::Action, "open", {0, 4});
    const NodeId e = g.add_node(NodeKind::Entity, "the form", {5, 13});
    const NodeId t = g.add_node(NodeKind::Argument, "now", {14, 17}, ArgumentRole::time());
    const NodeId l = g.add_node(NodeKind::Argument, "later", {18, 23}, ArgumentRole::time());

    g.add_edge(a, e, RelationKind::PAT);
    g.add_edge(a, t, RelationKind::ActionArg);
    g.add_edge(t, l, RelationKind::ArgArg);
    CHECK(code_of([&] { g.add_edge(e, a, RelationKind::PAT); }) == ErrorCode::KindConstraintViolated);
    CHECK(code_of([&] { g.add_edge(a, e, RelationKind::Next); }) == ErrorCode::KindConstraintViolated);
    CHECK(code_of([&] { g.add_edge(e, e, RelationKind::SUB); }) == ErrorCode::KindConstraintViolated);
    // PATA only leaves State arguments.
    CHECK(code_of([&] { g.add_edge(t, e, RelationKind::PATA); }) == ErrorCode::KindConstraintViolated);
    CHECK(code_of([&] { g.add_edge(a, e, RelationKind::SelfLoop); }) == ErrorCode::KindConstraintViolated);
    CHECK(code_of([&] { g.add_edge(a, e, RelationKind::PAT); }) == ErrorCode::DuplicateEdge);
    // AGT and PAT between the same pair are different edges.
    g.add_edge(a, e, RelationKind::AGT);
    CHECK(g.edges().size() == 4);
}

TEST_CASE("span and role validation") {
    ManualGraph g("m", "Sign the policy");
    CHECK(code_of([&] { g.add_node(NodeKind::Action, "Sign", {0, 99}); }) == ErrorCode::SpanOutOfBounds);
    CHECK(code_of([&] { g.add_node(NodeKind::Action, "Sign", {2, 2}); }) == ErrorCode::SpanOutOfBounds);
    CHECK(code_of([&] { g.add_node(NodeKind::Action, "sign", {0, 4}); }) == ErrorCode::SpanMismatch);
    CHECK(code_of([&] { g.add_node(NodeKind::Argument, "Sign", {0, 4}); }) == ErrorCode::RoleMismatch);
    CHECK(code_of([&] { g.add_node(NodeKind::Entity, "Sign", {0, 4}, ArgumentRole::time()); }) ==
          ErrorCode::RoleMismatch);
}

TEST_CASE("spans count code points, not bytes") {
    ManualGraph g("zh", "签署保单。用户");
    const NodeId a = g.add_node(NodeKind::Action, "签署", {0, 2});
    const NodeId e = g.add_node(NodeKind::Entity, "保单", {2, 4});
    const NodeId u = g.add_node(NodeKind::Entity, "用户", {5, 7});
    g.add_edge(a, e, RelationKind::PAT);
    g.add_edge(a, u, RelationKind::AGT);
    CHECK(g.text_length() == 7);
    CHECK(g.slice({5, 7}) == "用户");
    g.freeze();
    CHECK(recompose(g, a) == "签署 保单 用户");
}

TEST_CASE("Next edges form simple chains") {
    ManualGraph g("m", "a b c d");
    const NodeId a = g.add_node(NodeKind::Action, "a", {0, 1});
    const NodeId b = g.add_node(NodeKind::Action, "b", {2, 3});
    const NodeId c = g.add_node(NodeKind::Action, "c", {4, 5});
    const NodeId d = g.add_node(NodeKind::Action, "d", {6, 7});
    g.add_edge(a, b, RelationKind::Next);
    g.add_edge(b, c, RelationKind::Next);
    CHECK(code_of([&] { g.add_edge(c, a, RelationKind::Next); }) == ErrorCode::NextCycle);
    CHECK(code_of([&] { g.add_edge(a, d, RelationKind::Next); }) == ErrorCode::NextBranch);
    CHECK(code_of([&] { g.add_edge(d, b, RelationKind::Next); }) == ErrorCode::NextBranch);
    g.add_edge(c, d, RelationKind::Next);
    g.freeze();
    CHECK(g.next_of(a) == b);
    CHECK(g.previous_of(a) == std::nullopt);
    CHECK(g.previous_of(d) == c);
}

TEST_CASE("SUB cycles are rejected") {
    ManualGraph g("m", "x y z");
    const NodeId x = g.add_node(NodeKind::Entity, "x", {0, 1});
    const NodeId y = g.add_node(NodeKind::Entity, "y", {2, 3});
    const NodeId z = g.add_node(NodeKind::Entity, "z", {4, 5});
    g.add_edge(x, y, RelationKind::SUB);
    g.add_edge(y, z, RelationKind::SUB);
    CHECK(code_of([&] { g.add_edge(z, x, RelationKind::SUB); }) == ErrorCode::SubCycle);
}

TEST_CASE("frozen graphs refuse mutation and expose adjacency") {
    ManualGraph g = testing::insurance_graph();
    CHECK(g.frozen());
    CHECK(code_of([&] { g.add_node(NodeKind::Action, "sign", {163, 167}); }) == ErrorCode::GraphFrozen);

    const NodeId sign = testing::find_node(g, "sign");
    const NodeId see = testing::find_node(g, "see");
    const NodeId policy = testing::find_node(g, "the policy");
    CHECK(g.adjacent_to(sign, see));
    CHECK(g.adjacent_to(see, sign));
    CHECK_FALSE(g.adjacent_to(sign, testing::find_node(g, "Agree to")));

    // Every edge shows up once from each end.
    std::size_t total = 0;
    for (const Node& n : g.nodes()) total += g.adjacent(n.id).size();
    CHECK(total == 2 * g.edges().size());

    const auto p = procedural_neighbors(g, sign);
    CHECK(p == std::vector<NodeId>{see, sign});
    const auto f = factual_neighbors(g, sign);
    CHECK(std::find(f.begin(), f.end(), policy) != f.end());
    CHECK(std::find(f.begin(), f.end(), sign) != f.end());
    CHECK(std::find(f.begin(), f.end(), see) == f.end());
}

TEST_CASE("recompose joins the surfaces of the clue in text order") {
    const ManualGraph g = testing::insurance_graph();
    CHECK(recompose(g, testing::find_node(g, "sign")) == "Finally, sign the policy");
    CHECK(recompose(g, testing::find_node(g, "see")) == "You see the electronic policy on the interface");
    CHECK(recompose(g, testing::find_node(g, "real name authentication users")) ==
          "real name authentication users can participate in");
    // Argument nodes have no outgoing clue edges of their own kinds.
    CHECK(recompose(g, testing::find_node(g, "Finally,")) == "Finally,");
}

TEST_CASE("disconnected graphs record one warning per component") {
    ManualGraph g("m", "a b");
    g.add_node(NodeKind::Action, "a", {0, 1});
    g.add_node(NodeKind::Action, "b", {2, 3});
    g.freeze();
    CHECK(g.warnings().size() == 2);
    CHECK(testing::insurance_graph().warnings().empty());
}

TEST_CASE("canonical JSON round trip") {
    const ManualGraph g = testing::insurance_graph();
    const std::string s = serialize_graph(g);
    const ManualGraph back = deserialize_graph(s);
    CHECK(serialize_graph(back) == s);
    CHECK(back.size() == g.size());
    CHECK(back.edges() == g.edges());

    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
        const ManualGraph r = testing::random_graph(1 + rng() % 12, rng);
        CHECK(serialize_graph(deserialize_graph(serialize_graph(r))) == serialize_graph(r));
    }
}

TEST_CASE("deserialization validates what it reads") {
    const std::string good = serialize_graph(testing::insurance_graph());
    auto doc = nlohmann::json::parse(good);
    doc["edges"].push_back({{"src", 12}, {"dst", 7}, {"kind", "Next"}});  // sign -> Agree to closes a cycle
    CHECK_THROWS_AS(graph_from_json(doc), Error);

    auto bad_span = nlohmann::json::parse(good);
    bad_span["nodes"][0]["span"] = {0, 5000};
    CHECK(code_of([&] { graph_from_json(bad_span); }) == ErrorCode::SpanOutOfBounds);

    CHECK(code_of([&] { deserialize_graph("{not json"); }) == ErrorCode::MalformedDocument);
}
