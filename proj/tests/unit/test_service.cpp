#include <doctest.h>

#include <fstream>
#include <set>
#include <thread>

#include <httplib.h>

#include <atomic>

#include "care/engine.hpp"
#include "care/graph_json.hpp"
#include "care/service.hpp"
#include "testing.hpp"

using namespace care;
using namespace care::testing;
using nlohmann::json;

namespace {

std::shared_ptr<const TextEncoder> encoder() { return std::make_shared<HashNGramEncoder>(); }

ModelParams params_for(const TextEncoder& enc) {
    return ModelParams::initialize(ScorerGeometry{}, enc.fingerprint(), 1);
}

json fixture_doc() {
    std::ifstream f(fixture_path("insurance.json"));
    return json::parse(f);
}

// A service on an ephemeral port, listening on its own thread.
struct Running {
    Engine& engine;
    Service service;
    int port;
    std::thread thread;

    explicit Running(Engine& e) : engine(e), service(e), port(service.bind("127.0.0.1", 0)) {
        REQUIRE(port > 0);
        thread = std::thread([this] { service.listen(); });
        service.wait_until_ready();
    }
    ~Running() {
        service.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(10, 0);
        return c;
    }
};

httplib::Result post(httplib::Client& c, const std::string& path, const json& body) {
    return c.Post(path, body.dump(), "application/json");
}

}  // namespace

TEST_CASE("status mapping") {
    CHECK(http_status(ErrorCode::UnknownManual) == 404);
    CHECK(http_status(ErrorCode::DuplicateManual) == 409);
    CHECK(http_status(ErrorCode::InvalidArgument) == 400);
    CHECK(http_status(ErrorCode::SpanOutOfBounds) == 422);
    CHECK(http_status(ErrorCode::MalformedDocument) == 422);
    CHECK(http_status(ErrorCode::Io) == 500);
}

TEST_CASE("manual ids and overrides") {
    CHECK(valid_manual_id("insurance-v2.1_a"));
    CHECK_FALSE(valid_manual_id(""));
    CHECK_FALSE(valid_manual_id(".."));
    CHECK_FALSE(valid_manual_id("a/b"));
    CHECK_FALSE(valid_manual_id(std::string(129, 'a')));

    const InferenceParams base;
    const InferenceParams p = apply_overrides(json{{"delta", 0.9}, {"beam", 2}}, base);
    CHECK(p.delta == 0.9);
    CHECK(p.beam == 2);
    CHECK(p.max_depth == 3);
    CHECK_THROWS_AS(apply_overrides(json{{"delta", 1.5}}, base), Error);
    CHECK_THROWS_AS(apply_overrides(json{{"beam", 0}}, base), Error);
    CHECK_THROWS_AS(apply_overrides(json{{"beam", "4"}}, base), Error);
    CHECK_THROWS_AS(apply_overrides(json{{"width", 4}}, base), Error);
}

TEST_CASE("engine") {
    const auto enc = encoder();
    Engine engine(enc, params_for(*enc));
    CHECK(engine.add_manual(fixture_doc()) == "insurance");
    CHECK_THROWS_AS(engine.add_manual(fixture_doc()), Error);

    const auto body = engine.ask("insurance", "Why can't I sign the policy?");
    CHECK(body["question_clue"]["node"] == find_node(insurance_graph(), "sign").value);
    CHECK(engine.ask("insurance", "Why can't I sign the policy?") == body);
    CHECK_FALSE(body.contains("timing_ms"));
    CHECK(body["params"]["delta"] == 0.5);

    try {
        engine.ask("nope", "x");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownManual);
    }
    CHECK_THROWS_AS(engine.ask("insurance", "   "), Error);

    const json h = engine.health();
    CHECK(h["fingerprint"] == enc->fingerprint());
    CHECK(h["manuals"] == 1);

    // Parameters with another fingerprint are refused.
    CHECK_THROWS_AS(engine.reload_params(ModelParams::initialize(ScorerGeometry{}, "other", 1)), Error);
    engine.reload_params(params_for(*enc));
}

TEST_CASE("persisted manuals come back after a restart") {
    TempDir dir("engine");
    const auto enc = encoder();
    std::string canonical;
    {
        Engine engine(enc, params_for(*enc), dir.path());
        engine.add_manual(fixture_doc());
        canonical = engine.graph_json("insurance");
    }
    CHECK(std::filesystem::exists(dir.path() / "manuals" / "insurance.json"));
    Engine again(enc, params_for(*enc), dir.path());
    CHECK(again.graph_json("insurance") == canonical);
}

TEST_CASE("http endpoints") {
    const auto enc = encoder();
    Engine engine(enc, params_for(*enc));
    Running srv(engine);
    auto c = srv.client();

    SUBCASE("upload, graph, health") {
        auto r = post(c, "/manuals", fixture_doc());
        REQUIRE(r);
        CHECK(r->status == 201);
        CHECK(json::parse(r->body)["manual_id"] == "insurance");

        r = post(c, "/manuals", fixture_doc());
        CHECK(r->status == 409);
        CHECK(json::parse(r->body)["error"] == "DuplicateManual");

        r = c.Get("/manuals/insurance/graph");
        CHECK(r->status == 200);
        CHECK(r->body == engine.graph_json("insurance"));
        CHECK(deserialize_graph(r->body).size() == insurance_graph().size());

        CHECK(c.Get("/manuals/nope/graph")->status == 404);

        r = c.Get("/healthz");
        CHECK(r->status == 200);
        const json h = json::parse(r->body);
        CHECK(h["status"] == "ok");
        CHECK(h["fingerprint"] == enc->fingerprint());
    }

    SUBCASE("bad uploads are 422 with a location") {
        json doc = fixture_doc();
        doc["entities"][0]["span"] = json::array({0, 5});  // text there is not the surface
        auto r = post(c, "/manuals", doc);
        CHECK(r->status == 422);
        CHECK(json::parse(r->body)["error"] == "SpanMismatch");

        r = c.Post("/manuals", "{\"manual_id\": ", "application/json");
        CHECK(r->status == 422);
        CHECK(json::parse(r->body)["message"].get<std::string>().find("byte") != std::string::npos);

        doc = fixture_doc();
        doc["manual_id"] = "../escape";
        CHECK(post(c, "/manuals", doc)->status == 422);
    }

    SUBCASE("ask") {
        engine.add_manual(fixture_doc());
        auto r = post(c, "/manuals/insurance/ask", json{{"question", "Why can't I sign the policy?"}});
        REQUIRE(r->status == 200);
        const json body = json::parse(r->body);
        CHECK(body.contains("timing_ms"));
        CHECK(body["question_clue"]["node"] == find_node(insurance_graph(), "sign").value);
        const std::size_t len = insurance_graph().text_length();
        double prev = 2.0;
        for (const auto& ch : body["chains"]) {
            const double s = ch["response_clue"]["score"];
            CHECK(s <= prev);
            prev = s;
            for (const auto& h : ch["highlights"]) {
                CHECK(h["start"].get<std::size_t>() < h["end"].get<std::size_t>());
                CHECK(h["end"].get<std::size_t>() <= len);
                const std::set<std::string> tags = {"question", "transitional", "response"};
                CHECK(tags.count(h["tag"].get<std::string>()) == 1);
            }
        }

        // identical requests, identical bodies apart from timing
        json again = json::parse(post(c, "/manuals/insurance/ask", json{{"question", "Why can't I sign the policy?"}})->body);
        json first = body;
        first.erase("timing_ms");
        again.erase("timing_ms");
        CHECK(first == again);

        r = post(c, "/manuals/insurance/ask", json{{"question", "x"}, {"overrides", {{"delta", 0.9}, {"beam", 2}}}});
        CHECK(r->status == 200);
        CHECK(json::parse(r->body)["params"]["delta"] == 0.9);

        CHECK(post(c, "/manuals/insurance/ask", json{{"question", ""}})->status == 400);
        CHECK(post(c, "/manuals/insurance/ask", json{{"q", "x"}})->status == 400);
        CHECK(post(c, "/manuals/insurance/ask", json{{"question", "x"}, {"overrides", {{"delta", 2}}}})->status == 400);
        CHECK(c.Post("/manuals/insurance/ask", "nope", "application/json")->status == 400);
        CHECK(post(c, "/manuals/nope/ask", json{{"question", "x"}})->status == 404);
        CHECK(c.Post("/manuals/nope/ask", "nope", "application/json")->status == 404);
    }

    SUBCASE("concurrent asks while params reload") {
        engine.add_manual(fixture_doc());
        std::atomic<int> ok{0}, bad{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < 4; ++t)
            pool.emplace_back([&] {
                auto cl = srv.client();
                for (int i = 0; i < 20; ++i) {
                    auto r = post(cl, "/manuals/insurance/ask", json{{"question", "How do I sign?"}});
                    (r && r->status == 200 ? ok : bad)++;
                }
            });
        for (int i = 0; i < 10; ++i) engine.reload_params(ModelParams::initialize(ScorerGeometry{}, enc->fingerprint(), i));
        for (auto& th : pool) th.join();
        CHECK(ok == 80);
        CHECK(bad == 0);
    }
}
