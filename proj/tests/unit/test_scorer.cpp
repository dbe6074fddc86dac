#include <doctest.h>

#include <cmath>
#include <random>

#include "care/scorer.hpp"
#include "testing.hpp"

using namespace care;

namespace {

Vector normal(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    Vector v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

ScorerParams random_params(const ScorerGeometry& g, std::mt19937_64& rng) {
    ScorerParams p = ScorerParams::zeros(g);
    const auto w = normal(p.ws.size(), rng);
    std::copy(w.begin(), w.end(), p.ws.flat().begin());
    p.bs = normal(g.dimension(), rng, 0.3);
    return p;
}

}  // namespace

TEST_CASE("geometry bookkeeping") {
    const ScorerGeometry g;
    CHECK(g.dimension() == 128);
    CHECK(g.link_dimension() == 144);
    CHECK(g.feature_dimension() == 8 * 14 * 6);
    CHECK_THROWS_AS((ScorerGeometry{2, 2, 1, 3, 3}.validate()), Error);
    CHECK_THROWS_AS((ScorerGeometry{4, 2, 0, 2, 2}.validate()), Error);
    ScorerParams p = ScorerParams::zeros(g);
    p.bs.pop_back();
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("hand-computed micro case") {
    ScorerParams p = ScorerParams::zeros(testing::micro_geometry());
    REQUIRE(p.ws.rows() == 8);
    REQUIRE(p.ws.cols() == 3);
    // Row-major 4x2 grid [[1,0],[0,1],[1,1],[0,0]].
    const Vector head{1, 0, 0, 1, 1, 1, 0, 0};
    // Procedural filter [[1,0],[0,1]]; factual filter zero.
    const Vector link{1, 0, 0, 1, 0, 0, 0, 0};
    p.ws(0, 0) = 1;
    p.ws(1, 1) = 1;
    p.ws(1, 2) = -1;
    p.ws(2, 2) = -1;
    p.bs[2] = 0.5;
    const Vector tail{0.25, 1, -2, 0, 0, 0, 0, 0};
    // Features [2, 1, 1]; hidden ReLU([2, 0, -0.5, ...]) = [2, 0, 0, ...].
    CHECK(score_triple(head, link, tail, RelationKind::Next, p) == doctest::Approx(1 / (1 + std::exp(-0.5))));
    // Factual bank is zero, so the hidden layer is ReLU(b_s) = [0, 0, 0.5, ...].
    CHECK(score_triple(head, link, tail, RelationKind::PAT, p) == doctest::Approx(1 / (1 + std::exp(1.0))));
    CHECK(score_triple(head, link, tail, RelationKind::SelfLoop, p) ==
          score_triple(head, link, tail, RelationKind::ArgArg, p));
}

TEST_CASE("micro geometry matches the nested-loop oracle") {
    std::mt19937_64 rng(2024);
    const ScorerGeometry g = testing::micro_geometry();
    const RelationKind kinds[] = {RelationKind::Next, RelationKind::PAT, RelationKind::SelfLoop, RelationKind::SUB};
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ScorerParams p = random_params(g, rng);
        const Vector h = normal(8, rng), r = normal(8, rng), t = normal(8, rng);
        const RelationKind k = kinds[i % 4];
        worst = std::max(worst, std::abs(score_triple(h, r, t, k, p) - testing::direct_score(h, r, t, k, p)));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("default geometry matches the oracle too") {
    std::mt19937_64 rng(3);
    const ScorerGeometry g;
    for (int i = 0; i < 20; ++i) {
        ScorerParams p = random_params(g, rng);
        for (double& w : p.ws.flat()) w *= 0.05;
        const Vector h = normal(128, rng, 0.1), r = normal(144, rng), t = normal(128, rng, 0.1);
        const RelationKind k = i % 2 ? RelationKind::Next : RelationKind::AGT;
        CHECK(score_triple(h, r, t, k, p) == doctest::Approx(testing::direct_score(h, r, t, k, p)).epsilon(1e-12));
    }
}

TEST_CASE("closed-form cases") {
    std::mt19937_64 rng(8);
    const ScorerGeometry g = testing::micro_geometry();
    const Vector h = normal(8, rng), r = normal(8, rng), t = normal(8, rng);
    // Zero weights and bias: exactly one half.
    CHECK(score_triple(h, r, t, RelationKind::Next, ScorerParams::zeros(g)) == 0.5);
    // Zero head: the convolution vanishes and only ReLU(b_s) . t remains.
    ScorerParams p = random_params(g, rng);
    const Vector zero(8, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < 8; ++i) z += std::max(p.bs[i], 0.0) * t[i];
    CHECK(score_triple(zero, r, t, RelationKind::PAT, p) == doctest::Approx(sigmoid(z)).epsilon(1e-14));
}

TEST_CASE("query trace exposes the intermediate values") {
    std::mt19937_64 rng(4);
    const ScorerGeometry g = testing::micro_geometry();
    const ScorerParams p = random_params(g, rng);
    const Vector h = normal(8, rng), r = normal(8, rng);
    QueryTrace tr;
    const Vector q = query_vector(h, r, Bank::Factual, p, &tr);
    CHECK(tr.conv_pre.size() == 3);
    CHECK(tr.hidden_pre.size() == 8);
    for (std::size_t i = 0; i < 3; ++i) CHECK(tr.features[i] == std::max(tr.conv_pre[i], 0.0));
    for (std::size_t i = 0; i < 8; ++i) CHECK(q[i] == std::max(tr.hidden_pre[i], 0.0));
    CHECK(bank_slice(r, Bank::Factual, g).data() == r.data() + 4);
}

TEST_CASE("sigmoid and softplus stay finite at the extremes") {
    CHECK(sigmoid(0) == 0.5);
    CHECK(sigmoid(800) == 1.0);
    CHECK(sigmoid(-800) >= 0.0);
    CHECK(std::isfinite(softplus(800)));
    CHECK(softplus(800) == doctest::Approx(800));
    CHECK(softplus(-800) >= 0.0);
    CHECK(softplus(0) == doctest::Approx(std::log(2.0)));
    for (double z : {-30.0, -2.0, 0.3, 5.0, 40.0}) CHECK(softplus(z) - softplus(-z) == doctest::Approx(z));
}
