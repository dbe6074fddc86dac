// Acceptance runner: one PASS/FAIL line per criterion. With --criterion N
// only that one runs. Exit status is 0 only when every criterion run passed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "care/alignment.hpp"
#include "care/engine.hpp"
#include "care/metrics.hpp"
#include "care/selftrain.hpp"
#include "care/service.hpp"
#include "care/synth.hpp"
#include "cli.hpp"
#include "gradcheck.hpp"
#include "testing.hpp"

#ifndef CARE_BIN
#error "CARE_BIN must name the care executable"
#endif

using namespace care;
using namespace care::testing;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(double x, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << x;
    return s.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const HashNGramEncoder& encoder() {
    static const HashNGramEncoder enc;
    return enc;
}

constexpr std::uint64_t kCorpusSeed = 7;
constexpr std::uint64_t kSampleSeed = 1;
constexpr std::uint64_t kSplitSeed = 2;
constexpr std::uint64_t kInitSeed = 1;

struct Trained {
    Corpus corpus;
    std::vector<TrainingSample> train, held;
    TrainResult result;
    double baseline = 0.0;
};

// The training run shared by criteria 5, 6 and 10: the seeded 20-manual
// synthetic corpus (plus the insurance manual when asked), 80/20 split, 5
// epochs at lr 1e-3 from the default initialisation.
const Trained& trained(bool with_insurance) {
    static std::map<bool, Trained> cache;
    if (auto it = cache.find(with_insurance); it != cache.end()) return it->second;
    std::vector<ManualGraph> graphs;
    for (const auto& doc : synth::generate_corpus(20, kCorpusSeed)) graphs.push_back(parse_manual(doc));
    if (with_insurance) graphs.push_back(insurance_graph());
    Trained t;
    t.corpus = build_corpus(std::move(graphs), encoder());
    std::mt19937_64 rng(kSampleSeed);
    std::vector<TrainingSample> all;
    for (const auto& [id, ctx] : t.corpus) {
        auto s = generate_samples(ctx.graph, QuestionTemplates{}, rng);
        all.insert(all.end(), s.begin(), s.end());
    }
    std::tie(t.train, t.held) = split_samples(std::move(all), 0.2, kSplitSeed);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 5;
    const ModelParams init = ModelParams::initialize(ScorerGeometry{}, encoder().fingerprint(), kInitSeed);
    t.result = train(t.train, t.corpus, encoder(), init, cfg);
    t.baseline = (1.0 + static_cast<double>(cfg.negatives)) * std::log(2.0);
    return cache.emplace(with_insurance, std::move(t)).first->second;
}

Verdict oracle_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    InferenceParams opt;
    opt.beam = 12;
    opt.max_depth = 3;
    int agree = 0;
    for (int i = 0; i < 200; ++i) {
        const ManualGraph g = random_graph(1 + rng() % 12, rng);
        const NodeEmbeddings emb = encode_nodes(g, encoder());
        const ModelParams p = ModelParams::initialize(ScorerGeometry{}, encoder().fingerprint(), rng());
        opt.delta = std::uniform_real_distribution<double>(0.3, 0.95)(rng);
        const NodeId nq = g.nodes()[rng() % g.size()].id;
        const auto chains = infer_chains(g, emb, nq, p, encoder(), opt);
        const auto oracle = exhaustive_chains(g, emb, nq, p, encoder(), opt);
        agree += !chains.empty() && chains.front().response().node == *oracle.top;
    }
    const double secs = seconds_since(t0);
    return {agree == 200 && secs < 30.0, std::to_string(agree) + "/200 top-1 match, " + fmt(secs, 3) + " s"};
}

Verdict scorer_oracle() {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 1.0);
    const ScorerGeometry g = micro_geometry();
    const RelationKind kinds[] = {RelationKind::Next, RelationKind::PAT, RelationKind::SelfLoop, RelationKind::PATA};
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        ScorerParams p = ScorerParams::zeros(g);
        for (double& x : p.ws.flat()) x = nd(rng);
        for (double& x : p.bs) x = 0.3 * nd(rng);
        Vector h(8), r(g.link_dimension()), t(8);
        for (double& x : h) x = nd(rng);
        for (double& x : r) x = nd(rng);
        for (double& x : t) x = nd(rng);
        const RelationKind k = kinds[i % 4];
        worst = std::max(worst, std::abs(score_triple(h, r, t, k, p) - direct_score(h, r, t, k, p)));
    }
    return {worst <= 1e-10, "max |diff| " + fmt(worst, 3) + " over 1000 inputs"};
}

Verdict gradient_check_50() {
    const GradCheckReport rep = gradient_check(50, 77);
    return {rep.points == 50 && rep.max_rel_error < 1e-4,
            "max rel error " + fmt(rep.max_rel_error, 3) + " at " + std::to_string(rep.points) + " points (" +
                std::to_string(rep.coordinates) + " coords each, " + std::to_string(rep.rejected) +
                " near-kink points skipped)"};
}

Verdict fusion_invariants() {
    std::vector<ManualGraph> graphs{insurance_graph()};
    for (const auto& doc : synth::generate_corpus(20, kCorpusSeed)) graphs.push_back(parse_manual(doc));
    std::size_t nodes = 0, violations = 0;
    for (const ManualGraph& g : graphs) {
        const NodeEmbeddings emb = encode_nodes(g, encoder());
        for (std::size_t i = 0; i < emb.size(); ++i) {
            ++nodes;
            const NodeId id = emb.ids[i];
            const FusionWeights w = emb.weights[i];
            bool ok = w.procedural + w.factual == 1.0;
            const bool has_p = procedural_neighbors(g, id).size() > 1;
            const bool has_f = factual_neighbors(g, id).size() > 1;
            if (has_p && !has_f) ok = ok && w.factual == 0.0;
            if (has_f && !has_p) ok = ok && w.procedural == 0.0;
            const auto row = emb.fused.row(i);
            for (std::size_t k = 0; k < emb.dimension(); ++k) {
                const double a = emb.procedural[i][k], b = emb.factual[i][k];
                if (!has_p && !has_f)
                    ok = ok && row[k] == emb.base[i][k];
                else
                    ok = ok && row[k] >= std::min(a, b) && row[k] <= std::max(a, b);
            }
            violations += !ok;
        }
    }
    return {violations == 0, std::to_string(nodes) + " nodes in " + std::to_string(graphs.size()) + " graphs, " +
                                 std::to_string(violations) + " violations"};
}

Verdict training_signal() {
    const Trained& t = trained(false);
    const double after = mean_link_loss(t.train, t.corpus, t.result.params, 5, 11);
    const double drop = 1.0 - after / t.baseline;
    const RetrievalReport r = retrieval_accuracy(t.held, t.corpus, t.result.params);
    const double ratio = r.accuracy / r.uniform_baseline;
    return {drop >= 0.30 && ratio >= 5.0,
            "loss " + fmt(t.baseline) + " -> " + fmt(after) + " (drop " + fmt(100 * drop, 3) + "%, gate 30%); " +
                "held-out top-1 " + fmt(r.accuracy, 3) + " vs uniform " + fmt(r.uniform_baseline, 3) + " = " +
                fmt(ratio, 3) + "x (gate 5x) on " + std::to_string(r.samples) + " samples"};
}

Verdict fixture_behaviour() {
    const Trained& t = trained(true);
    const GraphContext& ctx = t.corpus.at("insurance");
    const ManualGraph& g = ctx.graph;
    const ModelParams& p = t.result.params;
    const AlignmentResult a = align("Why can't I sign the policy?", g, ctx.embeddings, p.w, encoder());
    const NodeId sign = find_node(g, "sign"), see = find_node(g, "see"), agree = find_node(g, "Agree to");
    const std::set<NodeId> restriction = {find_node(g, "real name authentication users"),
                                          find_node(g, "can participate in")};
    const auto chains = infer_chains(g, ctx.embeddings, a.node, p, encoder());
    bool procedural = false, factual = false;
    std::string shown;
    for (const auto& c : chains) {
        std::string path = recompose(g, c.question_node);
        for (const Hop& h : c.hops) path += " -> " + g.node(h.node).surface + "(" + fmt(h.score, 3) + ")";
        shown += (shown.empty() ? "" : "; ") + std::string(to_string(c.kind)) + (c.fallback ? "[fallback]" : "") +
                 ": " + path;
        if (c.fallback) continue;
        if (c.kind == ChainKind::Procedural)
            for (std::size_t i = 0; i + 1 < c.hops.size(); ++i)
                procedural = procedural || (c.hops[i].node == see && c.hops[i + 1].node == agree);
        if (c.kind == ChainKind::Factual)
            for (const Hop& h : c.hops) factual = factual || restriction.count(h.node);
    }
    const bool aligned = a.node == sign;
    return {aligned && procedural && factual,
            std::string("aligned to '") + g.node(a.node).surface + "'" + (aligned ? "" : " (want 'sign')") +
                ", see->agree to " + (procedural ? "yes" : "no") + ", real-name restriction " +
                (factual ? "yes" : "no") + " | chains: " + (shown.empty() ? "none" : shown)};
}

Verdict metric_oracles() {
    using namespace care::metrics;
    const double b = bleu(tokenize("a b c d"), tokenize("a b c d e"), 4);
    const bool bleu_ok = std::abs(b - std::exp(-0.25)) <= 1e-12;
    const double rl = *rouge_l(tokenize("a c"), tokenize("a b c"), 8.0);
    const double rl_want = 65.0 * (2.0 / 3.0) / (2.0 / 3.0 + 64.0);
    const bool rouge_ok = std::abs(rl - rl_want) <= 1e-12;

    // Every ordered pair of sequences of length <= 8 over {x, y, z}: 9841^2
    // pairs. The oracle enumerates the subsequences of one side, longest
    // first, and looks each up in the other side's subsequence set.
    std::vector<Tokens> seqs;
    std::map<Tokens, std::uint32_t> index;
    static const char* sym[] = {"x", "y", "z"};
    for (std::size_t len = 0; len <= 8; ++len) {
        std::size_t count = 1;
        for (std::size_t i = 0; i < len; ++i) count *= 3;
        for (std::size_t code = 0; code < count; ++code) {
            Tokens t;
            for (std::size_t i = 0, c = code; i < len; ++i, c /= 3) t.push_back(sym[c % 3]);
            index.emplace(t, static_cast<std::uint32_t>(seqs.size()));
            seqs.push_back(std::move(t));
        }
    }
    const std::size_t n = seqs.size(), words = (n + 63) / 64;
    std::vector<std::vector<std::uint32_t>> subs(n);  // distinct subsequences, longest first
    std::vector<std::uint64_t> member(n * words, 0);
    for (std::size_t a = 0; a < n; ++a) {
        const Tokens& t = seqs[a];
        for (std::uint32_t mask = 0; mask < (1u << t.size()); ++mask) {
            Tokens sub;
            for (std::size_t i = 0; i < t.size(); ++i)
                if (mask >> i & 1u) sub.push_back(t[i]);
            subs[a].push_back(index.at(sub));
        }
        auto& v = subs[a];
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        std::sort(v.begin(), v.end(), [&](auto x, auto y) { return seqs[x].size() > seqs[y].size(); });
        for (auto id : v) member[a * words + id / 64] |= std::uint64_t{1} << (id % 64);
    }
    std::size_t pairs = 0, lcs_bad = 0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            std::size_t oracle = 0;
            for (auto id : subs[a])
                if (member[b * words + id / 64] >> (id % 64) & 1u) {
                    oracle = seqs[id].size();
                    break;
                }
            lcs_bad += lcs_length(seqs[a], seqs[b]) != oracle;
            ++pairs;
        }
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    double icc_worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        std::vector<std::vector<double>> groups(2 + rng() % 6);
        const std::size_t m = 2 + rng() % 6;
        for (auto& grp : groups) {
            const double mu = 2.0 * nd(rng);
            for (std::size_t k = 0; k < m; ++k) grp.push_back(mu + nd(rng));
        }
        const double base = *icc(groups);
        const double shift = 50.0 * nd(rng), scale = std::exp(2.0 * nd(rng));
        for (auto& grp : groups)
            for (double& x : grp) x = x * scale + shift;
        icc_worst = std::max(icc_worst, std::abs(*icc(groups) - base));
    }
    const bool icc_ok = icc_worst <= 1e-9;
    return {bleu_ok && rouge_ok && lcs_bad == 0 && icc_ok,
            "bleu err " + fmt(std::abs(b - std::exp(-0.25)), 3) + ", rouge-l err " + fmt(std::abs(rl - rl_want), 3) +
                ", lcs " + std::to_string(pairs - lcs_bad) + "/" + std::to_string(pairs) + " pairs, icc drift " +
                fmt(icc_worst, 3)};
}

json run_cli(const std::vector<std::string>& args, int& code) {
    std::vector<std::string> full{"care"};
    full.insert(full.end(), args.begin(), args.end());
    std::ostringstream out, err;
    code = cli::run(full, out, err);
    return code == 0 ? json::parse(out.str()) : json();
}

Verdict hyperparameters() {
    int c1 = 0, c2 = 0;
    const json def = run_cli({"train", "--print-config"}, c1);
    const json paper = run_cli({"train", "--print-config", "--paper-lr"}, c2);
    const InferenceParams ip;
    const ModelParams mp = ModelParams::initialize(ScorerGeometry{}, encoder().fingerprint(), 1);
    const bool ok = c1 == 0 && c2 == 0 && def["inference"]["delta"] == 0.5 && def["inference"]["beam"] == 4 &&
                    def["inference"]["max_depth"] == 3 && paper["train"]["learning_rate"] == 1e-5 &&
                    def["train"]["learning_rate"] == 1e-3 && ip.delta == 0.5 && ip.beam == 4 &&
                    ip.max_depth == 3 && mp.inference == ip && TrainConfig::kPaperLearningRate == 1e-5;
    return {ok, "inference " + def["inference"].dump() + ", default lr " + def["train"]["learning_rate"].dump() +
                    ", --paper-lr lr " + paper["train"]["learning_rate"].dump()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

Verdict determinism() {
    const std::string bin = CARE_BIN;
    const std::string fixture = fixture_path("insurance.json").string();
    auto pipeline = [&](const TempDir& d) {
        const std::string cmds[] = {
            bin + " ingest --in " + fixture + " --out " + (d / "graph.json"),
            bin + " gen-data --graphs " + (d / "graph.json") + " --seed 5 --out " + (d / "samples.jsonl"),
            bin + " train --samples " + (d / "samples.jsonl") + " --graphs " + (d / "graph.json") +
                " --seed 5 --epochs 5 --out " + (d / "params.json"),
            bin + " infer --graph " + (d / "graph.json") + " --params " + (d / "params.json") +
                " --question \"Why can't I sign the policy?\" > " + (d / "answer.json"),
        };
        for (const auto& c : cmds)
            if (std::system((c + (c.find(" > ") == std::string::npos ? " >/dev/null" : "") + " 2>/dev/null").c_str()) != 0)
                return false;
        return true;
    };
    TempDir a("accept-a"), b("accept-b");
    if (!pipeline(a) || !pipeline(b)) return {false, "pipeline command failed"};
    std::size_t same = 0, bytes = 0;
    const char* files[] = {"graph.json", "samples.jsonl", "params.json", "answer.json"};
    for (const char* f : files) {
        const std::string x = slurp(a.path() / f), y = slurp(b.path() / f);
        same += !x.empty() && x == y;
        bytes += x.size();
    }
    return {same == 4, std::to_string(same) + "/4 artifacts byte-identical (" + std::to_string(bytes) + " bytes)"};
}

Verdict service_contract() {
    const Trained& t = trained(true);
    auto enc = std::make_shared<HashNGramEncoder>();
    Engine engine(enc, t.result.params);
    Service service(engine);
    const int port = service.bind("127.0.0.1", 0);
    if (port <= 0) return {false, "could not bind"};
    std::thread th([&] { service.listen(); });
    service.wait_until_ready();
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);

    std::string problem;
    auto ask = [&](double delta, double* ms = nullptr) {
        const json body{{"question", "Why can't I sign the policy?"}, {"overrides", {{"delta", delta}}}};
        const auto t0 = Clock::now();
        auto r = c.Post("/manuals/insurance/ask", body.dump(), "application/json");
        if (ms) *ms = 1000.0 * seconds_since(t0);
        if (!r || r->status != 200) {
            problem = "ask failed";
            return json();
        }
        return json::parse(r->body);
    };

    auto up = c.Post("/manuals", slurp(fixture_path("insurance.json")), "application/json");
    const std::size_t len = insurance_graph().text_length();
    bool spans_ok = up && up->status == 201, sorted = true;
    const json lo = ask(0.5), hi = ask(0.9);
    std::size_t spans = 0;
    for (const json* doc : {&lo, &hi}) {
        double prev = 2.0;
        for (const auto& ch : (*doc)["chains"]) {
            const double s = ch["response_clue"]["score"];
            sorted = sorted && s <= prev;
            prev = s;
            for (const auto& h : ch["highlights"]) {
                const std::size_t a = h["start"], e = h["end"];
                spans_ok = spans_ok && a < e && e <= len;
                ++spans;
            }
        }
        for (const auto& sp : (*doc)["question_clue"]["spans"]) {
            const std::size_t a = sp["start"], e = sp["end"];
            spans_ok = spans_ok && a < e && e <= len;
        }
    }
    auto responses = [](const json& doc) {
        std::set<std::uint32_t> out;
        for (const auto& ch : doc["chains"])
            if (!ch["fallback"].get<bool>()) out.insert(ch["response_clue"]["node"].get<std::uint32_t>());
        return out;
    };
    const auto r_lo = responses(lo), r_hi = responses(hi);
    const bool subset = std::includes(r_lo.begin(), r_lo.end(), r_hi.begin(), r_hi.end());

    for (int i = 0; i < 20; ++i) ask(0.5);
    std::vector<double> lat;
    for (int i = 0; i < 200; ++i) {
        double ms = 0.0;
        ask(0.5, &ms);
        lat.push_back(ms);
    }
    std::sort(lat.begin(), lat.end());
    const double p95 = lat[static_cast<std::size_t>(0.95 * lat.size()) - 1];
    service.stop();
    th.join();

    // The trained model answers this question below both thresholds, so the
    // inclusion above is vacuous. Sweep every fixture node under scaled
    // random parameters where responses at 0.9 do occur. Strict inclusion can
    // fail there only when a higher threshold lets a path run past a node that
    // stopped it at 0.5; any other violation fails the criterion.
    const ManualGraph g = insurance_graph();
    const NodeEmbeddings emb = encode_nodes(g, *enc);
    std::size_t cases = 0, nonvacuous = 0, strict = 0, unshadowed = 0;
    InferenceParams at_lo, at_hi;
    at_hi.delta = 0.9;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        ModelParams p = ModelParams::initialize(ScorerGeometry{}, enc->fingerprint(), seed);
        for (double& x : p.scorer.ws.flat()) x *= 4.0;
        for (double& x : p.wr.flat()) x *= 30.0;
        for (const Node& n : g.nodes()) {
            std::set<NodeId> lo_set;
            for (const auto& ch : infer_chains(g, emb, n.id, p, *enc, at_lo))
                if (!ch.fallback) lo_set.insert(ch.response().node);
            bool any = false, inside = true;
            for (const auto& ch : infer_chains(g, emb, n.id, p, *enc, at_hi)) {
                if (ch.fallback) continue;
                any = true;
                if (lo_set.count(ch.response().node)) continue;
                inside = false;
                bool shadowed = false;
                for (std::size_t k = 0; k + 1 < ch.hops.size(); ++k) shadowed = shadowed || ch.hops[k].score >= 0.5;
                unshadowed += !shadowed;
            }
            ++cases;
            nonvacuous += any;
            strict += inside;
        }
    }

    return {problem.empty() && spans_ok && sorted && subset && unshadowed == 0 && p95 < 100.0,
            std::to_string(spans) + " spans in bounds: " + (spans_ok ? "yes" : "no") + ", sorted: " +
                (sorted ? "yes" : "no") + ", responses at 0.9 (" + std::to_string(r_hi.size()) + ") within 0.5 (" +
                std::to_string(r_lo.size()) + "): " + (subset ? "yes" : "no") + "; sweep " + std::to_string(cases) +
                " cases, " + std::to_string(nonvacuous) + " with responses at 0.9, strict inclusion " +
                std::to_string(strict) + ", unexplained by shadowing " + std::to_string(unshadowed) + "; p95 " +
                fmt(p95, 3) + " ms" +
                (problem.empty() ? "" : ", " + problem)};
}

struct Criterion {
    int number;
    const char* name;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all = {
        {1, "oracle equivalence", oracle_equivalence},
        {2, "scorer oracle", scorer_oracle},
        {3, "gradient check", gradient_check_50},
        {4, "fusion invariants", fusion_invariants},
        {5, "training signal", training_signal},
        {6, "fixture behaviour", fixture_behaviour},
        {7, "metric oracles", metric_oracles},
        {8, "hyperparameter defaults", hyperparameters},
        {9, "pipeline determinism", determinism},
        {10, "service contract", service_contract},
    };
    bool ok = true;
    for (const auto& c : all) {
        if (only && c.number != only) continue;
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        ok = ok && v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.name << "): " << v.detail
                  << std::endl;
    }
    return ok ? 0 : 1;
}
