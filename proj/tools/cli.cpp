#include "cli.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <pthread.h>
#include <random>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "care/alignment.hpp"
#include "care/engine.hpp"
#include "care/error.hpp"
#include "care/graph_json.hpp"
#include "care/inference.hpp"
#include "care/ingest.hpp"
#include "care/metrics.hpp"
#include "care/model.hpp"
#include "care/selftrain.hpp"
#include "care/service.hpp"

namespace care::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDefaultInitSeed = 1;

std::shared_ptr<const TextEncoder> default_encoder() { return std::make_shared<HashNGramEncoder>(); }

ModelParams params_or_default(const std::string& path, const TextEncoder& enc) {
    if (path.empty()) return ModelParams::initialize(ScorerGeometry{}, enc.fingerprint(), kDefaultInitSeed);
    ModelParams p = load_params(path);
    if (p.encoder_fingerprint != enc.fingerprint())
        throw Error(ErrorCode::EncoderMismatch, path + " was trained under " + p.encoder_fingerprint);
    return p;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    f << content;
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedDocument, path + ": " + e.what());
    }
}

// Files as given; directories contribute their *.json files in name order.
std::vector<ManualGraph> collect_graphs(const std::vector<std::string>& paths) {
    std::vector<ManualGraph> out;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) out.push_back(load_graph(f.string()));
        } else {
            out.push_back(load_graph(p));
        }
    }
    if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no graphs found");
    return out;
}

// JSONL of {"id", "text"}; returns id -> text in file order.
std::vector<std::pair<std::string, std::string>> read_texts(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            out.emplace_back(j.value("id", std::to_string(out.size())), j.at("text").get<std::string>());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedDocument, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

struct Options {
    // ingest
    std::string in, out, dump_embeddings;
    // gen-data / train
    std::vector<std::string> graphs;
    std::string samples, config, init;
    std::uint64_t seed = 1;
    std::optional<double> lr, align_weight;
    std::optional<std::size_t> epochs, negatives, batch;
    bool paper_lr = false, print_config = false;
    // align / infer
    std::string graph, question, params, candidates = "all";
    std::optional<double> delta;
    std::optional<std::size_t> beam, max_depth;
    bool rolling_head = false;
    // eval
    std::string pred, gold, icc_file, k_convention = "groups";
    double beta = 8.0;
    bool embed_sim = false;
    // serve
    std::string host = "127.0.0.1", data_dir, ui_dir, serve_config;
    int port = 8080;
};

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
    const ManualGraph g = parse_manual(load_annotation(o.in));
    write_file(o.out, serialize_graph(g));
    for (const auto& w : g.warnings()) err << "warning: " << w << "\n";
    if (!o.dump_embeddings.empty()) {
        const auto enc = default_encoder();
        write_file(o.dump_embeddings, embeddings_to_json(encode_nodes(g, *enc)).dump());
    }
    out << ordered_json{{"manual_id", g.manual_id()}, {"nodes", g.size()}, {"edges", g.edges().size()},
                        {"warnings", g.warnings()}, {"out", o.out}}
               .dump()
        << "\n";
    return kExitOk;
}

int cmd_gen_data(const Options& o, std::ostream& out, std::ostream& err) {
    std::mt19937_64 rng(o.seed);
    std::vector<TrainingSample> all;
    std::vector<std::string> warnings;
    for (const auto& g : collect_graphs(o.graphs)) {
        auto s = generate_samples(g, QuestionTemplates{}, rng, &warnings);
        all.insert(all.end(), s.begin(), s.end());
    }
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    write_samples_jsonl(all, o.out);
    std::size_t proc = 0;
    for (const auto& s : all) proc += s.kind == ChainKind::Procedural;
    out << ordered_json{{"samples", all.size()}, {"procedural", proc}, {"factual", all.size() - proc},
                        {"skipped", warnings.size()}, {"out", o.out}}
               .dump()
        << "\n";
    return kExitOk;
}

TrainConfig resolve_train_config(const Options& o) {
    TrainConfig c = o.config.empty() ? TrainConfig{} : TrainConfig::from_json(read_json_file(o.config));
    if (o.paper_lr) c.learning_rate = TrainConfig::kPaperLearningRate;
    if (o.lr) c.learning_rate = *o.lr;
    if (o.epochs) c.epochs = *o.epochs;
    if (o.negatives) c.negatives = *o.negatives;
    if (o.batch) c.batch_size = *o.batch;
    if (o.align_weight) c.align_weight = *o.align_weight;
    c.seed = o.seed;
    c.validate();
    return c;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    const TrainConfig cfg = resolve_train_config(o);
    const auto enc = default_encoder();
    if (o.print_config) {
        ModelParams defaults = params_or_default(o.init, *enc);
        const InferenceParams& inf = defaults.inference;
        out << ordered_json{{"train", cfg.to_json()},
                            {"inference", {{"delta", inf.delta}, {"beam", inf.beam}, {"max_depth", inf.max_depth}}},
                            {"paper_learning_rate", TrainConfig::kPaperLearningRate}}
                   .dump()
            << "\n";
        return kExitOk;
    }
    if (o.samples.empty() || o.graphs.empty() || o.out.empty())
        throw CLI::RequiredError("train needs --samples, --graphs and --out");

    const auto samples = read_samples_jsonl(o.samples);
    const Corpus corpus = build_corpus(collect_graphs(o.graphs), *enc);
    ModelParams init = o.init.empty() ? ModelParams::initialize(ScorerGeometry{}, enc->fingerprint(), cfg.seed)
                                      : params_or_default(o.init, *enc);
    const double baseline = static_cast<double>(1 + cfg.negatives) * std::log(2.0);
    err << "training on " << samples.size() << " samples, lr " << cfg.learning_rate << "\n";

    TrainResult result;
    int code = kExitOk;
    try {
        result = train(samples, corpus, *enc, std::move(init), cfg);
    } catch (const DivergenceDetected& e) {
        err << "error: " << e.what() << "; saving the last good parameters\n";
        result = e.last_good();
        code = kExitDomain;
    }
    save_params(result.params, o.out);
    ordered_json trace = ordered_json::array();
    for (const auto& t : result.trace) trace.push_back({{"link", t.link}, {"align", t.align}, {"total", t.total}});
    out << ordered_json{{"config", cfg.to_json()},
                        {"samples", samples.size()},
                        {"baseline_loss", baseline},
                        {"trace", trace},
                        {"out", o.out}}
               .dump()
        << "\n";
    return code;
}

int cmd_align(const Options& o, std::ostream& out, std::ostream&) {
    const auto enc = default_encoder();
    const ManualGraph g = load_graph(o.graph);
    const ModelParams p = params_or_default(o.params, *enc);
    const NodeEmbeddings emb = encode_nodes(g, *enc);
    const CandidateSet set = o.candidates == "action-entity" ? CandidateSet::ActionEntity : CandidateSet::All;
    out << alignment_to_json(align(o.question, g, emb, p.w, *enc, set), g).dump() << "\n";
    return kExitOk;
}

int cmd_infer(const Options& o, std::ostream& out, std::ostream&) {
    const auto enc = default_encoder();
    const ManualGraph g = load_graph(o.graph);
    const ModelParams p = params_or_default(o.params, *enc);
    InferenceParams opt = p.inference;
    if (o.delta) opt.delta = *o.delta;
    if (o.beam) opt.beam = *o.beam;
    if (o.max_depth) opt.max_depth = *o.max_depth;
    opt.rolling_head = opt.rolling_head || o.rolling_head;
    opt.validate();

    const NodeEmbeddings emb = encode_nodes(g, *enc);
    if (!o.dump_embeddings.empty()) write_file(o.dump_embeddings, embeddings_to_json(emb).dump());
    if (o.question.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::InvalidArgument, "question is empty");
    const AlignmentResult al = align(o.question, g, emb, p.w, *enc);
    ordered_json chains = ordered_json::array();
    for (const auto& c : infer_chains(g, emb, al.node, p, *enc, opt)) chains.push_back(chain_to_json(c, g));
    out << ordered_json{{"manual_id", g.manual_id()},
                        {"question", o.question},
                        {"alignment", alignment_to_json(al, g)},
                        {"chains", chains}}
               .dump()
        << "\n";
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
    const auto pred = read_texts(o.pred);
    const auto gold = read_texts(o.gold);
    std::map<std::string, std::string> by_id(pred.begin(), pred.end());
    std::vector<std::pair<std::string, std::string>> pairs;
    std::size_t missing = 0;
    for (const auto& [id, ref] : gold) {
        auto it = by_id.find(id);
        if (it == by_id.end()) ++missing;
        pairs.emplace_back(it == by_id.end() ? std::string() : it->second, ref);
    }
    if (missing) err << "warning: " << missing << " gold items have no prediction; scored as empty\n";
    const auto enc = default_encoder();
    ordered_json report = metrics::report_to_json(metrics::evaluate_corpus(pairs, o.embed_sim ? enc.get() : nullptr, o.beta));
    if (!o.icc_file.empty()) {
        const json doc = read_json_file(o.icc_file);
        const auto groups = doc.at("groups").get<std::vector<std::vector<double>>>();
        const auto conv = o.k_convention == "per-group" ? metrics::IccK::PerGroupSize : metrics::IccK::Groups;
        const auto v = metrics::icc(groups, conv);
        report["icc"] = v ? ordered_json(*v) : ordered_json(nullptr);
        report["icc_k_convention"] = o.k_convention;
    }
    if (!o.out.empty()) write_file(o.out, report.dump());
    out << report.dump() << "\n";
    return kExitOk;
}

int cmd_serve(Options o, std::ostream& out, std::ostream& err) {
    std::string params_path = o.params;
    if (!o.serve_config.empty()) {
        // {"params": path, "data_dir": path, "port": n, "host": s, "ui": dir}
        const json c = read_json_file(o.serve_config);
        if (params_path.empty()) params_path = c.value("params", std::string());
        if (o.data_dir.empty()) o.data_dir = c.value("data_dir", std::string());
        if (o.ui_dir.empty()) o.ui_dir = c.value("ui", std::string());
        o.host = c.value("host", o.host);
        if (c.contains("port")) o.port = c["port"].get<int>();
    }
    if (const char* p = std::getenv("CARE_PORT"); p && o.port == 8080) o.port = std::atoi(p);
    if (const char* d = std::getenv("CARE_DATA_DIR"); d && o.data_dir.empty()) o.data_dir = d;

    const auto enc = default_encoder();
    Engine engine(enc, params_or_default(params_path, *enc), o.data_dir);
    Service service(engine, o.ui_dir);
    const int port = service.bind(o.host, o.port);
    if (port < 0) throw Error(ErrorCode::Io, "cannot bind " + o.host + ":" + std::to_string(o.port));

    // Stop cleanly on SIGINT/SIGTERM: the signals are blocked here and picked
    // up by a waiter thread.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        service.stop();
    });

    out << ordered_json{{"port", port}, {"host", o.host}, {"fingerprint", enc->fingerprint()}}.dump() << std::endl;
    err << "listening on " << o.host << ":" << port << "\n";
    service.listen();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Explainable question answering over user manuals"};
    app.name(args.empty() ? "care" : args[0]);
    app.require_subcommand(1);
    Options o;

    auto* ingest = app.add_subcommand("ingest", "Compile an annotation (JSON or YAML) into a graph");
    ingest->add_option("--in", o.in, "Annotation file")->required();
    ingest->add_option("--out", o.out, "Graph JSON output")->required();
    ingest->add_option("--dump-embeddings", o.dump_embeddings, "Write node embeddings as JSON");

    auto* gen = app.add_subcommand("gen-data", "Generate masked-argument training samples");
    gen->add_option("--graphs", o.graphs, "Graph files or directories")->required();
    gen->add_option("--out", o.out, "Samples JSONL output")->required();
    gen->add_option("--seed", o.seed, "Random seed");

    auto* tr = app.add_subcommand("train", "Train model parameters");
    tr->add_option("--samples", o.samples, "Samples JSONL");
    tr->add_option("--graphs", o.graphs, "Graph files or directories the samples refer to");
    tr->add_option("--out", o.out, "Parameters JSON output");
    tr->add_option("--config", o.config, "Training config JSON");
    tr->add_option("--init", o.init, "Start from these parameters");
    tr->add_option("--seed", o.seed, "Random seed");
    auto* lr = tr->add_option("--lr", o.lr, "Learning rate");
    tr->add_flag("--paper-lr", o.paper_lr, "Use the learning rate 1e-5")->excludes(lr);
    tr->add_option("--epochs", o.epochs, "Epochs");
    tr->add_option("--negatives", o.negatives, "Negatives per sample");
    tr->add_option("--batch", o.batch, "Batch size");
    tr->add_option("--align-weight", o.align_weight, "Weight of the alignment term");
    tr->add_flag("--print-config", o.print_config, "Print the resolved configuration and exit");

    auto* al = app.add_subcommand("align", "Align a question to a node");
    al->add_option("--graph", o.graph, "Graph JSON")->required();
    al->add_option("--question", o.question, "Question text")->required();
    al->add_option("--params", o.params, "Parameters JSON");
    al->add_option("--candidates", o.candidates, "all | action-entity")
        ->check(CLI::IsMember({"all", "action-entity"}));

    auto* inf = app.add_subcommand("infer", "Answer a question with clue chains");
    inf->add_option("--graph", o.graph, "Graph JSON")->required();
    inf->add_option("--params", o.params, "Parameters JSON")->required();
    inf->add_option("--question", o.question, "Question text")->required();
    inf->add_option("--delta", o.delta, "Score threshold");
    inf->add_option("--beam", o.beam, "Beam width");
    inf->add_option("--max-depth", o.max_depth, "Maximum hops");
    inf->add_flag("--rolling-head", o.rolling_head, "Score hops from the previous node");
    inf->add_option("--dump-embeddings", o.dump_embeddings, "Write node embeddings as JSON");

    auto* ev = app.add_subcommand("eval", "Score predictions against references");
    ev->add_option("--pred", o.pred, "Predictions JSONL {id, text}")->required();
    ev->add_option("--gold", o.gold, "References JSONL {id, text}")->required();
    ev->add_option("--out", o.out, "Report JSON output");
    ev->add_option("--beta", o.beta, "ROUGE-L recall weight");
    ev->add_flag("--embed-sim", o.embed_sim, "Add the embedding similarity score");
    ev->add_option("--icc", o.icc_file, "Ratings JSON {groups: [[...]]}");
    ev->add_option("--k-convention", o.k_convention, "groups | per-group")
        ->check(CLI::IsMember({"groups", "per-group"}));

    auto* sv = app.add_subcommand("serve", "Run the HTTP service");
    sv->add_option("--port", o.port, "Port, 0 for any free one (env CARE_PORT)");
    sv->add_option("--host", o.host, "Bind address");
    sv->add_option("--data-dir", o.data_dir, "Graph storage (env CARE_DATA_DIR)");
    sv->add_option("--params", o.params, "Parameters JSON");
    sv->add_option("--config", o.serve_config, "Service config JSON");
    sv->add_option("--ui", o.ui_dir, "Static UI directory served under /ui");

    std::vector<char*> argv;
    std::vector<std::string> copy = args.empty() ? std::vector<std::string>{"care"} : args;
    for (auto& a : copy) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*ingest) return cmd_ingest(o, out, err);
        if (*gen) return cmd_gen_data(o, out, err);
        if (*tr) return cmd_train(o, out, err);
        if (*al) return cmd_align(o, out, err);
        if (*inf) return cmd_infer(o, out, err);
        if (*ev) return cmd_eval(o, out, err);
        if (*sv) return cmd_serve(o, out, err);
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}

}  // namespace care::cli
