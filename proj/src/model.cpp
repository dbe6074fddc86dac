#include "care/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "care/error.hpp"

namespace care {

using nlohmann::json;
using nlohmann::ordered_json;

void InferenceParams::validate() const {
    if (!(delta > 0.0 && delta < 1.0))
        throw Error(ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
    if (beam < 1) throw Error(ErrorCode::InvalidArgument, "beam must be at least 1");
    if (max_depth < 1) throw Error(ErrorCode::InvalidArgument, "max_depth must be at least 1");
}

ModelParams ModelParams::zeros(const ScorerGeometry& geometry, std::string encoder_fingerprint) {
    geometry.validate();
    ModelParams p;
    p.encoder_fingerprint = std::move(encoder_fingerprint);
    p.w = Matrix::identity(geometry.dimension());
    p.wr = Matrix(geometry.link_dimension(), geometry.dimension());
    p.scorer = ScorerParams::zeros(geometry);
    return p;
}

ModelParams ModelParams::initialize(const ScorerGeometry& geometry, std::string encoder_fingerprint,
                                    std::uint64_t seed) {
    ModelParams p = zeros(geometry, std::move(encoder_fingerprint));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (double& x : p.wr.flat()) x = unit(rng);
    const double ws_std = std::sqrt(2.0 / static_cast<double>(geometry.feature_dimension()));
    for (double& x : p.scorer.ws.flat()) x = ws_std * unit(rng);
    return p;
}

bool ModelParams::finite() const noexcept {
    auto ok = [](std::span<const double> xs) {
        for (double x : xs)
            if (!std::isfinite(x)) return false;
        return true;
    };
    return ok(w.flat()) && ok(wr.flat()) && ok(scorer.ws.flat()) && ok(scorer.bs);
}

void ModelParams::validate() const {
    scorer.validate();
    inference.validate();
    const std::size_t d = dimension();
    if (w.rows() != d || w.cols() != d)
        throw Error(ErrorCode::DimensionMismatch, "W must be " + std::to_string(d) + "x" + std::to_string(d));
    if (wr.rows() != scorer.geometry.link_dimension() || wr.cols() != d)
        throw Error(ErrorCode::DimensionMismatch, "Wr does not match the link dimension");
    if (!finite()) throw Error(ErrorCode::InvalidArgument, "parameters contain non-finite values");
}

namespace {

ordered_json matrix_json(const Matrix& m) {
    ordered_json j = ordered_json::object();
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.flat().begin(), m.flat().end());
    return j;
}

Matrix matrix_from(const json& j, const char* name) {
    try {
        const auto rows = j.at("rows").get<std::size_t>();
        const auto cols = j.at("cols").get<std::size_t>();
        const auto data = j.at("data").get<std::vector<double>>();
        if (data.size() != rows * cols)
            throw Error(ErrorCode::MalformedDocument, std::string(name) + ": data size mismatch");
        Matrix m(rows, cols);
        std::copy(data.begin(), data.end(), m.flat().begin());
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string(name) + ": " + e.what());
    }
}

}  // namespace

ordered_json params_to_json(const ModelParams& p) {
    const ScorerGeometry& g = p.scorer.geometry;
    ordered_json doc = ordered_json::object();
    doc["format"] = "care-params/v1";
    doc["encoder_fingerprint"] = p.encoder_fingerprint;
    doc["geometry"] = {{"reshape_h", g.reshape_h},
                       {"reshape_w", g.reshape_w},
                       {"filters", g.filters},
                       {"filter_h", g.filter_h},
                       {"filter_w", g.filter_w}};
    doc["inference"] = {{"delta", p.inference.delta},
                        {"beam", p.inference.beam},
                        {"max_depth", p.inference.max_depth},
                        {"rolling_head", p.inference.rolling_head}};
    doc["W"] = matrix_json(p.w);
    doc["Wr"] = matrix_json(p.wr);
    doc["Ws"] = matrix_json(p.scorer.ws);
    doc["bs"] = p.scorer.bs;
    return doc;
}

ModelParams params_from_json(const json& doc) {
    ModelParams p;
    try {
        if (doc.value("format", "") != "care-params/v1")
            throw Error(ErrorCode::MalformedDocument, "unknown parameter format");
        p.encoder_fingerprint = doc.at("encoder_fingerprint").get<std::string>();
        const json& g = doc.at("geometry");
        p.scorer.geometry = ScorerGeometry{g.at("reshape_h").get<std::size_t>(), g.at("reshape_w").get<std::size_t>(),
                                           g.at("filters").get<std::size_t>(), g.at("filter_h").get<std::size_t>(),
                                           g.at("filter_w").get<std::size_t>()};
        const json& inf = doc.at("inference");
        p.inference.delta = inf.at("delta").get<double>();
        p.inference.beam = inf.at("beam").get<std::size_t>();
        p.inference.max_depth = inf.at("max_depth").get<std::size_t>();
        p.inference.rolling_head = inf.value("rolling_head", false);
        p.w = matrix_from(doc.at("W"), "W");
        p.wr = matrix_from(doc.at("Wr"), "Wr");
        p.scorer.ws = matrix_from(doc.at("Ws"), "Ws");
        p.scorer.bs = doc.at("bs").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("params: ") + e.what());
    }
    p.validate();
    return p;
}

std::string serialize_params(const ModelParams& params) { return params_to_json(params).dump() + "\n"; }

ModelParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    json doc;
    try {
        doc = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedDocument, path + ": " + e.what());
    }
    return params_from_json(doc);
}

void save_params(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << serialize_params(params);
}

}  // namespace care
