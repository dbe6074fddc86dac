#include "care/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "care/error.hpp"
#include "care/kernels.hpp"
#include "care/utf8.hpp"

namespace care::metrics {

namespace {

bool is_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' || c == 0x3000;
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
    return out;
}

}  // namespace

Tokens tokenize(std::string_view text) {
    Tokens out;
    std::u32string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(utf8::encode(cur));
        cur.clear();
    };
    for (char32_t c : utf8::decode(text)) {
        if (is_space(c)) {
            flush();
        } else if (utf8::is_cjk(c)) {
            flush();
            out.push_back(utf8::encode(std::u32string(1, c)));
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return out;
}

double bleu(const Tokens& candidate, const Tokens& reference, std::size_t max_n, bool smoothing) {
    if (max_n == 0) throw Error(ErrorCode::InvalidArgument, "BLEU order must be at least 1");
    if (candidate.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        std::size_t clipped = 0, total = 0;
        for (const auto& [g, c] : cand) {
            total += c;
            if (auto it = ref.find(g); it != ref.end()) clipped += std::min(c, it->second);
        }
        double p;
        if (smoothing && n > 1)
            p = (static_cast<double>(clipped) + 1.0) / (static_cast<double>(total) + 1.0);
        else if (clipped == 0)
            return 0.0;
        else
            p = static_cast<double>(clipped) / static_cast<double>(total);
        log_sum += std::log(p) / static_cast<double>(max_n);
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::optional<double> rouge_l(const Tokens& candidate, const Tokens& reference, double beta) {
    if (!(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta must be positive");
    if (reference.empty()) return std::nullopt;
    const std::size_t lcs = lcs_length(candidate, reference);
    if (lcs == 0) return 0.0;
    const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
    const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
    const double b2 = beta * beta;
    return (1.0 + b2) * r * p / (r + b2 * p);
}

std::optional<double> icc(const std::vector<std::vector<double>>& groups, IccK convention) {
    if (groups.size() < 2) throw Error(ErrorCode::InvalidArgument, "ICC needs at least two groups");
    const std::size_t m = groups.front().size();
    if (m < 2) throw Error(ErrorCode::InvalidArgument, "ICC needs at least two values per group");
    for (const auto& g : groups)
        if (g.size() != m) throw Error(ErrorCode::InvalidArgument, "ICC groups must have equal length");

    const double n_groups = static_cast<double>(groups.size());
    const double per = static_cast<double>(m);
    double grand = 0.0;
    std::vector<double> means;
    for (const auto& g : groups) {
        double s = 0.0;
        for (double x : g) s += x;
        means.push_back(s / per);
        grand += s;
    }
    grand /= n_groups * per;

    double ss_between = 0.0, ss_within = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        ss_between += per * (means[i] - grand) * (means[i] - grand);
        for (double x : groups[i]) ss_within += (x - means[i]) * (x - means[i]);
    }
    const double ms_b = ss_between / (n_groups - 1.0);
    const double ms_w = ss_within / (n_groups * (per - 1.0));
    const double k = convention == IccK::Groups ? n_groups : per;
    const double denom = ms_b + (k - 1.0) * ms_w;
    if (denom == 0.0) return std::nullopt;
    return (ms_b - ms_w) / denom;
}

double embed_sim(const Tokens& candidate, const Tokens& reference, const TextEncoder& encoder) {
    if (candidate.empty() || reference.empty()) return 0.0;
    std::vector<Vector> c, r;
    for (const auto& t : candidate) c.push_back(encoder.encode(t));
    for (const auto& t : reference) r.push_back(encoder.encode(t));
    auto greedy = [](const std::vector<Vector>& from, const std::vector<Vector>& to) {
        double s = 0.0;
        for (const auto& a : from) {
            double best = -1.0;
            for (const auto& b : to) best = std::max(best, kernels::dot(a, b));
            s += best;
        }
        return s / static_cast<double>(from.size());
    };
    const double p = greedy(c, r);
    const double rec = greedy(r, c);
    if (p + rec <= 0.0) return 0.0;
    return 2.0 * p * rec / (p + rec);
}

MetricReport evaluate_corpus(const std::vector<std::pair<std::string, std::string>>& pairs,
                             const TextEncoder* encoder, double beta) {
    if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "no pairs to evaluate");
    MetricReport rep;
    double rouge_sum = 0.0, sim_sum = 0.0;
    for (const auto& [cand_text, ref_text] : pairs) {
        const Tokens c = tokenize(cand_text);
        const Tokens r = tokenize(ref_text);
        if (c.empty()) ++rep.empty_candidates;
        for (std::size_t n = 1; n <= 4; ++n) rep.bleu[n - 1] += bleu(c, r, n);
        if (auto v = rouge_l(c, r, beta)) {
            rouge_sum += *v;
            ++rep.rouge_pairs;
        }
        if (encoder) sim_sum += embed_sim(c, r, *encoder);
        ++rep.pairs;
    }
    const double n = static_cast<double>(rep.pairs);
    for (double& b : rep.bleu) b /= n;
    rep.bleu_avg = (rep.bleu[0] + rep.bleu[1] + rep.bleu[2] + rep.bleu[3]) / 4.0;
    if (rep.rouge_pairs) rep.rouge_l = rouge_sum / static_cast<double>(rep.rouge_pairs);
    if (encoder) rep.embed_sim = sim_sum / n;
    return rep;
}

nlohmann::ordered_json report_to_json(const MetricReport& r) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    j["schema"] = "care-eval/v1";
    j["pairs"] = r.pairs;
    j["bleu_1"] = r.bleu[0];
    j["bleu_2"] = r.bleu[1];
    j["bleu_3"] = r.bleu[2];
    j["bleu_4"] = r.bleu[3];
    j["bleu_avg"] = r.bleu_avg;
    j["rouge_l"] = r.rouge_l ? nlohmann::ordered_json(*r.rouge_l) : nlohmann::ordered_json(nullptr);
    if (r.embed_sim) j["embed_sim"] = *r.embed_sim;
    j["empty_candidates"] = r.empty_candidates;
    return j;
}

}  // namespace care::metrics
