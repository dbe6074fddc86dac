#include "care/synth.hpp"

#include <array>
#include <random>
#include <string>

namespace care::synth {

using nlohmann::json;

namespace {

constexpr std::array kTopics{"Refund request",    "Account recovery", "Order cancellation", "Invoice download",
                             "Coupon redemption", "Address change",   "Warranty claim",     "Membership renewal",
                             "Device binding",    "Password reset",   "Return shipping",    "Payment setup"};
constexpr std::array kVerbs{"open",   "select", "fill in", "upload", "submit", "confirm",  "check",
                            "review", "enter",  "click",   "save",   "attach", "download", "verify"};
constexpr std::array kObjects{"the order page",   "the request form",     "the receipt",
                              "the application",  "the payment code",     "the shipping label",
                              "the account settings", "the verification email", "the invoice",
                              "the service ticket",   "the product photo",      "the refund reason"};
constexpr std::array kAgents{"the buyer", "the seller", "the courier", "the agent"};
constexpr std::array kTimes{"within 24 hours",       "before the deadline", "after payment",
                            "within 7 days",         "during business hours", "after delivery"};
constexpr std::array kLocations{"in the mobile app", "at the service desk", "on the website", "in the help center"};
constexpr std::array kManners{"carefully", "with a valid ID", "by email", "in one step", "by phone"};
constexpr std::array kStates{"must be verified first", "cannot exceed 500 dollars", "expires after 30 days",
                             "is locked for new accounts", "requires a signature"};
constexpr std::array kQualifiers{"digital", "signed", "original", "temporary"};

// Builds the text while recording code point spans (all pieces are ASCII).
class Writer {
public:
    json piece(const std::string& s) {
        const std::size_t start = text_.size();
        text_ += s;
        return json::array({start, text_.size()});
    }
    void raw(const std::string& s) { text_ += s; }
    const std::string& text() const { return text_; }

private:
    std::string text_;
};

template <class Array>
std::string any(const Array& a, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, a.size() - 1);
    return a[d(rng)];
}

bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

}  // namespace

json generate_manual(std::size_t index, std::uint64_t seed) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + index);
    Writer w;
    const std::string topic = any(kTopics, rng);
    w.raw(topic + " guide. ");

    json procedures = json::array();
    json entities = json::array();
    std::vector<std::pair<std::string, json>> objects;  // patient mentions

    const std::size_t n_proc = coin(rng, 0.4) ? 2 : 1;
    for (std::size_t p = 0; p < n_proc; ++p) {
        json actions = json::array();
        const std::size_t n_act = std::uniform_int_distribution<std::size_t>(3, 4)(rng);
        for (std::size_t a = 0; a < n_act; ++a) {
            json act = json::object();
            json args = json::array();
            if (coin(rng, 0.35)) {
                const std::string t = any(kTimes, rng);
                std::string cap = t;
                cap[0] = static_cast<char>(cap[0] - 'a' + 'A');
                args.push_back({{"role", "Time"}, {"surface", cap}, {"span", w.piece(cap)}});
                w.raw(", ");
            } else if (a > 0) {
                w.raw("Then ");
            }
            if (coin(rng, 0.6)) {
                const std::string agent = coin(rng, 0.5) ? std::string("User") : any(kAgents, rng);
                act["agent"] = {{"surface", agent}, {"span", w.piece(agent)}};
                w.raw(" should ");
            }
            const std::string verb = any(kVerbs, rng);
            act["surface"] = verb;
            act["span"] = w.piece(verb);
            w.raw(" ");
            const std::string obj = any(kObjects, rng);
            json patient = {{"surface", obj}, {"span", w.piece(obj)}};
            act["patient"] = patient;
            objects.emplace_back(obj, patient["span"]);
            if (coin(rng, 0.5)) {
                const std::string l = any(kLocations, rng);
                w.raw(" ");
                args.push_back({{"role", "Location"}, {"surface", l}, {"span", w.piece(l)}});
            }
            if (coin(rng, 0.4)) {
                const std::string m = any(kManners, rng);
                w.raw(" ");
                args.push_back({{"role", "Manner"}, {"surface", m}, {"span", w.piece(m)}});
            }
            w.raw(". ");
            act["args"] = args;
            actions.push_back(act);
        }
        procedures.push_back(actions);
    }

    // Restrictions: a State argument on an object, affecting another entity.
    const std::size_t n_notes = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
    for (std::size_t i = 0; i < n_notes; ++i) {
        const auto& [obj, first_span] = objects[std::uniform_int_distribution<std::size_t>(0, objects.size() - 1)(rng)];
        w.raw("Notice: ");
        json holder;
        if (coin(rng, 0.5)) {
            // A qualified sub-entity of an object already mentioned.
            const std::string sub = "the " + any(kQualifiers, rng) + " " + obj.substr(4);
            holder = {{"surface", sub}, {"span", w.piece(sub)}};
            json parent = {{"surface", obj}, {"span", first_span}, {"sub_entities", json::array({holder})}};
            entities.push_back(parent);
        } else {
            holder = {{"surface", obj}, {"span", w.piece(obj)}};
            entities.push_back(holder);
        }
        w.raw(" ");
        const std::string state = any(kStates, rng);
        json arg = {{"role", "State"}, {"surface", state}, {"span", w.piece(state)}};
        w.raw(" for ");
        const std::string target = coin(rng, 0.5) ? std::string("User") : any(kAgents, rng);
        arg["pata_targets"] = json::array({{{"surface", target}, {"span", w.piece(target)}}});
        if (coin(rng, 0.3)) {
            w.raw(", which ");
            const std::string consequence = "may delay the process";
            arg["arg_args"] = json::array({{{"role", "consequence"}, {"surface", consequence},
                                            {"span", w.piece(consequence)}}});
        }
        w.raw(". ");
        // Attach the argument to the declared holder (the sub-entity when present).
        json& decl = entities.back();
        if (decl.contains("sub_entities"))
            decl["sub_entities"][0]["args"] = json::array({arg});
        else
            decl["args"] = json::array({arg});
    }

    std::string text = w.text();
    if (!text.empty() && text.back() == ' ') text.pop_back();
    return json{{"manual_id", "synth-" + std::to_string(index)},
                {"text", text},
                {"entities", entities},
                {"procedures", procedures}};
}

std::vector<json> generate_corpus(std::size_t count, std::uint64_t seed) {
    std::vector<json> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_manual(i, seed));
    return out;
}

}  // namespace care::synth
