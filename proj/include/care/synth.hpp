#pragma once

// Seeded generator of small synthetic manual annotations (English, ASCII),
// used as the training corpus for tests and the CLI pipeline.

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace care::synth {

/// One annotation document; ids are "synth-<index>".
nlohmann::json generate_manual(std::size_t index, std::uint64_t seed);

/// `count` documents from one seed.
std::vector<nlohmann::json> generate_corpus(std::size_t count, std::uint64_t seed);

}  // namespace care::synth
