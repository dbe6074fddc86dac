// care-synth: writes a seeded synthetic annotation corpus, one JSON file per
// manual, for the training pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "care/synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Write a synthetic manual corpus"};
    std::size_t count = 20;
    std::uint64_t seed = 7;
    std::string out_dir;
    app.add_option("--count", count, "Number of manuals");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--out", out_dir, "Output directory")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    std::filesystem::create_directories(out_dir);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& doc : care::synth::generate_corpus(count, seed)) {
        const auto path = std::filesystem::path(out_dir) / (doc["manual_id"].get<std::string>() + ".json");
        std::ofstream f(path);
        f << doc.dump(2) << "\n";
        if (!f) {
            std::cerr << "error: cannot write " << path << "\n";
            return 1;
        }
        files.push_back(path.string());
    }
    std::cout << nlohmann::json{{"manuals", count}, {"seed", seed}, {"files", files}}.dump() << "\n";
    return 0;
}
