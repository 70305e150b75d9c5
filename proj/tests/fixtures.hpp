#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "balmarket/dataset_io.hpp"
#include "balmarket/scenario.hpp"

namespace fixtures {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(BALMARKET_DATA_DIR) / name; }

inline balmarket::DatasetFiles bundled_files() {
    return {data("network.json"),
            {data("feeder-1.json"), data("feeder-2.json"), data("feeder-3.json")},
            data("bids.json"),
            data("config.json")};
}

inline const balmarket::ValidatedSystem& bundled() {
    static const balmarket::ValidatedSystem system = balmarket::load_dataset(bundled_files());
    return system;
}

inline const balmarket::WindScenario& bundled_scenario() {
    static const balmarket::WindScenario s = balmarket::load_scenario(data("scenario.json"), bundled().network);
    return s;
}

inline std::vector<std::string> cli_inputs() {
    return {"--network", data("network.json").string(), "--feeders", data("feeder-1.json").string(),
            data("feeder-2.json").string(), data("feeder-3.json").string(), "--bids", data("bids.json").string(),
            "--scenario", data("scenario.json").string(), "--config", data("config.json").string()};
}

// Fresh temporary directory per call.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("balmarket_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    // multiple of `grain` in [lo, hi]
    double lattice(double lo, double hi, double grain) {
        return grain * integer(static_cast<int>(std::ceil(lo / grain)), static_cast<int>(std::floor(hi / grain)));
    }
    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(integer(0, static_cast<int>(v.size()) - 1))];
    }
};

// Balanced injections on `n` buses, MW.
inline std::vector<double> balanced_injections(Gen& g, std::size_t n, double scale) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) sum += p[i] = g.uniform(-scale, scale);
    p[n - 1] = -sum;
    return p;
}

}  // namespace fixtures
