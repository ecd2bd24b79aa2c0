#pragma once

// Shared fixtures for the test suites.

#include <cstdint>
#include <string>
#include <vector>

#include "rankcast/manifest.hpp"
#include "rankcast/types.hpp"

namespace testfix {

// The bundled 14-size reference ladder (see configs/ladder-14.json).
inline std::vector<rankcast::ModelConfig> demo_ladder() {
    auto cfg = [](const char* label, std::int64_t params, std::int64_t tokens,
                  std::int64_t steps, std::int64_t batch, std::int64_t hidden,
                  std::int64_t heads, std::int64_t layers, double lr) {
        rankcast::ModelConfig c;
        c.size_label = label;
        c.non_embedding_params = params;
        c.tokens_trained = tokens;
        c.train_steps = steps;
        c.batch_size = batch;
        c.hidden_dim = hidden;
        c.n_heads = heads;
        c.n_layers = layers;
        c.learning_rate = lr;
        return c;
    };
    return {
        cfg("4M", 3700000, 400000000, 5725, 32, 64, 8, 8, 1.4e-2),
        cfg("6M", 6000000, 600000000, 9182, 32, 96, 8, 8, 1.2e-2),
        cfg("8M", 8500000, 900000000, 13039, 32, 128, 8, 8, 1.1e-2),
        cfg("10M", 9900000, 1000000000, 15117, 32, 144, 8, 8, 1.0e-2),
        cfg("14M", 14400000, 1400000000, 21953, 32, 192, 8, 8, 9.2e-3),
        cfg("16M", 16000000, 1600000000, 24432, 32, 208, 8, 8, 8.9e-3),
        cfg("20M", 19100000, 1900000000, 14584, 64, 192, 8, 16, 8.4e-3),
        cfg("60M", 57100000, 5700000000, 29042, 96, 384, 12, 16, 5.8e-3),
        cfg("90M", 97900000, 9800000000, 29901, 160, 528, 12, 16, 4.9e-3),
        cfg("150M", 151900000, 15000000000, 38157, 192, 768, 12, 12, 4.2e-3),
        cfg("300M", 320000000, 30000000000, 45787, 320, 1024, 16, 16, 3.3e-3),
        cfg("530M", 530100000, 53000000000, 57786, 448, 1344, 16, 16, 2.8e-3),
        cfg("750M", 681300000, 75000000000, 63589, 576, 1536, 16, 16, 2.5e-3),
        cfg("1B", 1176800000, 100000000000, 69369, 704, 2048, 16, 16, 2.1e-3),
    };
}

inline rankcast::SuiteManifest demo_manifest(std::vector<std::string> recipes = {"alpha",
                                                                                 "bravo"},
                                             std::vector<std::string> seeds = {"default",
                                                                               "rerun-2",
                                                                               "rerun-3"}) {
    rankcast::SuiteManifest m;
    m.ladder = demo_ladder();
    m.recipes = std::move(recipes);
    m.seeds = std::move(seeds);
    m.target = {"1B", {"taskA"}, "accuracy_per_char"};
    m.early_stop_fraction = 0.25;
    return m;
}

// Small geometric ladder for synthetic-suite tests.
inline rankcast::SuiteManifest synth_manifest(int n_sizes, std::vector<std::string> recipes,
                                              std::vector<std::string> seeds,
                                              const std::string& metric = "acc") {
    rankcast::SuiteManifest m;
    std::int64_t params = 10000000; // 1e7
    for (int i = 0; i < n_sizes; ++i) {
        rankcast::ModelConfig c;
        c.size_label = "s" + std::to_string(i);
        c.non_embedding_params = params;
        c.tokens_trained = params * 100;
        c.train_steps = 1000 * (i + 1);
        c.batch_size = 32;
        c.hidden_dim = 64;
        c.n_heads = 8;
        c.n_layers = 8;
        c.learning_rate = 1e-2;
        m.ladder.push_back(c);
        params *= 3;
    }
    m.recipes = std::move(recipes);
    m.seeds = std::move(seeds);
    m.target = {m.ladder.back().size_label, {"synthetic"}, metric};
    m.early_stop_fraction = 0.25;
    return m;
}

} // namespace testfix
