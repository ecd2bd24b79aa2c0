#pragma once

// Core data model of an experiment grid: a ladder of model configurations
// trained on competing data recipes with seed reruns, evaluated at
// checkpoints. All types are immutable value types once constructed and
// safe to share read-only across threads.

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace rankcast {

// One rung of the model ladder.
struct ModelConfig {
    std::string size_label;
    std::int64_t non_embedding_params = 0;
    std::int64_t tokens_trained = 0;
    std::int64_t train_steps = 0;
    std::int64_t batch_size = 0;   // sequences per batch
    std::int64_t hidden_dim = 0;
    std::int64_t n_heads = 0;
    std::int64_t n_layers = 0;
    double learning_rate = 0.0;
};

struct TargetSpec {
    std::string size_label;
    std::vector<std::string> tasks;
    std::string metric;
};

// The experimental grid: which models get trained on which recipes with
// which seeds, and what the prediction target is. Non-default seeds may
// legitimately stop early at early_stop_fraction of their steps.
struct SuiteManifest {
    std::vector<ModelConfig> ladder; // ascending non_embedding_params
    std::vector<std::string> recipes;
    std::vector<std::string> seeds;  // first entry is the default seed
    TargetSpec target;
    double early_stop_fraction = 1.0;
    double token_parameter_ratio = 0.0; // 0 = not declared

    const ModelConfig* find_size(const std::string& label) const {
        for (const auto& cfg : ladder) {
            if (cfg.size_label == label) return &cfg;
        }
        return nullptr;
    }
    const std::string& default_seed() const { return seeds.front(); }
    const ModelConfig& target_config() const { return *find_size(target.size_label); }
};

// Identifies one evaluated checkpoint of one training run.
struct CheckpointKey {
    std::string recipe;
    std::string size_label;
    std::string seed;
    std::int64_t step = 0;
    std::int64_t tokens_seen = 0;

    friend bool operator==(const CheckpointKey&, const CheckpointKey&) = default;
    friend auto operator<=>(const CheckpointKey& a, const CheckpointKey& b) {
        return std::tie(a.recipe, a.size_label, a.seed, a.step, a.tokens_seen) <=>
               std::tie(b.recipe, b.size_label, b.seed, b.step, b.tokens_seen);
    }
};

// One answer choice of a multiple-choice item: summed log-likelihood of the
// continuation in nats, with its token and character lengths.
struct ChoiceScore {
    double logprob_sum = 0.0; // <= 0
    std::int64_t n_tokens = 1;
    std::int64_t n_chars = 1;
    bool is_correct = false;

    friend bool operator==(const ChoiceScore&, const ChoiceScore&) = default;
};

// One benchmark item scored at one checkpoint. Exactly one choice is
// flagged correct.
struct ItemScoreRecord {
    CheckpointKey key;
    std::string task;
    std::string item;
    std::vector<ChoiceScore> choices;

    friend bool operator==(const ItemScoreRecord&, const ItemScoreRecord&) = default;
};

// One aggregated (checkpoint, task, metric) value; the universal currency
// between modules.
struct MetricPoint {
    CheckpointKey key;
    std::string task;
    std::string metric;
    double value = 0.0;

    friend bool operator==(const MetricPoint&, const MetricPoint&) = default;
    friend auto operator<=>(const MetricPoint& a, const MetricPoint& b) {
        return std::tie(a.key, a.task, a.metric, a.value) <=>
               std::tie(b.key, b.task, b.metric, b.value);
    }
};

} // namespace rankcast
