#pragma once

// Theoretical training-cost accounting: FLOPs = 6ND from non-embedding
// parameter count N and tokens D, and prediction budgets expressed as a
// percentage of the target model's training cost.

#include <cstdint>
#include <string>
#include <vector>

#include "rankcast/common.hpp"
#include "rankcast/types.hpp"

namespace rankcast {

struct BudgetReport {
    double flops = 0.0;
    double target_flops = 0.0;
    double percent_of_target = 0.0;
};

inline double flops(double params, double tokens) {
    if (params < 0.0 || tokens < 0.0)
        throw validation_error("flops: params and tokens must be >= 0");
    return 6.0 * params * tokens;
}

inline double percent_of_target(double experiment_flops, double target_flops) {
    if (!(target_flops > 0.0))
        throw validation_error("percent_of_target: target budget must be > 0");
    return experiment_flops / target_flops * 100.0;
}

inline double target_training_flops(const SuiteManifest& manifest) {
    const ModelConfig& t = manifest.target_config();
    return flops(static_cast<double>(t.non_embedding_params),
                 static_cast<double>(t.tokens_trained));
}

// A prediction method's compute cost: one checkpoint of one size for
// single-scale ranking, or the full training cost of every size used for a
// multi-scale fit. Seed reruns are not charged; each attempt costs one run.
struct PredictionCost {
    bool single_scale = true;
    std::string size_label;               // single-scale
    std::int64_t tokens_seen = 0;         // single-scale: tokens at the checkpoint
    std::vector<std::string> subset_sizes; // multi-scale
};

inline BudgetReport budget_of_prediction(const PredictionCost& method,
                                         const SuiteManifest& manifest) {
    BudgetReport report;
    report.target_flops = target_training_flops(manifest);
    if (method.single_scale) {
        const ModelConfig* cfg = manifest.find_size(method.size_label);
        if (!cfg)
            throw validation_error("budget_of_prediction: unknown size label '" +
                                   method.size_label + "'");
        report.flops = flops(static_cast<double>(cfg->non_embedding_params),
                             static_cast<double>(method.tokens_seen));
    } else {
        for (const auto& label : method.subset_sizes) {
            const ModelConfig* cfg = manifest.find_size(label);
            if (!cfg)
                throw validation_error("budget_of_prediction: unknown size label '" + label +
                                       "'");
            report.flops += flops(static_cast<double>(cfg->non_embedding_params),
                                  static_cast<double>(cfg->tokens_trained));
        }
    }
    report.percent_of_target = percent_of_target(report.flops, report.target_flops);
    return report;
}

} // namespace rankcast
