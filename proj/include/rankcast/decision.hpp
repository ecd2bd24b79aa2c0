#pragma once

// Gold target rankings, single- and multi-scale predictions, and pairwise
// decision scoring. A decision is correct when a prediction orders a pair of
// recipes the same way the gold target-scale ranking does.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rankcast/budget.hpp"
#include "rankcast/common.hpp"
#include "rankcast/scaling.hpp"
#include "rankcast/types.hpp"

namespace rankcast {

// ---------------------------------------------------------------------------
// Point lookup
// ---------------------------------------------------------------------------

// Indexes metric points for exact-checkpoint lookups and final-step queries.
class PointIndex {
public:
    explicit PointIndex(const std::vector<MetricPoint>& points) {
        for (const auto& p : points) {
            values_[{p.key.recipe, p.key.size_label, p.key.seed, p.key.step, p.task,
                     p.metric}] = p.value;
            auto run = std::make_tuple(p.key.recipe, p.key.size_label, p.key.seed);
            auto& ms = max_step_[run];
            ms = std::max(ms, p.key.step);
            tokens_[{p.key.recipe, p.key.size_label, p.key.seed, p.key.step}] =
                p.key.tokens_seen;
        }
    }

    std::optional<double> value(const std::string& recipe, const std::string& size,
                                const std::string& seed, std::int64_t step,
                                const std::string& task, const std::string& metric) const {
        auto it = values_.find({recipe, size, seed, step, task, metric});
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    // Highest step seen for a run, across tasks and metrics.
    std::optional<std::int64_t> final_step(const std::string& recipe, const std::string& size,
                                           const std::string& seed) const {
        auto it = max_step_.find({recipe, size, seed});
        if (it == max_step_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::int64_t> tokens_seen(const std::string& recipe, const std::string& size,
                                            const std::string& seed, std::int64_t step) const {
        auto it = tokens_.find({recipe, size, seed, step});
        if (it == tokens_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::map<std::tuple<std::string, std::string, std::string, std::int64_t, std::string,
                        std::string>,
             double>
        values_;
    std::map<std::tuple<std::string, std::string, std::string>, std::int64_t> max_step_;
    std::map<std::tuple<std::string, std::string, std::string, std::int64_t>, std::int64_t>
        tokens_;
};

// ---------------------------------------------------------------------------
// Rankings and predictions
// ---------------------------------------------------------------------------

struct GoldRanking {
    std::string metric;
    std::string target_size;
    std::vector<std::pair<std::string, double>> values; // sorted by recipe id
};

// Everything that identifies how a prediction was made; seed attempts of the
// same method differ only in the seed field.
struct MethodDescriptor {
    std::string method;  // "single_scale" | "multi_scale"
    std::string scale;   // size label, or subset descriptor like "prefix:5"
    std::string step;    // checkpoint step, "-" for multi-scale
    std::string seed;
    std::string metric;  // series the prediction reads
    std::string variant; // "-" for single-scale

    friend bool operator==(const MethodDescriptor&, const MethodDescriptor&) = default;
};

struct Prediction {
    MethodDescriptor method;
    std::vector<std::pair<std::string, double>> yhat; // sorted by recipe id
    BudgetReport budget;
};

enum class PairResult { correct, incorrect, excluded };

struct PairOutcome {
    std::string recipe_a; // recipe_a < recipe_b lexicographically
    std::string recipe_b;
    int gold_sign = 0;
    int pred_sign = 0;
    PairResult result = PairResult::excluded;
};

struct DecisionReport {
    MethodDescriptor method;
    BudgetReport budget;
    double decision_accuracy = 0.0; // mean over attempts
    double da_std = 0.0;            // sample std over attempts; 0 when undefined
    bool std_defined = false;
    int n_attempts = 1;
    int n_pairs = 0;    // all recipe pairs R(R-1)/2
    int n_excluded = 0; // gold ties, surfaced rather than silently dropped
    std::vector<PairOutcome> pairs; // single-attempt reports only
};

struct RecipeError {
    std::string recipe;
    double gold = 0.0;
    double predicted = 0.0;
    double abs_error_points = 0.0; // |predicted - gold| * 100
    double rel_error_pct = 0.0;    // |predicted - gold| / |gold| * 100
    bool rel_defined = true;
};

struct PredictionErrorReport {
    MethodDescriptor method;
    std::vector<RecipeError> per_recipe;
    double mean_abs_points = 0.0;
    double mean_rel_pct = 0.0; // over recipes with defined relative error
    int n_rel_undefined = 0;
};

namespace detail {

inline int sign_of(double x) {
    if (x > 0.0) return 1;
    if (x < 0.0) return -1;
    return 0;
}

inline void require_same_recipes(const std::vector<std::pair<std::string, double>>& pred,
                                 const std::vector<std::pair<std::string, double>>& gold,
                                 const char* what) {
    std::vector<std::string> only_pred, only_gold;
    std::size_t i = 0, j = 0;
    while (i < pred.size() || j < gold.size()) {
        if (i < pred.size() && (j == gold.size() || pred[i].first < gold[j].first)) {
            only_pred.push_back(pred[i++].first);
        } else if (j < gold.size() && (i == pred.size() || gold[j].first < pred[i].first)) {
            only_gold.push_back(gold[j++].first);
        } else {
            ++i;
            ++j;
        }
    }
    if (only_pred.empty() && only_gold.empty()) return;
    std::string msg = std::string(what) + ": recipe sets do not match;";
    if (!only_pred.empty()) {
        msg += " only in prediction:";
        for (const auto& r : only_pred) msg += " " + r;
        msg += ";";
    }
    if (!only_gold.empty()) {
        msg += " only in gold:";
        for (const auto& r : only_gold) msg += " " + r;
    }
    throw validation_error(msg);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Gold construction
// ---------------------------------------------------------------------------

// Per recipe: macro-average the target metric over tasks at the final
// checkpoint of the target size, then average over seed reruns.
inline GoldRanking gold_targets(const PointIndex& index, const SuiteManifest& manifest,
                                const std::string& metric,
                                const std::vector<std::string>& tasks) {
    GoldRanking gold;
    gold.metric = metric;
    gold.target_size = manifest.target.size_label;
    std::vector<std::string> missing;
    std::vector<std::string> recipes = manifest.recipes;
    std::sort(recipes.begin(), recipes.end());
    for (const auto& recipe : recipes) {
        double seed_sum = 0.0;
        for (const auto& seed : manifest.seeds) {
            auto fs = index.final_step(recipe, gold.target_size, seed);
            if (!fs) {
                missing.push_back(recipe + "/" + seed + "/<no checkpoints>");
                continue;
            }
            double task_sum = 0.0;
            for (const auto& task : tasks) {
                auto v = index.value(recipe, gold.target_size, seed, *fs, task, metric);
                if (!v) {
                    missing.push_back(recipe + "/" + seed + "/" + task);
                    continue;
                }
                task_sum += *v;
            }
            seed_sum += task_sum / static_cast<double>(tasks.size());
        }
        gold.values.emplace_back(recipe, seed_sum / static_cast<double>(manifest.seeds.size()));
    }
    if (!missing.empty()) {
        std::string msg = "gold_targets: missing target cells:";
        for (const auto& m : missing) msg += " " + m;
        throw validation_error(msg);
    }
    return gold;
}

inline GoldRanking gold_targets(const std::vector<MetricPoint>& points,
                                const SuiteManifest& manifest, const std::string& metric,
                                const std::vector<std::string>& tasks) {
    return gold_targets(PointIndex(points), manifest, metric, tasks);
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

// The winner at one small scale is assumed to extrapolate to the target.
inline Prediction rank_single_scale(const PointIndex& index, const SuiteManifest& manifest,
                                    const std::string& size, std::int64_t step,
                                    const std::string& seed, const std::string& metric,
                                    const std::vector<std::string>& tasks) {
    if (!manifest.find_size(size))
        throw validation_error("rank_single_scale: unknown size label '" + size + "'");
    Prediction pred;
    pred.method = {"single_scale", size, std::to_string(step), seed, metric, "-"};
    std::vector<std::string> missing;
    std::vector<std::string> recipes = manifest.recipes;
    std::sort(recipes.begin(), recipes.end());
    std::optional<std::int64_t> tokens;
    for (const auto& recipe : recipes) {
        double task_sum = 0.0;
        for (const auto& task : tasks) {
            auto v = index.value(recipe, size, seed, step, task, metric);
            if (!v) {
                missing.push_back(recipe + "/" + task);
                continue;
            }
            task_sum += *v;
        }
        pred.yhat.emplace_back(recipe, task_sum / static_cast<double>(tasks.size()));
        auto t = index.tokens_seen(recipe, size, seed, step);
        if (t) {
            if (tokens && *tokens != *t)
                throw validation_error("rank_single_scale: inconsistent tokens_seen at step " +
                                       std::to_string(step));
            tokens = t;
        }
    }
    if (!missing.empty()) {
        std::string msg = "rank_single_scale: no point at (" + size + ", step " +
                          std::to_string(step) + ", " + seed + ", " + metric + ") for:";
        for (const auto& m : missing) msg += " " + m;
        throw validation_error(msg);
    }
    PredictionCost cost;
    cost.single_scale = true;
    cost.size_label = size;
    cost.tokens_seen = tokens.value_or(0);
    pred.budget = budget_of_prediction(cost, manifest);
    return pred;
}

// Extrapolates one fitted chain per recipe to the target scale. All chains
// must come from the same variant and size subset.
inline Prediction predict_multi_scale(const std::vector<std::pair<std::string, FitChain>>& fits,
                                      const SuiteManifest& manifest,
                                      const SizeSubset& subset, const std::string& metric,
                                      const std::string& seed, bool best_effort = false) {
    if (fits.empty()) throw validation_error("predict_multi_scale: no fits");
    Variant variant = fits.front().second.variant;
    for (const auto& [recipe, chain] : fits) {
        if (chain.variant != variant)
            throw validation_error("predict_multi_scale: variant mismatch for recipe '" +
                                   recipe + "'");
    }
    const ModelConfig& target_cfg = manifest.target_config();
    TargetScale target;
    target.n_params = static_cast<double>(target_cfg.non_embedding_params);
    target.n_tokens = static_cast<double>(target_cfg.tokens_trained);
    target.compute = flops(target.n_params, target.n_tokens);

    Prediction pred;
    pred.method = {"multi_scale", subset.descriptor, "-", seed, metric, to_string(variant)};
    for (const auto& [recipe, chain] : fits)
        pred.yhat.emplace_back(recipe, predict_at_target(chain, target, best_effort));
    std::sort(pred.yhat.begin(), pred.yhat.end());

    PredictionCost cost;
    cost.single_scale = false;
    cost.subset_sizes = subset.labels;
    pred.budget = budget_of_prediction(cost, manifest);
    return pred;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

// Fraction of recipe pairs whose predicted winner matches the gold winner.
// Gold ties are excluded (and surfaced); a predicted tie counts as incorrect.
inline DecisionReport decision_accuracy(const Prediction& pred, const GoldRanking& gold) {
    auto p = pred.yhat;
    auto g = gold.values;
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    detail::require_same_recipes(p, g, "decision_accuracy");
    DecisionReport report;
    report.method = pred.method;
    report.budget = pred.budget;
    int correct = 0, scored = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = i + 1; j < g.size(); ++j) {
            PairOutcome pair;
            pair.recipe_a = g[i].first;
            pair.recipe_b = g[j].first;
            pair.gold_sign = detail::sign_of(g[i].second - g[j].second);
            pair.pred_sign = detail::sign_of(p[i].second - p[j].second);
            if (pair.gold_sign == 0) {
                pair.result = PairResult::excluded;
                ++report.n_excluded;
            } else if (pair.pred_sign == pair.gold_sign) {
                pair.result = PairResult::correct;
                ++correct;
                ++scored;
            } else {
                pair.result = PairResult::incorrect;
                ++scored;
            }
            ++report.n_pairs;
            report.pairs.push_back(std::move(pair));
        }
    }
    report.decision_accuracy =
        scored > 0 ? static_cast<double>(correct) / static_cast<double>(scored) : 0.0;
    report.da_std = 0.0;
    report.std_defined = false;
    report.n_attempts = 1;
    return report;
}

// Mean and sample standard deviation of decision accuracy over prediction
// attempts (one per experiment seed).
inline DecisionReport seed_attempts(const std::vector<Prediction>& attempts,
                                    const GoldRanking& gold) {
    if (attempts.empty()) throw validation_error("seed_attempts: no attempts");
    std::vector<DecisionReport> reports;
    for (const auto& a : attempts) reports.push_back(decision_accuracy(a, gold));
    DecisionReport out = reports.front();
    out.pairs.clear();
    out.n_attempts = static_cast<int>(reports.size());
    double mean = 0.0;
    for (const auto& r : reports) mean += r.decision_accuracy;
    mean /= static_cast<double>(reports.size());
    out.decision_accuracy = mean;
    if (reports.size() >= 2) {
        double ss = 0.0;
        for (const auto& r : reports) {
            double d = r.decision_accuracy - mean;
            ss += d * d;
        }
        out.da_std = std::sqrt(ss / static_cast<double>(reports.size() - 1));
        out.std_defined = true;
    } else {
        out.da_std = 0.0;
        out.std_defined = false;
    }
    if (reports.size() > 1) {
        std::string seeds = attempts.front().method.seed;
        for (std::size_t i = 1; i < attempts.size(); ++i)
            seeds += "+" + attempts[i].method.seed;
        out.method.seed = seeds;
    }
    return out;
}

inline PredictionErrorReport prediction_error(const Prediction& pred, const GoldRanking& gold) {
    auto p = pred.yhat;
    auto g = gold.values;
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    detail::require_same_recipes(p, g, "prediction_error");
    PredictionErrorReport report;
    report.method = pred.method;
    double abs_sum = 0.0, rel_sum = 0.0;
    int rel_n = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        RecipeError e;
        e.recipe = g[i].first;
        e.gold = g[i].second;
        e.predicted = p[i].second;
        double diff = std::fabs(e.predicted - e.gold);
        e.abs_error_points = diff * 100.0;
        if (e.gold != 0.0) {
            e.rel_error_pct = diff / std::fabs(e.gold) * 100.0;
            rel_sum += e.rel_error_pct;
            ++rel_n;
        } else {
            e.rel_defined = false;
            ++report.n_rel_undefined;
        }
        abs_sum += e.abs_error_points;
        report.per_recipe.push_back(std::move(e));
    }
    report.mean_abs_points = abs_sum / static_cast<double>(g.size());
    report.mean_rel_pct = rel_n > 0 ? rel_sum / static_cast<double>(rel_n) : 0.0;
    return report;
}

} // namespace rankcast
