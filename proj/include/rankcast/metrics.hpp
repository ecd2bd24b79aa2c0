#pragma once

// Proxy metrics over multiple-choice likelihood records.
//
// Five base metrics (correct_prob, margin, norm_correct_prob, total_prob,
// accuracy), each computable from raw, per-token, or per-char normalized
// choice probabilities. A normalized probability is exp(logprob / length),
// the per-unit geometric-mean probability, which keeps every metric bounded
// the same way in all three modes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rankcast/common.hpp"
#include "rankcast/parallel.hpp"
#include "rankcast/types.hpp"

namespace rankcast {

enum class NormalizationMode { raw, per_token, per_char };
enum class BaseMetric { correct_prob, margin, norm_correct_prob, total_prob, accuracy };

struct MetricName {
    BaseMetric base = BaseMetric::correct_prob;
    NormalizationMode mode = NormalizationMode::raw;

    friend bool operator==(const MetricName&, const MetricName&) = default;
    friend auto operator<=>(const MetricName&, const MetricName&) = default;
};

inline const char* to_string(BaseMetric b) {
    switch (b) {
        case BaseMetric::correct_prob: return "correct_prob";
        case BaseMetric::margin: return "margin";
        case BaseMetric::norm_correct_prob: return "norm_correct_prob";
        case BaseMetric::total_prob: return "total_prob";
        case BaseMetric::accuracy: return "accuracy";
    }
    return "?";
}

inline std::string to_string(const MetricName& m) {
    std::string s = to_string(m.base);
    switch (m.mode) {
        case NormalizationMode::raw: break;
        case NormalizationMode::per_token: s += "_per_token"; break;
        case NormalizationMode::per_char: s += "_per_char"; break;
    }
    return s;
}

inline std::optional<MetricName> parse_metric_name(const std::string& name) {
    std::string rest = name;
    NormalizationMode mode = NormalizationMode::raw;
    auto strip_suffix = [&](const char* suffix) {
        std::string s(suffix);
        if (rest.size() > s.size() && rest.compare(rest.size() - s.size(), s.size(), s) == 0) {
            rest.resize(rest.size() - s.size());
            return true;
        }
        return false;
    };
    if (strip_suffix("_per_token")) mode = NormalizationMode::per_token;
    else if (strip_suffix("_per_char")) mode = NormalizationMode::per_char;
    for (BaseMetric b : {BaseMetric::correct_prob, BaseMetric::margin,
                         BaseMetric::norm_correct_prob, BaseMetric::total_prob,
                         BaseMetric::accuracy}) {
        if (rest == to_string(b)) return MetricName{b, mode};
    }
    return std::nullopt;
}

// All 15 metric-mode combinations in canonical order.
inline std::vector<MetricName> all_metric_names() {
    std::vector<MetricName> out;
    for (BaseMetric b : {BaseMetric::correct_prob, BaseMetric::margin,
                         BaseMetric::norm_correct_prob, BaseMetric::total_prob,
                         BaseMetric::accuracy}) {
        for (NormalizationMode m : {NormalizationMode::raw, NormalizationMode::per_token,
                                    NormalizationMode::per_char}) {
            out.push_back({b, m});
        }
    }
    return out;
}

// Probability of one choice under the given normalization mode.
inline double choice_prob(double logprob_sum, std::int64_t n_tokens, std::int64_t n_chars,
                          NormalizationMode mode) {
    if (n_tokens < 1 || n_chars < 1)
        throw validation_error("choice_prob: choice lengths must be >= 1");
    switch (mode) {
        case NormalizationMode::raw: return std::exp(logprob_sum);
        case NormalizationMode::per_token:
            return std::exp(logprob_sum / static_cast<double>(n_tokens));
        case NormalizationMode::per_char:
            return std::exp(logprob_sum / static_cast<double>(n_chars));
    }
    return 0.0;
}

inline double choice_prob(const ChoiceScore& c, NormalizationMode mode) {
    return choice_prob(c.logprob_sum, c.n_tokens, c.n_chars, mode);
}

namespace detail {

// Per-item value of one metric; the mean of these over a task's items is the
// metric point value.
inline double item_metric(const ItemScoreRecord& rec, const MetricName& metric) {
    double p_correct = 0.0;
    double p_total = 0.0;
    double p_best_incorrect = 0.0;
    bool has_incorrect = false;
    for (const auto& c : rec.choices) {
        double p = choice_prob(c, metric.mode);
        p_total += p;
        if (c.is_correct) {
            p_correct = p;
        } else {
            p_best_incorrect = has_incorrect ? std::max(p_best_incorrect, p) : p;
            has_incorrect = true;
        }
    }
    switch (metric.base) {
        case BaseMetric::correct_prob: return p_correct;
        case BaseMetric::margin: return p_correct - p_best_incorrect;
        case BaseMetric::norm_correct_prob: return p_correct / p_total;
        case BaseMetric::total_prob: return p_total;
        case BaseMetric::accuracy:
            // a tie on the maximum scores 0: the correct choice must be
            // strictly most likely
            return p_correct > p_best_incorrect ? 1.0 : 0.0;
    }
    return 0.0;
}

// Per-item task loss: negative log-likelihood of the correct continuation,
// normalized per the mode. This is the default series fed to loss curve fits.
inline double item_loss(const ItemScoreRecord& rec, NormalizationMode mode) {
    for (const auto& c : rec.choices) {
        if (!c.is_correct) continue;
        switch (mode) {
            case NormalizationMode::raw: return -c.logprob_sum;
            case NormalizationMode::per_token:
                return -c.logprob_sum / static_cast<double>(c.n_tokens);
            case NormalizationMode::per_char:
                return -c.logprob_sum / static_cast<double>(c.n_chars);
        }
    }
    throw validation_error("item_loss: record has no correct choice");
}

inline std::string loss_metric_name(NormalizationMode mode) {
    switch (mode) {
        case NormalizationMode::raw: return "correct_nll";
        case NormalizationMode::per_token: return "correct_nll_per_token";
        case NormalizationMode::per_char: return "correct_nll_per_char";
    }
    return "?";
}

// Stable grouping key and deterministic within-group order (item id
// ascending) so sums do not depend on input order or thread schedule.
inline std::vector<const ItemScoreRecord*> sorted_group(std::vector<const ItemScoreRecord*> g) {
    std::sort(g.begin(), g.end(), [](const ItemScoreRecord* a, const ItemScoreRecord* b) {
        return a->item < b->item;
    });
    return g;
}

} // namespace detail

// Mean metric value over the items of one (checkpoint, task) group.
inline MetricPoint compute_metric(const std::vector<const ItemScoreRecord*>& group,
                                  const MetricName& metric) {
    if (group.empty()) throw validation_error("compute_metric: empty item set");
    auto items = detail::sorted_group(group);
    double sum = 0.0;
    for (const ItemScoreRecord* rec : items) sum += detail::item_metric(*rec, metric);
    MetricPoint p;
    p.key = items.front()->key;
    p.task = items.front()->task;
    p.metric = to_string(metric);
    p.value = sum / static_cast<double>(items.size());
    return p;
}

inline MetricPoint compute_metric(const std::vector<ItemScoreRecord>& records,
                                  const MetricName& metric) {
    std::vector<const ItemScoreRecord*> group;
    group.reserve(records.size());
    for (const auto& r : records) group.push_back(&r);
    return compute_metric(group, metric);
}

// Mean per-item loss for one group; emitted under the correct_nll* names.
inline MetricPoint compute_task_loss(const std::vector<const ItemScoreRecord*>& group,
                                     NormalizationMode mode) {
    if (group.empty()) throw validation_error("compute_task_loss: empty item set");
    auto items = detail::sorted_group(group);
    double sum = 0.0;
    for (const ItemScoreRecord* rec : items) sum += detail::item_loss(*rec, mode);
    MetricPoint p;
    p.key = items.front()->key;
    p.task = items.front()->task;
    p.metric = detail::loss_metric_name(mode);
    p.value = sum / static_cast<double>(items.size());
    return p;
}

// Groups records by (checkpoint key, task) in canonical order.
inline std::vector<std::pair<std::pair<CheckpointKey, std::string>,
                             std::vector<const ItemScoreRecord*>>>
group_records(const std::vector<ItemScoreRecord>& records) {
    std::map<std::pair<CheckpointKey, std::string>, std::vector<const ItemScoreRecord*>> groups;
    for (const auto& r : records) groups[{r.key, r.task}].push_back(&r);
    return {groups.begin(), groups.end()};
}

// One MetricPoint per (checkpoint, task, metric); output in canonical group
// order regardless of input order or worker count. with_loss additionally
// emits the correct_nll series for loss_mode.
inline std::vector<MetricPoint> compute_all(const std::vector<ItemScoreRecord>& records,
                                            const std::vector<MetricName>& metrics,
                                            bool with_loss = false,
                                            NormalizationMode loss_mode =
                                                NormalizationMode::per_char,
                                            unsigned jobs = 1) {
    auto groups = group_records(records);
    const std::size_t per_group = metrics.size() + (with_loss ? 1 : 0);
    std::vector<MetricPoint> out(groups.size() * per_group);
    parallel_for(groups.size(), jobs, [&](std::size_t g) {
        std::size_t slot = g * per_group;
        for (const auto& m : metrics) out[slot++] = compute_metric(groups[g].second, m);
        if (with_loss) out[slot++] = compute_task_loss(groups[g].second, loss_mode);
    });
    return out;
}

} // namespace rankcast
