#pragma once

// Synthetic suites generated from known ground-truth scaling curves. Each
// recipe gets a loss law (power law in compute, or separate N and D terms)
// chained with a loss-to-value sigmoid, plus optional per-seed Gaussian
// noise. Noise comes from a counter-based stream keyed on the grid cell, so
// generation is order-independent and reproducible at any parallelism.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rankcast/budget.hpp"
#include "rankcast/common.hpp"
#include "rankcast/decision.hpp"
#include "rankcast/manifest.hpp"
#include "rankcast/scaling.hpp"
#include "rankcast/types.hpp"

namespace rankcast {

// ---------------------------------------------------------------------------
// Counter-based randomness
// ---------------------------------------------------------------------------

namespace rng {

inline std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
    return splitmix(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// One keyed stream; draws are addressed by counter, never sequenced.
struct CounterRng {
    std::uint64_t key = 0;

    double uniform(std::uint64_t counter) const {
        std::uint64_t bits = splitmix(key ^ splitmix(counter + 0x632be59bd9b4e019ULL));
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; // in (0,1)
    }

    double gaussian(std::uint64_t counter) const {
        double u1 = uniform(2 * counter);
        double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }
};

} // namespace rng

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

struct CrossoverNote {
    std::string with_recipe;
    double compute = 0.0;
};

struct GroundTruthRecipe {
    std::string recipe;
    bool nd_law = false;
    PowerLawParams power; // used when !nd_law
    NDParams nd;          // used when nd_law
    SigmoidParams link;
    double noise_sigma = 0.0;
    std::optional<CrossoverNote> crossover;
};

struct GenOptions {
    int checkpoints_per_run = 10;
    bool simulate_early_stop = false; // truncate non-default seeds at non-target sizes
    int items_per_task = 0;           // > 0 also emits item-level records
    int choices_per_item = 4;
    std::string loss_metric = "loss";
};

struct SyntheticSuite {
    std::vector<MetricPoint> points;
    std::vector<ItemScoreRecord> records;
};

inline double true_loss(const GroundTruthRecipe& t, double compute, double n_params,
                        double n_tokens) {
    return t.nd_law ? eval_nd_law(t.nd, n_params, n_tokens) : eval_power_law(t.power, compute);
}

inline double true_value(const GroundTruthRecipe& t, double compute, double n_params,
                         double n_tokens) {
    return eval_sigmoid(t.link, true_loss(t, compute, n_params, n_tokens));
}

// Builds a partner recipe whose loss curve crosses the base's at exactly
// cross_compute: same E and link, steeper exponent, so the partner loses
// below the crossover and wins beyond it.
inline GroundTruthRecipe make_crossover_partner(const GroundTruthRecipe& base,
                                                const std::string& recipe_id,
                                                double cross_compute, double delta_alpha) {
    if (base.nd_law)
        throw validation_error("make_crossover_partner: base must use a compute power law");
    GroundTruthRecipe out = base;
    out.recipe = recipe_id;
    out.power.alpha = base.power.alpha + delta_alpha;
    out.power.A = base.power.A * std::pow(cross_compute, delta_alpha);
    out.crossover = CrossoverNote{base.recipe, cross_compute};
    return out;
}

// Crossover compute of two same-E power laws: A1/C^a1 = A2/C^a2.
inline double crossover_compute(const PowerLawParams& p1, const PowerLawParams& p2) {
    if (p1.alpha == p2.alpha)
        throw validation_error("crossover_compute: equal exponents never cross");
    return std::pow(p1.A / p2.A, 1.0 / (p1.alpha - p2.alpha));
}

// ---------------------------------------------------------------------------
// Suite generation
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::int64_t> checkpoint_steps(const ModelConfig& cfg, int n_checkpoints) {
    std::vector<std::int64_t> steps;
    for (int i = 1; i <= n_checkpoints; ++i) {
        double frac = static_cast<double>(i) / static_cast<double>(n_checkpoints);
        std::int64_t step = static_cast<std::int64_t>(
            std::llround(frac * static_cast<double>(cfg.train_steps)));
        step = std::clamp<std::int64_t>(step, 1, cfg.train_steps);
        if (steps.empty() || step != steps.back()) steps.push_back(step);
    }
    if (steps.back() != cfg.train_steps) steps.push_back(cfg.train_steps);
    return steps;
}

inline std::uint64_t cell_key(std::uint64_t rng_seed, const CheckpointKey& key,
                              const std::string& task) {
    std::uint64_t h = rng::splitmix(rng_seed);
    h = rng::combine(h, rng::fnv1a(key.recipe));
    h = rng::combine(h, rng::fnv1a(key.size_label));
    h = rng::combine(h, rng::fnv1a(key.seed));
    h = rng::combine(h, static_cast<std::uint64_t>(key.step));
    h = rng::combine(h, rng::fnv1a(task));
    return h;
}

// Item records whose per-char correct probability equals the target value,
// with incorrect choices scattered around it so accuracy is non-trivial.
inline void gen_items(std::vector<ItemScoreRecord>& out, const CheckpointKey& key,
                      const std::string& task, double target_value, const GenOptions& opts,
                      std::uint64_t rng_seed) {
    double p_correct = std::clamp(target_value, 0.01, 0.99);
    rng::CounterRng stream{rng::combine(detail::cell_key(rng_seed, key, task),
                                        rng::fnv1a("items"))};
    for (int i = 0; i < opts.items_per_task; ++i) {
        ItemScoreRecord rec;
        rec.key = key;
        rec.task = task;
        rec.item = "item-" + std::to_string(i);
        std::uint64_t base = static_cast<std::uint64_t>(i) * 64;
        int correct_pos = static_cast<int>(rng::splitmix(stream.key ^ base) %
                                           static_cast<std::uint64_t>(opts.choices_per_item));
        for (int c = 0; c < opts.choices_per_item; ++c) {
            ChoiceScore cs;
            std::uint64_t ctr = base + static_cast<std::uint64_t>(c) * 4;
            cs.n_chars = 12 + static_cast<std::int64_t>(
                                  rng::splitmix(stream.key ^ (ctr + 1)) % 24);
            cs.n_tokens = std::max<std::int64_t>(1, cs.n_chars / 4);
            double per_char_prob;
            if (c == correct_pos) {
                cs.is_correct = true;
                per_char_prob = p_correct;
            } else {
                // mostly below the correct choice, occasionally above
                double g = -0.1 + 0.9 * stream.uniform(ctr + 2);
                per_char_prob = std::min(p_correct * std::exp(-g), 0.995);
            }
            cs.logprob_sum = static_cast<double>(cs.n_chars) * std::log(per_char_prob);
            rec.choices.push_back(cs);
        }
        out.push_back(std::move(rec));
    }
}

} // namespace detail

// Emits, per grid cell, the value series (under the manifest's target metric
// name) and the noise-free loss series. Noise is Gaussian per (cell, task)
// on the value series only.
inline SyntheticSuite gen_suite(const std::vector<GroundTruthRecipe>& truths,
                                const SuiteManifest& manifest, std::uint64_t rng_seed,
                                const GenOptions& opts = {}) {
    if (manifest.ladder.empty()) throw validation_error("gen_suite: empty ladder");
    std::vector<const GroundTruthRecipe*> by_recipe;
    for (const auto& recipe : manifest.recipes) {
        const GroundTruthRecipe* found = nullptr;
        for (const auto& t : truths) {
            if (t.recipe == recipe) found = &t;
        }
        if (!found)
            throw validation_error("gen_suite: no ground truth for recipe '" + recipe + "'");
        by_recipe.push_back(found);
    }

    SyntheticSuite suite;
    for (std::size_t ri = 0; ri < manifest.recipes.size(); ++ri) {
        const GroundTruthRecipe& truth = *by_recipe[ri];
        for (const auto& cfg : manifest.ladder) {
            auto steps = detail::checkpoint_steps(cfg, opts.checkpoints_per_run);
            for (const auto& seed : manifest.seeds) {
                bool early_stop = opts.simulate_early_stop && seed != manifest.default_seed() &&
                                  cfg.size_label != manifest.target.size_label;
                std::vector<std::int64_t> run_steps = steps;
                if (early_stop) {
                    // a terminated run checkpoints at the stop step itself
                    std::int64_t stop = std::clamp<std::int64_t>(
                        std::llround(manifest.early_stop_fraction *
                                     static_cast<double>(cfg.train_steps)),
                        1, cfg.train_steps);
                    run_steps.push_back(stop);
                    std::sort(run_steps.begin(), run_steps.end());
                    run_steps.erase(std::unique(run_steps.begin(), run_steps.end()),
                                    run_steps.end());
                    run_steps.erase(std::remove_if(run_steps.begin(), run_steps.end(),
                                                   [&](std::int64_t s) { return s > stop; }),
                                    run_steps.end());
                }
                for (std::int64_t step : run_steps) {
                    double frac = static_cast<double>(step) /
                                  static_cast<double>(cfg.train_steps);
                    CheckpointKey key;
                    key.recipe = truth.recipe;
                    key.size_label = cfg.size_label;
                    key.seed = seed;
                    key.step = step;
                    key.tokens_seen = static_cast<std::int64_t>(
                        std::llround(frac * static_cast<double>(cfg.tokens_trained)));
                    double n_params = static_cast<double>(cfg.non_embedding_params);
                    double n_tokens = static_cast<double>(key.tokens_seen);
                    double compute = flops(n_params, n_tokens);
                    double loss = true_loss(truth, compute, n_params, n_tokens);
                    double clean = eval_sigmoid(truth.link, loss);
                    for (const auto& task : manifest.target.tasks) {
                        double value = clean;
                        if (truth.noise_sigma > 0.0) {
                            rng::CounterRng stream{detail::cell_key(rng_seed, key, task)};
                            value += truth.noise_sigma * stream.gaussian(0);
                        }
                        suite.points.push_back({key, task, manifest.target.metric, value});
                        suite.points.push_back({key, task, opts.loss_metric, loss});
                        if (opts.items_per_task > 0)
                            detail::gen_items(suite.records, key, task, clean, opts, rng_seed);
                    }
                }
            }
        }
    }
    return suite;
}

// Noise-free target-scale values straight from the ground truth curves.
inline GoldRanking true_gold(const std::vector<GroundTruthRecipe>& truths,
                             const SuiteManifest& manifest) {
    const ModelConfig& cfg = manifest.target_config();
    double n_params = static_cast<double>(cfg.non_embedding_params);
    double n_tokens = static_cast<double>(cfg.tokens_trained);
    double compute = flops(n_params, n_tokens);
    GoldRanking gold;
    gold.metric = manifest.target.metric;
    gold.target_size = manifest.target.size_label;
    for (const auto& recipe : manifest.recipes) {
        const GroundTruthRecipe* found = nullptr;
        for (const auto& t : truths) {
            if (t.recipe == recipe) found = &t;
        }
        if (!found)
            throw validation_error("true_gold: no ground truth for recipe '" + recipe + "'");
        gold.values.emplace_back(recipe, true_value(*found, compute, n_params, n_tokens));
    }
    std::sort(gold.values.begin(), gold.values.end());
    return gold;
}

// ---------------------------------------------------------------------------
// Manifest extension parsing
// ---------------------------------------------------------------------------

struct GroundTruthSection {
    std::vector<GroundTruthRecipe> truths;
    GenOptions options;
};

inline GroundTruthSection parse_ground_truth(const nlohmann::json& section) {
    if (!section.is_object())
        throw parse_error("ground_truth: expected an object");
    GroundTruthSection out;
    if (section.contains("checkpoints_per_run"))
        out.options.checkpoints_per_run = static_cast<int>(
            detail::int_field(section, "checkpoints_per_run", "ground_truth"));
    if (section.contains("items_per_task"))
        out.options.items_per_task =
            static_cast<int>(detail::int_field(section, "items_per_task", "ground_truth"));
    if (section.contains("choices_per_item"))
        out.options.choices_per_item =
            static_cast<int>(detail::int_field(section, "choices_per_item", "ground_truth"));
    if (section.contains("loss_metric"))
        out.options.loss_metric = detail::str_field(section, "loss_metric", "ground_truth");
    if (section.contains("simulate_early_stop")) {
        const auto& v = section["simulate_early_stop"];
        if (!v.is_boolean())
            throw parse_error("ground_truth.simulate_early_stop: expected a boolean");
        out.options.simulate_early_stop = v.get<bool>();
    }
    if (out.options.checkpoints_per_run < 1)
        throw validation_error("ground_truth: checkpoints_per_run must be >= 1");
    if (out.options.items_per_task > 0 && out.options.choices_per_item < 2)
        throw validation_error("ground_truth: choices_per_item must be >= 2");

    const auto& recipes = detail::require_field(section, "recipes", "ground_truth");
    if (!recipes.is_array()) throw parse_error("ground_truth.recipes: expected an array");
    for (std::size_t i = 0; i < recipes.size(); ++i) {
        const auto& e = recipes[i];
        const std::string where = "ground_truth.recipes[" + std::to_string(i) + "]";
        GroundTruthRecipe t;
        t.recipe = detail::str_field(e, "recipe", where);
        const auto& law = detail::require_field(e, "law", where);
        std::string form = detail::str_field(law, "form", where + ".law");
        if (form == "power") {
            t.nd_law = false;
            t.power.A = detail::num_field(law, "A", where + ".law");
            t.power.alpha = detail::num_field(law, "alpha", where + ".law");
            t.power.E = law.contains("E") ? detail::num_field(law, "E", where + ".law") : 0.0;
            if (!(t.power.A > 0.0))
                throw validation_error(where + ".law: A must be > 0");
        } else if (form == "nd") {
            t.nd_law = true;
            t.nd.A = detail::num_field(law, "A", where + ".law");
            t.nd.alpha = detail::num_field(law, "alpha", where + ".law");
            t.nd.B = detail::num_field(law, "B", where + ".law");
            t.nd.beta = detail::num_field(law, "beta", where + ".law");
            t.nd.E = law.contains("E") ? detail::num_field(law, "E", where + ".law") : 0.0;
            if (!(t.nd.A > 0.0) || !(t.nd.B > 0.0))
                throw validation_error(where + ".law: A and B must be > 0");
        } else {
            throw parse_error(where + ".law.form: expected 'power' or 'nd'");
        }
        const auto& link = detail::require_field(e, "link", where);
        t.link.a = detail::num_field(link, "a", where + ".link");
        t.link.b = detail::num_field(link, "b", where + ".link");
        t.link.k = detail::num_field(link, "k", where + ".link");
        t.link.L0 = detail::num_field(link, "L0", where + ".link");
        if (t.link.a < 0.0) throw validation_error(where + ".link: span a must be >= 0");
        if (e.contains("noise_sigma"))
            t.noise_sigma = detail::num_field(e, "noise_sigma", where);
        if (t.noise_sigma < 0.0)
            throw validation_error(where + ": noise_sigma must be >= 0");
        if (e.contains("crossover")) {
            const auto& x = e["crossover"];
            CrossoverNote note;
            note.with_recipe = detail::str_field(x, "with", where + ".crossover");
            note.compute = detail::num_field(x, "compute", where + ".crossover");
            t.crossover = note;
        }
        out.truths.push_back(std::move(t));
    }
    return out;
}

inline nlohmann::json write_ground_truth(const GroundTruthSection& section) {
    nlohmann::json doc;
    doc["checkpoints_per_run"] = section.options.checkpoints_per_run;
    if (section.options.items_per_task > 0) {
        doc["items_per_task"] = section.options.items_per_task;
        doc["choices_per_item"] = section.options.choices_per_item;
    }
    doc["loss_metric"] = section.options.loss_metric;
    if (section.options.simulate_early_stop) doc["simulate_early_stop"] = true;
    doc["recipes"] = nlohmann::json::array();
    for (const auto& t : section.truths) {
        nlohmann::json e;
        e["recipe"] = t.recipe;
        if (t.nd_law) {
            e["law"] = {{"form", "nd"},   {"A", t.nd.A}, {"alpha", t.nd.alpha},
                        {"B", t.nd.B},    {"beta", t.nd.beta}, {"E", t.nd.E}};
        } else {
            e["law"] = {{"form", "power"}, {"A", t.power.A}, {"alpha", t.power.alpha},
                        {"E", t.power.E}};
        }
        e["link"] = {{"a", t.link.a}, {"b", t.link.b}, {"k", t.link.k}, {"L0", t.link.L0}};
        if (t.noise_sigma > 0.0) e["noise_sigma"] = t.noise_sigma;
        if (t.crossover)
            e["crossover"] = {{"with", t.crossover->with_recipe},
                              {"compute", t.crossover->compute}};
        doc["recipes"].push_back(std::move(e));
    }
    return doc;
}

} // namespace rankcast
