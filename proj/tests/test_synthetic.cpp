#include <doctest.h>

#include <cmath>
#include <map>

#include "rankcast/metrics.hpp"
#include "rankcast/records.hpp"
#include "rankcast/synthetic.hpp"

#include "helpers.hpp"

using namespace rankcast;

namespace {

std::vector<GroundTruthRecipe> spaced_truths(int n, double sigma = 0.0) {
    // well-separated curves: same exponent, different A, shared link
    std::vector<GroundTruthRecipe> out;
    for (int i = 0; i < n; ++i) {
        GroundTruthRecipe t;
        t.recipe = "r" + std::string(1, static_cast<char>('a' + i));
        t.power = {12000.0 * (1.0 + 0.2 * i), 0.3, 2.0};
        t.link = {0.6, 0.25, -6.0, 2.5};
        t.noise_sigma = sigma;
        out.push_back(t);
    }
    return out;
}

} // namespace

TEST_CASE("a noiseless suite lies exactly on the composed curves") {
    auto truths = spaced_truths(2);
    SuiteManifest m = testfix::synth_manifest(3, {"ra", "rb"}, {"default"});
    auto suite = gen_suite(truths, m, 7);
    REQUIRE(!suite.points.empty());
    std::map<std::string, const GroundTruthRecipe*> by_id;
    for (const auto& t : truths) by_id[t.recipe] = &t;
    for (const auto& p : suite.points) {
        const auto& t = *by_id.at(p.key.recipe);
        double n_params =
            static_cast<double>(m.find_size(p.key.size_label)->non_embedding_params);
        double compute = 6.0 * n_params * static_cast<double>(p.key.tokens_seen);
        if (p.metric == "acc") {
            CHECK(p.value == true_value(t, compute, n_params,
                                        static_cast<double>(p.key.tokens_seen)));
        } else {
            REQUIRE(p.metric == "loss");
            CHECK(p.value == true_loss(t, compute, n_params,
                                       static_cast<double>(p.key.tokens_seen)));
        }
    }
}

TEST_CASE("the same rng seed reproduces the suite bit for bit") {
    auto truths = spaced_truths(3, 0.02);
    SuiteManifest m = testfix::synth_manifest(3, {"ra", "rb", "rc"}, {"s1", "s2"});
    GenOptions opts;
    opts.items_per_task = 4;
    auto s1 = gen_suite(truths, m, 1234, opts);
    auto s2 = gen_suite(truths, m, 1234, opts);
    CHECK(s1.points == s2.points);
    CHECK(s1.records == s2.records);
    auto s3 = gen_suite(truths, m, 1235, opts);
    CHECK(s1.points != s3.points);
}

TEST_CASE("noise draws differ across seeds and recipes but not across reruns") {
    auto truths = spaced_truths(2, 0.05);
    SuiteManifest m = testfix::synth_manifest(1, {"ra", "rb"}, {"s1", "s2"});
    auto suite = gen_suite(truths, m, 42);
    std::map<std::tuple<std::string, std::string, std::int64_t>, double> acc_values;
    for (const auto& p : suite.points) {
        if (p.metric == "acc")
            acc_values[{p.key.recipe, p.key.seed, p.key.step}] = p.value;
    }
    // same recipe, different seed: different noise
    bool any_differ = false;
    for (const auto& [key, v] : acc_values) {
        auto [recipe, seed, step] = key;
        if (seed == "s1") {
            auto other = acc_values.find({recipe, "s2", step});
            if (other != acc_values.end() && other->second != v) any_differ = true;
        }
    }
    CHECK(any_differ);
}

TEST_CASE("crossover partners flip the per-size ordering at the declared compute") {
    GroundTruthRecipe base;
    base.recipe = "base";
    base.power = {12000.0, 0.3, 2.0};
    base.link = {0.6, 0.25, -6.0, 2.5};
    double cross = 1e19;
    GroundTruthRecipe partner = make_crossover_partner(base, "partner", cross, 0.08);
    CHECK(crossover_compute(base.power, partner.power) == doctest::Approx(cross).epsilon(1e-9));

    // below the crossover the base wins, above it the partner wins
    for (double c : {1e16, 1e17, 1e18}) {
        CHECK(true_value(base, c, 0, 0) > true_value(partner, c, 0, 0));
    }
    for (double c : {1.5e19, 1e20, 1e21}) {
        CHECK(true_value(base, c, 0, 0) < true_value(partner, c, 0, 0));
    }
}

TEST_CASE("true_gold ranks a crossover pair by the target-scale winner") {
    GroundTruthRecipe base;
    base.recipe = "base";
    base.power = {12000.0, 0.3, 2.0};
    base.link = {0.6, 0.25, -6.0, 2.5};
    SuiteManifest m = testfix::synth_manifest(4, {"base", "partner"}, {"default"});
    const auto& target_cfg = m.target_config();
    double target_compute = 6.0 * static_cast<double>(target_cfg.non_embedding_params) *
                            static_cast<double>(target_cfg.tokens_trained);
    GroundTruthRecipe partner =
        make_crossover_partner(base, "partner", target_compute / 10.0, 0.08);
    GoldRanking gold = true_gold({base, partner}, m);
    REQUIRE(gold.values.size() == 2);
    double base_val = gold.values[0].first == "base" ? gold.values[0].second
                                                     : gold.values[1].second;
    double partner_val = gold.values[0].first == "partner" ? gold.values[0].second
                                                           : gold.values[1].second;
    CHECK(partner_val > base_val);
    CHECK(partner_val ==
          true_value(partner, target_compute, 0, 0));
}

TEST_CASE("single-recipe gold is trivial") {
    SuiteManifest m = testfix::synth_manifest(2, {"ra"}, {"default"});
    GoldRanking gold = true_gold(spaced_truths(1), m);
    REQUIRE(gold.values.size() == 1);
    CHECK(gold.values[0].first == "ra");
}

TEST_CASE("noiseless generated gold equals the analytic gold") {
    // one seed and one task: every aggregation step is an identity
    auto truths = spaced_truths(3);
    SuiteManifest m = testfix::synth_manifest(3, {"ra", "rb", "rc"}, {"default"});
    auto suite = gen_suite(truths, m, 11);
    GoldRanking from_points = gold_targets(suite.points, m, m.target.metric, m.target.tasks);
    GoldRanking analytic = true_gold(truths, m);
    REQUIRE(from_points.values.size() == analytic.values.size());
    for (std::size_t i = 0; i < analytic.values.size(); ++i) {
        CHECK(from_points.values[i].first == analytic.values[i].first);
        CHECK(from_points.values[i].second == analytic.values[i].second); // exact
    }

    // three seeds: identical per-seed values, so the mean only wobbles by ulps
    SuiteManifest m3 = testfix::synth_manifest(3, {"ra", "rb", "rc"}, {"s1", "s2", "s3"});
    auto suite3 = gen_suite(truths, m3, 11);
    GoldRanking g3 = gold_targets(suite3.points, m3, m3.target.metric, m3.target.tasks);
    for (std::size_t i = 0; i < analytic.values.size(); ++i) {
        CHECK(g3.values[i].second ==
              doctest::Approx(analytic.values[i].second).epsilon(1e-14));
    }
}

TEST_CASE("early-stop simulation truncates only non-default seeds below target size") {
    auto truths = spaced_truths(2);
    SuiteManifest m = testfix::synth_manifest(3, {"ra", "rb"}, {"default", "rerun"});
    GenOptions opts;
    opts.simulate_early_stop = true;
    auto suite = gen_suite(truths, m, 5, opts);
    auto report = coverage_report(suite.points, m);
    for (const auto& cell : report.cells) {
        if (cell.seed == "default" || cell.size_label == m.target.size_label) {
            CHECK(cell.status == CellStatus::complete);
        } else {
            CHECK(cell.status == CellStatus::early_stop_consistent);
            CHECK(cell.fraction <= m.early_stop_fraction + 1e-9);
        }
    }
}

TEST_CASE("generated item records are valid and hit the target correct_prob") {
    auto truths = spaced_truths(1);
    SuiteManifest m = testfix::synth_manifest(1, {"ra"}, {"default"});
    GenOptions opts;
    opts.items_per_task = 16;
    opts.checkpoints_per_run = 2;
    auto suite = gen_suite(truths, m, 77, opts);
    REQUIRE(!suite.records.empty());
    for (const auto& rec : suite.records) {
        CHECK_NOTHROW(validate_item_record(rec, "generated"));
        CHECK(rec.choices.size() == 4);
    }
    // per-char correct probability of generated items equals the clean curve value
    std::map<std::tuple<std::string, std::int64_t>, std::vector<const ItemScoreRecord*>> groups;
    for (const auto& rec : suite.records) groups[{rec.key.recipe, rec.key.step}].push_back(&rec);
    std::map<std::tuple<std::string, std::int64_t>, double> curve;
    for (const auto& p : suite.points) {
        if (p.metric == "acc") curve[{p.key.recipe, p.key.step}] = p.value;
    }
    for (const auto& [key, group] : groups) {
        MetricPoint mp = compute_metric(group, {BaseMetric::correct_prob,
                                                NormalizationMode::per_char});
        double target = std::clamp(curve.at(key), 0.01, 0.99);
        CHECK(mp.value == doctest::Approx(target).epsilon(1e-12));
    }
}

TEST_CASE("noiseless end-to-end: generate, fit, predict, decide perfectly") {
    auto truths = spaced_truths(5);
    std::vector<std::string> recipes;
    for (const auto& t : truths) recipes.push_back(t.recipe);
    SuiteManifest m = testfix::synth_manifest(5, recipes, {"default"});
    auto suite = gen_suite(truths, m, 3);
    PointIndex index(suite.points);
    GoldRanking gold = gold_targets(index, m, m.target.metric, m.target.tasks);

    // fit three_param on the four non-target sizes
    SizeSubset subset{"prefix:4", {}};
    for (int i = 0; i < 4; ++i) subset.labels.push_back(m.ladder[i].size_label);
    std::vector<std::pair<std::string, FitChain>> fits;
    for (const auto& recipe : recipes) {
        std::vector<LossPoint> finals;
        std::vector<AccPoint> checkpoints;
        for (const auto& label : subset.labels) {
            const ModelConfig* cfg = m.find_size(label);
            std::vector<std::pair<std::int64_t, double>> series;
            for (const auto& p : suite.points) {
                if (p.key.recipe != recipe || p.key.size_label != label ||
                    p.key.seed != "default")
                    continue;
                if (p.metric == "loss") series.emplace_back(p.key.step, p.value);
            }
            LossPoint lp;
            lp.n_params = static_cast<double>(cfg->non_embedding_params);
            lp.n_tokens = static_cast<double>(cfg->tokens_trained);
            lp.compute = 6.0 * lp.n_params * lp.n_tokens;
            lp.loss = smooth_final_loss(series);
            finals.push_back(lp);
            PointIndex idx(suite.points);
            for (const auto& p : suite.points) {
                if (p.key.recipe != recipe || p.key.size_label != label || p.metric != "acc")
                    continue;
                AccPoint ap;
                ap.value = p.value;
                ap.step = p.key.step;
                ap.final_step = cfg->train_steps;
                ap.compute = 6.0 * lp.n_params * static_cast<double>(p.key.tokens_seen);
                ap.n_params = lp.n_params;
                ap.n_tokens = static_cast<double>(p.key.tokens_seen);
                auto lv = idx.value(recipe, label, "default", p.key.step, p.task, "loss");
                REQUIRE(lv.has_value());
                ap.loss = *lv;
                checkpoints.push_back(ap);
            }
        }
        fits.emplace_back(recipe, fit_chain(finals, checkpoints, Variant::three_param));
    }
    Prediction pred = predict_multi_scale(fits, m, subset, "acc", "default");
    DecisionReport report = decision_accuracy(pred, gold);
    CHECK(report.decision_accuracy == 1.0);
    CHECK(report.n_excluded == 0);
}
