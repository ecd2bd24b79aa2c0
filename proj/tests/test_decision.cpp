#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rankcast/decision.hpp"
#include "rankcast/synthetic.hpp"

#include "helpers.hpp"

using namespace rankcast;

namespace {

Prediction make_pred(std::vector<std::pair<std::string, double>> yhat) {
    Prediction p;
    p.method = {"single_scale", "s0", "1", "default", "acc", "-"};
    p.yhat = std::move(yhat);
    std::sort(p.yhat.begin(), p.yhat.end());
    return p;
}

GoldRanking make_gold(std::vector<std::pair<std::string, double>> values) {
    GoldRanking g;
    g.metric = "acc";
    g.target_size = "s0";
    g.values = std::move(values);
    std::sort(g.values.begin(), g.values.end());
    return g;
}

// Independent Kendall tau on tie-free data.
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    int concordant = 0, discordant = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            double s = (x[i] - x[j]) * (y[i] - y[j]);
            if (s > 0) ++concordant;
            else if (s < 0) ++discordant;
        }
    }
    return static_cast<double>(concordant - discordant) /
           static_cast<double>(concordant + discordant);
}

// Exhaustive pair-enumeration oracle.
double brute_force_da(const std::vector<double>& pred, const std::vector<double>& gold) {
    int correct = 0, scored = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t j = i + 1; j < pred.size(); ++j) {
            double gs = gold[i] - gold[j];
            if (gs == 0.0) continue;
            ++scored;
            double ps = pred[i] - pred[j];
            bool same = (gs > 0 && ps > 0) || (gs < 0 && ps < 0);
            if (same) ++correct;
        }
    }
    return scored ? static_cast<double>(correct) / scored : 0.0;
}

} // namespace

TEST_CASE("gold_targets averages tasks then seeds at the final target checkpoint") {
    SuiteManifest m = testfix::synth_manifest(1, {"a", "b"}, {"s1", "s2", "s3"});
    std::vector<MetricPoint> points;
    auto add = [&](const std::string& recipe, const std::string& seed, double v) {
        points.push_back({{recipe, "s0", seed, 1000, 1000000000}, "synthetic", "acc", v});
        // an earlier checkpoint that must be ignored
        points.push_back({{recipe, "s0", seed, 500, 500000000}, "synthetic", "acc", v + 1.0});
    };
    add("a", "s1", 0.5);
    add("a", "s2", 0.5);
    add("a", "s3", 0.5);
    add("b", "s1", 0.4);
    add("b", "s2", 0.4);
    add("b", "s3", 0.4);
    GoldRanking gold = gold_targets(points, m, "acc", {"synthetic"});
    REQUIRE(gold.values.size() == 2);
    CHECK(gold.values[0].first == "a");
    CHECK(gold.values[0].second == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(gold.values[1].second == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("gold_targets takes the arithmetic seed mean") {
    SuiteManifest m = testfix::synth_manifest(1, {"a"}, {"s1", "s2", "s3"});
    std::vector<MetricPoint> points = {
        {{"a", "s0", "s1", 1000, 1}, "synthetic", "acc", 0.50},
        {{"a", "s0", "s2", 1000, 1}, "synthetic", "acc", 0.52},
        {{"a", "s0", "s3", 1000, 1}, "synthetic", "acc", 0.48},
    };
    GoldRanking gold = gold_targets(points, m, "acc", {"synthetic"});
    CHECK(gold.values[0].second == doctest::Approx(0.50).epsilon(1e-15));
}

TEST_CASE("gold_targets lists every missing cell") {
    SuiteManifest m = testfix::synth_manifest(1, {"a", "b"}, {"s1", "s2"});
    std::vector<MetricPoint> points = {
        {{"a", "s0", "s1", 1000, 1}, "synthetic", "acc", 0.5},
        {{"b", "s0", "s1", 1000, 1}, "synthetic", "acc", 0.4},
        // b/s2 absent entirely, a/s2 present but wrong task
        {{"a", "s0", "s2", 1000, 1}, "other", "acc", 0.5},
    };
    CHECK_THROWS_WITH_AS(gold_targets(points, m, "acc", {"synthetic"}),
                         doctest::Contains("b/s2"), validation_error);
}

TEST_CASE("rank_single_scale preserves the observed order and charges the checkpoint") {
    SuiteManifest m = testfix::synth_manifest(2, {"a", "b"}, {"default"});
    std::vector<MetricPoint> points = {
        {{"a", "s0", "default", 500, 500000000}, "synthetic", "acc", 0.30},
        {{"b", "s0", "default", 500, 500000000}, "synthetic", "acc", 0.20},
        {{"a", "s0", "default", 1000, 1000000000}, "synthetic", "acc", 0.35},
        {{"b", "s0", "default", 1000, 1000000000}, "synthetic", "acc", 0.25},
    };
    PointIndex index(points);
    Prediction mid = rank_single_scale(index, m, "s0", 500, "default", "acc", {"synthetic"});
    CHECK(mid.yhat[0].second > mid.yhat[1].second); // a wins
    Prediction fin = rank_single_scale(index, m, "s0", 1000, "default", "acc", {"synthetic"});
    // budgets scale with tokens seen
    CHECK(fin.budget.flops == doctest::Approx(2.0 * mid.budget.flops));

    CHECK_THROWS_AS(rank_single_scale(index, m, "s0", 123, "default", "acc", {"synthetic"}),
                    validation_error);
}

TEST_CASE("decision accuracy: identity, hand-enumerated, and full reversal") {
    GoldRanking gold = make_gold({{"A", 0.5}, {"B", 0.4}, {"C", 0.3}});
    DecisionReport same = decision_accuracy(make_pred({{"A", 0.5}, {"B", 0.4}, {"C", 0.3}}), gold);
    CHECK(same.decision_accuracy == 1.0);
    CHECK(same.n_pairs == 3);
    CHECK(same.n_excluded == 0);

    // pairs: (A,B) flipped, (A,C) and (B,C) correct
    DecisionReport two_thirds =
        decision_accuracy(make_pred({{"A", 0.45}, {"B", 0.46}, {"C", 0.30}}), gold);
    CHECK(two_thirds.decision_accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    DecisionReport reversed =
        decision_accuracy(make_pred({{"A", -0.5}, {"B", -0.4}, {"C", -0.3}}), gold);
    CHECK(reversed.decision_accuracy == 0.0);
}

TEST_CASE("gold ties are excluded and surfaced; predicted ties are incorrect") {
    GoldRanking gold = make_gold({{"A", 0.5}, {"B", 0.5}, {"C", 0.3}});
    DecisionReport r = decision_accuracy(make_pred({{"A", 0.6}, {"B", 0.5}, {"C", 0.4}}), gold);
    CHECK(r.n_pairs == 3);
    CHECK(r.n_excluded == 1);
    CHECK(r.decision_accuracy == 1.0); // both scored pairs correct

    GoldRanking strict = make_gold({{"A", 0.5}, {"B", 0.4}, {"C", 0.3}});
    DecisionReport tie = decision_accuracy(make_pred({{"A", 0.4}, {"B", 0.4}, {"C", 0.2}}), strict);
    // (A,B) predicted tie counts incorrect; other two correct
    CHECK(tie.decision_accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("mismatched recipe sets are rejected with names") {
    GoldRanking gold = make_gold({{"A", 0.5}, {"B", 0.4}});
    CHECK_THROWS_WITH_AS(decision_accuracy(make_pred({{"A", 0.5}, {"C", 0.4}}), gold),
                         doctest::Contains("C"), validation_error);
}

TEST_CASE("decision accuracy equals exhaustive enumeration on suites of up to 6 recipes") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 2 + static_cast<int>(gen() % 5);
        std::vector<std::pair<std::string, double>> gv, pv;
        std::vector<double> gvals, pvals;
        for (int i = 0; i < n; ++i) {
            std::string name = "r" + std::to_string(i);
            double g = dist(gen), p = dist(gen);
            gv.emplace_back(name, g);
            pv.emplace_back(name, p);
            gvals.push_back(g);
            pvals.push_back(p);
        }
        DecisionReport r = decision_accuracy(make_pred(pv), make_gold(gv));
        CHECK(r.decision_accuracy == brute_force_da(pvals, gvals));
    }
}

TEST_CASE("decision accuracy is (tau + 1) / 2 on tie-free data") {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 3 + static_cast<int>(gen() % 8);
        std::vector<std::pair<std::string, double>> gv, pv;
        std::vector<double> gvals, pvals;
        for (int i = 0; i < n; ++i) {
            std::string name = "r" + std::to_string(i);
            double g = dist(gen), p = dist(gen);
            gv.emplace_back(name, g);
            pv.emplace_back(name, p);
            gvals.push_back(g);
            pvals.push_back(p);
        }
        DecisionReport r = decision_accuracy(make_pred(pv), make_gold(gv));
        double tau = kendall_tau(pvals, gvals);
        CHECK(r.decision_accuracy == doctest::Approx((tau + 1.0) / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("strictly increasing transforms leave the report identical") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<std::pair<std::string, double>> gv, pv;
    for (int i = 0; i < 8; ++i) {
        gv.emplace_back("r" + std::to_string(i), dist(gen));
        pv.emplace_back("r" + std::to_string(i), dist(gen));
    }
    GoldRanking gold = make_gold(gv);
    DecisionReport base = decision_accuracy(make_pred(pv), gold);
    for (auto&& transform : {+[](double x) { return 2.0 * x + 1.0; },
                             +[](double x) { return std::exp(x); }}) {
        auto tv = pv;
        for (auto& [name, v] : tv) v = transform(v);
        DecisionReport t = decision_accuracy(make_pred(tv), gold);
        CHECK(t.decision_accuracy == base.decision_accuracy);
        CHECK(t.n_excluded == base.n_excluded);
        REQUIRE(t.pairs.size() == base.pairs.size());
        for (std::size_t i = 0; i < t.pairs.size(); ++i) {
            CHECK(t.pairs[i].pred_sign == base.pairs[i].pred_sign);
            CHECK(t.pairs[i].result == base.pairs[i].result);
        }
    }
}

TEST_CASE("reversing predictions complements decision accuracy") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<std::string, double>> gv, pv, nv;
        for (int i = 0; i < 7; ++i) {
            std::string name = "r" + std::to_string(i);
            gv.emplace_back(name, dist(gen));
            double p = dist(gen);
            pv.emplace_back(name, p);
            nv.emplace_back(name, -p);
        }
        GoldRanking gold = make_gold(gv);
        double da = decision_accuracy(make_pred(pv), gold).decision_accuracy;
        double rev = decision_accuracy(make_pred(nv), gold).decision_accuracy;
        CHECK(da == doctest::Approx(1.0 - rev).epsilon(1e-15));
    }
}

TEST_CASE("recipe relabeling permutes nothing observable") {
    GoldRanking gold = make_gold({{"a", 0.1}, {"b", 0.7}, {"c", 0.4}, {"d", 0.9}});
    Prediction pred = make_pred({{"a", 0.2}, {"b", 0.5}, {"c", 0.6}, {"d", 0.8}});
    DecisionReport base = decision_accuracy(pred, gold);
    // feed the same data in a different vector order
    std::reverse(pred.yhat.begin(), pred.yhat.end());
    std::reverse(gold.values.begin(), gold.values.end());
    DecisionReport again = decision_accuracy(pred, gold);
    CHECK(base.decision_accuracy == again.decision_accuracy);
    CHECK(base.n_pairs == again.n_pairs);
}

TEST_CASE("seed attempts aggregate mean and Bessel-corrected std") {
    GoldRanking gold =
        make_gold({{"a", 0.1}, {"b", 0.2}, {"c", 0.3}, {"d", 0.4}, {"e", 0.5}});
    auto perfect = make_pred({{"a", 0.1}, {"b", 0.2}, {"c", 0.3}, {"d", 0.4}, {"e", 0.5}});
    // one adjacent swap = 1 discordant pair of 10 -> 0.9
    auto one_swap = make_pred({{"a", 0.2}, {"b", 0.1}, {"c", 0.3}, {"d", 0.4}, {"e", 0.5}});
    // two disjoint swaps -> 0.8
    auto two_swaps = make_pred({{"a", 0.2}, {"b", 0.1}, {"c", 0.4}, {"d", 0.3}, {"e", 0.5}});

    DecisionReport constant = seed_attempts({perfect, perfect, perfect}, gold);
    CHECK(constant.decision_accuracy == 1.0);
    CHECK(constant.da_std == 0.0);
    CHECK(constant.std_defined);

    DecisionReport spreadr = seed_attempts({perfect, one_swap, two_swaps}, gold);
    CHECK(spreadr.decision_accuracy == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(spreadr.da_std == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(spreadr.n_attempts == 3);

    DecisionReport single = seed_attempts({one_swap}, gold);
    CHECK(single.decision_accuracy == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(single.da_std == 0.0);
    CHECK(!single.std_defined);
}

TEST_CASE("prediction error reports absolute points and relative percent") {
    GoldRanking gold = make_gold({{"a", 0.50}, {"b", 0.25}});
    PredictionErrorReport exact =
        prediction_error(make_pred({{"a", 0.50}, {"b", 0.25}}), gold);
    CHECK(exact.mean_abs_points == 0.0);
    CHECK(exact.mean_rel_pct == 0.0);

    PredictionErrorReport off = prediction_error(make_pred({{"a", 0.55}, {"b", 0.25}}), gold);
    CHECK(off.per_recipe[0].abs_error_points == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(off.per_recipe[0].rel_error_pct == doctest::Approx(10.0).epsilon(1e-12));

    GoldRanking with_zero = make_gold({{"a", 0.0}, {"b", 0.25}});
    PredictionErrorReport z = prediction_error(make_pred({{"a", 0.1}, {"b", 0.3}}), with_zero);
    CHECK(z.n_rel_undefined == 1);
    CHECK(!z.per_recipe[0].rel_defined);
}

TEST_CASE("multi-scale predictions demand matching variants and charge the subset") {
    SuiteManifest m = testfix::synth_manifest(5, {"a", "b"}, {"default"});
    FitChain c1;
    c1.variant = Variant::three_param;
    c1.step1.converged = true;
    c1.step1.params = PowerLawParams{50, 0.3, 2.0};
    FitResult s2;
    s2.params = SigmoidParams{0.6, 0.25, -8, 1.2};
    s2.converged = true;
    c1.step2 = s2;
    FitChain c2 = c1;
    c2.variant = Variant::two_param;

    SizeSubset sub3{"prefix:3", {"s0", "s1", "s2"}};
    CHECK_THROWS_AS(predict_multi_scale({{"a", c1}, {"b", c2}}, m, sub3, "acc", "default"),
                    validation_error);

    c2.variant = Variant::three_param;
    Prediction p3 = predict_multi_scale({{"a", c1}, {"b", c2}}, m, sub3, "acc", "default");
    SizeSubset sub5{"prefix:5", {"s0", "s1", "s2", "s3", "s4"}};
    Prediction p5 = predict_multi_scale({{"a", c1}, {"b", c2}}, m, sub5, "acc", "default");
    CHECK(p5.budget.flops > p3.budget.flops);
    CHECK(p3.method.method == "multi_scale");
    CHECK(p3.method.scale == "prefix:3");
}
