#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rankcast/metrics.hpp"

using namespace rankcast;

namespace {

// Independent oracle: straight transcription of the metric definitions,
// kept separate from the library implementation it checks.
double oracle_prob(const ChoiceScore& c, NormalizationMode mode) {
    double len = 1.0;
    if (mode == NormalizationMode::per_token) len = static_cast<double>(c.n_tokens);
    if (mode == NormalizationMode::per_char) len = static_cast<double>(c.n_chars);
    return std::exp(c.logprob_sum / len);
}

double oracle_item(const ItemScoreRecord& rec, BaseMetric base, NormalizationMode mode) {
    std::vector<double> probs;
    double correct = 0.0;
    for (const auto& c : rec.choices) {
        double p = oracle_prob(c, mode);
        probs.push_back(p);
        if (c.is_correct) correct = p;
    }
    switch (base) {
        case BaseMetric::correct_prob: return correct;
        case BaseMetric::margin: {
            double best_other = -1.0;
            for (std::size_t i = 0; i < probs.size(); ++i)
                if (!rec.choices[i].is_correct) best_other = std::max(best_other, probs[i]);
            return correct - best_other;
        }
        case BaseMetric::norm_correct_prob: {
            double total = 0.0;
            for (double p : probs) total += p;
            return correct / total;
        }
        case BaseMetric::total_prob: {
            double total = 0.0;
            for (double p : probs) total += p;
            return total;
        }
        case BaseMetric::accuracy: {
            // strict winner: ties score 0
            bool win = true;
            for (std::size_t i = 0; i < probs.size(); ++i)
                if (!rec.choices[i].is_correct && probs[i] >= correct) win = false;
            return win ? 1.0 : 0.0;
        }
    }
    return 0.0;
}

ItemScoreRecord make_item(const std::string& id,
                          std::vector<std::tuple<double, std::int64_t, std::int64_t, bool>> cs) {
    ItemScoreRecord rec;
    rec.key = {"r", "s", "seed", 1, 1};
    rec.task = "t";
    rec.item = id;
    for (auto& [lp, tok, ch, corr] : cs) rec.choices.push_back({lp, tok, ch, corr});
    return rec;
}

// Three items covering: correct wins everywhere, correct loses everywhere,
// and a flip where only per-char normalization ranks the correct choice first.
std::vector<ItemScoreRecord> fixture3() {
    return {
        make_item("i0", {{-2.0, 2, 4, true}, {-4.0, 2, 4, false}, {-6.0, 3, 6, false}}),
        make_item("i1", {{-1.0, 1, 2, false}, {-3.0, 1, 2, true}, {-9.0, 3, 6, false}}),
        make_item("i2", {{-6.0, 2, 12, true}, {-5.0, 4, 5, false}, {-7.0, 2, 4, false}}),
    };
}

ItemScoreRecord random_item(std::mt19937_64& gen, const std::string& id) {
    std::uniform_int_distribution<int> n_choices(2, 5);
    std::uniform_real_distribution<double> lp(-20.0, -0.01);
    std::uniform_int_distribution<std::int64_t> tokens(1, 12);
    std::uniform_int_distribution<std::int64_t> chars(1, 50);
    int n = n_choices(gen);
    std::uniform_int_distribution<int> pick(0, n - 1);
    int correct = pick(gen);
    std::vector<std::tuple<double, std::int64_t, std::int64_t, bool>> cs;
    for (int i = 0; i < n; ++i) cs.emplace_back(lp(gen), tokens(gen), chars(gen), i == correct);
    return make_item(id, cs);
}

} // namespace

TEST_CASE("choice_prob matches the direct formulas") {
    CHECK(choice_prob(-10.0, 5, 20, NormalizationMode::per_char) ==
          doctest::Approx(0.6065306597126334).epsilon(1e-14));
    CHECK(choice_prob(-10.0, 5, 20, NormalizationMode::per_token) ==
          doctest::Approx(0.1353352832366127).epsilon(1e-14));
    CHECK(choice_prob(0.0, 3, 7, NormalizationMode::raw) == 1.0);
    CHECK(choice_prob(0.0, 3, 7, NormalizationMode::per_char) == 1.0);
    CHECK_THROWS_AS(choice_prob(-1.0, 0, 5, NormalizationMode::raw), validation_error);
}

TEST_CASE("single item with probs {0.5 correct, 0.3, 0.1} hits every base metric") {
    auto item = make_item("i", {{std::log(0.5), 1, 1, true},
                                {std::log(0.3), 1, 1, false},
                                {std::log(0.1), 1, 1, false}});
    auto val = [&](BaseMetric b) {
        return compute_metric({item}, MetricName{b, NormalizationMode::raw}).value;
    };
    CHECK(val(BaseMetric::correct_prob) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(val(BaseMetric::margin) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(val(BaseMetric::norm_correct_prob) == doctest::Approx(0.5 / 0.9).epsilon(1e-12));
    CHECK(val(BaseMetric::total_prob) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(val(BaseMetric::accuracy) == 1.0);
}

TEST_CASE("an incorrect choice above the correct one flips accuracy and margin sign") {
    auto item = make_item("i", {{std::log(0.5), 1, 1, true},
                                {std::log(0.6), 1, 1, false},
                                {std::log(0.1), 1, 1, false}});
    CHECK(compute_metric({item}, {BaseMetric::accuracy, NormalizationMode::raw}).value == 0.0);
    CHECK(compute_metric({item}, {BaseMetric::margin, NormalizationMode::raw}).value ==
          doctest::Approx(-0.1).epsilon(1e-12));
}

TEST_CASE("3-item fixture: all 15 metric values match the oracle to 1e-12") {
    auto items = fixture3();
    for (const auto& name : all_metric_names()) {
        double expected = 0.0;
        for (const auto& it : items) expected += oracle_item(it, name.base, name.mode);
        expected /= 3.0;
        MetricPoint p = compute_metric(items, name);
        INFO("metric ", to_string(name));
        CHECK(p.value == doctest::Approx(expected).epsilon(1e-12));
    }
    // frozen spot checks
    double e2 = std::exp(-2.0), e3 = std::exp(-3.0), e6 = std::exp(-6.0);
    CHECK(compute_metric(items, {BaseMetric::correct_prob, NormalizationMode::raw}).value ==
          doctest::Approx((e2 + e3 + e6) / 3.0).epsilon(1e-14));
    CHECK(compute_metric(items, {BaseMetric::accuracy, NormalizationMode::raw}).value ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(compute_metric(items, {BaseMetric::accuracy, NormalizationMode::per_token}).value ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(compute_metric(items, {BaseMetric::accuracy, NormalizationMode::per_char}).value ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("task loss is the mean per-unit NLL of the correct continuation") {
    auto items = fixture3();
    std::vector<const ItemScoreRecord*> group;
    for (const auto& it : items) group.push_back(&it);
    MetricPoint p = compute_task_loss(group, NormalizationMode::per_char);
    // correct choices: 2.0/4, 3.0/2, 6.0/12
    CHECK(p.value == doctest::Approx((0.5 + 1.5 + 0.5) / 3.0).epsilon(1e-14));
    CHECK(p.metric == "correct_nll_per_char");
}

TEST_CASE("metric ranges hold on 1000 random items") {
    std::mt19937_64 gen(42);
    for (int i = 0; i < 1000; ++i) {
        auto item = random_item(gen, "x");
        int n = static_cast<int>(item.choices.size());
        for (const auto& name : all_metric_names()) {
            double v = compute_metric({item}, name).value;
            switch (name.base) {
                case BaseMetric::accuracy:
                    CHECK((v == 0.0 || v == 1.0));
                    break;
                case BaseMetric::norm_correct_prob:
                    CHECK(v > 0.0);
                    CHECK(v < 1.0);
                    break;
                case BaseMetric::margin:
                    CHECK(v > -1.0);
                    CHECK(v < 1.0);
                    break;
                case BaseMetric::total_prob:
                    CHECK(v > 0.0);
                    CHECK(v < static_cast<double>(n));
                    break;
                case BaseMetric::correct_prob:
                    CHECK(v > 0.0);
                    CHECK(v <= 1.0);
                    break;
            }
        }
    }
}

TEST_CASE("scaling every choice probability by c preserves norm_correct_prob and accuracy") {
    std::mt19937_64 gen(43);
    std::uniform_real_distribution<double> cdist(0.05, 1.0);
    for (int i = 0; i < 1000; ++i) {
        auto item = random_item(gen, "x");
        double c = cdist(gen);
        for (NormalizationMode mode : {NormalizationMode::raw, NormalizationMode::per_token,
                                       NormalizationMode::per_char}) {
            auto scaled = item;
            for (auto& ch : scaled.choices) {
                double len = 1.0;
                if (mode == NormalizationMode::per_token) len = static_cast<double>(ch.n_tokens);
                if (mode == NormalizationMode::per_char) len = static_cast<double>(ch.n_chars);
                ch.logprob_sum += len * std::log(c); // prob -> prob * c under this mode
            }
            double norm0 = compute_metric({item}, {BaseMetric::norm_correct_prob, mode}).value;
            double norm1 = compute_metric({scaled}, {BaseMetric::norm_correct_prob, mode}).value;
            CHECK(norm1 == doctest::Approx(norm0).epsilon(1e-11));
            double acc0 = compute_metric({item}, {BaseMetric::accuracy, mode}).value;
            double acc1 = compute_metric({scaled}, {BaseMetric::accuracy, mode}).value;
            CHECK(acc0 == acc1);
        }
    }
}

TEST_CASE("equal choice lengths make normalized accuracy equal raw accuracy") {
    std::mt19937_64 gen(44);
    for (int i = 0; i < 500; ++i) {
        auto item = random_item(gen, "x");
        for (auto& c : item.choices) c.n_chars = 17; // common length
        double raw = compute_metric({item}, {BaseMetric::accuracy, NormalizationMode::raw}).value;
        double pc =
            compute_metric({item}, {BaseMetric::accuracy, NormalizationMode::per_char}).value;
        CHECK(raw == pc);
    }
}

TEST_CASE("compute_metric is permutation-invariant over items") {
    std::mt19937_64 gen(45);
    std::vector<ItemScoreRecord> items;
    for (int i = 0; i < 20; ++i) items.push_back(random_item(gen, "item-" + std::to_string(i)));
    auto shuffled = items;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    for (const auto& name : all_metric_names()) {
        CHECK(compute_metric(items, name).value == compute_metric(shuffled, name).value);
    }
}

TEST_CASE("compute_metric rejects an empty item set") {
    std::vector<const ItemScoreRecord*> empty;
    CHECK_THROWS_AS(compute_metric(empty, MetricName{}), validation_error);
}

TEST_CASE("compute_all groups by checkpoint and task") {
    std::mt19937_64 gen(46);
    std::vector<ItemScoreRecord> records;
    for (int step : {100, 200}) {
        for (const char* task : {"t1", "t2"}) {
            for (int i = 0; i < 3; ++i) {
                auto rec = random_item(gen, "item-" + std::to_string(i));
                rec.key.step = step;
                rec.task = task;
                records.push_back(rec);
            }
        }
    }
    auto points = compute_all(records, {MetricName{BaseMetric::accuracy,
                                                   NormalizationMode::per_char}});
    CHECK(points.size() == 4);

    CHECK(compute_all({}, {MetricName{}}).empty());

    auto shuffled = records;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    auto points2 = compute_all(shuffled, {MetricName{BaseMetric::accuracy,
                                                     NormalizationMode::per_char}});
    CHECK(points == points2);

    auto points_mt = compute_all(records,
                                 {MetricName{BaseMetric::accuracy, NormalizationMode::per_char}},
                                 false, NormalizationMode::per_char, 4);
    CHECK(points == points_mt);
}

TEST_CASE("metric names round-trip through their serialized form") {
    for (const auto& name : all_metric_names()) {
        auto parsed = parse_metric_name(to_string(name));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == name);
    }
    CHECK(!parse_metric_name("nonsense").has_value());
    CHECK(to_string(MetricName{BaseMetric::correct_prob, NormalizationMode::per_char}) ==
          "correct_prob_per_char");
}
