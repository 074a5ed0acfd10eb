#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "lrbench/errors.hpp"
#include "lrbench/metrics.hpp"
#include "lrbench/rng.hpp"
#include "golden_fixture.hpp"

using namespace lrbench;

TEST_CASE("relative robustness matches the published example") {
    // a_hr=2.7%, a_16=1.0% -> ~37%
    CHECK(relative_robustness(0.027, 0.010) == doctest::Approx(0.370).epsilon(0.006));
    CHECK(relative_robustness(0.5, 0.5) == 1.0);
    CHECK(relative_robustness(0.194, 0.077) == doctest::Approx(0.3969).epsilon(1e-4));
    // robustness can exceed 1 when LR beats HR
    CHECK(relative_robustness(0.10, 0.12) > 1.0);
}

TEST_CASE("zero HR accuracy yields zero with a degenerate flag") {
    unsigned flags = kCellNone;
    CHECK(relative_robustness(0.0, 0.1, &flags) == 0.0);
    CHECK((flags & kCellDegenerateHr) != 0);
}

TEST_CASE("accuracy gap") {
    CHECK(accuracy_gap(0.027, 100) == doctest::Approx(0.017));
    CHECK(accuracy_gap(0.1, 10) == 0.0);
    CHECK(accuracy_gap(0.174, 10) == doctest::Approx(0.074));
    unsigned flags = kCellNone;
    CHECK(accuracy_gap(0.05, 10, &flags) == 0.0);  // below random, clamped
    CHECK((flags & kCellGapClamped) != 0);
    CHECK_THROWS_AS(accuracy_gap(0.5, 1), ValidationError);
}

TEST_CASE("improved robustness follows the damped formula") {
    CHECK(improved_robustness(0.371, 0.017, 200.0) == doctest::Approx(0.0209).epsilon(0.01));
    CHECK(improved_robustness(0.9, 0.0, 200.0) == 0.0);
    CHECK(improved_robustness(0.398, 0.094, 200.0) == doctest::Approx(0.330).epsilon(1e-3));
    CHECK_THROWS_AS(improved_robustness(0.5, -0.1, 200.0), ValidationError);
    CHECK_THROWS_AS(improved_robustness(0.5, 1.1, 200.0), ValidationError);
    CHECK_THROWS_AS(improved_robustness(0.5, 0.5, 0.5), ValidationError);
}

TEST_CASE("improved robustness is monotone and approaches gamma at gap 1") {
    for (double gamma : {0.1, 0.5, 1.0}) {
        double prev = -1.0;
        for (int i = 0; i <= 50; ++i) {
            const double gap = i / 50.0;
            const double value = improved_robustness(gamma, gap, 200.0);
            CHECK(value >= prev);
            prev = value;
        }
        CHECK(std::abs(improved_robustness(gamma, 1.0, 200.0) - gamma) <=
              gamma * std::exp(-200.0));
    }
}

TEST_CASE("sar is the arithmetic mean") {
    CHECK(sar(std::vector<double>{0.5, 0.7}) == doctest::Approx(0.6));
    CHECK(sar(std::vector<double>{0.42}) == doctest::Approx(0.42));
    CHECK_THROWS_AS(sar(std::vector<double>{}), ValidationError);

    Rng rng(7);
    std::vector<double> values;
    for (int i = 0; i < 15; ++i) {
        values.push_back(rng.uniform(-1.0, 2.0));
    }
    double expected = 0.0;
    for (const double v : values) {
        expected += v;
    }
    expected /= 15.0;
    CHECK(sar(values) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("war weights magnitudes") {
    CHECK(war(std::vector<double>{0.4, 0.8}, std::vector<double>{1.0, 0.5}) ==
          doctest::Approx(0.5333333333).epsilon(1e-9));
    CHECK(war(std::vector<double>{0.0, 0.0, 0.0}, std::vector<double>{0.3, 0.2, 0.9}) == 0.0);

    // uniform weights reduce to the mean of |Gamma|
    Rng rng(11);
    std::vector<double> gammas;
    std::vector<double> uniform;
    double mean_abs = 0.0;
    for (int i = 0; i < 15; ++i) {
        gammas.push_back(rng.uniform(-0.5, 1.5));
        uniform.push_back(1.0);
        mean_abs += std::abs(gammas.back());
    }
    mean_abs /= 15.0;
    CHECK(war(gammas, uniform) == doctest::Approx(mean_abs).epsilon(1e-12));

    CHECK_THROWS_AS(war(std::vector<double>{1.0}, std::vector<double>{0.0}), ValidationError);
}

TEST_CASE("map-keyed war names the symmetric difference") {
    const std::map<std::string, double> scores{{"a", 0.5}, {"b", 0.7}};
    const std::map<std::string, double> weights{{"b", 1.0}, {"c", 1.0}};
    try {
        war(scores, weights);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("a") != std::string::npos);
        CHECK(msg.find("c") != std::string::npos);
    }
}

TEST_CASE("average ranks sum to M(M+1)/2 with and without ties") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = rng.uniform_int(2, 20);
        std::vector<double> values;
        for (int i = 0; i < m; ++i) {
            // coarse grid forces ties
            values.push_back(static_cast<double>(rng.uniform_int(0, 4)));
        }
        const auto ranks = average_ranks(values);
        double sum = 0.0;
        for (const double r : ranks) {
            sum += r;
        }
        CHECK(sum == doctest::Approx(m * (m + 1) / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("spearman reference values") {
    const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
    CHECK(spearman(a, a) == doctest::Approx(1.0));
    const std::vector<double> rev{4.0, 3.0, 2.0, 1.0};
    CHECK(spearman(a, rev) == doctest::Approx(-1.0));
    const std::vector<double> swapped{1.0, 3.0, 2.0, 4.0};
    CHECK(spearman(a, swapped) == doctest::Approx(0.8).epsilon(1e-12));

    bool degenerate = false;
    CHECK(spearman(std::vector<double>{2.0, 2.0, 2.0}, std::vector<double>{1.0, 2.0, 3.0},
                   &degenerate) == 0.0);
    CHECK(degenerate);
    CHECK_THROWS_AS(spearman(std::vector<double>{1.0}, std::vector<double>{1.0}),
                    ValidationError);
}

TEST_CASE("spearman is invariant under strictly monotone transforms") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = rng.uniform_int(3, 30);
        std::vector<double> x;
        std::vector<double> y;
        for (int i = 0; i < m; ++i) {
            x.push_back(rng.uniform(-5.0, 5.0));
            y.push_back(rng.uniform(-5.0, 5.0));
        }
        const double base = spearman(x, y);
        std::vector<double> tx = x;
        std::vector<double> ty = y;
        for (double& v : tx) {
            v = std::exp(0.5 * v);
        }
        for (double& v : ty) {
            v = v * v * v + 2.0 * v;
        }
        CHECK(spearman(tx, ty) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("compute_all runs the formula chain") {
    std::vector<AccuracyRecord> records = {
        {"m", "bb", "d", 224, 0.5, std::nullopt},
        {"m", "bb", "d", 16, 0.25, std::nullopt},
    };
    const ResultsTable table(std::move(records), {{"d", 10}}, {{"m", "bb", 224, std::nullopt}});
    const auto result = compute_all(table, RobustnessConfig{});

    REQUIRE(result.cells.size() == 2);  // n=16 and the HR row itself
    const auto& cell16 = result.cells.front().resolution == 16 ? result.cells.front()
                                                               : result.cells.back();
    CHECK(cell16.gamma == doctest::Approx(0.5));
    CHECK(cell16.gap == doctest::Approx(0.4));
    CHECK(cell16.gamma_improved == doctest::Approx(0.5 * (1.0 - std::exp(-32.0))).epsilon(1e-12));

    bool found16 = false;
    for (const auto& agg : result.aggregates) {
        if (agg.resolution == 16) {
            found16 = true;
            CHECK(agg.sar == doctest::Approx(0.5));
            CHECK(agg.war == doctest::Approx(cell16.gamma_improved));
            CHECK(agg.acc == doctest::Approx(0.25));
        }
    }
    CHECK(found16);
}

TEST_CASE("undegraded accuracy gives SAR 1") {
    std::vector<AccuracyRecord> records;
    std::vector<DatasetMeta> datasets;
    for (int d = 0; d < 3; ++d) {
        const std::string id = "d" + std::to_string(d);
        datasets.push_back({id, 10 + d});
        records.push_back({"m", "bb", id, 224, 0.6, std::nullopt});
        records.push_back({"m", "bb", id, 16, 0.6, std::nullopt});
    }
    const ResultsTable table(std::move(records), std::move(datasets),
                             {{"m", "bb", 224, std::nullopt}});
    const auto result = compute_all(table, RobustnessConfig{});
    for (const auto& agg : result.aggregates) {
        CHECK(agg.sar == doctest::Approx(1.0));
    }
}

TEST_CASE("a model without HR cells is flagged, not dropped silently") {
    std::vector<AccuracyRecord> records = {
        {"has-hr", "bb", "d", 224, 0.5, std::nullopt},
        {"has-hr", "bb", "d", 16, 0.25, std::nullopt},
        {"no-hr", "bb", "d", 16, 0.25, std::nullopt},
    };
    const ResultsTable table(std::move(records), {{"d", 10}},
                             {{"has-hr", "bb", 224, std::nullopt},
                              {"no-hr", "bb", 224, std::nullopt}});
    const auto result = compute_all(table, RobustnessConfig{});
    REQUIRE(result.models_without_hr.size() == 1);
    CHECK(result.models_without_hr.front() == "no-hr");
}

TEST_CASE("compute_all requires weights for every present dataset") {
    std::vector<AccuracyRecord> records = {
        {"m", "bb", "d", 224, 0.5, std::nullopt},
        {"m", "bb", "d", 16, 0.25, std::nullopt},
    };
    const ResultsTable table(std::move(records), {{"d", 10}}, {{"m", "bb", 224, std::nullopt}});
    CHECK_THROWS_AS(compute_all(table, RobustnessConfig{}, {{"other", 1.0}}), ValidationError);
}

TEST_CASE("golden fixture cells reproduce against a high-precision oracle") {
    // The oracle recomputes the chain directly from the fixture accuracies;
    // the comparison against the table's printed columns is the acceptance
    // suite's business.
    const auto table = lrbench::testing::golden_table();
    const auto result = compute_all(table, RobustnessConfig{});
    int checked = 0;
    for (const auto& row : lrbench::testing::golden_rows()) {
        const double a_hr = row.a_hr / 100.0;
        const int num_classes = table.dataset(row.dataset).num_classes;
        for (const auto& cell : row.cells) {
            const double a_n = cell.a_n / 100.0;
            const double gamma = 1.0 - (a_hr - a_n) / a_hr;
            const double gap = std::max(0.0, a_hr - 1.0 / num_classes);
            const double damped = gamma * (1.0 - std::exp(-200.0 * gap * gap));
            for (const auto& got : result.cells) {
                if (got.model_id == row.model && got.dataset_id == row.dataset &&
                    got.resolution == cell.resolution) {
                    CHECK(got.gamma == doctest::Approx(gamma).epsilon(1e-12));
                    CHECK(got.gamma_improved == doctest::Approx(damped).epsilon(1e-12));
                    ++checked;
                }
            }
        }
    }
    CHECK(checked == 56);
}

TEST_CASE("cell flags round trip through their text form") {
    CHECK(cell_flags_to_string(kCellNone) == "");
    CHECK(cell_flags_from_string("") == kCellNone);
    const unsigned both = kCellDegenerateHr | kCellGapClamped;
    CHECK(cell_flags_from_string(cell_flags_to_string(both)) == both);
    CHECK_THROWS_AS(cell_flags_from_string("wat"), ValidationError);
}
