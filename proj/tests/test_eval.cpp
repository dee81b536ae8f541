#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ringkit/errors.hpp"
#include "ringkit/eval.hpp"

using namespace ringkit;

namespace {

std::vector<PredPair> hand_pairs() {
    return {{80.0, 82.0, ActivityTag::Sitting, "a"}, {90.0, 88.0, ActivityTag::Sitting, "a"}};
}

std::vector<PredPair> random_pairs(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ref(60.0, 100.0);
    std::normal_distribution<double> err(0.0, 4.0);
    std::vector<PredPair> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = ref(rng);
        out.push_back({y, y + err(rng),
                       i % 3 == 0 ? ActivityTag::Walking : ActivityTag::Sitting,
                       "subj" + std::to_string(i % 7)});
    }
    return out;
}

} // namespace

TEST_CASE("hand-checked metrics") {
    const MetricReport r = metrics(hand_pairs());
    CHECK(r.n == 2);
    CHECK(r.mae == 2.0);
    CHECK(r.rmse == 2.0);
    CHECK(r.mape_percent == doctest::Approx(2.36).epsilon(0.01 / 2.36));
    REQUIRE(r.pearson.has_value());
    CHECK(*r.pearson == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identical estimates give zero error and perfect correlation") {
    std::vector<PredPair> pairs;
    for (int i = 0; i < 5; ++i) {
        pairs.push_back({70.0 + i, 70.0 + i, ActivityTag::Sitting, "a"});
    }
    const MetricReport r = metrics(pairs);
    CHECK(r.mae == 0.0);
    CHECK(r.rmse == 0.0);
    CHECK(r.mape_percent == 0.0);
    REQUIRE(r.pearson.has_value());
    CHECK(*r.pearson == doctest::Approx(1.0));
}

TEST_CASE("constant estimates make the correlation degenerate") {
    std::vector<PredPair> pairs;
    for (int i = 0; i < 5; ++i) {
        pairs.push_back({70.0 + i, 75.0, ActivityTag::Sitting, "a"});
    }
    const MetricReport r = metrics(pairs);
    CHECK(!r.pearson.has_value());
    CHECK(r.pearson_degenerate);
}

TEST_CASE("zero references are excluded from MAPE only and counted") {
    std::vector<PredPair> pairs = hand_pairs();
    pairs.push_back({0.0, 5.0, ActivityTag::Sitting, "a"});
    const MetricReport r = metrics(pairs);
    CHECK(r.n == 3);
    CHECK(r.mape_excluded_zero_reference == 1);
    CHECK(r.mape_excluded_zero_reference + 2 == r.n);
    CHECK(r.mae == doctest::Approx(3.0)); // the zero-reference pair still counts
}

TEST_CASE("metrics on empty input is an error") {
    CHECK_THROWS_AS(metrics({}), EmptyInput);
}

TEST_CASE("rmse is never below mae") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const MetricReport r = metrics(random_pairs(50, seed));
        CHECK(r.rmse >= r.mae);
    }
}

TEST_CASE("pearson is invariant under positive affine transform of estimates") {
    const std::vector<PredPair> pairs = random_pairs(100, 3);
    const MetricReport base = metrics(pairs);
    std::vector<PredPair> transformed = pairs;
    for (PredPair& p : transformed) p.estimate = 2.5 * p.estimate + 7.0;
    const MetricReport moved = metrics(transformed);
    REQUIRE(base.pearson.has_value());
    REQUIRE(moved.pearson.has_value());
    CHECK(*moved.pearson == doctest::Approx(*base.pearson).epsilon(1e-9));
}

TEST_CASE("pooled fold merge is bit-exact for any partition") {
    const std::vector<PredPair> all = random_pairs(200, 12);
    const MetricReport whole = metrics(all);

    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> fold(0, 4);
        std::vector<std::vector<PredPair>> parts(5);
        for (const PredPair& p : all) {
            parts[static_cast<std::size_t>(fold(rng))].push_back(p);
        }
        const MetricReport merged = merge_folds(parts, MergeMode::Pooled);
        CHECK(merged.n == whole.n);
        CHECK(merged.mae == whole.mae);
        CHECK(merged.rmse == whole.rmse);
        CHECK(merged.mape_percent == whole.mape_percent);
        REQUIRE(merged.pearson.has_value());
        CHECK(*merged.pearson == *whole.pearson);
        CHECK(*merged.se_mae == *whole.se_mae);
    }
}

TEST_CASE("equal fold error distributions pool to the per-fold value") {
    std::vector<std::vector<PredPair>> folds;
    for (int f = 0; f < 5; ++f) {
        folds.push_back({{80.0, 82.0, ActivityTag::Sitting, "s"},
                         {90.0, 88.0, ActivityTag::Sitting, "s"}});
    }
    const MetricReport pooled = merge_folds(folds, MergeMode::Pooled);
    CHECK(pooled.mae == 2.0);
    CHECK(pooled.n == 10);
}

TEST_CASE("unequal folds pool by pair count") {
    std::vector<std::vector<PredPair>> folds(2);
    folds[0] = {{100.0, 101.0, ActivityTag::Sitting, "a"}}; // error 1
    for (int i = 0; i < 3; ++i) {
        folds[1].push_back({100.0, 105.0, ActivityTag::Sitting, "b"}); // error 5
    }
    const MetricReport pooled = merge_folds(folds, MergeMode::Pooled);
    CHECK(pooled.mae == doctest::Approx((1.0 + 15.0) / 4.0));
    const MetricReport averaged = merge_folds(folds, MergeMode::MeanOfFolds);
    CHECK(averaged.mae == doctest::Approx(3.0)); // (1 + 5) / 2
}

TEST_CASE("stratification by scenario and activity") {
    std::vector<PredPair> pairs;
    for (int i = 0; i < 12; ++i) pairs.push_back({80.0, 82.0, ActivityTag::Sitting, "a"});
    for (int i = 0; i < 11; ++i) pairs.push_back({80.0, 90.0, ActivityTag::Walking, "a"});

    const auto by_scenario = stratify(pairs, StratifyBy::Scenario);
    REQUIRE(by_scenario.size() == 2);
    CHECK(by_scenario.at("stationary").n == 12);
    CHECK(by_scenario.at("motion").n == 11);
    CHECK(by_scenario.at("stationary").n + by_scenario.at("motion").n == pairs.size());
    CHECK(by_scenario.at("motion").mae > by_scenario.at("stationary").mae);
    CHECK(!by_scenario.at("motion").low_n);

    const auto by_activity = stratify(pairs, StratifyBy::Activity);
    CHECK(by_activity.count("sitting") == 1);
    CHECK(by_activity.count("walking") == 1);
}

TEST_CASE("all-sitting pairs form a single stationary group") {
    std::vector<PredPair> pairs(5, PredPair{80.0, 81.0, ActivityTag::Sitting, "a"});
    const auto groups = stratify(pairs, StratifyBy::Scenario);
    REQUIRE(groups.size() == 1);
    CHECK(groups.count("stationary") == 1);
    CHECK(groups.at("stationary").low_n); // n = 5 < 10
}

TEST_CASE("report CSV is deterministic and ordered") {
    std::vector<ReportRow> rows;
    rows.push_back({"hr", "fft", "all", "stationary", metrics(hand_pairs())});
    rows.push_back({"hr", "fft", "all", "all", metrics(hand_pairs())});
    const auto tmp = std::filesystem::temp_directory_path() / "ringkit_report_test.csv";
    write_report_csv(tmp, rows);
    std::ifstream in(tmp);
    std::string header;
    std::string first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "task,method,ring_type,scenario,n,mae,se_mae,rmse,mape,pearson");
    CHECK(first.substr(0, 15) == "hr,fft,all,all,");
    std::filesystem::remove(tmp);

    const std::string json_text = report_rows_to_json(rows);
    CHECK(json_text.find("\"scenario\": \"all\"") != std::string::npos);
}
