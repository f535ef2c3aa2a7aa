#include "fixtures.hpp"

#include "stagewise/components.hpp"
#include "stagewise/error.hpp"
#include "stagewise/serialize.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace stagewise;

namespace {

const Registry &reg() {
    static const Registry r = registry_default();
    return r;
}

LearnerChoice base(const std::string &id, std::optional<ParamMap> params = std::nullopt) {
    return LearnerChoice{id, std::move(params), std::nullopt};
}

std::vector<int> fit_predict(const LearnerChoice &c, const Dataset &train, const Matrix &rows, std::uint64_t seed = 1) {
    return reg().fit(c, train, seed).predict(rows);
}

/// Unique random rows with arbitrary (but consistent) labels.
Dataset consistent_random(std::uint64_t seed, std::size_t n, std::size_t d, int k) {
    return fixtures::random_dataset(seed, n, d, k);
}

}  // namespace

TEST(Registry, Catalog) {
    EXPECT_EQ(reg().base_learner_ids(),
              (std::vector<std::string>{"knn", "gaussian_nb", "decision_tree", "logistic_regression", "random_forest"}));
    EXPECT_EQ(reg().meta_learner_ids(), (std::vector<std::string>{"bagging", "adaboost"}));
    EXPECT_EQ(reg().scaler_ids(), (std::vector<std::string>{"standardize", "minmax", "quantile_rank"}));
    EXPECT_EQ(reg().filter_ids(),
              (std::vector<std::string>{"pearson_correlation", "mutual_information", "chi_squared", "variance"}));
    EXPECT_EQ(reg().default_params("knn"), (ParamMap{{"k", std::int64_t{5}}}));
}

TEST(Registry, DefaultsLieInSpace) {
    for (const auto &spec : reg().learners()) {
        EXPECT_TRUE(params_within(spec.param_space, spec.default_params)) << spec.id;
    }
}

TEST(Registry, UnknownIds) {
    EXPECT_THROW((void)reg().learner("svm"), invalid_argument);
    EXPECT_THROW((void)reg().fit_scaler("robust", Matrix(2, 1, 0.0)), invalid_argument);
    EXPECT_THROW((void)reg().rank_features("relief", fixtures::blobs(0, 10, 2)), invalid_argument);
    Rng rng(0);
    EXPECT_THROW((void)reg().sample_params("svm", rng), invalid_argument);
}

TEST(Registry, RejectsParamsOutsideSpace) {
    EXPECT_THROW(reg().validate(base("knn", ParamMap{{"k", std::int64_t{4}}})), invalid_argument);
    EXPECT_THROW(reg().validate(base("knn", ParamMap{{"k", 5.0}})), invalid_argument);
    EXPECT_THROW(reg().validate(base("knn", ParamMap{{"k", std::int64_t{5}}, {"p", std::int64_t{2}}})), invalid_argument);
    EXPECT_NO_THROW(reg().validate(base("knn", ParamMap{{"k", std::int64_t{21}}})));
}

TEST(Registry, JsonDump) {
    const auto j = registry_to_json(reg());
    EXPECT_EQ(j.at("learners").size(), 7u);
    EXPECT_EQ(j.at("scalers").size(), 3u);
    EXPECT_EQ(j.at("filters").size(), 4u);
}

TEST(Learners, NaiveBayesSeparatesDisjointIntervals) {
    Matrix x(40, 1);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
        y[i] = i < 20 ? 0 : 1;
        x(i, 0) = y[i] == 0 ? static_cast<double>(i) * 0.1 : 10.0 + static_cast<double>(i) * 0.1;
    }
    const auto d = Dataset::from_numeric(x, y, 2);
    EXPECT_EQ(fit_predict(base("gaussian_nb"), d, d.instances()), d.labels());
}

TEST(Learners, UnboundedTreeFitsConsistentData) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = consistent_random(seed, 80, 3, 3);
        EXPECT_EQ(fit_predict(base("decision_tree"), d, d.instances()), d.labels());
    }
}

TEST(Learners, OneNearestNeighbourRecallsTrainingSet) {
    const auto d = consistent_random(7, 60, 4, 3);
    EXPECT_EQ(fit_predict(base("knn", ParamMap{{"k", std::int64_t{1}}}), d, d.instances()), d.labels());
}

TEST(Learners, EmptyRowsGiveEmptyPredictions) {
    const auto d = fixtures::blobs(0, 20, 2);
    for (const auto &id : reg().base_learner_ids()) {
        EXPECT_TRUE(fit_predict(base(id), d, Matrix(0, 2)).empty()) << id;
    }
}

TEST(Learners, ColumnMismatchThrows) {
    const auto d = fixtures::blobs(0, 20, 2);
    const auto m = reg().fit(base("knn"), d, 0);
    EXPECT_THROW((void)m.predict(Matrix(3, 3)), invalid_argument);
}

TEST(Learners, ConstantFeaturesYieldMajorityUnderNaiveBayes) {
    const std::vector<int> y = {0, 1, 1, 2, 1, 0, 1};
    std::vector<std::size_t> counts(3, 0);
    for (const int v : y) {
        ++counts[static_cast<std::size_t>(v)];
    }
    const int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const auto d = Dataset::from_numeric(Matrix(7, 2, 3.0), y, 3);
    for (const int p : fit_predict(base("gaussian_nb"), d, d.instances())) {
        EXPECT_EQ(p, majority);
    }
}

TEST(Learners, SingleClassPredictsThatClass) {
    const auto d = Dataset::from_numeric(fixtures::random_dataset(1, 15, 3, 2).instances(), std::vector<int>(15, 1), 2);
    const auto probe = fixtures::random_dataset(2, 9, 3, 2).instances();
    for (const auto &id : reg().base_learner_ids()) {
        for (const int p : fit_predict(base(id), d, probe)) {
            EXPECT_EQ(p, 1) << id;
        }
    }
    for (const auto &meta : reg().meta_learner_ids()) {
        const auto choice = reg().wrap_meta(meta, std::nullopt, "decision_tree", std::nullopt);
        for (const int p : fit_predict(choice, d, probe)) {
            EXPECT_EQ(p, 1) << meta;
        }
    }
}

TEST(Learners, DegenerateKnnFallsBackToAvailableRows) {
    const auto d = Dataset::from_numeric(Matrix(1, 1, 0.0), {1}, 2);
    EXPECT_EQ(fit_predict(base("knn", ParamMap{{"k", std::int64_t{21}}}), d, Matrix(2, 1, 5.0)), (std::vector<int>{1, 1}));
}

TEST(Learners, Deterministic) {
    const auto d = consistent_random(3, 120, 4, 3);
    const auto probe = consistent_random(4, 30, 4, 3).instances();
    for (const auto &id : reg().base_learner_ids()) {
        EXPECT_EQ(fit_predict(base(id), d, probe, 9), fit_predict(base(id), d, probe, 9)) << id;
    }
    for (const auto &meta : reg().meta_learner_ids()) {
        const auto c = reg().wrap_meta(meta, std::nullopt, "decision_tree", std::nullopt);
        EXPECT_EQ(fit_predict(c, d, probe, 9), fit_predict(c, d, probe, 9)) << meta;
    }
}

TEST(Learners, PredictionsStayWithinTrainingClasses) {
    const auto d = Dataset::from_numeric(fixtures::random_dataset(5, 40, 2, 2).instances(), fixtures::random_dataset(5, 40, 2, 2).labels(), 4);
    const auto probe = fixtures::random_dataset(6, 30, 2, 2).instances();
    for (const auto &id : reg().base_learner_ids()) {
        for (const int p : fit_predict(base(id), d, probe)) {
            EXPECT_TRUE(p == 0 || p == 1) << id;
        }
    }
}

TEST(Learners, MinMaxOnUnitDataLeavesPredictionsUnchanged) {
    Rng rng(8);
    Matrix x(50, 3);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            x(i, j) = i == 0 ? 0.0 : (i == 1 ? 1.0 : rng.uniform01());
        }
        y[i] = x(i, 0) + x(i, 1) > 1.0 ? 1 : 0;
    }
    const auto d = Dataset::from_numeric(x, y, 2);
    const auto scaled = d.with_instances(reg().fit_scaler("minmax", x)->transform(x));
    const auto probe = consistent_random(9, 20, 3, 2).instances();
    Matrix unit_probe(20, 3);
    for (std::size_t i = 0; i < 20; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            unit_probe(i, j) = 1.0 / (1.0 + std::exp(-probe(i, j)));
        }
    }
    for (const std::string id : {"knn", "decision_tree"}) {
        EXPECT_EQ(fit_predict(base(id), d, unit_probe), fit_predict(base(id), scaled, unit_probe)) << id;
    }
}

TEST(Sampling, KnnDrawsFromGrid) {
    Rng rng(1);
    const std::set<std::int64_t> grid = {1, 3, 5, 7, 11, 15, 21};
    for (int i = 0; i < 200; ++i) {
        EXPECT_TRUE(grid.contains(get_int(reg().sample_params("knn", rng), "k")));
    }
}

TEST(Sampling, FixedSeedRepeats) {
    for (const auto &spec : reg().learners()) {
        Rng a(77);
        Rng b(77);
        EXPECT_EQ(reg().sample_params(spec.id, a), reg().sample_params(spec.id, b));
    }
}

TEST(Sampling, AlwaysInsideSpace) {
    Rng rng(5);
    for (const auto &spec : reg().learners()) {
        for (int i = 0; i < 100; ++i) {
            EXPECT_TRUE(params_within(spec.param_space, reg().sample_params(spec.id, rng))) << spec.id;
        }
    }
}

TEST(Sampling, LogUniformMass) {
    const auto &space = reg().learner("logistic_regression").param_space;
    const auto &dom = std::get<LogUniformDomain>(space.at("learning_rate"));
    ASSERT_DOUBLE_EQ(dom.lo, 1e-4);
    ASSERT_DOUBLE_EQ(dom.hi, 1e-1);
    const double expected = (std::log(1e-3) - std::log(dom.lo)) / (std::log(dom.hi) - std::log(dom.lo));
    Rng rng(2024);
    std::size_t hits = 0;
    const std::size_t n = 10000;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::get<double>(sample_domain(dom, rng));
        hits += v >= 1e-4 && v <= 1e-3 ? 1 : 0;
    }
    EXPECT_NEAR(static_cast<double>(hits) / static_cast<double>(n), expected, 0.02);
}

TEST(Params, Formatting) {
    EXPECT_EQ(format_params(ParamMap{{"b", 1.0}, {"a", std::int64_t{1}}, {"c", true}, {"d", std::string("x")}}),
              "a=1,b=1.0,c=true,d=x");
    EXPECT_EQ(format_value(1e-4), "1e-04");
}

TEST(Params, GridEnumeration) {
    const auto grid = enumerate_grid(reg().learner("knn").param_space, 30);
    ASSERT_TRUE(grid.has_value());
    EXPECT_EQ(grid->size(), 7u);
    EXPECT_FALSE(enumerate_grid(reg().learner("gaussian_nb").param_space, 30).has_value());
    EXPECT_FALSE(enumerate_grid(reg().learner("decision_tree").param_space, 30).has_value());  // 9 * 19 values
}

TEST(Meta, RejectsNesting) {
    EXPECT_THROW((void)reg().wrap_meta("bagging", std::nullopt, "adaboost", std::nullopt), invalid_argument);
    EXPECT_THROW((void)reg().wrap_meta("knn", std::nullopt, "decision_tree", std::nullopt), invalid_argument);
}

TEST(Meta, SingleUnperturbedBagEqualsBase) {
    const auto d = consistent_random(11, 90, 3, 3);
    const auto probe = consistent_random(12, 40, 3, 3).instances();
    const ParamMap one{{"bootstrap", false}, {"n_estimators", std::int64_t{1}}, {"sample_fraction", 1.0}};
    for (const auto &id : reg().base_learner_ids()) {
        const auto bagged = reg().wrap_meta("bagging", one, id, std::nullopt);
        EXPECT_EQ(fit_predict(bagged, d, probe, 4), fit_predict(base(id), d, probe, 4)) << id;
    }
}

TEST(Meta, BoostedStumpsImproveOnStump) {
    Rng rng(13);
    Matrix x(200, 2);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        x(i, 0) = rng.uniform(-1, 1);
        x(i, 1) = rng.uniform(-1, 1);
        y[i] = x(i, 0) + 0.7 * x(i, 1) > 0 ? 1 : 0;
    }
    const auto d = Dataset::from_numeric(x, y, 2);
    const ParamMap stump{{"max_depth", std::int64_t{1}}, {"min_split", std::int64_t{2}}};
    const auto single = fixtures::mismatches(fit_predict(base("decision_tree", stump), d, x), y);
    const auto boosted_choice = reg().wrap_meta("adaboost", std::nullopt, "decision_tree", stump);
    const auto boosted = fixtures::mismatches(fit_predict(boosted_choice, d, x), y);
    EXPECT_LE(boosted, single);
    EXPECT_LT(boosted, single);
}

TEST(Meta, BaggedKnnDeterministic) {
    const auto d = consistent_random(14, 80, 3, 2);
    const auto probe = consistent_random(15, 30, 3, 2).instances();
    const ParamMap p{{"bootstrap", true}, {"n_estimators", std::int64_t{25}}, {"sample_fraction", 1.0}};
    const auto c = reg().wrap_meta("bagging", p, "knn", ParamMap{{"k", std::int64_t{1}}});
    EXPECT_EQ(fit_predict(c, d, probe, 21), fit_predict(c, d, probe, 21));
}

TEST(Scalers, StandardizeExample) {
    const Matrix m(2, 1, std::vector<double>{2.0, 4.0});
    const auto out = reg().fit_scaler("standardize", m)->transform(m);
    EXPECT_DOUBLE_EQ(out(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(out(1, 0), 1.0);
}

TEST(Scalers, MinMaxConstantColumnPassesThrough) {
    const Matrix m(3, 1, 5.0);
    EXPECT_EQ(reg().fit_scaler("minmax", m)->transform(m), m);
}

TEST(Scalers, QuantileRankExample) {
    const Matrix m(3, 1, std::vector<double>{10.0, 20.0, 30.0});
    const auto out = reg().fit_scaler("quantile_rank", m)->transform(m);
    EXPECT_DOUBLE_EQ(out(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(out(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(out(2, 0), 1.0);
    const auto unseen = reg().fit_scaler("quantile_rank", m)->transform(Matrix(3, 1, std::vector<double>{5.0, 15.0, 99.0}));
    EXPECT_DOUBLE_EQ(unseen(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(unseen(1, 0), 0.25);
    EXPECT_DOUBLE_EQ(unseen(2, 0), 1.0);
}

TEST(Scalers, StandardizeStatistics) {
    const auto d = fixtures::random_dataset(16, 50, 4, 2);
    const auto out = reg().fit_scaler("standardize", d.instances())->transform(d.instances());
    for (std::size_t j = 0; j < 4; ++j) {
        const auto col = out.column(j);
        const double m = std::accumulate(col.begin(), col.end(), 0.0) / 50.0;
        double var = 0.0;
        for (const double v : col) {
            var += (v - m) * (v - m);
        }
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(var / 50.0, 1.0, 1e-12);
    }
}

TEST(Scalers, StandardizeInverseRoundTrip) {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix m(10, 3);
        for (std::size_t i = 0; i < 10; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                m(i, j) = rng.normal(rng.uniform(-1e3, 1e3), rng.uniform(1e-3, 1e3));
            }
        }
        const StandardScaler s(m);
        const auto back = s.inverse_transform(s.transform(m));
        for (std::size_t i = 0; i < 10; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                EXPECT_NEAR(back(i, j), m(i, j), 1e-9 * std::max(1.0, std::abs(m(i, j))));
            }
        }
    }
}

TEST(Scalers, TransformUsesFittedStatisticsOnly) {
    const Matrix fit(2, 1, std::vector<double>{0.0, 2.0});
    const auto s = reg().fit_scaler("minmax", fit);
    const auto out = s->transform(Matrix(1, 1, std::vector<double>{4.0}));
    EXPECT_DOUBLE_EQ(out(0, 0), 2.0);
}

TEST(Filters, VarianceExample) {
    Matrix m(4, 3);
    const std::vector<double> c1 = {0.0, 0.0, 2.0 * std::sqrt(3.0), 2.0 * std::sqrt(3.0)};  // population variance 3
    const std::vector<double> c2 = {1.0, -1.0, 1.0, -1.0};                                // population variance 1
    for (std::size_t i = 0; i < 4; ++i) {
        m(i, 0) = 7.0;
        m(i, 1) = c1[i];
        m(i, 2) = c2[i];
    }
    const auto d = Dataset::from_numeric(m, {0, 1, 0, 1}, 2);
    EXPECT_EQ(reg().rank_features("variance", d), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Filters, PearsonFindsLabelCopy) {
    auto base_data = fixtures::random_dataset(18, 60, 4, 2);
    Matrix x = base_data.instances();
    for (std::size_t i = 0; i < 60; ++i) {
        x(i, 2) = base_data.labels()[i] == 1 ? 1.0 : -1.0;
    }
    const auto d = base_data.with_instances(x);
    EXPECT_EQ(reg().rank_features("pearson_correlation", d).front(), 2u);
}

TEST(Filters, TiesFavourLowerIndex) {
    auto base_data = fixtures::random_dataset(19, 40, 1, 2);
    Matrix x(40, 2);
    for (std::size_t i = 0; i < 40; ++i) {
        x(i, 0) = x(i, 1) = base_data.instances()(i, 0);
    }
    const auto d = Dataset::from_numeric(x, base_data.labels(), 2);
    for (const auto &f : reg().filter_ids()) {
        EXPECT_EQ(reg().rank_features(f, d), (std::vector<std::size_t>{0, 1})) << f;
    }
}

TEST(Filters, RankingIsPermutation) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto d = fixtures::random_dataset(seed, 30, 1 + seed % 7, 2 + static_cast<int>(seed % 3));
        for (const auto &f : reg().filter_ids()) {
            auto r = reg().rank_features(f, d);
            std::sort(r.begin(), r.end());
            std::vector<std::size_t> expected(d.cols());
            std::iota(expected.begin(), expected.end(), 0);
            EXPECT_EQ(r, expected) << f;
        }
    }
}

TEST(Filters, RankingFromScores) {
    const std::vector<double> s = {0.5, std::nan(""), 0.9, 0.5};
    EXPECT_EQ(ranking_from_scores(s), (std::vector<std::size_t>{2, 0, 3, 1}));
}
