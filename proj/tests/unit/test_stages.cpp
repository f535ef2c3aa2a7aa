#include "fixtures.hpp"

#include "stagewise/error.hpp"
#include "stagewise/harness.hpp"
#include "stagewise/stages.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

using namespace stagewise;

namespace {

const Registry &reg() {
    static const Registry r = registry_default();
    return r;
}

/// Scorer driven by a function of the candidate; records every request.
class StubScorer final : public Scorer {
  public:
    using Fn = std::function<Score(const Candidate &, const ScoreRequest &)>;
    explicit StubScorer(Fn fn) : fn_(std::move(fn)) {}

    Score score(const Candidate &c, const Dataset &, const ScoreRequest &request) override {
        calls.push_back(candidate_key(c));
        return fn_(c, request);
    }
    [[nodiscard]] std::size_t evaluations() const override { return calls.size(); }

    std::vector<std::string> calls;

  private:
    Fn fn_;
};

Score ok(double mean) { return Score{mean, 0.0, std::vector<double>(5, mean), ScoreStatus::ok, {}}; }

Score failed() { return Score{0.0, 0.0, {}, ScoreStatus::failed_timeout, "deadline exceeded"}; }

StageContext context(Scorer &scorer, const Dataset &d, const Dataset *holdout = nullptr, Deadline deadline = {}) {
    return StageContext{scorer, reg(), d, holdout, 1, deadline, StageOptions{}, {}};
}

std::vector<std::string> keys(const CandidatePool &pool) {
    std::vector<std::string> out;
    for (const auto &e : pool.entries()) {
        out.push_back(e.key());
    }
    return out;
}

CandidatePool pool_of(const std::vector<std::pair<Candidate, double>> &entries) {
    CandidatePool pool;
    for (const auto &[c, s] : entries) {
        pool.add(ScoredCandidate{c, ok(s), "seed", std::nullopt});
    }
    return pool;
}

Candidate scaled(const std::string &scaler, const std::string &learner) {
    Candidate c = Candidate::bare(learner);
    c.scaler = scaler;
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Weights, TauExamples) {
    EXPECT_DOUBLE_EQ(tau(10000, 10000), 1.0);
    EXPECT_DOUBLE_EQ(tau(0, 10000), 0.0);
    EXPECT_DOUBLE_EQ(tau(100, 10000), 0.01);
    EXPECT_DOUBLE_EQ(tau(20000, 10000), 1.0);
}

TEST(Weights, OmegaExamples) {
    EXPECT_NEAR(omega(100, 500, 10000), 0.01 + 0.2 * 0.99, 1e-15);
    EXPECT_NEAR(omega(100, 500, 10000), 0.208, 1e-12);
    EXPECT_DOUBLE_EQ(omega(10000, 10000, 10000), 1.0);
    EXPECT_DOUBLE_EQ(omega(0, 700, 10000), 0.0);
}

TEST(Weights, FinalScoreExamples) {
    EXPECT_DOUBLE_EQ(final_score(0.2, 0.25, 0.0), 0.2);
    EXPECT_DOUBLE_EQ(final_score(0.2, 0.25, 1.0), 0.25);
    EXPECT_NEAR(final_score(0.20, 0.25, 0.208), 0.2104, 1e-12);
}

TEST(Weights, Properties) {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const double x = rng.uniform01();
        const double w = rng.uniform01();
        EXPECT_NEAR(final_score(x, x, w), x, 1e-15);
        const std::size_t total = 1 + rng.below(5000);
        const std::size_t n_bar = 1 + rng.below(5000);
        double prev = -1.0;
        for (std::size_t n = 0; n <= total; n += 1 + total / 50) {
            const double o = omega(n, total, n_bar);
            EXPECT_GE(o, prev - 1e-15);
            EXPECT_GE(o, 0.0);
            EXPECT_LE(o, 1.0 + 1e-15);
            prev = o;
        }
        if (total >= n_bar) {
            EXPECT_DOUBLE_EQ(omega(total, total, n_bar), 1.0);
        }
    }
}

// ---------------------------------------------------------------------------

TEST(Pool, DeduplicatesAndRejectsFailures) {
    CandidatePool pool;
    EXPECT_TRUE(pool.add(ScoredCandidate{Candidate::bare("knn"), ok(0.3), "a", std::nullopt}));
    EXPECT_FALSE(pool.add(ScoredCandidate{Candidate::bare("knn"), ok(0.1), "b", std::nullopt}));
    EXPECT_FALSE(pool.add(ScoredCandidate{Candidate::bare("gaussian_nb"), failed(), "a", std::nullopt}));
    EXPECT_EQ(pool.size(), 1u);
    EXPECT_EQ(pool.find("-|-|knn|default")->score.mean, 0.3);
}

TEST(Pool, OrderingIsStable) {
    const auto pool = pool_of({{Candidate::bare("knn"), 0.2}, {Candidate::bare("gaussian_nb"), 0.1}, {Candidate::bare("decision_tree"), 0.2}});
    const auto ranked = pool.by_score();
    EXPECT_EQ(ranked[0]->candidate.learner.learner, "gaussian_nb");
    EXPECT_EQ(ranked[1]->candidate.learner.learner, "knn");
    EXPECT_EQ(ranked[2]->candidate.learner.learner, "decision_tree");
    EXPECT_EQ(pool.best()->candidate.learner.learner, "gaussian_nb");
}

TEST(StageIds, KnownStages) {
    EXPECT_EQ(stage_ids(), (std::vector<std::string>{"probing", "scaling", "filtering", "meta", "tuning", "validation"}));
    EXPECT_THROW((void)make_stage("wrapping"), invalid_argument);
    for (const auto &id : stage_ids()) {
        EXPECT_EQ(make_stage(id)->id(), id);
    }
}

// ---------------------------------------------------------------------------

TEST(Probing, OneEntryPerBaseLearner) {
    const auto d = fixtures::blobs(1, 60, 3);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.1); });
    auto ctx = context(s, d);
    const auto pool = probing({}, ctx);
    EXPECT_EQ(pool.size(), 5u);
    for (const auto &e : pool.entries()) {
        EXPECT_TRUE(!e.candidate.scaler && !e.candidate.features && !e.candidate.learner.params && !e.candidate.learner.meta);
    }
}

TEST(Probing, FailuresAreExcluded) {
    const auto d = fixtures::blobs(1, 60, 3);
    StubScorer s([](const Candidate &c, const ScoreRequest &) { return c.learner.learner == "random_forest" ? failed() : ok(0.1); });
    auto ctx = context(s, d);
    EXPECT_EQ(probing({}, ctx).size(), 4u);
    EXPECT_EQ(s.calls.size(), 5u);
}

TEST(Probing, KnownCandidatesAreNotReevaluated) {
    const auto d = fixtures::blobs(1, 60, 3);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.1); });
    auto ctx = context(s, d);
    const auto pool = probing(pool_of({{Candidate::bare("knn"), 0.5}}), ctx);
    EXPECT_EQ(pool.size(), 5u);
    EXPECT_EQ(std::count(s.calls.begin(), s.calls.end(), "-|-|knn|default"), 0);
}

TEST(Probing, RealEvaluator) {
    const auto d = fixtures::blobs(2, 60, 3);
    Evaluator e(reg(), EvalConfig{});
    auto ctx = context(e, d);
    EXPECT_EQ(probing({}, ctx).size(), 5u);
}

TEST(Stages, ZeroBudgetLeavesPoolUnchanged) {
    const auto d = fixtures::blobs(3, 60, 4);
    const auto holdout = fixtures::blobs(4, 20, 4);
    const auto start = pool_of({{Candidate::bare("knn"), 0.2}, {Candidate::bare("gaussian_nb"), 0.3}});
    for (const auto &id : stage_ids()) {
        if (id == "validation") {
            continue;
        }
        StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.01); });
        auto ctx = context(s, d, &holdout, Deadline::after(seconds{0}));
        const auto out = stage_run(id, start, ctx);
        EXPECT_EQ(keys(out), keys(start)) << id;
        EXPECT_TRUE(s.calls.empty()) << id;
    }
}

TEST(Stages, RunningTwiceAddsNoDuplicates) {
    const auto d = fixtures::blobs(5, 50, 3);
    Evaluator e(reg(), EvalConfig{});
    for (const auto &id : {"probing", "scaling", "meta"}) {
        auto ctx = context(e, d);
        auto pool = probing({}, ctx);
        pool = stage_run(id, pool, ctx);
        const auto once = keys(pool);
        pool = stage_run(id, pool, ctx);
        EXPECT_EQ(keys(pool), once) << id;
    }
}

// ---------------------------------------------------------------------------

TEST(Scaling, PilotEvaluationsWithoutExpansion) {
    const auto d = fixtures::blobs(6, 50, 3);
    StubScorer s([](const Candidate &c, const ScoreRequest &) { return ok(c.scaler ? 0.3 : 0.2); });
    auto ctx = context(s, d);
    ctx.options.pilots.include_best_probing = false;
    const auto start = pool_of({{Candidate::bare("knn"), 0.2}, {Candidate::bare("gaussian_nb"), 0.2}});
    const auto out = scaling(start, ctx);
    EXPECT_EQ(s.calls.size(), 3u * 2u);
    EXPECT_TRUE(ctx.notes.expanded_scalers.empty());
    EXPECT_EQ(out.size(), start.size() + 6u);
}

TEST(Scaling, MissingBaselinesAreEvaluatedFirst) {
    const auto d = fixtures::blobs(6, 50, 3);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.2); });
    auto ctx = context(s, d);
    ctx.options.pilots.include_best_probing = false;
    (void)scaling({}, ctx);
    EXPECT_EQ(s.calls.size(), 2u + 6u);
    EXPECT_EQ(s.calls[0], "-|-|knn|default");
}

TEST(Scaling, ImprovingPilotExpandsToAllBaseLearners) {
    const auto d = fixtures::blobs(7, 50, 3);
    StubScorer s([](const Candidate &c, const ScoreRequest &) {
        return ok(c.scaler == std::optional<std::string>("standardize") && c.learner.learner == "knn" ? 0.1 : 0.2);
    });
    auto ctx = context(s, d);
    ctx.options.pilots.include_best_probing = false;
    const auto start = pool_of({{Candidate::bare("knn"), 0.2}, {Candidate::bare("gaussian_nb"), 0.2}});
    const auto out = scaling(start, ctx);
    EXPECT_EQ(ctx.notes.expanded_scalers, (std::vector<std::string>{"standardize"}));
    for (const auto &id : {"decision_tree", "logistic_regression", "random_forest"}) {
        EXPECT_TRUE(out.contains(candidate_key(scaled("standardize", id)))) << id;
        EXPECT_FALSE(out.contains(candidate_key(scaled("minmax", id)))) << id;
    }
}

TEST(Scaling, EpsilonGuardsImprovement) {
    const auto d = fixtures::blobs(7, 50, 3);
    StubScorer s([](const Candidate &c, const ScoreRequest &) { return ok(c.scaler ? 0.195 : 0.2); });
    auto ctx = context(s, d);
    ctx.options.pilots.include_best_probing = false;
    ctx.options.scaling_epsilon = 0.01;
    (void)scaling(pool_of({{Candidate::bare("knn"), 0.2}, {Candidate::bare("gaussian_nb"), 0.2}}), ctx);
    EXPECT_TRUE(ctx.notes.expanded_scalers.empty());
}

TEST(Scaling, BestProbingCandidateJoinsPilots) {
    const auto d = fixtures::blobs(8, 50, 3);
    StubScorer s([](const Candidate &c, const ScoreRequest &) {
        return ok(c.scaler == std::optional<std::string>("minmax") && c.learner.learner == "decision_tree" ? 0.05 : 0.2);
    });
    auto ctx = context(s, d);
    const auto start = pool_of({{Candidate::bare("knn"), 0.2}, {Candidate::bare("gaussian_nb"), 0.2}, {Candidate::bare("decision_tree"), 0.1}});
    const auto out = scaling(start, ctx);
    EXPECT_EQ(ctx.notes.expanded_scalers, (std::vector<std::string>{"minmax"}));
    EXPECT_TRUE(out.contains(candidate_key(scaled("minmax", "random_forest"))));
    EXPECT_FALSE(out.contains(candidate_key(scaled("standardize", "random_forest"))));
}

TEST(Scaling, DecisionDependsOnlyOnOrdering) {
    const auto d = fixtures::blobs(9, 50, 3);
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        std::map<std::string, double> table;
        auto draw = [&](const Candidate &c) {
            const auto k = candidate_key(c);
            if (!table.contains(k)) {
                table[k] = 0.05 + 0.01 * static_cast<double>(rng.below(30));
            }
            return table[k];
        };
        const double shift = 0.1 + 0.05 * static_cast<double>(trial % 4);
        std::vector<std::string> expanded[2];
        std::vector<std::string> added[2];
        for (int pass = 0; pass < 2; ++pass) {
            StubScorer s([&, pass](const Candidate &c, const ScoreRequest &) { return ok(draw(c) + (pass ? shift : 0.0)); });
            auto ctx = context(s, d);
            CandidatePool start;
            for (const auto &id : reg().base_learner_ids()) {
                start.add(ScoredCandidate{Candidate::bare(id), ok(draw(Candidate::bare(id)) + (pass ? shift : 0.0)), "probing", std::nullopt});
            }
            const auto out = scaling(start, ctx);
            expanded[pass] = ctx.notes.expanded_scalers;
            added[pass] = keys(out);
        }
        EXPECT_EQ(expanded[0], expanded[1]);
        EXPECT_EQ(added[0], added[1]);
    }
}

TEST(Scaling, DominantNoiseColumnTriggersStandardize) {
    const auto d = synthesize(SynthSpec{SynthKind::scale_sensitive, 200, 5, 0, 1});
    Evaluator e(reg(), EvalConfig{});
    auto ctx = context(e, d);
    auto pool = probing({}, ctx);
    const double raw = pool.find("-|-|knn|default")->score.mean;
    pool = scaling(pool, ctx);
    const double standardized = pool.find(candidate_key(scaled("standardize", "knn")))->score.mean;
    EXPECT_GE(raw, standardized + 0.1);
    EXPECT_NE(std::find(ctx.notes.expanded_scalers.begin(), ctx.notes.expanded_scalers.end(), "standardize"),
              ctx.notes.expanded_scalers.end());
    for (const auto &id : {"decision_tree", "logistic_regression", "random_forest"}) {
        EXPECT_TRUE(pool.contains(candidate_key(scaled("standardize", id)))) << id;
    }
}

// ---------------------------------------------------------------------------

TEST(Curve, Schedule) {
    EXPECT_EQ(prefix_schedule(16), (std::vector<std::size_t>{1, 2, 4, 8, 16}));
    EXPECT_EQ(prefix_schedule(10), (std::vector<std::size_t>{1, 2, 4, 8, 10}));
    EXPECT_EQ(prefix_schedule(1), (std::vector<std::size_t>{1}));
    EXPECT_EQ(prefix_schedule(2), (std::vector<std::size_t>{1, 2}));
}

TEST(Curve, WalkStopsAfterPatience) {
    const std::map<std::size_t, double> curve = {{1, 0.30}, {2, 0.25}, {4, 0.25}, {8, 0.26}, {16, 0.27}, {32, 0.20}};
    const auto points = walk_curve({1, 2, 4, 8, 16, 32}, [&](std::size_t l) { return curve.at(l); }, 0.005, 2);
    ASSERT_EQ(points.size(), 5u);
    // Oracle: argmin over the visited points, smaller prefix on ties.
    std::size_t best_l = 0;
    double best = 1e9;
    for (const auto &[l, s] : points) {
        if (s < best) {
            best = s;
            best_l = l;
        }
    }
    EXPECT_EQ(best_l, 2u);
}

TEST(Curve, ToleranceAbsorbsSmallIncreases) {
    const std::map<std::size_t, double> curve = {{1, 0.30}, {2, 0.303}, {4, 0.304}, {8, 0.2}};
    EXPECT_EQ(walk_curve({1, 2, 4, 8}, [&](std::size_t l) { return curve.at(l); }, 0.005, 1).size(), 4u);
    EXPECT_EQ(walk_curve({1, 2, 4, 8}, [&](std::size_t l) { return curve.at(l); }, 0.0, 1).size(), 2u);
}

TEST(FeatureSetSearch, SelectsPrefixFromStubCurve) {
    const auto d = fixtures::random_dataset(11, 40, 16, 2);
    const std::map<std::size_t, double> curve = {{1, 0.30}, {2, 0.25}, {4, 0.25}, {8, 0.26}, {16, 0.27}};
    StubScorer s([&](const Candidate &c, const ScoreRequest &r) {
        EXPECT_EQ(r.repeats, std::optional<std::size_t>(3));
        return ok(curve.at(c.features ? c.features->size() : 16));
    });
    auto ctx = context(s, d);
    const auto result = compute_feature_set(ctx, {"variance"}, Candidate::bare("knn"));
    EXPECT_EQ(result.prefix, 2u);
    EXPECT_EQ(result.features.size(), 2u);
    EXPECT_EQ(result.filter, "variance");
    EXPECT_EQ(s.calls.size(), 5u);
}

TEST(FeatureSetSearch, TiesPickSmallestPrefixAndFirstFilter) {
    const auto d = fixtures::random_dataset(12, 40, 8, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.5); });
    auto ctx = context(s, d);
    const auto result = compute_feature_set(ctx, reg().filter_ids(), Candidate::bare("knn"));
    EXPECT_EQ(result.prefix, 1u);
    EXPECT_EQ(result.filter, "pearson_correlation");
}

TEST(FeatureSetSearch, SingleDecisiveFeature) {
    Rng rng(13);
    Matrix x(150, 6);
    std::vector<int> y(150);
    for (std::size_t i = 0; i < 150; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            x(i, j) = rng.normal();
        }
        y[i] = x(i, 0) > 0 ? 1 : 0;
    }
    const auto d = Dataset::from_numeric(x, y, 2);
    Evaluator e(reg(), EvalConfig{});
    auto ctx = context(e, d);
    const auto result = compute_feature_set(ctx, reg().filter_ids(), Candidate::bare("knn"));
    EXPECT_EQ(result.features, (FeatureSet{0}));
    // Oracle: every scheduled prefix of the winning ranking scores no better than l = 1.
    const auto ranking = reg().rank_features(result.filter, d);
    for (const auto l : prefix_schedule(6)) {
        Candidate c = Candidate::bare("knn");
        c.features = FeatureSet::prefix(ranking, l);
        EXPECT_GE(e.score(c, d, {"oracle", {}, 3}).mean, result.score) << l;
    }
}

TEST(FeatureSetSearch, AlwaysNonEmptyAndBounded) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto d = fixtures::random_dataset(seed, 40, 1 + seed * 3, 2);
        Evaluator e(reg(), EvalConfig{});
        auto ctx = context(e, d);
        const auto result = compute_feature_set(ctx, reg().filter_ids(), Candidate::bare("gaussian_nb"));
        EXPECT_GE(result.features.size(), 1u);
        EXPECT_LE(result.features.size(), d.cols());
    }
}

TEST(FeatureSetSearch, FailingPilotFallsBackToAllFeatures) {
    const auto d = fixtures::random_dataset(14, 30, 5, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return failed(); });
    auto ctx = context(s, d);
    const auto result = compute_feature_set(ctx, reg().filter_ids(), Candidate::bare("knn"));
    EXPECT_EQ(result.features, FeatureSet::all(5));
}

// ---------------------------------------------------------------------------

TEST(Filtering, FullFeatureSetLeavesPoolUnchanged) {
    const auto d = fixtures::random_dataset(15, 30, 4, 2);
    StubScorer s([](const Candidate &c, const ScoreRequest &) { return ok(c.features ? 0.4 : 0.1); });
    auto ctx = context(s, d);
    const auto start = pool_of({{Candidate::bare("knn"), 0.2}, {Candidate::bare("gaussian_nb"), 0.3}});
    EXPECT_EQ(keys(filtering(start, ctx)), keys(start));
    ASSERT_TRUE(ctx.notes.feature_set.has_value());
    EXPECT_EQ(ctx.notes.feature_set->features.size(), 4u);
}

TEST(Filtering, TwinsInScoreOrderUntilDeadline) {
    const auto d = fixtures::random_dataset(16, 30, 8, 2);
    int twins = 0;
    StubScorer s([&](const Candidate &c, const ScoreRequest &r) {
        if (r.repeats) {
            return ok(c.features && c.features->size() == 1 ? 0.1 : 0.3);  // curve points
        }
        if (++twins == 2) {
            std::this_thread::sleep_for(std::chrono::duration_cast<clock::duration>(*r.deadline.remaining()) +
                                        std::chrono::milliseconds(5));
        }
        return ok(0.2);
    });
    auto ctx = context(s, d, nullptr, Deadline::after(seconds{2.0}));
    const auto start = pool_of({{Candidate::bare("knn"), 0.3}, {Candidate::bare("gaussian_nb"), 0.1}, {Candidate::bare("decision_tree"), 0.2}});
    const auto out = filtering(start, ctx);
    ASSERT_EQ(out.size(), 5u);
    EXPECT_EQ(out.entries()[3].candidate.learner.learner, "gaussian_nb");
    EXPECT_EQ(out.entries()[4].candidate.learner.learner, "decision_tree");
    EXPECT_TRUE(ctx.notes.deadline_hit);
}

TEST(Filtering, MadelonTwinKeepsQuality) {
    const auto d = synthesize(SynthSpec{SynthKind::madelon_like, 600, 100, 5, 0});
    Evaluator e(reg(), EvalConfig{});
    auto ctx = context(e, d);
    auto pool = probing({}, ctx);
    const auto best = *pool.best();
    pool = filtering(pool, ctx);
    ASSERT_TRUE(ctx.notes.feature_set.has_value());
    EXPECT_LE(ctx.notes.feature_set->features.size(), 20u);
    Candidate twin = best.candidate;
    twin.features = ctx.notes.feature_set->features;
    const auto *t = pool.find(candidate_key(twin));
    ASSERT_NE(t, nullptr);
    EXPECT_LE(t->score.mean, best.score.mean + 0.02);
}

// ---------------------------------------------------------------------------

TEST(Meta, WrapsEachBaseWithEachMeta) {
    const auto d = fixtures::blobs(17, 40, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.1); });
    auto ctx = context(s, d);
    const auto out = meta(pool_of({{Candidate::bare("knn"), 0.2}}), ctx);
    EXPECT_EQ(s.calls, (std::vector<std::string>{"-|-|bagging[default](knn)|default", "-|-|adaboost[default](knn)|default"}));
    EXPECT_EQ(out.size(), 3u);
}

TEST(Meta, SkipsAlreadyWrapped) {
    const auto d = fixtures::blobs(17, 40, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.1); });
    auto ctx = context(s, d);
    Candidate bagged = Candidate::bare("knn");
    bagged.learner.meta = MetaChoice{"bagging", std::nullopt};
    (void)meta(pool_of({{bagged, 0.2}}), ctx);
    EXPECT_TRUE(s.calls.empty());
}

TEST(Meta, KeepsScalerAndFeatures) {
    const auto d = fixtures::blobs(17, 40, 3);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.1); });
    auto ctx = context(s, d);
    Candidate c{std::string("minmax"), FeatureSet{0, 2}, {"gaussian_nb", std::nullopt, std::nullopt}};
    const auto out = meta(pool_of({{c, 0.2}}), ctx);
    for (const auto &e : out.entries()) {
        EXPECT_EQ(e.candidate.scaler, c.scaler);
        EXPECT_EQ(e.candidate.features, c.features);
    }
}

TEST(Meta, BaggingStabilisesUnprunedTree) {
    int ok_seeds = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = synthesize(SynthSpec{SynthKind::madelon_like, 200, 6, 3, seed});
        Evaluator e(reg(), EvalConfig{});
        auto ctx = context(e, d);
        const auto out = meta(pool_of({{Candidate::bare("decision_tree"), e.score(Candidate::bare("decision_tree"), d, {}).mean}}), ctx);
        Candidate bagged = Candidate::bare("decision_tree");
        bagged.learner.meta = MetaChoice{"bagging", std::nullopt};
        ok_seeds += out.find(candidate_key(bagged))->score.mean <= out.find("-|-|decision_tree|default")->score.mean + 0.02 ? 1 : 0;
    }
    EXPECT_GE(ok_seeds, 4);
}

// ---------------------------------------------------------------------------

TEST(Tuning, EnumeratesSmallGrid) {
    const auto d = fixtures::blobs(18, 40, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.3); });
    auto ctx = context(s, d);
    (void)tuning(pool_of({{Candidate::bare("knn"), 0.2}}), ctx);
    EXPECT_EQ(s.calls.size(), 6u);
}

TEST(Tuning, AppendsOnlyImprovements) {
    const auto d = fixtures::blobs(18, 40, 2);
    StubScorer s([](const Candidate &c, const ScoreRequest &) {
        const auto k = c.learner.params ? get_int(*c.learner.params, "k") : 5;
        return ok(k == 1 ? 0.15 : (k == 21 ? 0.1 : 0.3));
    });
    auto ctx = context(s, d);
    const auto out = tuning(pool_of({{Candidate::bare("knn"), 0.2}}), ctx);
    EXPECT_EQ(out.size(), 3u);
    EXPECT_TRUE(out.contains(candidate_key(Candidate{std::nullopt, std::nullopt, {"knn", ParamMap{{"k", std::int64_t{1}}}, {}}})));
    EXPECT_TRUE(out.contains(candidate_key(Candidate{std::nullopt, std::nullopt, {"knn", ParamMap{{"k", std::int64_t{21}}}, {}}})));
}

TEST(Tuning, RandomSearchRespectsMaxEvals) {
    const auto d = fixtures::blobs(19, 40, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.3); });
    auto ctx = context(s, d);
    ctx.options.tuning.max_evals = 12;
    (void)tuning(pool_of({{Candidate::bare("logistic_regression"), 0.2}}), ctx);
    EXPECT_LE(s.calls.size(), 12u);
    EXPECT_GE(s.calls.size(), 11u);
}

TEST(Tuning, MetaCandidatesTuneBaseParameters) {
    const auto d = fixtures::blobs(19, 40, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.3); });
    auto ctx = context(s, d);
    Candidate c = Candidate::bare("knn");
    c.learner.meta = MetaChoice{"bagging", std::nullopt};
    (void)tuning(pool_of({{c, 0.2}}), ctx);
    ASSERT_EQ(s.calls.size(), 6u);
    EXPECT_EQ(s.calls[0].rfind("-|-|bagging[default](knn)|k=", 0), 0u);
}

TEST(Tuning, BadLearningRateGetsFixed) {
    const auto d = synthesize(SynthSpec{SynthKind::scale_sensitive, 120, 4, 0, 2});
    Evaluator e(reg(), EvalConfig{});
    auto ctx = context(e, d);
    ctx.options.tuning.max_evals = 30;
    Candidate bad = Candidate::bare("logistic_regression");
    bad.learner.params = ParamMap{{"epochs", std::int64_t{200}}, {"l2", 1e-6}, {"learning_rate", 1e-1}};
    const double before = e.score(bad, d, {}).mean;
    CandidatePool pool;
    pool.add(ScoredCandidate{bad, e.score(bad, d, {}), "seed", std::nullopt});
    const auto out = tuning(pool, ctx);
    EXPECT_GT(before, 0.2);
    EXPECT_LT(out.best()->score.mean, before);
}

// ---------------------------------------------------------------------------

TEST(Validation, SkippedWithoutHoldout) {
    const auto d = fixtures::blobs(20, 40, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.3); });
    const Dataset empty;
    auto ctx = context(s, d, &empty);
    const auto start = pool_of({{Candidate::bare("knn"), 0.2}});
    EXPECT_EQ(keys(validation(start, ctx)), keys(start));
    EXPECT_EQ(ctx.notes.warnings.size(), 1u);
}

TEST(Validation, SingleFinalistIsInternalBest) {
    const auto d = fixtures::blobs(21, 60, 2);
    const auto holdout = fixtures::blobs(22, 20, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.3); });
    auto ctx = context(s, d, &holdout);
    ctx.options.validation.m = 1;
    const auto out = validation(pool_of({{Candidate::bare("knn"), 0.2}, {Candidate::bare("gaussian_nb"), 0.1}}), ctx);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out.entries()[0].candidate.learner.learner, "gaussian_nb");
    ASSERT_TRUE(out.entries()[0].validation.has_value());
}

TEST(Validation, EqualInternalScoresOrderedByHoldout) {
    // Same internal score, different holdout error.
    const auto d = synthesize(SynthSpec{SynthKind::madelon_like, 300, 10, 2, 3});
    const auto holdout = synthesize(SynthSpec{SynthKind::madelon_like, 100, 10, 2, 4});
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.3); });
    auto ctx = context(s, d, &holdout);
    Candidate one = Candidate::bare("knn");
    one.learner.params = ParamMap{{"k", std::int64_t{1}}};
    const auto out = validation(pool_of({{one, 0.2}, {Candidate::bare("logistic_regression"), 0.2}}), ctx);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_LE(out.entries()[0].validation->phi_validate, out.entries()[1].validation->phi_validate);
    EXPECT_LE(out.entries()[0].validation->final_score, out.entries()[1].validation->final_score);
}

TEST(Validation, FullTrustMeansHoldoutRanking) {
    const auto d = synthesize(SynthSpec{SynthKind::madelon_like, 200, 8, 3, 5});
    const auto holdout = synthesize(SynthSpec{SynthKind::madelon_like, 60, 8, 3, 6});
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.3); });
    auto ctx = context(s, d, &holdout);
    ctx.options.validation.n_bar = 1;
    const auto out = validation(pool_of({{Candidate::bare("knn"), 0.05},
                                         {Candidate::bare("gaussian_nb"), 0.1},
                                         {Candidate::bare("decision_tree"), 0.15},
                                         {Candidate::bare("logistic_regression"), 0.2}}),
                                ctx);
    ASSERT_EQ(out.size(), 4u);
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_DOUBLE_EQ(out.entries()[i].validation->weight, 1.0);
        EXPECT_DOUBLE_EQ(out.entries()[i].validation->final_score, out.entries()[i].validation->phi_validate);
        if (i > 0) {
            EXPECT_LE(out.entries()[i - 1].validation->phi_validate, out.entries()[i].validation->phi_validate);
        }
    }
}

TEST(Validation, WeightFollowsHoldoutShare) {
    const auto d = fixtures::blobs(23, 90, 2);
    const auto holdout = fixtures::blobs(24, 10, 2);
    StubScorer s([](const Candidate &, const ScoreRequest &) { return ok(0.3); });
    auto ctx = context(s, d, &holdout);
    const auto out = validation(pool_of({{Candidate::bare("knn"), 0.2}}), ctx);
    EXPECT_DOUBLE_EQ(out.entries()[0].validation->weight, omega(10, 100, 10000));
    EXPECT_DOUBLE_EQ(out.entries()[0].score.mean, 0.2);
}

TEST(ValidationConfigCheck, Bounds) {
    ValidationConfig cfg;
    EXPECT_NO_THROW(validate(cfg));
    cfg.holdout_fraction = 0.5;
    EXPECT_THROW(validate(cfg), invalid_argument);
    cfg = ValidationConfig{};
    cfg.m = 0;
    EXPECT_THROW(validate(cfg), invalid_argument);
}
