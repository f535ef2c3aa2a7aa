#include "stagewise/stages.hpp"

#include "stagewise/error.hpp"
#include "stagewise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stagewise {

// ---------------------------------------------------------------------------
// Pool

bool CandidatePool::add(ScoredCandidate entry) {
    if (!entry.score.ok()) {
        return false;
    }
    auto key = entry.key();
    if (index_.contains(key)) {
        return false;
    }
    index_.emplace(std::move(key), entries_.size());
    entries_.push_back(std::move(entry));
    return true;
}

const ScoredCandidate *CandidatePool::find(const std::string &key) const {
    const auto it = index_.find(key);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

std::vector<const ScoredCandidate *> CandidatePool::by_score() const {
    std::vector<const ScoredCandidate *> out;
    out.reserve(entries_.size());
    for (const auto &e : entries_) {
        out.push_back(&e);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ScoredCandidate *a, const ScoredCandidate *b) { return a->score.mean < b->score.mean; });
    return out;
}

const ScoredCandidate *CandidatePool::best() const {
    const ScoredCandidate *best = nullptr;
    for (const auto &e : entries_) {
        if (best == nullptr || e.score.mean < best->score.mean) {
            best = &e;
        }
    }
    return best;
}

void validate(const ValidationConfig &cfg) {
    if (cfg.n_bar < 1) {
        throw invalid_argument("n_bar must be at least 1");
    }
    if (cfg.m < 1) {
        throw invalid_argument("m must be at least 1");
    }
    if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 0.5)) {
        throw invalid_argument("holdout_fraction must lie in (0, 0.5)");
    }
}

// ---------------------------------------------------------------------------
// Validation weighting

double tau(std::size_t n, std::size_t n_bar) {
    return std::min(1.0, static_cast<double>(n) / static_cast<double>(n_bar));
}

double omega(std::size_t n, std::size_t total, std::size_t n_bar) {
    const double t = tau(n, n_bar);
    return t + static_cast<double>(n) / static_cast<double>(total) * (1.0 - t);
}

double final_score(double phi_int, double phi_val, double w) { return phi_int * (1.0 - w) + phi_val * w; }

// ---------------------------------------------------------------------------
// Helpers shared by the stages

namespace {

/// Scores c unless the stage deadline has already lapsed.
std::optional<Score> attempt(StageContext &ctx, const Candidate &c, const std::string &stage,
                             std::optional<std::size_t> repeats = std::nullopt, const Deadline *tighter = nullptr) {
    const Deadline deadline = tighter != nullptr ? ctx.deadline.clip(*tighter) : ctx.deadline;
    if (deadline.expired()) {
        ctx.notes.deadline_hit = ctx.notes.deadline_hit || ctx.deadline.expired();
        return std::nullopt;
    }
    return ctx.scorer.score(c, ctx.optimization, ScoreRequest{stage, deadline, repeats});
}

/// Scores c and appends it to the pool; returns the score when one was obtained.
std::optional<Score> attempt_add(CandidatePool &pool, StageContext &ctx, const Candidate &c, const std::string &stage) {
    auto s = attempt(ctx, c, stage);
    if (s) {
        pool.add(ScoredCandidate{c, *s, stage, std::nullopt});
    }
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Probing: every base learner with defaults on raw data.

CandidatePool probing(CandidatePool pool, StageContext &ctx) {
    std::vector<Candidate> todo;
    for (const auto &id : ctx.registry.base_learner_ids()) {
        auto c = Candidate::bare(id);
        if (!pool.contains(candidate_key(c))) {
            todo.push_back(std::move(c));
        }
    }
    if (ctx.deadline.expired()) {
        ctx.notes.deadline_hit = !todo.empty();
        return pool;
    }
    const auto scores = ctx.scorer.score_many(todo, ctx.optimization, ScoreRequest{"probing", ctx.deadline, std::nullopt});
    for (std::size_t i = 0; i < todo.size(); ++i) {
        pool.add(ScoredCandidate{todo[i], scores[i], "probing", std::nullopt});
    }
    ctx.notes.deadline_hit = ctx.notes.deadline_hit || ctx.deadline.expired();
    return pool;
}

// ---------------------------------------------------------------------------
// Scaling: pilots decide per scaler whether every other base learner gets scaled too.

CandidatePool scaling(CandidatePool pool, StageContext &ctx) {
    const std::string stage = "scaling";
    std::vector<Candidate> pilots = ctx.options.pilots.pilots;
    if (ctx.options.pilots.include_best_probing) {
        for (const auto *e : pool.by_score()) {
            const auto &c = e->candidate;
            const bool plain = !c.scaler && !c.features && !c.learner.meta;
            const bool already = std::any_of(pilots.begin(), pilots.end(), [&](const Candidate &p) {
                return p.learner.learner == c.learner.learner;
            });
            if (plain && !already) {
                pilots.push_back(c);
                break;
            }
        }
    }

    std::vector<std::optional<double>> baseline(pilots.size());
    for (std::size_t p = 0; p < pilots.size(); ++p) {
        if (const auto *e = pool.find(candidate_key(pilots[p]))) {
            baseline[p] = e->score.mean;
        } else if (const auto s = attempt_add(pool, ctx, pilots[p], stage); s && s->ok()) {
            baseline[p] = s->mean;
        }
    }

    std::vector<std::string> pilot_learners;
    for (const auto &p : pilots) {
        pilot_learners.push_back(p.learner.learner);
    }

    for (const auto &scaler : ctx.registry.scaler_ids()) {
        bool improved = false;
        for (std::size_t p = 0; p < pilots.size(); ++p) {
            Candidate scaled = pilots[p];
            scaled.scaler = scaler;
            const auto s = attempt_add(pool, ctx, scaled, stage);
            if (s && s->ok() && baseline[p] && s->mean < *baseline[p] - ctx.options.scaling_epsilon) {
                improved = true;
            }
        }
        if (!improved) {
            continue;
        }
        ctx.notes.expanded_scalers.push_back(scaler);
        std::vector<Candidate> expansion;
        for (const auto &id : ctx.registry.base_learner_ids()) {
            if (std::find(pilot_learners.begin(), pilot_learners.end(), id) != pilot_learners.end()) {
                continue;
            }
            Candidate c = Candidate::bare(id);
            c.scaler = scaler;
            if (!pool.contains(candidate_key(c))) {
                expansion.push_back(std::move(c));
            }
        }
        if (ctx.deadline.expired()) {
            break;
        }
        const auto scores = ctx.scorer.score_many(expansion, ctx.optimization, ScoreRequest{stage, ctx.deadline, std::nullopt});
        for (std::size_t i = 0; i < expansion.size(); ++i) {
            pool.add(ScoredCandidate{expansion[i], scores[i], stage, std::nullopt});
        }
    }
    ctx.notes.deadline_hit = ctx.notes.deadline_hit || ctx.deadline.expired();
    return pool;
}

// ---------------------------------------------------------------------------
// Filtering

std::vector<std::size_t> prefix_schedule(std::size_t d) {
    std::vector<std::size_t> out;
    for (std::size_t l = 1; l < d; l *= 2) {
        out.push_back(l);
    }
    if (d > 0) {
        out.push_back(d);
    }
    return out;
}

std::vector<std::pair<std::size_t, double>> walk_curve(const std::vector<std::size_t> &schedule,
                                                       const std::function<double(std::size_t)> &score_of,
                                                       double tol, std::size_t patience) {
    std::vector<std::pair<std::size_t, double>> points;
    double best = std::numeric_limits<double>::infinity();
    std::size_t worse_streak = 0;
    for (const auto l : schedule) {
        const double s = score_of(l);
        points.emplace_back(l, s);
        if (s <= best + tol) {
            worse_streak = 0;
        } else if (++worse_streak >= patience) {
            break;
        }
        best = std::min(best, s);
    }
    return points;
}

FeatureSetResult compute_feature_set(StageContext &ctx, const std::vector<std::string> &filters, const Candidate &pilot) {
    const std::size_t d = ctx.optimization.cols();
    if (d == 0) {
        throw invalid_argument("dataset has no columns");
    }
    FeatureSetResult result;
    result.features = FeatureSet::all(d);
    result.prefix = d;
    result.score = std::numeric_limits<double>::infinity();
    const auto schedule = prefix_schedule(d);
    for (const auto &filter : filters) {
        const auto ranking = ctx.registry.rank_features(filter, ctx.optimization);
        auto score_of = [&](std::size_t l) {
            Candidate c = pilot;
            c.features = l == d ? std::nullopt : std::optional<FeatureSet>(FeatureSet::prefix(ranking, l));
            const auto s = attempt(ctx, c, "filtering", ctx.options.curve.cheap_repeats);
            return s && s->ok() ? s->mean : std::numeric_limits<double>::infinity();
        };
        const auto points = walk_curve(schedule, score_of, ctx.options.curve.tol, ctx.options.curve.patience);
        for (const auto &[l, s] : points) {
            result.curves.push_back(CurvePoint{filter, l, s});
            const bool better = s < result.score || (s == result.score && l < result.prefix);
            if (better && std::isfinite(s)) {
                result.score = s;
                result.prefix = l;
                result.filter = filter;
                result.features = FeatureSet::prefix(ranking, l);
            }
        }
    }
    return result;
}

CandidatePool filtering(CandidatePool pool, StageContext &ctx) {
    if (ctx.deadline.expired()) {
        ctx.notes.deadline_hit = true;
        return pool;
    }
    const Candidate pilot = ctx.options.pilots.pilots.empty() ? Candidate::bare("knn") : ctx.options.pilots.pilots.front();
    auto result = compute_feature_set(ctx, ctx.registry.filter_ids(), pilot);
    const FeatureSet features = result.features;
    ctx.notes.feature_set = std::move(result);
    if (features.size() == ctx.optimization.cols()) {
        return pool;  // the full set: every twin equals its original
    }
    std::vector<Candidate> originals;
    for (const auto *e : pool.by_score()) {
        const auto &c = e->candidate;
        if (!c.features && !c.learner.meta && !c.learner.params) {
            originals.push_back(c);
        }
    }
    for (auto twin : originals) {
        twin.features = features;
        if (pool.contains(candidate_key(twin))) {
            continue;
        }
        if (!attempt_add(pool, ctx, twin, "filtering")) {
            break;
        }
    }
    ctx.notes.deadline_hit = ctx.notes.deadline_hit || ctx.deadline.expired();
    return pool;
}

// ---------------------------------------------------------------------------
// Meta: wrap each base learner into every homogeneous meta-learner; scaler and features untouched.

CandidatePool meta(CandidatePool pool, StageContext &ctx) {
    std::vector<Candidate> inputs;
    for (const auto *e : pool.by_score()) {
        if (!e->candidate.learner.meta) {
            inputs.push_back(e->candidate);
        }
    }
    const auto metas = ctx.registry.meta_learner_ids();
    for (const auto &c : inputs) {
        std::vector<Candidate> wrapped;
        for (const auto &m : metas) {
            Candidate w = c;
            w.learner.meta = MetaChoice{m, std::nullopt};
            if (!pool.contains(candidate_key(w))) {
                wrapped.push_back(std::move(w));
            }
        }
        if (ctx.deadline.expired()) {
            ctx.notes.deadline_hit = true;
            break;
        }
        const auto scores = ctx.scorer.score_many(wrapped, ctx.optimization, ScoreRequest{"meta", ctx.deadline, std::nullopt});
        for (std::size_t i = 0; i < wrapped.size(); ++i) {
            pool.add(ScoredCandidate{wrapped[i], scores[i], "meta", std::nullopt});
        }
    }
    ctx.notes.deadline_hit = ctx.notes.deadline_hit || ctx.deadline.expired();
    return pool;
}

// ---------------------------------------------------------------------------
// Tuning: random search (or grid enumeration for small spaces) over the base learner's parameters.

CandidatePool tuning(CandidatePool pool, StageContext &ctx) {
    const auto &budget = ctx.options.tuning;
    std::vector<ScoredCandidate> inputs;
    for (const auto *e : pool.by_score()) {
        inputs.push_back(*e);
    }
    for (const auto &entry : inputs) {
        if (ctx.deadline.expired()) {
            ctx.notes.deadline_hit = true;
            break;
        }
        const Deadline local = budget.per_candidate ? Deadline::after(*budget.per_candidate) : Deadline::none();
        const auto &spec = ctx.registry.learner(entry.candidate.learner.learner);
        const ParamMap current = ctx.registry.resolve_params(spec.id, entry.candidate.learner.params);
        const std::string key = entry.key();

        std::vector<ParamMap> proposals;
        if (auto grid = enumerate_grid(spec.param_space, budget.max_evals)) {
            proposals = std::move(*grid);
        } else {
            Rng rng(derive_seed(ctx.seed, key));
            for (std::size_t i = 0; i < budget.max_evals; ++i) {
                proposals.push_back(ctx.registry.sample_params(spec.id, rng));
            }
        }

        double incumbent = entry.score.mean;
        for (const auto &params : proposals) {
            if (params == current) {
                continue;
            }
            if (local.clip(ctx.deadline).expired()) {
                break;
            }
            Candidate c = entry.candidate;
            c.learner.params = params == spec.default_params ? std::nullopt : std::optional<ParamMap>(params);
            if (const auto *known = pool.find(candidate_key(c))) {
                incumbent = std::min(incumbent, known->score.mean);
                continue;
            }
            const auto s = attempt(ctx, c, "tuning", std::nullopt, &local);
            if (s && s->ok() && s->mean < incumbent) {
                incumbent = s->mean;
                pool.add(ScoredCandidate{c, *s, "tuning", std::nullopt});
            }
        }
    }
    ctx.notes.deadline_hit = ctx.notes.deadline_hit || ctx.deadline.expired();
    return pool;
}

// ---------------------------------------------------------------------------
// Validation: re-rank the m internally best candidates with the blended holdout score.

CandidatePool validation(CandidatePool pool, StageContext &ctx) {
    if (ctx.holdout == nullptr || ctx.holdout->empty()) {
        ctx.notes.warnings.emplace_back("validation stage skipped: no holdout data");
        return pool;
    }
    if (pool.empty()) {
        ctx.notes.warnings.emplace_back("validation stage skipped: empty candidate pool");
        return pool;
    }
    const auto &cfg = ctx.options.validation;
    const std::size_t n = ctx.holdout->rows();
    const std::size_t total = n + ctx.optimization.rows();
    const double w = omega(n, total, cfg.n_bar);

    auto ranked = pool.by_score();
    ranked.resize(std::min(ranked.size(), cfg.m));
    std::vector<ScoredCandidate> finalists;
    for (const auto *e : ranked) {
        if (ctx.deadline.expired()) {
            ctx.notes.deadline_hit = true;
            break;
        }
        try {
            const Pipeline pipeline(ctx.registry, e->candidate);
            const auto fitted = pipeline.fit(ctx.optimization, derive_seed(ctx.seed, e->key()), ctx.deadline);
            const double phi_val = error_rate(ctx.holdout->labels(), fitted.predict(ctx.holdout->instances(), ctx.deadline));
            ScoredCandidate out = *e;
            out.validation = ValidationScores{phi_val, w, final_score(e->score.mean, phi_val, w)};
            finalists.push_back(std::move(out));
        } catch (const timeout_error &) {
            ctx.notes.deadline_hit = true;
            break;
        } catch (const std::exception &ex) {
            ctx.notes.warnings.push_back("validation of " + e->key() + " failed: " + ex.what());
        }
    }
    std::stable_sort(finalists.begin(), finalists.end(), [](const ScoredCandidate &a, const ScoredCandidate &b) {
        return a.validation->final_score < b.validation->final_score;
    });
    CandidatePool out;
    for (auto &f : finalists) {
        out.add(std::move(f));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage objects

namespace {

class FunctionStage final : public Stage {
  public:
    using Fn = CandidatePool (*)(CandidatePool, StageContext &);
    FunctionStage(std::string id, Fn fn) : id_(std::move(id)), fn_(fn) {}
    [[nodiscard]] std::string id() const override { return id_; }
    [[nodiscard]] CandidatePool run(CandidatePool pool, StageContext &ctx) const override { return fn_(std::move(pool), ctx); }

  private:
    std::string id_;
    Fn fn_;
};

}  // namespace

const std::vector<std::string> &stage_ids() {
    static const std::vector<std::string> ids = {"probing", "scaling", "filtering", "meta", "tuning", "validation"};
    return ids;
}

std::unique_ptr<Stage> make_stage(const std::string &id) {
    if (id == "probing") {
        return std::make_unique<FunctionStage>(id, &probing);
    }
    if (id == "scaling") {
        return std::make_unique<FunctionStage>(id, &scaling);
    }
    if (id == "filtering") {
        return std::make_unique<FunctionStage>(id, &filtering);
    }
    if (id == "meta") {
        return std::make_unique<FunctionStage>(id, &meta);
    }
    if (id == "tuning") {
        return std::make_unique<FunctionStage>(id, &tuning);
    }
    if (id == "validation") {
        return std::make_unique<FunctionStage>(id, &validation);
    }
    throw invalid_argument("unknown stage '" + id + "'");
}

CandidatePool stage_run(const std::string &id, CandidatePool pool, StageContext &ctx) {
    return make_stage(id)->run(std::move(pool), ctx);
}

}  // namespace stagewise
