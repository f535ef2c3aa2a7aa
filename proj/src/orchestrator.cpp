#include "stagewise/orchestrator.hpp"

#include "stagewise/error.hpp"
#include "stagewise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace stagewise {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double elapsed_ms(clock::time_point since) {
    return std::chrono::duration<double, std::milli>(clock::now() - since).count();
}

std::set<std::string> keys_of(const CandidatePool &pool) {
    std::set<std::string> out;
    for (const auto &e : pool.entries()) {
        out.insert(e.key());
    }
    return out;
}

const std::vector<std::string> &stages_after_probing() {
    static const std::vector<std::string> ids(stage_ids().begin() + 1, stage_ids().end());
    return ids;
}

std::optional<seconds> default_stage_timeout(const std::string &id) {
    if (id == "meta" || id == "tuning") {
        return seconds{300.0};
    }
    return std::nullopt;
}

SchemeConfig scheme_of(std::string name, const std::vector<std::string> &ids) {
    SchemeConfig cfg;
    cfg.name = std::move(name);
    for (const auto &id : ids) {
        cfg.stages.push_back(StageSetting{id, default_stage_timeout(id)});
    }
    return cfg;
}

json optional_seconds(const std::optional<seconds> &s) { return s ? json(s->count()) : json(nullptr); }

std::optional<seconds> optional_seconds_from(const json &j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    return seconds{j.get<double>()};
}

}  // namespace

bool SchemeConfig::has_stage(const std::string &id) const {
    return std::any_of(stages.begin(), stages.end(), [&](const StageSetting &s) { return s.id == id; });
}

void validate(const SchemeConfig &cfg) {
    const auto &known = stage_ids();
    std::set<std::string> seen;
    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
        const auto &s = cfg.stages[i];
        if (std::find(known.begin(), known.end(), s.id) == known.end()) {
            throw invalid_argument("unknown stage '" + s.id + "'");
        }
        if (!seen.insert(s.id).second) {
            throw invalid_argument("stage '" + s.id + "' appears more than once");
        }
        if (s.id == "validation" && i + 1 != cfg.stages.size()) {
            throw invalid_argument("validation must be the last stage");
        }
        if (s.timeout && s.timeout->count() < 0) {
            throw invalid_argument("negative timeout for stage '" + s.id + "'");
        }
    }
    if (cfg.stages.empty()) {
        throw invalid_argument("scheme has no stages");
    }
    if (cfg.global_timeout && cfg.global_timeout->count() < 0) {
        throw invalid_argument("negative global timeout");
    }
    if (cfg.workers < 1) {
        throw invalid_argument("workers must be at least 1");
    }
    validate(cfg.eval);
    validate(cfg.options.validation);
    if (cfg.options.curve.patience < 1 || cfg.options.curve.cheap_repeats < 1) {
        throw invalid_argument("curve patience and cheap repeats must be positive");
    }
    if (cfg.options.scaling_epsilon < 0) {
        throw invalid_argument("scaling epsilon must be non-negative");
    }
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out = {"primitive", "full"};
    for (const auto &id : stage_ids()) {
        out.push_back("monotone-" + id);
    }
    for (const auto &id : stages_after_probing()) {
        out.push_back("single-" + id);
    }
    return out;
}

SchemeConfig scheme_preset(const std::string &name) {
    const auto &ids = stage_ids();
    if (name == "primitive") {
        return scheme_of(name, {"probing"});
    }
    if (name == "full") {
        return scheme_of(name, ids);
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (name == "monotone-" + ids[i]) {
            return scheme_of(name, std::vector<std::string>(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(i) + 1));
        }
        if (i > 0 && name == "single-" + ids[i]) {
            return scheme_of(name, {"probing", ids[i]});
        }
    }
    std::string valid;
    for (const auto &n : preset_names()) {
        valid += (valid.empty() ? "" : ", ") + n;
    }
    throw invalid_argument("unknown preset '" + name + "' (valid: " + valid + ")");
}

std::string to_string(SelectionBasis basis) {
    return basis == SelectionBasis::any_stage_best ? "any-stage-best" : "validation-final";
}

std::pair<Dataset, Dataset> carve_holdout(const Dataset &d, const SchemeConfig &cfg) {
    const SplitSpec spec{1.0 - cfg.options.validation.holdout_fraction, derive_seed(cfg.seed, "holdout")};
    const auto counts = d.class_counts();
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    const bool stratifiable = cfg.eval.stratified && present >= 2 &&
                              std::none_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 1; });
    return split(d, spec, stratifiable);
}

RunReport run(const Dataset &d, const SchemeConfig &cfg, const Registry &registry, const RunOptions &options) {
    validate(cfg);
    const auto start = clock::now();
    const Deadline global = cfg.global_timeout ? Deadline::after(*cfg.global_timeout) : Deadline::none();

    RunReport report;
    report.config = cfg;

    Dataset optimization = d;
    Dataset holdout;
    const bool validating = cfg.has_stage("validation");
    if (validating) {
        std::tie(optimization, holdout) = carve_holdout(d, cfg);
        report.holdout_rows = holdout.row_ids();
    }

    EvalConfig eval = cfg.eval;
    eval.seed = cfg.seed;
    Evaluator evaluator(registry, eval, true, cfg.workers);
    if (options.observer) {
        evaluator.set_fold_observer(options.observer);
    }
    if (options.journal_path) {
        evaluator.stream_journal(*options.journal_path);
    }

    CandidatePool pool;
    std::optional<ScoredCandidate> best_seen;
    for (const auto &setting : cfg.stages) {
        StageTrace trace;
        trace.stage_id = setting.id;
        trace.started_ms = elapsed_ms(start);
        const Deadline stage_deadline = setting.timeout ? global.clip(Deadline::after(*setting.timeout)) : global;
        StageContext ctx{evaluator, registry, optimization, validating ? &holdout : nullptr,
                         derive_seed(cfg.seed, setting.id), stage_deadline, cfg.options, {}};

        const auto before = keys_of(pool);
        const std::size_t evals_before = evaluator.evaluations();
        pool = stage_run(setting.id, std::move(pool), ctx);
        const auto after = keys_of(pool);

        for (const auto &k : after) {
            trace.added += before.contains(k) ? 0 : 1;
        }
        for (const auto &k : before) {
            trace.removed += after.contains(k) ? 0 : 1;
        }
        trace.evaluations = evaluator.evaluations() - evals_before;
        trace.deadline_hit = ctx.notes.deadline_hit || stage_deadline.expired();
        trace.pool_size = pool.size();
        for (const auto &e : pool.entries()) {
            if (!best_seen || e.score.mean < best_seen->score.mean) {
                best_seen = e;
                best_seen->validation.reset();
            }
        }
        trace.best_seen = best_seen ? best_seen->score.mean : kInf;
        trace.ended_ms = elapsed_ms(start);
        for (auto &w : ctx.notes.warnings) {
            report.warnings.push_back(std::move(w));
        }
        for (auto &sc : ctx.notes.expanded_scalers) {
            report.expanded_scalers.push_back(std::move(sc));
        }
        if (ctx.notes.feature_set) {
            report.feature_set = std::move(ctx.notes.feature_set);
        }
        report.traces.push_back(trace);
        report.snapshots.push_back(pool.entries());
    }

    report.best_internal = best_seen;
    if (validating && !pool.empty() && pool.entries().front().validation) {
        report.best = pool.entries().front();
        report.basis = SelectionBasis::validation_final;
    } else {
        if (validating && best_seen) {
            report.warnings.emplace_back("validation produced no finalist; falling back to the best internal score");
        }
        report.best = best_seen;
        report.basis = SelectionBasis::any_stage_best;
    }
    report.found = report.best.has_value();
    if (!report.found) {
        report.warnings.emplace_back("no model found");
    }
    report.journal = evaluator.journal();
    report.wall_ms = elapsed_ms(start);
    return report;
}

FittedPipeline fit_best(const RunReport &report, const Dataset &d, const Registry &registry) {
    if (!report.best) {
        throw error("no model found");
    }
    const Pipeline pipeline(registry, report.best->candidate);
    return pipeline.fit(d, derive_seed(report.config.seed, report.best->key()));
}

// ---------------------------------------------------------------------------
// JSON

json scheme_to_json(const SchemeConfig &cfg) {
    json j;
    j["name"] = cfg.name;
    json stages = json::array();
    for (const auto &s : cfg.stages) {
        stages.push_back({{"id", s.id}, {"timeout_s", optional_seconds(s.timeout)}});
    }
    j["stages"] = stages;
    j["global_timeout_s"] = optional_seconds(cfg.global_timeout);
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["eval"] = {{"repeats", cfg.eval.repeats},
                 {"train_fraction", cfg.eval.train_fraction},
                 {"metric", cfg.eval.metric},
                 {"per_eval_timeout_s", cfg.eval.per_eval_timeout.count()},
                 {"stratified", cfg.eval.stratified}};
    const auto &o = cfg.options;
    json pilots = json::array();
    for (const auto &p : o.pilots.pilots) {
        pilots.push_back(candidate_to_json(p));
    }
    j["stage_options"] = {
        {"pilots", pilots},
        {"include_best_probing", o.pilots.include_best_probing},
        {"scaling_epsilon", o.scaling_epsilon},
        {"curve", {{"tol", o.curve.tol}, {"patience", o.curve.patience}, {"cheap_repeats", o.curve.cheap_repeats}}},
        {"tuning", {{"per_candidate_s", optional_seconds(o.tuning.per_candidate)}, {"max_evals", o.tuning.max_evals}}},
        {"validation",
         {{"n_bar", o.validation.n_bar}, {"m", o.validation.m}, {"holdout_fraction", o.validation.holdout_fraction}}}};
    return j;
}

SchemeConfig scheme_from_json(const json &j) {
    try {
        SchemeConfig cfg;
        cfg.name = j.value("name", std::string("custom"));
        cfg.stages.clear();
        for (const auto &s : j.at("stages")) {
            cfg.stages.push_back(StageSetting{s.at("id").get<std::string>(), optional_seconds_from(s.value("timeout_s", json(nullptr)))});
        }
        if (j.contains("global_timeout_s")) {
            cfg.global_timeout = optional_seconds_from(j.at("global_timeout_s"));
        }
        cfg.seed = j.value("seed", std::uint64_t{0});
        cfg.workers = j.value("workers", std::size_t{1});
        if (j.contains("eval")) {
            const auto &e = j.at("eval");
            cfg.eval.repeats = e.value("repeats", cfg.eval.repeats);
            cfg.eval.train_fraction = e.value("train_fraction", cfg.eval.train_fraction);
            cfg.eval.metric = e.value("metric", cfg.eval.metric);
            cfg.eval.per_eval_timeout = seconds{e.value("per_eval_timeout_s", cfg.eval.per_eval_timeout.count())};
            cfg.eval.stratified = e.value("stratified", cfg.eval.stratified);
        }
        if (j.contains("stage_options")) {
            const auto &o = j.at("stage_options");
            auto &opt = cfg.options;
            if (o.contains("pilots")) {
                opt.pilots.pilots.clear();
                for (const auto &p : o.at("pilots")) {
                    opt.pilots.pilots.push_back(candidate_from_json(p));
                }
            }
            opt.pilots.include_best_probing = o.value("include_best_probing", opt.pilots.include_best_probing);
            opt.scaling_epsilon = o.value("scaling_epsilon", opt.scaling_epsilon);
            if (o.contains("curve")) {
                const auto &c = o.at("curve");
                opt.curve.tol = c.value("tol", opt.curve.tol);
                opt.curve.patience = c.value("patience", opt.curve.patience);
                opt.curve.cheap_repeats = c.value("cheap_repeats", opt.curve.cheap_repeats);
            }
            if (o.contains("tuning")) {
                const auto &t = o.at("tuning");
                if (t.contains("per_candidate_s")) {
                    opt.tuning.per_candidate = optional_seconds_from(t.at("per_candidate_s"));
                }
                opt.tuning.max_evals = t.value("max_evals", opt.tuning.max_evals);
            }
            if (o.contains("validation")) {
                const auto &v = o.at("validation");
                opt.validation.n_bar = v.value("n_bar", opt.validation.n_bar);
                opt.validation.m = v.value("m", opt.validation.m);
                opt.validation.holdout_fraction = v.value("holdout_fraction", opt.validation.holdout_fraction);
            }
        }
        validate(cfg);
        return cfg;
    } catch (const json::exception &e) {
        throw parse_error(std::string("malformed scheme config: ") + e.what());
    }
}

json scored_candidate_to_json(const ScoredCandidate &c) {
    json j;
    j["key"] = c.key();
    j["candidate"] = candidate_to_json(c.candidate);
    j["score"] = score_to_json(c.score);
    j["origin"] = c.origin;
    if (c.validation) {
        j["validation"] = {{"phi_validate", c.validation->phi_validate},
                           {"weight", c.validation->weight},
                           {"final_score", c.validation->final_score}};
    }
    return j;
}

json stage_traces_to_json(const std::vector<StageTrace> &traces) {
    json out = json::array();
    for (const auto &t : traces) {
        out.push_back({{"stage_id", t.stage_id},
                       {"started", t.started_ms},
                       {"ended", t.ended_ms},
                       {"evaluations", t.evaluations},
                       {"added", t.added},
                       {"removed", t.removed},
                       {"deadline_hit", t.deadline_hit},
                       {"pool_size", t.pool_size},
                       {"best_seen", std::isfinite(t.best_seen) ? json(t.best_seen) : json(nullptr)}});
    }
    return out;
}

json report_to_json(const RunReport &report) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["found"] = report.found;
    j["selection_basis"] = to_string(report.basis);
    j["best"] = report.best ? scored_candidate_to_json(*report.best) : json(nullptr);
    j["best_internal"] = report.best_internal ? scored_candidate_to_json(*report.best_internal) : json(nullptr);
    j["journal"] = {{"file", "journal.jsonl"}, {"records", report.journal.size()}};
    j["stages"] = stage_traces_to_json(report.traces);
    json snapshots = json::array();
    for (std::size_t i = 0; i < report.snapshots.size(); ++i) {
        json pool = json::array();
        for (const auto &e : report.snapshots[i]) {
            pool.push_back({{"key", e.key()}, {"mean", e.score.mean}, {"origin", e.origin}});
        }
        snapshots.push_back({{"stage_id", report.traces[i].stage_id}, {"pool", pool}});
    }
    j["pool_snapshots"] = snapshots;
    if (report.feature_set) {
        const auto &f = *report.feature_set;
        json curves = json::array();
        for (const auto &p : f.curves) {
            curves.push_back({{"filter", p.filter}, {"prefix", p.prefix}, {"score", std::isfinite(p.score) ? json(p.score) : json(nullptr)}});
        }
        j["feature_set"] = {{"features", f.features.indices()}, {"filter", f.filter}, {"prefix", f.prefix}, {"curves", curves}};
    }
    j["expanded_scalers"] = report.expanded_scalers;
    j["holdout_rows"] = report.holdout_rows;
    j["warnings"] = report.warnings;
    j["config"] = scheme_to_json(report.config);
    j["wall_ms"] = report.wall_ms;
    return j;
}

}  // namespace stagewise
