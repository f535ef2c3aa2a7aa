#pragma once

#include "stagewise/evaluation.hpp"
#include "stagewise/serialize.hpp"
#include "stagewise/stages.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stagewise {

struct StageSetting {
    std::string id;
    std::optional<seconds> timeout;  // unbounded except for the global budget

    friend bool operator==(const StageSetting &, const StageSetting &) = default;
};

struct SchemeConfig {
    std::string name = "custom";
    std::vector<StageSetting> stages;
    std::optional<seconds> global_timeout = seconds{3600.0};
    EvalConfig eval;  // eval.seed is replaced by seed at run time
    StageOptions options;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    [[nodiscard]] bool has_stage(const std::string &id) const;
};

/// Throws invalid_argument: unknown or repeated stages, validation not last, bad eval/validation settings.
void validate(const SchemeConfig &cfg);

/// primitive, full, monotone-<stage> for every stage after probing, single-<stage> (probing + that stage).
std::vector<std::string> preset_names();
SchemeConfig scheme_preset(const std::string &name);

enum class SelectionBasis { any_stage_best, validation_final };
std::string to_string(SelectionBasis basis);

struct StageTrace {
    std::string stage_id;
    double started_ms = 0.0;  // since run start
    double ended_ms = 0.0;
    std::size_t evaluations = 0;
    std::size_t added = 0;
    std::size_t removed = 0;
    bool deadline_hit = false;
    std::size_t pool_size = 0;
    double best_seen = 0.0;  // best internal score seen so far, +inf when none
};

struct RunReport {
    bool found = false;
    std::optional<ScoredCandidate> best;
    SelectionBasis basis = SelectionBasis::any_stage_best;
    /// Best internal (MCCV) score over every pool entry produced by any stage.
    std::optional<ScoredCandidate> best_internal;
    std::vector<JournalRecord> journal;
    std::vector<StageTrace> traces;
    std::vector<std::vector<ScoredCandidate>> snapshots;  // pool after each stage
    std::optional<FeatureSetResult> feature_set;
    std::vector<std::string> expanded_scalers;
    SchemeConfig config;
    std::vector<std::size_t> holdout_rows;  // row ids
    std::vector<std::string> warnings;
    double wall_ms = 0.0;
};

struct RunOptions {
    FoldObserver observer;
    std::optional<std::filesystem::path> journal_path;
};

/// Optimization and holdout parts used when the scheme has a validation stage.
std::pair<Dataset, Dataset> carve_holdout(const Dataset &d, const SchemeConfig &cfg);

RunReport run(const Dataset &d, const SchemeConfig &cfg, const Registry &registry = registry_default(),
              const RunOptions &options = {});

/// Fits the reported best candidate on all of d (seeded from the run seed and the candidate key).
FittedPipeline fit_best(const RunReport &report, const Dataset &d, const Registry &registry = registry_default());

json scheme_to_json(const SchemeConfig &cfg);
SchemeConfig scheme_from_json(const json &j);
json scored_candidate_to_json(const ScoredCandidate &c);
json stage_traces_to_json(const std::vector<StageTrace> &traces);
json report_to_json(const RunReport &report);

}  // namespace stagewise
