#pragma once

#include "stagewise/evaluation.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace stagewise {

/// Scores obtained in the validation stage; on a different scale from internal scores.
struct ValidationScores {
    double phi_validate = 0.0;
    double weight = 0.0;  // omega(|holdout|)
    double final_score = 0.0;
};

struct ScoredCandidate {
    Candidate candidate;
    Score score;
    std::string origin;  // id of the stage that added it
    std::optional<ValidationScores> validation;

    [[nodiscard]] std::string key() const { return candidate_key(candidate); }
};

/// Ordered, de-duplicated pool of successfully scored candidates.
class CandidatePool {
  public:
    /// Appends unless the key is already present or the score is not ok. Returns whether it was added.
    bool add(ScoredCandidate entry);

    [[nodiscard]] bool contains(const std::string &key) const { return index_.contains(key); }
    [[nodiscard]] const ScoredCandidate *find(const std::string &key) const;
    [[nodiscard]] const std::vector<ScoredCandidate> &entries() const { return entries_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] bool empty() const { return entries_.empty(); }

    /// Entries by ascending internal mean score; insertion order breaks ties.
    [[nodiscard]] std::vector<const ScoredCandidate *> by_score() const;

    /// Entry with the lowest internal mean (earliest on ties), or nullptr.
    [[nodiscard]] const ScoredCandidate *best() const;

  private:
    std::vector<ScoredCandidate> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ValidationConfig {
    std::size_t n_bar = 10000;
    std::size_t m = 10;
    double holdout_fraction = 0.10;
};

void validate(const ValidationConfig &cfg);

struct PilotConfig {
    /// Cheap distance-sensitive pilots; the first one also drives the filtering curves.
    std::vector<Candidate> pilots = {Candidate::bare("knn"), Candidate::bare("gaussian_nb")};
    /// Adds the best probing candidate (of a non-pilot learner) to the scaling pilots.
    bool include_best_probing = true;
};

struct CurveConfig {
    double tol = 0.005;
    std::size_t patience = 2;
    std::size_t cheap_repeats = 3;
};

struct TuningBudget {
    std::optional<seconds> per_candidate = seconds{120.0};
    std::size_t max_evals = 30;
};

/// Knobs of the concrete stages.
struct StageOptions {
    PilotConfig pilots;
    double scaling_epsilon = 0.0;
    CurveConfig curve;
    TuningBudget tuning;
    ValidationConfig validation;
};

struct CurvePoint {
    std::string filter;
    std::size_t prefix = 0;
    double score = 0.0;  // +inf when the pilot failed
};

struct FeatureSetResult {
    FeatureSet features;
    std::string filter;
    std::size_t prefix = 0;
    double score = 0.0;
    std::vector<CurvePoint> curves;
};

/// Diagnostics a stage leaves behind for the run report.
struct StageNotes {
    std::vector<std::string> warnings;
    std::optional<FeatureSetResult> feature_set;
    std::vector<std::string> expanded_scalers;  // scalers whose pilots improved
    bool deadline_hit = false;
};

/// Everything a stage may use. The holdout is only set for the validation stage.
struct StageContext {
    Scorer &scorer;
    const Registry &registry;
    const Dataset &optimization;
    const Dataset *holdout = nullptr;
    std::uint64_t seed = 0;
    Deadline deadline;
    StageOptions options;
    StageNotes notes;
};

/// Generic stage: takes a pool, returns an augmented pool.
class Stage {
  public:
    virtual ~Stage() = default;
    [[nodiscard]] virtual std::string id() const = 0;
    [[nodiscard]] virtual CandidatePool run(CandidatePool pool, StageContext &ctx) const = 0;
};

/// Ids in canonical scheme order: probing, scaling, filtering, meta, tuning, validation.
const std::vector<std::string> &stage_ids();
std::unique_ptr<Stage> make_stage(const std::string &id);
CandidatePool stage_run(const std::string &id, CandidatePool pool, StageContext &ctx);

CandidatePool probing(CandidatePool pool, StageContext &ctx);
CandidatePool scaling(CandidatePool pool, StageContext &ctx);
CandidatePool filtering(CandidatePool pool, StageContext &ctx);
CandidatePool meta(CandidatePool pool, StageContext &ctx);
CandidatePool tuning(CandidatePool pool, StageContext &ctx);
CandidatePool validation(CandidatePool pool, StageContext &ctx);

/// Geometric prefix schedule {1, 2, 4, ...} capped at d, with d always included.
std::vector<std::size_t> prefix_schedule(std::size_t d);

/// Evaluates schedule points in order and stops once `patience` consecutive points are worse
/// than the best seen by more than tol. Returns the evaluated (prefix, score) points.
std::vector<std::pair<std::size_t, double>> walk_curve(const std::vector<std::size_t> &schedule,
                                                       const std::function<double(std::size_t)> &score_of,
                                                       double tol, std::size_t patience);

/// Feature set from filter rankings: best pilot prefix over all filters; ties go to the smaller
/// prefix, then to the earlier filter. Never empty.
FeatureSetResult compute_feature_set(StageContext &ctx, const std::vector<std::string> &filters, const Candidate &pilot);

/// Hoeffding satisfaction: min(1, n / n_bar).
double tau(std::size_t n, std::size_t n_bar);
/// Validation weight: tau(n) + (n / N) (1 - tau(n)).
double omega(std::size_t n, std::size_t total, std::size_t n_bar);
/// Convex blend of internal and validation scores.
double final_score(double phi_int, double phi_val, double w);

}  // namespace stagewise
