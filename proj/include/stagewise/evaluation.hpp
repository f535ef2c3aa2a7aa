#pragma once

#include "stagewise/components.hpp"
#include "stagewise/data.hpp"
#include "stagewise/deadline.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace stagewise {

/// Pipeline encoding (scaler, feature set, learner, parameters). Absent slots are blanks.
struct Candidate {
    std::optional<std::string> scaler;
    std::optional<FeatureSet> features;
    LearnerChoice learner;

    static Candidate bare(std::string learner_id) { return Candidate{std::nullopt, std::nullopt, {std::move(learner_id), {}, {}}}; }

    friend bool operator==(const Candidate &, const Candidate &) = default;
};

/// Canonical cache/dedup key: "<scaler>|<features>|<learner>|<params>".
///
///   scaler   := id | "-"
///   features := comma-separated ascending indices | "-"
///   learner  := base-id | meta-id "[" meta-params "](" base-id ")"
///   params   := "default" | sorted "name=value" list joined by ","
///   meta-params := "default" | sorted "name=value" list
///
/// Reals always carry a '.' or an exponent so they never collide with integers.
std::string candidate_key(const Candidate &c);

struct EvalConfig {
    std::size_t repeats = 5;
    double train_fraction = 0.7;
    std::string metric = "error_rate";
    std::uint64_t seed = 0;
    seconds per_eval_timeout{60.0};
    bool stratified = true;
};

void validate(const EvalConfig &cfg);

enum class ScoreStatus { ok, failed_timeout, failed_error };

std::string to_string(ScoreStatus status);
ScoreStatus score_status_from_string(const std::string &s);

/// Loss-convention score: lower is better.
struct Score {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> per_fold;
    ScoreStatus status = ScoreStatus::ok;
    std::string message;

    [[nodiscard]] bool ok() const { return status == ScoreStatus::ok; }
    friend bool operator==(const Score &, const Score &) = default;
};

/// Fraction of mismatching positions. Throws on empty or unequal-length input.
double error_rate(std::span<const int> truth, std::span<const int> predicted);

/// A trained pipeline: scaler fitted on the training rows, projection, model.
class FittedPipeline {
  public:
    FittedPipeline(std::shared_ptr<const FittedScaler> scaler, std::optional<FeatureSet> features, FittedModel model)
        : scaler_(std::move(scaler)), features_(std::move(features)), model_(std::move(model)) {}

    [[nodiscard]] std::vector<int> predict(const Matrix &rows, const Deadline &deadline = {}) const;
    [[nodiscard]] const FittedScaler *scaler() const { return scaler_.get(); }
    [[nodiscard]] const std::optional<FeatureSet> &features() const { return features_; }

  private:
    std::shared_ptr<const FittedScaler> scaler_;
    std::optional<FeatureSet> features_;
    FittedModel model_;
};

/// A candidate validated against a registry; fitting order is scaler -> projection -> learner.
class Pipeline {
  public:
    /// Throws invalid_argument for unknown ids, out-of-space params, nested metas or empty feature sets.
    Pipeline(const Registry &registry, Candidate candidate);

    [[nodiscard]] FittedPipeline fit(const Dataset &train, std::uint64_t seed, const Deadline &deadline = {}) const;
    [[nodiscard]] const Candidate &candidate() const { return candidate_; }

  private:
    const Registry *registry_;
    Candidate candidate_;
};

inline Pipeline materialize(const Candidate &c, const Registry &registry) { return Pipeline(registry, c); }

/// The MCCV partitions used for a dataset: split seed of repeat r is derived from (cfg.seed, r) only,
/// so every candidate sees the same folds. Stratified when cfg.stratified and every present class
/// has at least two rows.
std::vector<SplitIndices> mccv_splits(const Dataset &d, const EvalConfig &cfg, std::size_t repeats);

/// Seed used to fit the pipeline on fold `repeat`.
std::uint64_t evaluation_seed(const EvalConfig &cfg, const std::string &key, std::size_t repeat);

struct ScoreRequest {
    std::string stage;
    Deadline deadline;                      // stage/global deadline; clipped with the per-eval timeout
    std::optional<std::size_t> repeats;     // overrides cfg.repeats (cheap CV)
};

/// One evaluation as recorded in the JSON-lines journal.
struct JournalRecord {
    std::string candidate_key;
    std::string stage;
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> per_fold;
    ScoreStatus status = ScoreStatus::ok;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
    std::string message;
};

/// Scoring service used by stages.
class Scorer {
  public:
    virtual ~Scorer() = default;
    virtual Score score(const Candidate &c, const Dataset &d, const ScoreRequest &request) = 0;

    /// Scores independent candidates; results are in input order. Default is sequential.
    virtual std::vector<Score> score_many(std::span<const Candidate> cs, const Dataset &d, const ScoreRequest &request);

    /// Number of evaluations performed (cache hits excluded).
    [[nodiscard]] virtual std::size_t evaluations() const = 0;
};

/// Observes the train/validation rows of every fold (tests audit leakage with it).
using FoldObserver = std::function<void(const Dataset &train, const Dataset &validation)>;

/// MCCV evaluator with an in-memory cache keyed by (candidate key, dataset hash, config hash).
/// Thread-safe. Seeds derive from the candidate key, so results do not depend on call order.
class Evaluator final : public Scorer {
  public:
    Evaluator(const Registry &registry, EvalConfig cfg, bool cache_enabled = true, std::size_t workers = 1);

    Score score(const Candidate &c, const Dataset &d, const ScoreRequest &request) override;
    std::vector<Score> score_many(std::span<const Candidate> cs, const Dataset &d, const ScoreRequest &request) override;
    [[nodiscard]] std::size_t evaluations() const override { return evaluations_.load(); }

    [[nodiscard]] const EvalConfig &config() const { return cfg_; }
    [[nodiscard]] const Registry &registry() const { return *registry_; }
    [[nodiscard]] std::vector<JournalRecord> journal() const;
    [[nodiscard]] std::size_t cache_hits() const { return cache_hits_.load(); }

    void set_fold_observer(FoldObserver observer) { observer_ = std::move(observer); }

    /// Appends every new journal record to a JSON-lines file as it is produced.
    void stream_journal(const std::filesystem::path &path);

    /// Spills cache entries to a JSON-lines file and preloads entries already present in it.
    void attach_cache_file(const std::filesystem::path &path);

  private:
    std::pair<Score, JournalRecord> evaluate(const Candidate &c, const Dataset &d, const ScoreRequest &request);
    [[nodiscard]] std::string cache_key(const std::string &candidate_key, const Dataset &d, std::size_t repeats) const;
    void record(const JournalRecord &r);
    void remember(const std::string &key, const Score &score);
    std::optional<Score> recall(const std::string &key);

    const Registry *registry_;
    EvalConfig cfg_;
    bool cache_enabled_;
    std::size_t workers_;
    FoldObserver observer_;

    mutable std::mutex mutex_;
    std::unordered_map<std::string, Score> cache_;
    std::vector<JournalRecord> journal_;
    std::unique_ptr<std::ofstream> journal_stream_;
    std::unique_ptr<std::ofstream> cache_stream_;
    std::atomic<std::size_t> evaluations_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

/// Convenience: stateless MCCV score (fresh evaluator, no cache).
Score mccv_score(const Candidate &c, const Dataset &d, const EvalConfig &cfg, const Registry &registry);

}  // namespace stagewise
