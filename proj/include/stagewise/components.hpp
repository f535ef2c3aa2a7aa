#pragma once

#include "stagewise/data.hpp"
#include "stagewise/deadline.hpp"
#include "stagewise/params.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stagewise {

/// Training input handed to a learner implementation.
struct FitRequest {
    const Matrix &x;
    std::span<const int> y;
    std::size_t n_classes = 0;
    /// Per-row weights; empty means uniform. Only passed to learners with supports_weights.
    std::span<const double> weights;
    std::uint64_t seed = 0;
    Deadline deadline;
};

/// A trained predictor. Implementations are immutable after training.
class Model {
  public:
    virtual ~Model() = default;
    [[nodiscard]] virtual std::vector<int> predict(const Matrix &rows, const Deadline &deadline) const = 0;
};

/// Predicts one class everywhere.
class ConstantModel final : public Model {
  public:
    explicit ConstantModel(int label) : label_(label) {}
    [[nodiscard]] std::vector<int> predict(const Matrix &rows, const Deadline &) const override {
        return std::vector<int>(rows.rows(), label_);
    }

  private:
    int label_;
};

struct LearnerSpec;

using Trainer = std::function<std::unique_ptr<Model>(const ParamMap &params, const FitRequest &request)>;
using MetaTrainer = std::function<std::unique_ptr<Model>(const ParamMap &meta_params, const LearnerSpec &base,
                                                         const ParamMap &base_params, const FitRequest &request)>;

struct LearnerSpec {
    std::string id;
    ParamMap default_params;
    ParamSpace param_space;
    bool is_meta = false;
    bool supports_weights = false;
    Trainer train;           // base learners
    MetaTrainer meta_train;  // meta learners
};

/// Fitted per-column transformation.
class FittedScaler {
  public:
    virtual ~FittedScaler() = default;
    [[nodiscard]] virtual Matrix transform(const Matrix &rows) const = 0;
};

struct ScalerSpec {
    std::string id;
    std::function<std::unique_ptr<FittedScaler>(const Matrix &fit_data)> fit;
};

/// Per-column relevance scores; larger is more relevant.
struct FilterSpec {
    std::string id;
    std::function<std::vector<double>(const Dataset &d)> score;
};

/// A meta-learner wrapping of a base learner.
struct MetaChoice {
    std::string id;
    std::optional<ParamMap> params;  // nullopt: registry defaults

    friend bool operator==(const MetaChoice &, const MetaChoice &) = default;
};

/// Learner slot of a candidate: a base learner, optionally wrapped by a meta-learner.
struct LearnerChoice {
    std::string learner;
    std::optional<ParamMap> params;  // nullopt: registry defaults
    std::optional<MetaChoice> meta;

    friend bool operator==(const LearnerChoice &, const LearnerChoice &) = default;
};

/// Trained learner with the column count it expects.
class FittedModel {
  public:
    FittedModel(std::shared_ptr<const Model> model, std::size_t n_features)
        : model_(std::move(model)), n_features_(n_features) {}

    /// Throws invalid_argument on a column count mismatch.
    [[nodiscard]] std::vector<int> predict(const Matrix &rows, const Deadline &deadline = {}) const;
    [[nodiscard]] std::size_t n_features() const { return n_features_; }

  private:
    std::shared_ptr<const Model> model_;
    std::size_t n_features_;
};

/// Catalog of pipeline building blocks. Immutable after construction, safe to share.
class Registry {
  public:
    void add_learner(LearnerSpec spec);
    void add_scaler(ScalerSpec spec);
    void add_filter(FilterSpec spec);

    [[nodiscard]] const LearnerSpec &learner(const std::string &id) const;
    [[nodiscard]] bool has_learner(const std::string &id) const;
    [[nodiscard]] const ScalerSpec &scaler(const std::string &id) const;
    [[nodiscard]] const FilterSpec &filter(const std::string &id) const;

    [[nodiscard]] std::vector<std::string> base_learner_ids() const;
    [[nodiscard]] std::vector<std::string> meta_learner_ids() const;
    [[nodiscard]] std::vector<std::string> scaler_ids() const;
    [[nodiscard]] std::vector<std::string> filter_ids() const;

    [[nodiscard]] const std::vector<LearnerSpec> &learners() const { return learners_; }

    [[nodiscard]] const ParamMap &default_params(const std::string &id) const { return learner(id).default_params; }

    /// Each parameter drawn independently and uniformly over its domain.
    [[nodiscard]] ParamMap sample_params(const std::string &id, Rng &rng) const;

    /// Explicit params validated against the space, or the defaults.
    [[nodiscard]] ParamMap resolve_params(const std::string &id, const std::optional<ParamMap> &params) const;

    /// Composite learner choice; rejects meta-of-meta and unknown ids.
    [[nodiscard]] LearnerChoice wrap_meta(const std::string &meta_id, std::optional<ParamMap> meta_params,
                                          const std::string &base_id, std::optional<ParamMap> base_params) const;

    /// Throws invalid_argument if ids are unknown, params fall outside their space, or metas nest.
    void validate(const LearnerChoice &choice) const;

    /// Trains the learner. A training set with a single class yields a constant model.
    [[nodiscard]] FittedModel fit(const LearnerChoice &choice, const Dataset &train, std::uint64_t seed,
                                  const Deadline &deadline = {}) const;
    [[nodiscard]] FittedModel fit(const LearnerChoice &choice, const Matrix &x, std::span<const int> y,
                                  std::size_t n_classes, std::uint64_t seed, const Deadline &deadline = {}) const;

    [[nodiscard]] std::unique_ptr<FittedScaler> fit_scaler(const std::string &id, const Matrix &fit_data) const;

    /// Permutation of column indices, most relevant first; ties toward the lower index.
    [[nodiscard]] std::vector<std::size_t> rank_features(const std::string &filter_id, const Dataset &d) const;

  private:
    std::vector<LearnerSpec> learners_;
    std::vector<ScalerSpec> scalers_;
    std::vector<FilterSpec> filters_;
};

/// The shipped catalog: knn, gaussian_nb, decision_tree, logistic_regression, random_forest;
/// bagging, adaboost; standardize, minmax, quantile_rank; pearson_correlation,
/// mutual_information, chi_squared, variance.
Registry registry_default();

/// Training with optional per-row weights; unsupported weights are realized by weighted resampling.
std::unique_ptr<Model> train_base(const LearnerSpec &spec, const ParamMap &params, const FitRequest &request);

// Learner factories, exposed for direct use and testing.
LearnerSpec knn_spec();
LearnerSpec gaussian_nb_spec();
LearnerSpec decision_tree_spec();
LearnerSpec logistic_regression_spec();
LearnerSpec random_forest_spec();
LearnerSpec bagging_spec();
LearnerSpec adaboost_spec();

ScalerSpec standardize_spec();
ScalerSpec minmax_spec();
ScalerSpec quantile_rank_spec();

FilterSpec pearson_filter_spec();
FilterSpec mutual_information_filter_spec();
FilterSpec chi_squared_filter_spec();
FilterSpec variance_filter_spec();

/// Ranks by descending score, ties by ascending index; NaN scores rank last.
std::vector<std::size_t> ranking_from_scores(std::span<const double> scores);

/// Fitted standardize scaler; zero-variance columns pass through unchanged.
class StandardScaler final : public FittedScaler {
  public:
    explicit StandardScaler(const Matrix &fit_data);
    [[nodiscard]] Matrix transform(const Matrix &rows) const override;
    [[nodiscard]] Matrix inverse_transform(const Matrix &rows) const;
    [[nodiscard]] const std::vector<double> &means() const { return means_; }
    [[nodiscard]] const std::vector<double> &stds() const { return stds_; }

  private:
    std::vector<double> means_;
    std::vector<double> stds_;
};

/// Fitted min-max scaler; zero-range columns pass through unchanged.
class MinMaxScaler final : public FittedScaler {
  public:
    explicit MinMaxScaler(const Matrix &fit_data);
    [[nodiscard]] Matrix transform(const Matrix &rows) const override;
    [[nodiscard]] Matrix inverse_transform(const Matrix &rows) const;
    [[nodiscard]] const std::vector<double> &mins() const { return mins_; }
    [[nodiscard]] const std::vector<double> &ranges() const { return ranges_; }

  private:
    std::vector<double> mins_;
    std::vector<double> ranges_;
};

/// Maps values to their empirical CDF rank in [0, 1]: rank/(n-1) on fitted values (ties
/// get their average rank), linear interpolation between fitted values, clamped outside.
class QuantileRankScaler final : public FittedScaler {
  public:
    explicit QuantileRankScaler(const Matrix &fit_data);
    [[nodiscard]] Matrix transform(const Matrix &rows) const override;

  private:
    std::vector<std::vector<double>> sorted_;
};

}  // namespace stagewise
