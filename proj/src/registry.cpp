#include "stagewise/components.hpp"

#include "stagewise/error.hpp"

#include <algorithm>

namespace stagewise {

std::vector<int> FittedModel::predict(const Matrix &rows, const Deadline &deadline) const {
    if (rows.rows() == 0) {
        return {};
    }
    if (rows.cols() != n_features_) {
        throw invalid_argument("model expects " + std::to_string(n_features_) + " columns, got " +
                               std::to_string(rows.cols()));
    }
    return model_->predict(rows, deadline);
}

namespace {

template <class Spec>
const Spec &find_by_id(const std::vector<Spec> &specs, const std::string &id, const char *kind) {
    const auto it = std::find_if(specs.begin(), specs.end(), [&](const Spec &s) { return s.id == id; });
    if (it == specs.end()) {
        throw invalid_argument(std::string("unknown ") + kind + " '" + id + "'");
    }
    return *it;
}

template <class Spec>
void ensure_unique(const std::vector<Spec> &specs, const std::string &id) {
    if (std::any_of(specs.begin(), specs.end(), [&](const Spec &s) { return s.id == id; })) {
        throw invalid_argument("duplicate registry id '" + id + "'");
    }
}

}  // namespace

void Registry::add_learner(LearnerSpec spec) {
    ensure_unique(learners_, spec.id);
    if (!params_within(spec.param_space, spec.default_params)) {
        throw invalid_argument("default parameters of '" + spec.id + "' lie outside its space");
    }
    learners_.push_back(std::move(spec));
}

void Registry::add_scaler(ScalerSpec spec) {
    ensure_unique(scalers_, spec.id);
    scalers_.push_back(std::move(spec));
}

void Registry::add_filter(FilterSpec spec) {
    ensure_unique(filters_, spec.id);
    filters_.push_back(std::move(spec));
}

const LearnerSpec &Registry::learner(const std::string &id) const { return find_by_id(learners_, id, "learner"); }
const ScalerSpec &Registry::scaler(const std::string &id) const { return find_by_id(scalers_, id, "scaler"); }
const FilterSpec &Registry::filter(const std::string &id) const { return find_by_id(filters_, id, "filter"); }

bool Registry::has_learner(const std::string &id) const {
    return std::any_of(learners_.begin(), learners_.end(), [&](const LearnerSpec &s) { return s.id == id; });
}

std::vector<std::string> Registry::base_learner_ids() const {
    std::vector<std::string> ids;
    for (const auto &s : learners_) {
        if (!s.is_meta) {
            ids.push_back(s.id);
        }
    }
    return ids;
}

std::vector<std::string> Registry::meta_learner_ids() const {
    std::vector<std::string> ids;
    for (const auto &s : learners_) {
        if (s.is_meta) {
            ids.push_back(s.id);
        }
    }
    return ids;
}

std::vector<std::string> Registry::scaler_ids() const {
    std::vector<std::string> ids;
    for (const auto &s : scalers_) {
        ids.push_back(s.id);
    }
    return ids;
}

std::vector<std::string> Registry::filter_ids() const {
    std::vector<std::string> ids;
    for (const auto &s : filters_) {
        ids.push_back(s.id);
    }
    return ids;
}

ParamMap Registry::sample_params(const std::string &id, Rng &rng) const {
    ParamMap out;
    for (const auto &[name, domain] : learner(id).param_space) {
        out.emplace(name, sample_domain(domain, rng));
    }
    return out;
}

ParamMap Registry::resolve_params(const std::string &id, const std::optional<ParamMap> &params) const {
    const auto &spec = learner(id);
    if (!params) {
        return spec.default_params;
    }
    if (!params_within(spec.param_space, *params)) {
        throw invalid_argument("parameters {" + format_params(*params) + "} are outside the space of '" + id + "'");
    }
    return *params;
}

LearnerChoice Registry::wrap_meta(const std::string &meta_id, std::optional<ParamMap> meta_params,
                                  const std::string &base_id, std::optional<ParamMap> base_params) const {
    LearnerChoice choice{base_id, std::move(base_params), MetaChoice{meta_id, std::move(meta_params)}};
    validate(choice);
    return choice;
}

void Registry::validate(const LearnerChoice &choice) const {
    const auto &base = learner(choice.learner);
    if (base.is_meta) {
        throw invalid_argument("'" + base.id + "' is a meta-learner and cannot be used as a base learner");
    }
    (void)resolve_params(choice.learner, choice.params);
    if (choice.meta) {
        const auto &meta = learner(choice.meta->id);
        if (!meta.is_meta) {
            throw invalid_argument("'" + meta.id + "' is not a meta-learner");
        }
        (void)resolve_params(meta.id, choice.meta->params);
    }
}

FittedModel Registry::fit(const LearnerChoice &choice, const Dataset &train, std::uint64_t seed,
                          const Deadline &deadline) const {
    return fit(choice, train.instances(), train.labels(), train.n_classes(), seed, deadline);
}

FittedModel Registry::fit(const LearnerChoice &choice, const Matrix &x, std::span<const int> y, std::size_t n_classes,
                          std::uint64_t seed, const Deadline &deadline) const {
    validate(choice);
    if (x.rows() == 0) {
        throw invalid_argument("cannot fit on an empty dataset");
    }
    const auto &base = learner(choice.learner);
    const auto base_params = resolve_params(choice.learner, choice.params);
    const FitRequest request{x, y, n_classes, {}, seed, deadline};
    std::shared_ptr<const Model> model;
    if (choice.meta) {
        const auto &meta = learner(choice.meta->id);
        model = meta.meta_train(resolve_params(meta.id, choice.meta->params), base, base_params, request);
    } else {
        model = train_base(base, base_params, request);
    }
    return FittedModel(std::move(model), x.cols());
}

std::unique_ptr<FittedScaler> Registry::fit_scaler(const std::string &id, const Matrix &fit_data) const {
    return scaler(id).fit(fit_data);
}

std::vector<std::size_t> Registry::rank_features(const std::string &filter_id, const Dataset &d) const {
    const auto scores = filter(filter_id).score(d);
    return ranking_from_scores(scores);
}

Registry registry_default() {
    Registry r;
    r.add_learner(knn_spec());
    r.add_learner(gaussian_nb_spec());
    r.add_learner(decision_tree_spec());
    r.add_learner(logistic_regression_spec());
    r.add_learner(random_forest_spec());
    r.add_learner(bagging_spec());
    r.add_learner(adaboost_spec());
    r.add_scaler(standardize_spec());
    r.add_scaler(minmax_spec());
    r.add_scaler(quantile_rank_spec());
    r.add_filter(pearson_filter_spec());
    r.add_filter(mutual_information_filter_spec());
    r.add_filter(chi_squared_filter_spec());
    r.add_filter(variance_filter_spec());
    return r;
}

}  // namespace stagewise
