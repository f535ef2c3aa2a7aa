#include "stagewise/components.hpp"

#include "stagewise/error.hpp"
#include "stagewise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stagewise {

namespace {

int single_class(std::span<const int> y, std::span<const double> weights) {
    int seen = -1;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!weights.empty() && weights[i] <= 0.0) {
            continue;
        }
        if (seen < 0) {
            seen = y[i];
        } else if (seen != y[i]) {
            return -1;
        }
    }
    return seen;
}

/// Majority vote of member predictions with per-member weights; lowest class on ties.
class VotingModel final : public Model {
  public:
    VotingModel(std::size_t n_classes, std::vector<std::unique_ptr<Model>> members, std::vector<double> weights)
        : n_classes_(n_classes), members_(std::move(members)), weights_(std::move(weights)) {}

    [[nodiscard]] std::vector<int> predict(const Matrix &rows, const Deadline &deadline) const override {
        std::vector<double> votes(rows.rows() * n_classes_, 0.0);
        for (std::size_t m = 0; m < members_.size(); ++m) {
            deadline.check();
            const auto pred = members_[m]->predict(rows, deadline);
            for (std::size_t r = 0; r < rows.rows(); ++r) {
                votes[r * n_classes_ + static_cast<std::size_t>(pred[r])] += weights_[m];
            }
        }
        std::vector<int> out(rows.rows());
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            const auto first = votes.begin() + static_cast<std::ptrdiff_t>(r * n_classes_);
            out[r] = static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(n_classes_)) - first);
        }
        return out;
    }

  private:
    std::size_t n_classes_;
    std::vector<std::unique_ptr<Model>> members_;
    std::vector<double> weights_;
};

std::unique_ptr<Model> train_on_rows(const LearnerSpec &spec, const ParamMap &params, const FitRequest &request,
                                     std::span<const std::size_t> rows, std::uint64_t seed) {
    const Matrix x = request.x.select_rows(rows);
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        y[i] = request.y[rows[i]];
    }
    return train_base(spec, params, FitRequest{x, y, request.n_classes, {}, seed, request.deadline});
}

}  // namespace

std::unique_ptr<Model> train_base(const LearnerSpec &spec, const ParamMap &params, const FitRequest &request) {
    if (request.x.rows() == 0) {
        throw invalid_argument("cannot train on an empty dataset");
    }
    if (const int only = single_class(request.y, request.weights); only >= 0) {
        return std::make_unique<ConstantModel>(only);
    }
    const bool uniform = request.weights.empty() ||
                         std::all_of(request.weights.begin(), request.weights.end(),
                                     [&](double w) { return w == request.weights.front(); });
    if (uniform) {
        return spec.train(params, FitRequest{request.x, request.y, request.n_classes, {}, request.seed, request.deadline});
    }
    if (spec.supports_weights) {
        return spec.train(params, request);
    }
    // Weighted resampling: n draws proportional to weight, kept in ascending row order.
    const std::size_t n = request.x.rows();
    std::vector<double> cumulative(n);
    std::partial_sum(request.weights.begin(), request.weights.end(), cumulative.begin());
    Rng rng(derive_seed(request.seed, "resample"));
    std::vector<std::size_t> rows(n);
    for (auto &row : rows) {
        const double u = rng.uniform01() * cumulative.back();
        row = std::min<std::size_t>(
            static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin()), n - 1);
    }
    std::sort(rows.begin(), rows.end());
    return train_on_rows(spec, params, request, rows, request.seed);
}

LearnerSpec bagging_spec() {
    LearnerSpec s;
    s.id = "bagging";
    s.is_meta = true;
    s.default_params = {{"bootstrap", ParamValue{true}},
                        {"n_estimators", ParamValue{std::int64_t{10}}},
                        {"sample_fraction", ParamValue{1.0}}};
    s.param_space = {
        {"bootstrap", CategoricalDomain{{ParamValue{true}, ParamValue{false}}}},
        {"n_estimators", IntRangeDomain{1, 50}},
        {"sample_fraction", CategoricalDomain{{ParamValue{0.5}, ParamValue{0.7}, ParamValue{0.9}, ParamValue{1.0}}}},
    };
    s.meta_train = [](const ParamMap &meta, const LearnerSpec &base, const ParamMap &base_params,
                      const FitRequest &r) -> std::unique_ptr<Model> {
        const auto n_estimators = static_cast<std::size_t>(get_int(meta, "n_estimators"));
        const bool bootstrap = get_bool(meta, "bootstrap");
        const std::size_t n = r.x.rows();
        const auto m = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(get_real(meta, "sample_fraction") * static_cast<double>(n))));
        std::vector<std::unique_ptr<Model>> members;
        for (std::size_t e = 0; e < n_estimators; ++e) {
            r.deadline.check();
            // The first member shares the ensemble seed, so a single unperturbed copy equals the base learner.
            const std::uint64_t member_seed = e == 0 ? r.seed : derive_seed(r.seed, e);
            Rng rng(derive_seed(r.seed, "bagging/" + std::to_string(e)));
            std::vector<std::size_t> rows(m);
            if (bootstrap) {
                for (auto &row : rows) {
                    row = rng.below(n);
                }
            } else {
                std::vector<std::size_t> all(n);
                std::iota(all.begin(), all.end(), std::size_t{0});
                if (m < n) {
                    rng.shuffle(all);
                }
                std::copy_n(all.begin(), m, rows.begin());
            }
            std::sort(rows.begin(), rows.end());
            members.push_back(train_on_rows(base, base_params, r, rows, member_seed));
        }
        return std::make_unique<VotingModel>(r.n_classes, std::move(members), std::vector<double>(n_estimators, 1.0));
    };
    return s;
}

LearnerSpec adaboost_spec() {
    LearnerSpec s;
    s.id = "adaboost";
    s.is_meta = true;
    s.default_params = {{"learning_rate", ParamValue{1.0}}, {"n_estimators", ParamValue{std::int64_t{10}}}};
    s.param_space = {
        {"learning_rate", LogUniformDomain{1e-2, 2.0}},
        {"n_estimators", IntRangeDomain{1, 100}},
    };
    // SAMME: alpha = lr * (log((1 - err) / err) + log(K - 1)), misclassified weights scaled by exp(alpha).
    s.meta_train = [](const ParamMap &meta, const LearnerSpec &base, const ParamMap &base_params,
                      const FitRequest &r) -> std::unique_ptr<Model> {
        const auto n_estimators = static_cast<std::size_t>(get_int(meta, "n_estimators"));
        const double learning_rate = get_real(meta, "learning_rate");
        const std::size_t n = r.x.rows();
        std::vector<bool> present(r.n_classes, false);
        for (const int y : r.y) {
            present[static_cast<std::size_t>(y)] = true;
        }
        const auto k = static_cast<double>(std::count(present.begin(), present.end(), true));

        std::vector<double> w(n, 1.0 / static_cast<double>(n));
        std::vector<std::unique_ptr<Model>> members;
        std::vector<double> alphas;
        for (std::size_t t = 0; t < n_estimators; ++t) {
            r.deadline.check();
            const std::uint64_t member_seed = t == 0 ? r.seed : derive_seed(r.seed, t);
            auto model = train_base(base, base_params, FitRequest{r.x, r.y, r.n_classes, w, member_seed, r.deadline});
            const auto pred = model->predict(r.x, r.deadline);
            double err = 0.0;
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                total += w[i];
                if (pred[i] != r.y[i]) {
                    err += w[i];
                }
            }
            err /= total;
            if (err >= 1.0 - 1.0 / k) {
                if (members.empty()) {
                    members.push_back(std::move(model));
                    alphas.push_back(1.0);
                }
                break;
            }
            const double clipped = std::max(err, 1e-10);
            const double alpha = learning_rate * (std::log((1.0 - clipped) / clipped) + std::log(k - 1.0));
            members.push_back(std::move(model));
            alphas.push_back(alpha);
            if (err <= 0.0) {
                break;
            }
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (pred[i] != r.y[i]) {
                    w[i] *= std::exp(alpha);
                }
                sum += w[i];
            }
            for (auto &wi : w) {
                wi /= sum;
            }
        }
        return std::make_unique<VotingModel>(r.n_classes, std::move(members), std::move(alphas));
    };
    return s;
}

}  // namespace stagewise
