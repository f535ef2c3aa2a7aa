#include "stagewise/components.hpp"

#include "stagewise/error.hpp"
#include "stagewise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace stagewise {

namespace {

constexpr std::size_t kRowsPerDeadlineCheck = 64;

double weight_of(const FitRequest &r, std::size_t i) { return r.weights.empty() ? 1.0 : r.weights[i]; }

std::vector<bool> present_classes(std::span<const int> y, std::size_t n_classes) {
    std::vector<bool> present(n_classes, false);
    for (const int label : y) {
        present[static_cast<std::size_t>(label)] = true;
    }
    return present;
}

/// Index of the largest entry among allowed classes; lowest index on ties.
int argmax_allowed(std::span<const double> scores, const std::vector<bool> &allowed) {
    int best = -1;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (allowed[k] && (best < 0 || scores[k] > scores[static_cast<std::size_t>(best)])) {
            best = static_cast<int>(k);
        }
    }
    return best < 0 ? 0 : best;
}

// ---------------------------------------------------------------------------
// k-nearest neighbours (Euclidean, majority vote)

class KnnModel final : public Model {
  public:
    KnnModel(const Matrix &x, std::span<const int> y, std::size_t n_classes, std::size_t k)
        : x_(x), y_(y.begin(), y.end()), n_classes_(n_classes), k_(std::min(k, y.size())) {}

    [[nodiscard]] std::vector<int> predict(const Matrix &rows, const Deadline &deadline) const override {
        std::vector<int> out(rows.rows());
        std::vector<std::pair<double, std::size_t>> dist(x_.rows());
        std::vector<std::size_t> votes(n_classes_);
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            if (r % kRowsPerDeadlineCheck == 0) {
                deadline.check();
            }
            const auto q = rows.row(r);
            for (std::size_t i = 0; i < x_.rows(); ++i) {
                const auto p = x_.row(i);
                double s = 0.0;
                for (std::size_t c = 0; c < q.size(); ++c) {
                    const double diff = q[c] - p[c];
                    s += diff * diff;
                }
                dist[i] = {s, i};
            }
            std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
            std::fill(votes.begin(), votes.end(), 0);
            std::size_t top = 0;
            for (std::size_t j = 0; j < k_; ++j) {
                top = std::max(top, ++votes[static_cast<std::size_t>(y_[dist[j].second])]);
            }
            // Among the most-voted classes, the one owning the nearest neighbour wins.
            for (std::size_t j = 0; j < k_; ++j) {
                const int label = y_[dist[j].second];
                if (votes[static_cast<std::size_t>(label)] == top) {
                    out[r] = label;
                    break;
                }
            }
        }
        return out;
    }

  private:
    Matrix x_;
    std::vector<int> y_;
    std::size_t n_classes_;
    std::size_t k_;
};

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

class GaussianNbModel final : public Model {
  public:
    GaussianNbModel(const FitRequest &r, double var_smoothing) : n_classes_(r.n_classes), cols_(r.x.cols()) {
        const std::size_t n = r.x.rows();
        means_.assign(n_classes_ * cols_, 0.0);
        vars_.assign(n_classes_ * cols_, 0.0);
        log_prior_.assign(n_classes_, -std::numeric_limits<double>::infinity());
        std::vector<double> class_weight(n_classes_, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(r.y[i]);
            const double w = weight_of(r, i);
            class_weight[k] += w;
            for (std::size_t c = 0; c < cols_; ++c) {
                means_[k * cols_ + c] += w * r.x(i, c);
            }
        }
        for (std::size_t k = 0; k < n_classes_; ++k) {
            if (class_weight[k] > 0.0) {
                for (std::size_t c = 0; c < cols_; ++c) {
                    means_[k * cols_ + c] /= class_weight[k];
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(r.y[i]);
            const double w = weight_of(r, i);
            for (std::size_t c = 0; c < cols_; ++c) {
                const double d = r.x(i, c) - means_[k * cols_ + c];
                vars_[k * cols_ + c] += w * d * d;
            }
        }
        // Smoothing proportional to the largest overall column variance, floored to stay positive.
        double max_var = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                mean += r.x(i, c);
            }
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                var += (r.x(i, c) - mean) * (r.x(i, c) - mean);
            }
            max_var = std::max(max_var, var / static_cast<double>(n));
        }
        const double epsilon = std::max(var_smoothing * max_var, 1e-12);
        double total = std::accumulate(class_weight.begin(), class_weight.end(), 0.0);
        for (std::size_t k = 0; k < n_classes_; ++k) {
            if (class_weight[k] <= 0.0) {
                continue;
            }
            log_prior_[k] = std::log(class_weight[k] / total);
            for (std::size_t c = 0; c < cols_; ++c) {
                vars_[k * cols_ + c] = vars_[k * cols_ + c] / class_weight[k] + epsilon;
            }
        }
    }

    [[nodiscard]] std::vector<int> predict(const Matrix &rows, const Deadline &deadline) const override {
        std::vector<int> out(rows.rows());
        std::vector<double> score(n_classes_);
        std::vector<bool> allowed(n_classes_);
        for (std::size_t k = 0; k < n_classes_; ++k) {
            allowed[k] = std::isfinite(log_prior_[k]);
        }
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            if (r % kRowsPerDeadlineCheck == 0) {
                deadline.check();
            }
            for (std::size_t k = 0; k < n_classes_; ++k) {
                if (!allowed[k]) {
                    continue;
                }
                double s = log_prior_[k];
                for (std::size_t c = 0; c < cols_; ++c) {
                    const double var = vars_[k * cols_ + c];
                    const double d = rows(r, c) - means_[k * cols_ + c];
                    s -= 0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
                }
                score[k] = s;
            }
            out[r] = argmax_allowed(score, allowed);
        }
        return out;
    }

  private:
    std::size_t n_classes_;
    std::size_t cols_;
    std::vector<double> means_;
    std::vector<double> vars_;
    std::vector<double> log_prior_;
};

// ---------------------------------------------------------------------------
// Logistic regression (multinomial, SGD over shuffled rows, L2 penalty)

class LogisticModel final : public Model {
  public:
    LogisticModel(const FitRequest &r, double learning_rate, std::int64_t epochs, double l2)
        : n_classes_(r.n_classes), cols_(r.x.cols()), allowed_(present_classes(r.y, r.n_classes)) {
        const std::size_t n = r.x.rows();
        const std::size_t stride = cols_ + 1;
        w_.assign(n_classes_ * stride, 0.0);
        double weight_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            weight_sum += weight_of(r, i);
        }
        const double weight_scale = weight_sum > 0.0 ? static_cast<double>(n) / weight_sum : 1.0;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(r.seed);
        std::vector<double> prob(n_classes_);
        for (std::int64_t epoch = 0; epoch < epochs; ++epoch) {
            r.deadline.check();
            rng.shuffle(order);
            for (const std::size_t i : order) {
                const double w = weight_of(r, i) * weight_scale;
                if (w == 0.0) {
                    continue;
                }
                const auto x = r.x.row(i);
                softmax(x, prob);
                for (std::size_t k = 0; k < n_classes_; ++k) {
                    if (!allowed_[k]) {
                        continue;
                    }
                    const double g = w * (prob[k] - (static_cast<std::size_t>(r.y[i]) == k ? 1.0 : 0.0));
                    double *wk = &w_[k * stride];
                    for (std::size_t c = 0; c < cols_; ++c) {
                        wk[c] -= learning_rate * (g * x[c] + l2 * wk[c]);
                    }
                    wk[cols_] -= learning_rate * g;
                }
            }
            for (const double v : w_) {
                if (!std::isfinite(v)) {
                    throw error("logistic regression diverged");
                }
            }
        }
    }

    [[nodiscard]] std::vector<int> predict(const Matrix &rows, const Deadline &deadline) const override {
        std::vector<int> out(rows.rows());
        std::vector<double> logit(n_classes_);
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            if (r % kRowsPerDeadlineCheck == 0) {
                deadline.check();
            }
            logits(rows.row(r), logit);
            out[r] = argmax_allowed(logit, allowed_);
        }
        return out;
    }

  private:
    void logits(std::span<const double> x, std::vector<double> &out) const {
        const std::size_t stride = cols_ + 1;
        for (std::size_t k = 0; k < n_classes_; ++k) {
            const double *wk = &w_[k * stride];
            double s = wk[cols_];
            for (std::size_t c = 0; c < cols_; ++c) {
                s += wk[c] * x[c];
            }
            out[k] = s;
        }
    }

    void softmax(std::span<const double> x, std::vector<double> &prob) const {
        logits(x, prob);
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n_classes_; ++k) {
            if (allowed_[k]) {
                top = std::max(top, prob[k]);
            }
        }
        double z = 0.0;
        for (std::size_t k = 0; k < n_classes_; ++k) {
            prob[k] = allowed_[k] ? std::exp(prob[k] - top) : 0.0;
            z += prob[k];
        }
        for (auto &p : prob) {
            p /= z;
        }
    }

    std::size_t n_classes_;
    std::size_t cols_;
    std::vector<bool> allowed_;
    std::vector<double> w_;
};

}  // namespace

// ---------------------------------------------------------------------------
// CART decision tree (weighted Gini)

namespace detail {

struct TreeOptions {
    std::size_t max_depth = 0;  // 0 = unbounded
    std::size_t min_split = 2;
    std::size_t max_features = 0;  // features tried per node before falling back to the rest; 0 = all
};

class TreeModel final : public Model {
  public:
    TreeModel(const FitRequest &r, const TreeOptions &options) : n_classes_(r.n_classes), options_(options), rng_(r.seed) {
        std::vector<std::size_t> rows;
        rows.reserve(r.x.rows());
        for (std::size_t i = 0; i < r.x.rows(); ++i) {
            if (weight_of(r, i) > 0.0) {
                rows.push_back(i);
            }
        }
        if (rows.empty()) {
            throw invalid_argument("decision tree needs at least one positively weighted row");
        }
        build(r, rows, 0);
    }

    [[nodiscard]] std::vector<int> predict(const Matrix &rows, const Deadline &deadline) const override {
        std::vector<int> out(rows.rows());
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            if (r % (kRowsPerDeadlineCheck * 16) == 0) {
                deadline.check();
            }
            out[r] = predict_row(rows.row(r));
        }
        return out;
    }

    [[nodiscard]] int predict_row(std::span<const double> x) const {
        std::size_t node = 0;
        while (nodes_[node].left != 0) {
            node = x[nodes_[node].feature] <= nodes_[node].threshold ? nodes_[node].left : nodes_[node].right;
        }
        return nodes_[node].label;
    }

  private:
    struct Node {
        std::size_t feature = 0;
        double threshold = 0.0;
        std::size_t left = 0;  // 0 marks a leaf (the root is never a child)
        std::size_t right = 0;
        int label = 0;
    };

    static double gini(std::span<const double> counts, double total) {
        if (total <= 0.0) {
            return 0.0;
        }
        double s = 0.0;
        for (const double c : counts) {
            s += (c / total) * (c / total);
        }
        return 1.0 - s;
    }

    std::size_t build(const FitRequest &r, std::vector<std::size_t> &rows, std::size_t depth) {
        r.deadline.check();
        const std::size_t id = nodes_.size();
        nodes_.emplace_back();

        std::vector<double> counts(n_classes_, 0.0);
        double total = 0.0;
        for (const auto i : rows) {
            counts[static_cast<std::size_t>(r.y[i])] += weight_of(r, i);
            total += weight_of(r, i);
        }
        int label = 0;
        for (std::size_t k = 1; k < n_classes_; ++k) {
            if (counts[k] > counts[static_cast<std::size_t>(label)]) {
                label = static_cast<int>(k);
            }
        }
        nodes_[id].label = label;

        const bool pure = counts[static_cast<std::size_t>(label)] >= total;
        const bool depth_limited = options_.max_depth != 0 && depth >= options_.max_depth;
        if (pure || depth_limited || rows.size() < options_.min_split) {
            return id;
        }

        // Candidate features: a random subset first, the remainder only if the subset cannot split.
        const std::size_t cols = r.x.cols();
        std::vector<std::size_t> features(cols);
        std::iota(features.begin(), features.end(), std::size_t{0});
        std::size_t first_batch = cols;
        if (options_.max_features != 0 && options_.max_features < cols) {
            for (std::size_t i = 0; i < options_.max_features; ++i) {
                const auto j = i + static_cast<std::size_t>(rng_.below(cols - i));
                std::swap(features[i], features[j]);
            }
            first_batch = options_.max_features;
        }

        const double parent = gini(counts, total);
        double best_gain = -1.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        std::vector<std::pair<double, std::size_t>> sorted(rows.size());
        std::vector<double> left(n_classes_);
        std::vector<double> right(n_classes_);
        for (std::size_t fi = 0; fi < cols; ++fi) {
            if (fi == first_batch && best_gain >= 0.0) {
                break;
            }
            const std::size_t f = features[fi];
            for (std::size_t j = 0; j < rows.size(); ++j) {
                sorted[j] = {r.x(rows[j], f), rows[j]};
            }
            std::sort(sorted.begin(), sorted.end());
            std::fill(left.begin(), left.end(), 0.0);
            double left_total = 0.0;
            for (std::size_t j = 0; j + 1 < sorted.size(); ++j) {
                const double w = weight_of(r, sorted[j].second);
                left[static_cast<std::size_t>(r.y[sorted[j].second])] += w;
                left_total += w;
                if (sorted[j].first == sorted[j + 1].first) {
                    continue;
                }
                for (std::size_t k = 0; k < n_classes_; ++k) {
                    right[k] = counts[k] - left[k];
                }
                const double right_total = total - left_total;
                const double child =
                    (left_total * gini(left, left_total) + right_total * gini(right, right_total)) / total;
                const double gain = parent - child;
                if (gain > best_gain + 1e-15) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (sorted[j].first + sorted[j + 1].first);
                    // Midpoint can round onto the upper value for adjacent doubles.
                    if (best_threshold >= sorted[j + 1].first) {
                        best_threshold = sorted[j].first;
                    }
                }
            }
        }
        if (best_gain < 0.0) {
            return id;  // all rows identical in every feature
        }

        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (const auto i : rows) {
            (r.x(i, best_feature) <= best_threshold ? left_rows : right_rows).push_back(i);
        }
        rows.clear();
        rows.shrink_to_fit();
        nodes_[id].feature = best_feature;
        nodes_[id].threshold = best_threshold;
        const std::size_t l = build(r, left_rows, depth + 1);
        const std::size_t rr = build(r, right_rows, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = rr;
        return id;
    }

    std::size_t n_classes_;
    TreeOptions options_;
    Rng rng_;
    std::vector<Node> nodes_;
};

}  // namespace detail

namespace {

// ---------------------------------------------------------------------------
// Random forest

std::size_t subsample_count(const std::string &rule, std::size_t cols) {
    double v = static_cast<double>(cols);
    if (rule == "sqrt") {
        v = std::sqrt(v);
    } else if (rule == "log2") {
        v = std::log2(v);
    } else if (rule == "half") {
        v = v / 2.0;
    } else if (rule != "all") {
        throw invalid_argument("unknown feature_subsample rule '" + rule + "'");
    }
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::round(v)), 1, std::max<std::size_t>(cols, 1));
}

class ForestModel final : public Model {
  public:
    ForestModel(const FitRequest &r, std::size_t n_trees, const detail::TreeOptions &options) : n_classes_(r.n_classes) {
        const std::size_t n = r.x.rows();
        Rng rng(r.seed);
        for (std::size_t t = 0; t < n_trees; ++t) {
            r.deadline.check();
            std::vector<double> counts(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                counts[rng.below(n)] += 1.0;
            }
            if (!r.weights.empty()) {
                for (std::size_t i = 0; i < n; ++i) {
                    counts[i] *= r.weights[i];
                }
            }
            FitRequest sub{r.x, r.y, r.n_classes, counts, derive_seed(r.seed, t), r.deadline};
            trees_.emplace_back(sub, options);
        }
    }

    [[nodiscard]] std::vector<int> predict(const Matrix &rows, const Deadline &deadline) const override {
        std::vector<int> out(rows.rows());
        std::vector<double> votes(n_classes_);
        const std::vector<bool> all(n_classes_, true);
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            if (r % kRowsPerDeadlineCheck == 0) {
                deadline.check();
            }
            std::fill(votes.begin(), votes.end(), 0.0);
            for (const auto &tree : trees_) {
                votes[static_cast<std::size_t>(tree.predict_row(rows.row(r)))] += 1.0;
            }
            out[r] = argmax_allowed(votes, all);
        }
        return out;
    }

  private:
    std::size_t n_classes_;
    std::vector<detail::TreeModel> trees_;
};

ParamValue ival(std::int64_t v) { return ParamValue{v}; }
ParamValue rval(double v) { return ParamValue{v}; }
ParamValue sval(const char *v) { return ParamValue{std::string(v)}; }

}  // namespace

LearnerSpec knn_spec() {
    LearnerSpec s;
    s.id = "knn";
    s.default_params = {{"k", ival(5)}};
    s.param_space = {{"k", CategoricalDomain{{ival(1), ival(3), ival(5), ival(7), ival(11), ival(15), ival(21)}}}};
    s.train = [](const ParamMap &p, const FitRequest &r) -> std::unique_ptr<Model> {
        return std::make_unique<KnnModel>(r.x, r.y, r.n_classes, static_cast<std::size_t>(get_int(p, "k")));
    };
    return s;
}

LearnerSpec gaussian_nb_spec() {
    LearnerSpec s;
    s.id = "gaussian_nb";
    s.default_params = {{"var_smoothing", rval(1e-9)}};
    s.param_space = {{"var_smoothing", LogUniformDomain{1e-12, 1e-3}}};
    s.supports_weights = true;
    s.train = [](const ParamMap &p, const FitRequest &r) -> std::unique_ptr<Model> {
        return std::make_unique<GaussianNbModel>(r, get_real(p, "var_smoothing"));
    };
    return s;
}

LearnerSpec decision_tree_spec() {
    LearnerSpec s;
    s.id = "decision_tree";
    s.default_params = {{"max_depth", ival(0)}, {"min_split", ival(2)}};
    s.param_space = {
        {"max_depth", CategoricalDomain{{ival(0), ival(1), ival(2), ival(3), ival(4), ival(6), ival(8), ival(12), ival(16)}}},
        {"min_split", IntRangeDomain{2, 20}},
    };
    s.supports_weights = true;
    s.train = [](const ParamMap &p, const FitRequest &r) -> std::unique_ptr<Model> {
        detail::TreeOptions o;
        o.max_depth = static_cast<std::size_t>(get_int(p, "max_depth"));
        o.min_split = static_cast<std::size_t>(get_int(p, "min_split"));
        return std::make_unique<detail::TreeModel>(r, o);
    };
    return s;
}

LearnerSpec logistic_regression_spec() {
    LearnerSpec s;
    s.id = "logistic_regression";
    s.default_params = {{"epochs", ival(50)}, {"l2", rval(1e-4)}, {"learning_rate", rval(1e-2)}};
    s.param_space = {
        {"epochs", IntRangeDomain{5, 200}},
        {"l2", LogUniformDomain{1e-6, 1e-1}},
        {"learning_rate", LogUniformDomain{1e-4, 1e-1}},
    };
    s.supports_weights = true;
    s.train = [](const ParamMap &p, const FitRequest &r) -> std::unique_ptr<Model> {
        return std::make_unique<LogisticModel>(r, get_real(p, "learning_rate"), get_int(p, "epochs"), get_real(p, "l2"));
    };
    return s;
}

LearnerSpec random_forest_spec() {
    LearnerSpec s;
    s.id = "random_forest";
    s.default_params = {{"feature_subsample", sval("sqrt")}, {"max_depth", ival(0)}, {"n_trees", ival(20)}};
    s.param_space = {
        {"feature_subsample", CategoricalDomain{{sval("sqrt"), sval("log2"), sval("half"), sval("all")}}},
        {"max_depth", CategoricalDomain{{ival(0), ival(4), ival(8), ival(12), ival(16)}}},
        {"n_trees", CategoricalDomain{{ival(10), ival(20), ival(50), ival(100)}}},
    };
    s.supports_weights = true;
    s.train = [](const ParamMap &p, const FitRequest &r) -> std::unique_ptr<Model> {
        detail::TreeOptions o;
        o.max_depth = static_cast<std::size_t>(get_int(p, "max_depth"));
        o.max_features = subsample_count(get_string(p, "feature_subsample"), r.x.cols());
        return std::make_unique<ForestModel>(r, static_cast<std::size_t>(get_int(p, "n_trees")), o);
    };
    return s;
}

}  // namespace stagewise
