#include "stagewise/components.hpp"

#include <algorithm>
#include <cmath>

namespace stagewise {

StandardScaler::StandardScaler(const Matrix &fit_data) : means_(fit_data.cols(), 0.0), stds_(fit_data.cols(), 0.0) {
    const auto n = static_cast<double>(fit_data.rows());
    for (std::size_t c = 0; c < fit_data.cols(); ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < fit_data.rows(); ++r) {
            sum += fit_data(r, c);
        }
        means_[c] = n > 0 ? sum / n : 0.0;
        double ss = 0.0;
        for (std::size_t r = 0; r < fit_data.rows(); ++r) {
            const double d = fit_data(r, c) - means_[c];
            ss += d * d;
        }
        stds_[c] = n > 0 ? std::sqrt(ss / n) : 0.0;
    }
}

Matrix StandardScaler::transform(const Matrix &rows) const {
    Matrix out = rows;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        for (std::size_t c = 0; c < rows.cols(); ++c) {
            if (stds_[c] > 0.0) {
                out(r, c) = (rows(r, c) - means_[c]) / stds_[c];
            }
        }
    }
    return out;
}

Matrix StandardScaler::inverse_transform(const Matrix &rows) const {
    Matrix out = rows;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        for (std::size_t c = 0; c < rows.cols(); ++c) {
            if (stds_[c] > 0.0) {
                out(r, c) = rows(r, c) * stds_[c] + means_[c];
            }
        }
    }
    return out;
}

MinMaxScaler::MinMaxScaler(const Matrix &fit_data) : mins_(fit_data.cols(), 0.0), ranges_(fit_data.cols(), 0.0) {
    for (std::size_t c = 0; c < fit_data.cols(); ++c) {
        if (fit_data.rows() == 0) {
            continue;
        }
        double lo = fit_data(0, c);
        double hi = lo;
        for (std::size_t r = 1; r < fit_data.rows(); ++r) {
            lo = std::min(lo, fit_data(r, c));
            hi = std::max(hi, fit_data(r, c));
        }
        mins_[c] = lo;
        ranges_[c] = hi - lo;
    }
}

Matrix MinMaxScaler::transform(const Matrix &rows) const {
    Matrix out = rows;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        for (std::size_t c = 0; c < rows.cols(); ++c) {
            if (ranges_[c] > 0.0) {
                out(r, c) = (rows(r, c) - mins_[c]) / ranges_[c];
            }
        }
    }
    return out;
}

Matrix MinMaxScaler::inverse_transform(const Matrix &rows) const {
    Matrix out = rows;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        for (std::size_t c = 0; c < rows.cols(); ++c) {
            if (ranges_[c] > 0.0) {
                out(r, c) = rows(r, c) * ranges_[c] + mins_[c];
            }
        }
    }
    return out;
}

QuantileRankScaler::QuantileRankScaler(const Matrix &fit_data) : sorted_(fit_data.cols()) {
    for (std::size_t c = 0; c < fit_data.cols(); ++c) {
        sorted_[c] = fit_data.column(c);
        std::sort(sorted_[c].begin(), sorted_[c].end());
    }
}

Matrix QuantileRankScaler::transform(const Matrix &rows) const {
    Matrix out = rows;
    for (std::size_t c = 0; c < rows.cols(); ++c) {
        const auto &v = sorted_[c];
        const std::size_t n = v.size();
        if (n == 0) {
            continue;
        }
        const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            const double x = rows(r, c);
            const auto lower = static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
            const auto upper = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), x) - v.begin());
            double rank = 0.0;
            if (n == 1) {
                rank = 0.5;
            } else if (upper > lower) {
                rank = 0.5 * static_cast<double>(lower + upper - 1) / denom;
            } else if (lower == 0) {
                rank = 0.0;
            } else if (lower == n) {
                rank = 1.0;
            } else {
                const double frac = (x - v[lower - 1]) / (v[lower] - v[lower - 1]);
                rank = (static_cast<double>(lower - 1) + frac) / denom;
            }
            out(r, c) = rank;
        }
    }
    return out;
}

ScalerSpec standardize_spec() {
    return {"standardize", [](const Matrix &m) -> std::unique_ptr<FittedScaler> { return std::make_unique<StandardScaler>(m); }};
}

ScalerSpec minmax_spec() {
    return {"minmax", [](const Matrix &m) -> std::unique_ptr<FittedScaler> { return std::make_unique<MinMaxScaler>(m); }};
}

ScalerSpec quantile_rank_spec() {
    return {"quantile_rank",
            [](const Matrix &m) -> std::unique_ptr<FittedScaler> { return std::make_unique<QuantileRankScaler>(m); }};
}

}  // namespace stagewise
