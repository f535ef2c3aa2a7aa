#include "stagewise/components.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stagewise {

namespace {

constexpr std::size_t kBins = 10;

/// Equal-width bin index of every value; a constant column maps to bin 0.
std::vector<std::size_t> equal_width_bins(const std::vector<double> &column) {
    const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
    const double lo = *lo_it;
    const double width = *hi_it - lo;
    std::vector<std::size_t> bins(column.size(), 0);
    if (width <= 0.0) {
        return bins;
    }
    for (std::size_t i = 0; i < column.size(); ++i) {
        const auto b = static_cast<std::size_t>(std::floor((column[i] - lo) / width * static_cast<double>(kBins)));
        bins[i] = std::min(b, kBins - 1);
    }
    return bins;
}

/// Bin-by-class contingency counts.
std::vector<double> contingency(const std::vector<std::size_t> &bins, const std::vector<int> &labels, std::size_t n_classes) {
    std::vector<double> table(kBins * n_classes, 0.0);
    for (std::size_t i = 0; i < bins.size(); ++i) {
        table[bins[i] * n_classes + static_cast<std::size_t>(labels[i])] += 1.0;
    }
    return table;
}

template <class ColumnScore>
FilterSpec per_column(std::string id, ColumnScore score) {
    return {std::move(id), [score](const Dataset &d) {
                std::vector<double> out(d.cols(), 0.0);
                if (d.rows() == 0) {
                    return out;
                }
                for (std::size_t c = 0; c < d.cols(); ++c) {
                    out[c] = score(d.instances().column(c), d);
                }
                return out;
            }};
}

}  // namespace

std::vector<std::size_t> ranking_from_scores(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto key = [&](std::size_t i) { return std::isnan(scores[i]) ? -HUGE_VAL : scores[i]; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
    return order;
}

FilterSpec variance_filter_spec() {
    return per_column("variance", [](const std::vector<double> &x, const Dataset &) {
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
        double ss = 0.0;
        for (const double v : x) {
            ss += (v - mean) * (v - mean);
        }
        return ss / static_cast<double>(x.size());
    });
}

FilterSpec pearson_filter_spec() {
    // max over classes of |corr(x, 1[y == k])|; equals |corr(x, y)| for two classes.
    return per_column("pearson_correlation", [](const std::vector<double> &x, const Dataset &d) {
        const auto n = static_cast<double>(x.size());
        const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
        double sxx = 0.0;
        for (const double v : x) {
            sxx += (v - mx) * (v - mx);
        }
        if (sxx <= 0.0) {
            return 0.0;
        }
        const auto counts = d.class_counts();
        double best = 0.0;
        for (std::size_t k = 0; k < d.n_classes(); ++k) {
            const double my = static_cast<double>(counts[k]) / n;
            if (my <= 0.0 || my >= 1.0) {
                continue;
            }
            double sxy = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double yk = static_cast<std::size_t>(d.labels()[i]) == k ? 1.0 : 0.0;
                sxy += (x[i] - mx) * (yk - my);
            }
            const double syy = n * my * (1.0 - my);
            best = std::max(best, std::abs(sxy) / std::sqrt(sxx * syy));
        }
        return best;
    });
}

FilterSpec mutual_information_filter_spec() {
    return per_column("mutual_information", [](const std::vector<double> &x, const Dataset &d) {
        const std::size_t k = d.n_classes();
        const auto table = contingency(equal_width_bins(x), d.labels(), k);
        const auto n = static_cast<double>(x.size());
        std::vector<double> pb(kBins, 0.0);
        std::vector<double> py(k, 0.0);
        for (std::size_t b = 0; b < kBins; ++b) {
            for (std::size_t c = 0; c < k; ++c) {
                pb[b] += table[b * k + c] / n;
                py[c] += table[b * k + c] / n;
            }
        }
        double mi = 0.0;
        for (std::size_t b = 0; b < kBins; ++b) {
            for (std::size_t c = 0; c < k; ++c) {
                const double p = table[b * k + c] / n;
                if (p > 0.0) {
                    mi += p * std::log(p / (pb[b] * py[c]));
                }
            }
        }
        return std::max(mi, 0.0);
    });
}

FilterSpec chi_squared_filter_spec() {
    return per_column("chi_squared", [](const std::vector<double> &x, const Dataset &d) {
        const std::size_t k = d.n_classes();
        const auto table = contingency(equal_width_bins(x), d.labels(), k);
        const auto n = static_cast<double>(x.size());
        std::vector<double> rows(kBins, 0.0);
        std::vector<double> cols(k, 0.0);
        for (std::size_t b = 0; b < kBins; ++b) {
            for (std::size_t c = 0; c < k; ++c) {
                rows[b] += table[b * k + c];
                cols[c] += table[b * k + c];
            }
        }
        double chi2 = 0.0;
        for (std::size_t b = 0; b < kBins; ++b) {
            for (std::size_t c = 0; c < k; ++c) {
                const double expected = rows[b] * cols[c] / n;
                if (expected > 0.0) {
                    const double diff = table[b * k + c] - expected;
                    chi2 += diff * diff / expected;
                }
            }
        }
        return chi2;
    });
}

}  // namespace stagewise
