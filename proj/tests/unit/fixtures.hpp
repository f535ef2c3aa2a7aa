#pragma once

#include "stagewise/data.hpp"
#include "stagewise/rng.hpp"

#include <cmath>

namespace fixtures {

/// n rows, d standard-normal columns, labels drawn uniformly from k classes.
inline stagewise::Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t d, int k) {
    stagewise::Rng rng(seed);
    stagewise::Matrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x(i, j) = rng.normal();
        }
        y[i] = static_cast<int>(i < static_cast<std::size_t>(k) ? i : rng.below(static_cast<std::uint64_t>(k)));
    }
    return stagewise::Dataset::from_numeric(std::move(x), std::move(y), static_cast<std::size_t>(k));
}

/// Two classes separated along every column by 6 standard deviations.
inline stagewise::Dataset blobs(std::uint64_t seed, std::size_t n, std::size_t d) {
    stagewise::Rng rng(seed);
    stagewise::Matrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        for (std::size_t j = 0; j < d; ++j) {
            x(i, j) = rng.normal(y[i] ? 3.0 : -3.0, 1.0);
        }
    }
    return stagewise::Dataset::from_numeric(std::move(x), std::move(y), 2);
}

inline std::size_t mismatches(const std::vector<int> &a, const std::vector<int> &b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        n += a[i] != b[i] ? 1 : 0;
    }
    return n;
}

}  // namespace fixtures
