#pragma once

#include "stagewise/rng.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace stagewise {

using ParamValue = std::variant<bool, std::int64_t, double, std::string>;

/// Parameter assignment; std::map keeps keys sorted for canonical serialization.
using ParamMap = std::map<std::string, ParamValue>;

/// Finite set of admissible values.
struct CategoricalDomain {
    std::vector<ParamValue> values;
};

/// Integers in [lo, hi], both inclusive.
struct IntRangeDomain {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
};

/// Reals in [lo, hi], sampled uniformly in log space. lo > 0.
struct LogUniformDomain {
    double lo = 1.0;
    double hi = 1.0;
};

using Domain = std::variant<CategoricalDomain, IntRangeDomain, LogUniformDomain>;

/// Declared parameter space of a learner; ordered by parameter name.
using ParamSpace = std::map<std::string, Domain>;

bool domain_contains(const Domain &domain, const ParamValue &value);
ParamValue sample_domain(const Domain &domain, Rng &rng);

/// Number of values when enumerable (categorical or integer range), nullopt for continuous domains.
std::optional<std::size_t> domain_cardinality(const Domain &domain);

/// Every assignment of an enumerable space, in lexicographic order of (name, value index).
/// Returns nullopt when any domain is continuous or the grid exceeds max_size.
std::optional<std::vector<ParamMap>> enumerate_grid(const ParamSpace &space, std::size_t max_size);

/// True iff params assigns exactly the declared parameters, each inside its domain.
bool params_within(const ParamSpace &space, const ParamMap &params);

/// "name=value,name=value" with keys sorted; reals always carry a '.' or exponent.
std::string format_params(const ParamMap &params);
std::string format_value(const ParamValue &value);

std::int64_t get_int(const ParamMap &params, const std::string &name);
double get_real(const ParamMap &params, const std::string &name);
bool get_bool(const ParamMap &params, const std::string &name);
const std::string &get_string(const ParamMap &params, const std::string &name);

}  // namespace stagewise
