#include "stagewise/params.hpp"

#include "stagewise/data.hpp"
#include "stagewise/error.hpp"

#include <cmath>

namespace stagewise {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

ParamValue nth_value(const Domain &domain, std::size_t i) {
    return std::visit(overloaded{
                          [&](const CategoricalDomain &d) -> ParamValue { return d.values.at(i); },
                          [&](const IntRangeDomain &d) -> ParamValue { return d.lo + static_cast<std::int64_t>(i); },
                          [](const LogUniformDomain &) -> ParamValue { throw invalid_argument("domain not enumerable"); },
                      },
                      domain);
}

}  // namespace

bool domain_contains(const Domain &domain, const ParamValue &value) {
    return std::visit(overloaded{
                          [&](const CategoricalDomain &d) {
                              return std::find(d.values.begin(), d.values.end(), value) != d.values.end();
                          },
                          [&](const IntRangeDomain &d) {
                              const auto *v = std::get_if<std::int64_t>(&value);
                              return v != nullptr && *v >= d.lo && *v <= d.hi;
                          },
                          [&](const LogUniformDomain &d) {
                              const auto *v = std::get_if<double>(&value);
                              return v != nullptr && *v >= d.lo && *v <= d.hi;
                          },
                      },
                      domain);
}

ParamValue sample_domain(const Domain &domain, Rng &rng) {
    return std::visit(overloaded{
                          [&](const CategoricalDomain &d) -> ParamValue { return d.values.at(rng.below(d.values.size())); },
                          [&](const IntRangeDomain &d) -> ParamValue {
                              return d.lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(d.hi - d.lo) + 1));
                          },
                          [&](const LogUniformDomain &d) -> ParamValue {
                              const double v = std::exp(rng.uniform(std::log(d.lo), std::log(d.hi)));
                              return std::clamp(v, d.lo, d.hi);
                          },
                      },
                      domain);
}

std::optional<std::size_t> domain_cardinality(const Domain &domain) {
    return std::visit(overloaded{
                          [](const CategoricalDomain &d) -> std::optional<std::size_t> { return d.values.size(); },
                          [](const IntRangeDomain &d) -> std::optional<std::size_t> {
                              return static_cast<std::size_t>(d.hi - d.lo) + 1;
                          },
                          [](const LogUniformDomain &) -> std::optional<std::size_t> { return std::nullopt; },
                      },
                      domain);
}

std::optional<std::vector<ParamMap>> enumerate_grid(const ParamSpace &space, std::size_t max_size) {
    std::size_t total = 1;
    std::vector<std::pair<const std::string *, const Domain *>> dims;
    for (const auto &[name, domain] : space) {
        const auto card = domain_cardinality(domain);
        if (!card || *card == 0) {
            return std::nullopt;
        }
        total *= *card;
        if (total > max_size) {
            return std::nullopt;
        }
        dims.emplace_back(&name, &domain);
    }
    std::vector<ParamMap> grid;
    grid.reserve(total);
    std::vector<std::size_t> counter(dims.size(), 0);
    for (std::size_t g = 0; g < total; ++g) {
        ParamMap p;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            p.emplace(*dims[i].first, nth_value(*dims[i].second, counter[i]));
        }
        grid.push_back(std::move(p));
        for (std::size_t i = dims.size(); i-- > 0;) {
            if (++counter[i] < *domain_cardinality(*dims[i].second)) {
                break;
            }
            counter[i] = 0;
        }
    }
    return grid;
}

bool params_within(const ParamSpace &space, const ParamMap &params) {
    if (space.size() != params.size()) {
        return false;
    }
    for (const auto &[name, value] : params) {
        const auto it = space.find(name);
        if (it == space.end() || !domain_contains(it->second, value)) {
            return false;
        }
    }
    return true;
}

std::string format_value(const ParamValue &value) {
    return std::visit(overloaded{
                          [](bool b) -> std::string { return b ? "true" : "false"; },
                          [](std::int64_t i) { return std::to_string(i); },
                          [](double d) {
                              auto s = format_double(d);
                              if (s.find_first_of(".eEn") == std::string::npos) {
                                  s += ".0";
                              }
                              return s;
                          },
                          [](const std::string &s) { return s; },
                      },
                      value);
}

std::string format_params(const ParamMap &params) {
    std::string out;
    for (const auto &[name, value] : params) {
        if (!out.empty()) {
            out.push_back(',');
        }
        out += name;
        out.push_back('=');
        out += format_value(value);
    }
    return out;
}

namespace {

template <class T>
const T &get_typed(const ParamMap &params, const std::string &name) {
    const auto it = params.find(name);
    if (it == params.end()) {
        throw invalid_argument("missing parameter '" + name + "'");
    }
    const auto *v = std::get_if<T>(&it->second);
    if (v == nullptr) {
        throw invalid_argument("parameter '" + name + "' has the wrong type");
    }
    return *v;
}

}  // namespace

std::int64_t get_int(const ParamMap &params, const std::string &name) { return get_typed<std::int64_t>(params, name); }
double get_real(const ParamMap &params, const std::string &name) { return get_typed<double>(params, name); }
bool get_bool(const ParamMap &params, const std::string &name) { return get_typed<bool>(params, name); }
const std::string &get_string(const ParamMap &params, const std::string &name) {
    return get_typed<std::string>(params, name);
}

}  // namespace stagewise
