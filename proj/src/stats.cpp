#include "stagewise/stats.hpp"

#include "stagewise/data.hpp"
#include "stagewise/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace stagewise {

namespace {

constexpr double kTol = 1e-12;

}  // namespace

double mean(std::span<const double> values) {
    if (values.empty()) {
        throw invalid_argument("mean of an empty sample");
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
    if (values.size() < 2) {
        return 0.0;
    }
    const double m = mean(values);
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - m) * (v - m);
    }
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double trimmed_mean(std::span<const double> values, double trim) {
    if (values.empty()) {
        throw invalid_argument("trimmed mean of an empty sample");
    }
    if (!(trim >= 0.0 && trim < 0.5)) {
        throw invalid_argument("trim must lie in [0, 0.5)");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto cut = static_cast<std::size_t>(std::floor(trim * static_cast<double>(sorted.size())));
    return mean(std::span<const double>(sorted).subspan(cut, sorted.size() - 2 * cut));
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw invalid_argument("wilcoxon: samples must be non-empty and of equal length");
    }
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (std::isnan(d)) {
            throw invalid_argument("wilcoxon: NaN difference");
        }
        if (d != 0.0) {
            diffs.push_back(d);
        }
    }
    WilcoxonResult result;
    result.n = diffs.size();
    if (diffs.empty()) {
        return result;
    }

    // Midranks of |d|, doubled so they are integers.
    const std::size_t n = diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(diffs[i]) < std::abs(diffs[j]); });
    std::vector<long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) {
            ++j;
        }
        const long r2 = static_cast<long>(i + j + 2);  // 2 * midrank of positions i..j (1-based)
        for (std::size_t k = i; k <= j; ++k) {
            rank2[order[k]] = r2;
        }
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long plus2 = 0;
    long total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (diffs[i] > 0) {
            plus2 += rank2[i];
        }
    }
    const long stat2 = std::min(plus2, total2 - plus2);
    result.statistic = static_cast<double>(stat2) / 2.0;

    if (n <= kWilcoxonExactLimit) {
        // counts[s] = number of sign patterns whose doubled positive rank sum is s.
        std::vector<double> counts(static_cast<std::size_t>(total2) + 1, 0.0);
        counts[0] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (long s = total2; s >= rank2[i]; --s) {
                counts[static_cast<std::size_t>(s)] += counts[static_cast<std::size_t>(s - rank2[i])];
            }
        }
        double hits = 0.0;
        for (long s = 0; s <= total2; ++s) {
            if (std::min(s, total2 - s) <= stat2) {
                hits += counts[static_cast<std::size_t>(s)];
            }
        }
        result.p_value = std::min(1.0, hits / std::ldexp(1.0, static_cast<int>(n)));
        result.exact = true;
        return result;
    }

    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    result.exact = false;
    if (var <= 0.0) {
        result.p_value = 1.0;
        return result;
    }
    const double z = std::max(0.0, std::abs(static_cast<double>(plus2) / 2.0 - mu) - 0.5) / std::sqrt(var);
    result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return result;
}

std::string to_string(Outcome o) {
    switch (o) {
    case Outcome::better:
        return "better";
    case Outcome::worse:
        return "worse";
    case Outcome::draw:
        return "draw";
    }
    return "draw";
}

Outcome decide(double p_value, double delta, const VerdictOptions &opt) {
    if (p_value < opt.alpha) {
        if (delta >= opt.delta - kTol) {
            return Outcome::better;
        }
        if (-delta >= opt.delta - kTol) {
            return Outcome::worse;
        }
    }
    return Outcome::draw;
}

Verdict verdict(std::span<const double> a, std::span<const double> b, const VerdictOptions &opt) {
    Verdict v;
    v.p_value = wilcoxon_signed_rank(a, b).p_value;
    v.delta = trimmed_mean(b, opt.trim) - trimmed_mean(a, opt.trim);
    v.outcome = decide(v.p_value, v.delta, opt);
    return v;
}

// ---------------------------------------------------------------------------
// ResultMatrix

void ResultMatrix::set(const std::string &dataset, const std::string &approach, std::size_t split, double error) {
    auto &cell = cells_[dataset][approach];
    if (cell.size() <= split) {
        cell.resize(split + 1, std::numeric_limits<double>::quiet_NaN());
    }
    cell[split] = error;
}

std::vector<std::string> ResultMatrix::datasets() const {
    std::vector<std::string> out;
    for (const auto &[d, _] : cells_) {
        out.push_back(d);
    }
    return out;
}

std::vector<std::string> ResultMatrix::approaches() const {
    std::set<std::string> all;
    for (const auto &[_, row] : cells_) {
        for (const auto &[a, __] : row) {
            all.insert(a);
        }
    }
    return {all.begin(), all.end()};
}

bool ResultMatrix::has(const std::string &dataset, const std::string &approach) const {
    const auto it = cells_.find(dataset);
    return it != cells_.end() && it->second.contains(approach);
}

bool ResultMatrix::complete(const std::string &dataset, const std::string &approach) const {
    if (!has(dataset, approach)) {
        return false;
    }
    const auto &e = errors(dataset, approach);
    return !e.empty() && std::all_of(e.begin(), e.end(), [](double v) { return std::isfinite(v); });
}

const std::vector<double> &ResultMatrix::errors(const std::string &dataset, const std::string &approach) const {
    if (!has(dataset, approach)) {
        throw invalid_argument("no results for (" + dataset + ", " + approach + ")");
    }
    return cells_.at(dataset).at(approach);
}

ResultMatrix ResultMatrix::from_csv(std::string_view text) {
    ResultMatrix m;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::set<std::tuple<std::string, std::string, std::size_t>> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) {
            fields.push_back(f);
        }
        if (line_no == 1) {
            if (fields != std::vector<std::string>{"dataset_id", "approach_id", "split_index", "error"}) {
                throw parse_error("results CSV: unexpected header '" + line + "'");
            }
            continue;
        }
        if (fields.size() != 4) {
            throw parse_error("results CSV line " + std::to_string(line_no) + ": expected 4 fields");
        }
        std::size_t split = 0;
        const auto &s = fields[2];
        if (std::from_chars(s.data(), s.data() + s.size(), split).ec != std::errc{} || s.empty()) {
            throw parse_error("results CSV line " + std::to_string(line_no) + ": bad split index");
        }
        double err = std::numeric_limits<double>::quiet_NaN();
        const auto &e = fields[3];
        if (!e.empty()) {
            const auto res = std::from_chars(e.data(), e.data() + e.size(), err);
            if (res.ec != std::errc{} || res.ptr != e.data() + e.size()) {
                throw parse_error("results CSV line " + std::to_string(line_no) + ": bad error value");
            }
        }
        if (!seen.emplace(fields[0], fields[1], split).second) {
            throw parse_error("results CSV line " + std::to_string(line_no) + ": duplicate cell");
        }
        m.set(fields[0], fields[1], split, err);
    }
    if (line_no == 0) {
        throw parse_error("results CSV is empty");
    }
    return m;
}

ResultMatrix ResultMatrix::load_csv(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw error("cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return from_csv(buf.str());
}

std::string ResultMatrix::to_csv() const {
    std::string out = "dataset_id,approach_id,split_index,error\n";
    for (const auto &[d, row] : cells_) {
        for (const auto &[a, errs] : row) {
            for (std::size_t s = 0; s < errs.size(); ++s) {
                out += d + "," + a + "," + std::to_string(s) + "," + (std::isnan(errs[s]) ? "" : format_double(errs[s])) + "\n";
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

std::vector<std::string> comparable_datasets(const ResultMatrix &results, const std::vector<std::string> &ids) {
    std::vector<std::string> out;
    for (const auto &d : results.datasets()) {
        const bool ok = std::all_of(ids.begin(), ids.end(), [&](const std::string &a) { return results.complete(d, a); });
        if (!ok) {
            continue;
        }
        const auto n = results.errors(d, ids.front()).size();
        for (const auto &a : ids) {
            if (results.errors(d, a).size() != n) {
                throw invalid_argument("unpaired splits for dataset " + d);
            }
        }
        out.push_back(d);
    }
    return out;
}

}  // namespace

std::vector<TournamentRow> tournament(const ResultMatrix &results, const std::string &baseline,
                                      const std::vector<std::string> &variants, const VerdictOptions &opt) {
    std::vector<std::string> ids = {baseline};
    ids.insert(ids.end(), variants.begin(), variants.end());
    std::vector<TournamentRow> rows;
    for (const auto &v : variants) {
        rows.push_back(TournamentRow{v, 0, 0, 0, 0});
    }
    for (const auto &d : comparable_datasets(results, ids)) {
        const auto &base = results.errors(d, baseline);
        std::vector<std::size_t> winners;
        for (std::size_t i = 0; i < variants.size(); ++i) {
            switch (verdict(results.errors(d, variants[i]), base, opt).outcome) {
            case Outcome::better:
                ++rows[i].wins;
                winners.push_back(i);
                break;
            case Outcome::worse:
                ++rows[i].losses;
                break;
            case Outcome::draw:
                ++rows[i].draws;
                break;
            }
        }
        if (winners.size() == 1) {
            ++rows[winners.front()].unique_wins;
        }
    }
    return rows;
}

std::vector<SynergyRow> synergy(const ResultMatrix &results, const std::string &baseline,
                                const std::vector<SynergyRange> &ranges, const VerdictOptions &opt) {
    std::vector<SynergyRow> rows;
    std::vector<std::string> ids = {baseline};
    for (const auto &r : ranges) {
        ids.push_back(r.range);
        ids.insert(ids.end(), r.singles.begin(), r.singles.end());
    }
    const auto datasets = comparable_datasets(results, ids);
    for (const auto &r : ranges) {
        SynergyRow row{r.range, 0, 0, 0};
        for (const auto &d : datasets) {
            const auto &base = results.errors(d, baseline);
            const auto v = verdict(results.errors(d, r.range), base, opt);
            if (v.outcome == Outcome::worse) {
                ++row.losses;
                continue;
            }
            bool excess = v.outcome == Outcome::better;
            for (const auto &s : r.singles) {
                if (!excess) {
                    break;
                }
                const double single = trimmed_mean(base, opt.trim) - trimmed_mean(results.errors(d, s), opt.trim);
                excess = v.delta - single >= opt.delta - kTol;
            }
            if (excess) {
                ++row.wins;
            } else {
                ++row.draws;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace stagewise
