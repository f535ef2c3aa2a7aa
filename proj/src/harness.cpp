#include "stagewise/harness.hpp"

#include "stagewise/error.hpp"
#include "stagewise/rng.hpp"
#include "stagewise/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace stagewise {

// ---------------------------------------------------------------------------
// Synthetic data

std::string to_string(SynthKind kind) {
    switch (kind) {
    case SynthKind::separable:
        return "separable";
    case SynthKind::madelon_like:
        return "madelon_like";
    case SynthKind::scale_sensitive:
        return "scale_sensitive";
    case SynthKind::noise_only:
        return "noise_only";
    }
    return "separable";
}

SynthKind synth_kind_from_string(const std::string &s) {
    for (const auto k : {SynthKind::separable, SynthKind::madelon_like, SynthKind::scale_sensitive, SynthKind::noise_only}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw invalid_argument("unknown synthetic kind '" + s + "' (valid: separable, madelon_like, scale_sensitive, noise_only)");
}

Dataset synthesize(const SynthSpec &spec) {
    if (spec.n < 20) {
        throw invalid_argument("synthetic datasets need n >= 20");
    }
    if (spec.d < 1) {
        throw invalid_argument("synthetic datasets need d >= 1");
    }
    if (spec.kind == SynthKind::madelon_like && (spec.informative < 1 || spec.informative > spec.d)) {
        throw invalid_argument("informative column count must lie in [1, d]");
    }
    if (spec.kind == SynthKind::scale_sensitive && spec.d < 2) {
        throw invalid_argument("scale_sensitive needs d >= 2");
    }
    Rng rng(derive_seed(spec.seed, to_string(spec.kind)));
    const std::size_t n = spec.n;
    const std::size_t d = spec.d;
    Matrix x(n, d);
    std::vector<int> y(n);

    auto balanced_labels = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(i % 2);
        }
        rng.shuffle(y);
    };

    switch (spec.kind) {
    case SynthKind::separable:
        balanced_labels();
        for (std::size_t i = 0; i < n; ++i) {
            const double centre = y[i] == 1 ? 4.0 : -4.0;
            for (std::size_t j = 0; j < d; ++j) {
                x(i, j) = rng.normal(centre, 1.0);
            }
        }
        break;
    case SynthKind::madelon_like:
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                x(i, j) = rng.normal();
                if (j < spec.informative) {
                    s += x(i, j);
                }
            }
            y[i] = s > 0.0 ? 1 : 0;
            if (rng.bernoulli(0.05)) {
                y[i] = 1 - y[i];
            }
        }
        break;
    case SynthKind::scale_sensitive:
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j + 1 < d; ++j) {
                x(i, j) = rng.normal();
                s += x(i, j);
            }
            x(i, d - 1) = rng.normal(0.0, 1000.0);
            y[i] = s > 0.0 ? 1 : 0;
        }
        break;
    case SynthKind::noise_only:
        balanced_labels();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                x(i, j) = rng.normal();
            }
        }
        break;
    }
    return Dataset::from_numeric(std::move(x), std::move(y), 2);
}

Dataset standardized(const Dataset &d) {
    Matrix x = d.instances();
    const double n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            m += x(i, j);
        }
        m /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            var += (x(i, j) - m) * (x(i, j) - m);
        }
        const double sd = std::sqrt(var / n);
        if (sd == 0.0) {
            continue;
        }
        for (std::size_t i = 0; i < x.rows(); ++i) {
            x(i, j) = (x(i, j) - m) / sd;
        }
    }
    return d.with_instances(std::move(x));
}

// ---------------------------------------------------------------------------
// Bench

namespace {

void write_text(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw error("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw error("failed writing " + path.string());
    }
}

std::string journal_lines(const std::vector<JournalRecord> &journal) {
    std::string out;
    for (const auto &r : journal) {
        out += journal_record_to_json(r).dump() + "\n";
    }
    return out;
}

bool stratifiable(const Dataset &d) {
    const auto counts = d.class_counts();
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    return present >= 2 && std::none_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 1; });
}

}  // namespace

void write_run_outputs(const RunReport &report, const std::filesystem::path &dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text(dir / "journal.jsonl", journal_lines(report.journal));
    write_text(dir / "stages.json", stage_traces_to_json(report.traces).dump(2) + "\n");
}

SplitSpec outer_split(const BenchSpec &spec, const std::string &dataset_id, std::size_t s) {
    return SplitSpec{spec.train_fraction, derive_seed(derive_seed(derive_seed(spec.seed, "outer"), dataset_id), s)};
}

BenchResult bench(const BenchSpec &spec, const Registry &registry) {
    if (spec.datasets.empty() || spec.schemes.empty()) {
        throw invalid_argument("bench needs at least one dataset and one scheme");
    }
    if (spec.n_splits < 1) {
        throw invalid_argument("bench needs at least one split");
    }
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw invalid_argument("train fraction must lie in (0, 1)");
    }
    for (const auto &scheme : spec.schemes) {
        validate(scheme);
    }
    BenchResult result;
    for (const auto &ds : spec.datasets) {
        for (std::size_t s = 0; s < spec.n_splits; ++s) {
            const SplitSpec outer = outer_split(spec, ds.id, s);
            const auto [train, test] = split(ds.data, outer, stratifiable(ds.data));
            for (const auto &base : spec.schemes) {
                SchemeConfig scheme = base;
                scheme.seed = derive_seed(outer.seed, "run");
                const std::string cell = ds.id + "/" + scheme.name + "/" + std::to_string(s);
                double err = std::numeric_limits<double>::quiet_NaN();
                std::string best_key;
                std::optional<RunReport> report;
                try {
                    report = run(train, scheme, registry);
                    if (report->found) {
                        const auto fitted = fit_best(*report, train, registry);
                        err = error_rate(test.labels(), fitted.predict(test.instances()));
                        best_key = report->best->key();
                    } else {
                        result.failures.push_back(cell + ": no model found");
                    }
                } catch (const std::exception &e) {
                    result.failures.push_back(cell + ": " + e.what());
                }
                result.results.set(ds.id, base.name, s, err);
                if (spec.cells_dir) {
                    const auto dir = *spec.cells_dir / ds.id / base.name / std::to_string(s);
                    std::filesystem::create_directories(dir);
                    if (report) {
                        write_run_outputs(*report, dir);
                    }
                    json j;
                    j["schema_version"] = kSchemaVersion;
                    j["dataset_id"] = ds.id;
                    j["approach_id"] = base.name;
                    j["split_index"] = s;
                    j["error"] = std::isnan(err) ? json(nullptr) : json(err);
                    j["best_key"] = best_key.empty() ? json(nullptr) : json(best_key);
                    write_text(dir / "cell.json", j.dump(2) + "\n");
                }
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Reports

std::string Table::csv() const {
    auto line = [](const std::vector<std::string> &fields) {
        std::string out;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            out += (i ? "," : "") + fields[i];
        }
        return out + "\n";
    };
    std::string out = line(header);
    for (const auto &r : rows) {
        out += line(r);
    }
    return out;
}

std::string Table::text() const {
    std::vector<std::size_t> width(header.size(), 0);
    auto widen = [&](const std::vector<std::string> &fields) {
        for (std::size_t i = 0; i < fields.size() && i < width.size(); ++i) {
            width[i] = std::max(width[i], fields[i].size());
        }
    };
    widen(header);
    for (const auto &r : rows) {
        widen(r);
    }
    auto line = [&](const std::vector<std::string> &fields) {
        std::string out;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            out += fields[i];
            if (i + 1 < fields.size()) {
                out += std::string(width[i] - fields[i].size() + 2, ' ');
            }
        }
        return out + "\n";
    };
    std::string out = line(header);
    for (const auto &r : rows) {
        out += line(r);
    }
    return out;
}

namespace {

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

bool starts_with(const std::string &s, const std::string &prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

ReportTables build_report(const ResultMatrix &results, const ReportOptions &options) {
    const auto approaches = results.approaches();
    if (approaches.empty()) {
        throw invalid_argument("no results to report");
    }
    ReportTables tables;
    tables.summary.header = {"dataset_id", "approach_id", "trimmed_mean", "std", "best", "indistinguishable"};
    for (const auto &d : results.datasets()) {
        std::vector<std::string> present;
        for (const auto &a : approaches) {
            if (results.complete(d, a)) {
                present.push_back(a);
            }
        }
        if (present.empty()) {
            continue;
        }
        const auto n = results.errors(d, present.front()).size();
        for (const auto &a : present) {
            if (results.errors(d, a).size() != n) {
                throw invalid_argument("unpaired splits for dataset " + d);
            }
        }
        std::string best = present.front();
        for (const auto &a : present) {
            if (trimmed_mean(results.errors(d, a), options.verdict.trim) <
                trimmed_mean(results.errors(d, best), options.verdict.trim)) {
                best = a;
            }
        }
        for (const auto &a : approaches) {
            if (!results.complete(d, a)) {
                tables.summary.rows.push_back({d, a, "", "", "", ""});
                continue;
            }
            const auto &e = results.errors(d, a);
            const bool same = verdict(e, results.errors(d, best), options.verdict).outcome == Outcome::draw;
            tables.summary.rows.push_back({d, a, fixed(trimmed_mean(e, options.verdict.trim)), fixed(sample_std(e)),
                                           a == best ? "1" : "0", same ? "1" : "0"});
        }
    }

    std::vector<std::string> variants;
    for (const auto &a : approaches) {
        if (a != options.baseline && starts_with(a, "single-")) {
            variants.push_back(a);
        }
    }
    if (variants.empty()) {
        for (const auto &a : approaches) {
            if (a != options.baseline) {
                variants.push_back(a);
            }
        }
    }
    tables.tournament.header = {"variant", "wins", "unique_wins", "losses", "draws"};
    const bool have_baseline = std::find(approaches.begin(), approaches.end(), options.baseline) != approaches.end();
    if (have_baseline && !variants.empty()) {
        for (const auto &r : tournament(results, options.baseline, variants, options.verdict)) {
            tables.tournament.rows.push_back({r.variant, std::to_string(r.wins), std::to_string(r.unique_wins),
                                              std::to_string(r.losses), std::to_string(r.draws)});
        }
    }

    // Ranges: monotone presets covering at least two stages beyond probing, whose singles are all present.
    tables.synergy.header = {"range", "wins", "losses", "draws"};
    std::vector<SynergyRange> ranges;
    for (const auto &a : approaches) {
        if (!starts_with(a, "monotone-") && a != "full") {
            continue;
        }
        SchemeConfig scheme;
        try {
            scheme = scheme_preset(a);
        } catch (const invalid_argument &) {
            continue;
        }
        SynergyRange range{a, {}};
        bool covered = true;
        for (const auto &s : scheme.stages) {
            if (s.id == "probing") {
                continue;
            }
            const std::string single = "single-" + s.id;
            covered = covered && std::find(approaches.begin(), approaches.end(), single) != approaches.end();
            range.singles.push_back(single);
        }
        if (covered && range.singles.size() >= 2) {
            ranges.push_back(std::move(range));
        }
    }
    if (have_baseline && !ranges.empty()) {
        for (const auto &r : synergy(results, options.baseline, ranges, options.verdict)) {
            tables.synergy.rows.push_back({r.range, std::to_string(r.wins), std::to_string(r.losses), std::to_string(r.draws)});
        }
    }
    return tables;
}

ResultMatrix load_results(const std::filesystem::path &path) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) {
        throw error("no such file or directory: " + path.string());
    }
    if (!fs::is_directory(path)) {
        return ResultMatrix::load_csv(path);
    }
    if (fs::exists(path / "results.csv")) {
        return ResultMatrix::load_csv(path / "results.csv");
    }
    std::vector<fs::path> cells;
    for (const auto &entry : fs::recursive_directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().filename() == "cell.json") {
            cells.push_back(entry.path());
        }
    }
    if (cells.empty()) {
        throw error("no results.csv or cell.json files under " + path.string());
    }
    std::sort(cells.begin(), cells.end());
    ResultMatrix m;
    for (const auto &c : cells) {
        std::ifstream in(c);
        try {
            const json j = json::parse(in);
            const double err = j.at("error").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("error").get<double>();
            m.set(j.at("dataset_id").get<std::string>(), j.at("approach_id").get<std::string>(),
                  j.at("split_index").get<std::size_t>(), err);
        } catch (const json::exception &e) {
            throw parse_error("malformed " + c.string() + ": " + e.what());
        }
    }
    return m;
}

}  // namespace stagewise
