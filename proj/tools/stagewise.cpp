#include "stagewise/harness.hpp"
#include "stagewise/orchestrator.hpp"
#include "stagewise/serialize.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace sw = stagewise;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoModel = 2;

/// Options shared by run and bench that shape the scheme.
struct SchemeFlags {
    std::string preset = "full";
    std::vector<std::string> stages;
    std::string scheme_json;
    std::optional<double> global_timeout;
    std::vector<std::string> stage_timeouts;  // stage=seconds
    std::optional<double> per_eval_timeout;
    std::optional<std::size_t> repeats;
    std::optional<std::size_t> n_bar;
    std::optional<std::size_t> m;
    std::optional<double> holdout_fraction;
    std::optional<std::size_t> max_evals;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
};

void add_scheme_flags(CLI::App *cmd, SchemeFlags &f, bool single_preset) {
    if (single_preset) {
        cmd->add_option("--preset", f.preset, "Scheme preset")->capture_default_str();
        cmd->add_option("--stages", f.stages, "Explicit stage list (overrides --preset)")->delimiter(',');
        cmd->add_option("--scheme-json", f.scheme_json, "Scheme from a JSON file (a report.json config echo works too)");
    }
    cmd->add_option("--global-timeout", f.global_timeout, "Global budget in seconds");
    cmd->add_option("--stage-timeout", f.stage_timeouts, "Per-stage budget, stage=seconds (repeatable)");
    cmd->add_option("--per-eval-timeout", f.per_eval_timeout, "Budget of one MCCV evaluation in seconds");
    cmd->add_option("--repeats", f.repeats, "MCCV repetitions");
    cmd->add_option("--n-bar", f.n_bar, "Holdout size at which validation is fully trusted");
    cmd->add_option("--m", f.m, "Finalists re-trained in the validation stage");
    cmd->add_option("--holdout-fraction", f.holdout_fraction, "Holdout share carved off for validation");
    cmd->add_option("--max-evals", f.max_evals, "Tuning samples per candidate");
    cmd->add_option("--seed", f.seed, "Run seed");
    cmd->add_option("--workers", f.workers, "Concurrent evaluations per stage");
}

sw::SchemeConfig load_scheme_json(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw sw::error("cannot open " + path);
    }
    sw::json j;
    try {
        j = sw::json::parse(in);
    } catch (const sw::json::exception &e) {
        throw sw::parse_error(path + ": " + e.what());
    }
    return sw::scheme_from_json(j.contains("config") ? j.at("config") : j);
}

void apply_overrides(sw::SchemeConfig &cfg, const SchemeFlags &f) {
    if (f.global_timeout) {
        cfg.global_timeout = sw::seconds{*f.global_timeout};
    }
    for (const auto &spec : f.stage_timeouts) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw sw::invalid_argument("--stage-timeout expects stage=seconds, got '" + spec + "'");
        }
        const std::string id = spec.substr(0, eq);
        double secs = 0.0;
        try {
            std::size_t used = 0;
            secs = std::stod(spec.substr(eq + 1), &used);
            if (used != spec.size() - eq - 1) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const std::exception &) {
            throw sw::invalid_argument("--stage-timeout: bad seconds in '" + spec + "'");
        }
        bool found = false;
        for (auto &s : cfg.stages) {
            if (s.id == id) {
                s.timeout = sw::seconds{secs};
                found = true;
            }
        }
        if (!found) {
            throw sw::invalid_argument("--stage-timeout: stage '" + id + "' is not in the scheme");
        }
    }
    if (f.per_eval_timeout) {
        cfg.eval.per_eval_timeout = sw::seconds{*f.per_eval_timeout};
    }
    if (f.repeats) {
        cfg.eval.repeats = *f.repeats;
    }
    if (f.n_bar) {
        cfg.options.validation.n_bar = *f.n_bar;
    }
    if (f.m) {
        cfg.options.validation.m = *f.m;
    }
    if (f.holdout_fraction) {
        cfg.options.validation.holdout_fraction = *f.holdout_fraction;
    }
    if (f.max_evals) {
        cfg.options.tuning.max_evals = *f.max_evals;
    }
    if (f.seed) {
        cfg.seed = *f.seed;
    }
    if (f.workers) {
        cfg.workers = *f.workers;
    }
    sw::validate(cfg);
}

sw::SchemeConfig scheme_for_run(const SchemeFlags &f) {
    sw::SchemeConfig cfg;
    if (!f.scheme_json.empty()) {
        cfg = load_scheme_json(f.scheme_json);
    } else if (!f.stages.empty()) {
        cfg.name = "custom";
        for (const auto &id : f.stages) {
            cfg.stages.push_back(sw::StageSetting{id, std::nullopt});
        }
    } else {
        cfg = sw::scheme_preset(f.preset);
    }
    apply_overrides(cfg, f);
    return cfg;
}

sw::LabelColumn label_column(const std::string &label, const std::optional<std::size_t> &index) {
    if (index) {
        return *index;
    }
    if (label.empty()) {
        return sw::kLastColumn;
    }
    return label;
}

sw::FileFormat file_format(const std::string &format, const fs::path &path) {
    if (format == "auto") {
        return sw::format_from_path(path);
    }
    if (format == "csv") {
        return sw::FileFormat::csv;
    }
    if (format == "arff") {
        return sw::FileFormat::arff;
    }
    throw sw::invalid_argument("--format must be auto, csv or arff");
}

void write_file(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw sw::error("cannot write " + path.string());
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Staged pipeline search and experiment harness"};
    app.set_config("--config", "", "Key=value config file; command-line flags take precedence");
    app.require_subcommand(1);

    // run
    auto *run_cmd = app.add_subcommand("run", "Search for a pipeline on one dataset");
    std::string data;
    std::string label;
    std::optional<std::size_t> label_index;
    std::string format = "auto";
    std::string out_dir = "out";
    SchemeFlags run_flags;
    run_cmd->add_option("--data", data, "Dataset file (.csv or .arff)")->required();
    run_cmd->add_option("--label", label, "Label column name (default: last column)");
    run_cmd->add_option("--label-index", label_index, "Zero-based label column index");
    run_cmd->add_option("--format", format, "auto, csv or arff")->capture_default_str();
    run_cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
    add_scheme_flags(run_cmd, run_flags, true);

    // bench
    auto *bench_cmd = app.add_subcommand("bench", "Paired multi-split benchmark over presets");
    std::vector<std::string> bench_data;
    std::vector<std::string> bench_presets = {"primitive", "full"};
    std::size_t n_splits = 10;
    double outer_train = 0.7;
    std::uint64_t bench_seed = 0;
    SchemeFlags bench_flags;
    std::string bench_out = "bench";
    bench_cmd->add_option("--data", bench_data, "Dataset files")->required();
    bench_cmd->add_option("--label", label, "Label column name (default: last column)");
    bench_cmd->add_option("--label-index", label_index, "Zero-based label column index");
    bench_cmd->add_option("--format", format, "auto, csv or arff")->capture_default_str();
    bench_cmd->add_option("--presets", bench_presets, "Scheme presets to compare")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--splits", n_splits, "Outer train/test splits")->capture_default_str();
    bench_cmd->add_option("--train-fraction", outer_train, "Outer train share")->capture_default_str();
    bench_cmd->add_option("--bench-seed", bench_seed, "Seed of the outer splits")->capture_default_str();
    bench_cmd->add_option("--out", bench_out, "Output directory")->capture_default_str();
    add_scheme_flags(bench_cmd, bench_flags, false);

    // synth
    auto *synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset as CSV");
    std::string kind = "separable";
    sw::SynthSpec synth;
    std::string synth_out;
    synth_cmd->add_option("--kind", kind, "separable, madelon_like, scale_sensitive or noise_only")->capture_default_str();
    synth_cmd->add_option("--n", synth.n, "Rows")->capture_default_str();
    synth_cmd->add_option("--d", synth.d, "Columns")->capture_default_str();
    synth_cmd->add_option("--k", synth.informative, "Informative columns (madelon_like)")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Seed")->capture_default_str();
    synth_cmd->add_option("--out", synth_out, "Output CSV")->required();

    // report
    auto *report_cmd = app.add_subcommand("report", "Summary, tournament and synergy tables from bench results");
    std::string results_path;
    sw::ReportOptions report_opts;
    std::string report_out;
    report_cmd->add_option("--results", results_path, "results.csv or a bench output directory")->required();
    report_cmd->add_option("--baseline", report_opts.baseline, "Baseline approach")->capture_default_str();
    report_cmd->add_option("--alpha", report_opts.verdict.alpha, "Significance level")->capture_default_str();
    report_cmd->add_option("--delta", report_opts.verdict.delta, "Minimal relevant error difference")->capture_default_str();
    report_cmd->add_option("--trim", report_opts.verdict.trim, "Trim per tail")->capture_default_str();
    report_cmd->add_option("--out", report_out, "Directory for tables/*.csv (default: alongside the results)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*run_cmd) {
            const auto cfg = scheme_for_run(run_flags);
            const fs::path path(data);
            const auto d = sw::load_dataset(path, file_format(format, path), label_column(label, label_index),
                                            sw::LoadOptions{32, cfg.eval.stratified});
            const fs::path out(out_dir);
            fs::create_directories(out);
            sw::RunOptions options;
            options.journal_path = out / "journal.jsonl";
            const auto report = sw::run(d, cfg, sw::registry_default(), options);
            sw::write_run_outputs(report, out);
            if (!report.found) {
                std::cerr << "no model found\n";
                return kExitNoModel;
            }
            std::cout << report.best->key() << " " << sw::format_double(report.best->score.mean) << "\n";
            return kExitOk;
        }
        if (*bench_cmd) {
            sw::BenchSpec spec;
            spec.n_splits = n_splits;
            spec.train_fraction = outer_train;
            spec.seed = bench_seed;
            for (const auto &name : bench_presets) {
                auto cfg = sw::scheme_preset(name);
                apply_overrides(cfg, bench_flags);
                spec.schemes.push_back(std::move(cfg));
            }
            for (const auto &p : bench_data) {
                const fs::path path(p);
                spec.datasets.push_back({path.stem().string(),
                                         sw::load_dataset(path, file_format(format, path), label_column(label, label_index))});
            }
            const fs::path out(bench_out);
            fs::create_directories(out);
            spec.cells_dir = out / "cells";
            const auto result = sw::bench(spec);
            write_file(out / "results.csv", result.results.to_csv());
            for (const auto &f : result.failures) {
                std::cerr << "missing cell " << f << "\n";
            }
            std::cout << (out / "results.csv").string() << "\n";
            return kExitOk;
        }
        if (*synth_cmd) {
            synth.kind = sw::synth_kind_from_string(kind);
            sw::write_csv(sw::synthesize(synth), synth_out);
            return kExitOk;
        }
        if (*report_cmd) {
            const auto results = sw::load_results(results_path);
            const auto tables = sw::build_report(results, report_opts);
            fs::path out = report_out.empty() ? fs::path(results_path) : fs::path(report_out);
            if (report_out.empty() && !fs::is_directory(out)) {
                out = out.parent_path();
            }
            write_file(out / "tables" / "summary.csv", tables.summary.csv());
            write_file(out / "tables" / "tournament.csv", tables.tournament.csv());
            write_file(out / "tables" / "synergy.csv", tables.synergy.csv());
            std::cout << tables.summary.text() << "\n" << tables.tournament.text() << "\n" << tables.synergy.text();
            return kExitOk;
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
