#pragma once

#include "stagewise/data.hpp"
#include "stagewise/orchestrator.hpp"
#include "stagewise/stats.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stagewise {

enum class SynthKind { separable, madelon_like, scale_sensitive, noise_only };

std::string to_string(SynthKind kind);
SynthKind synth_kind_from_string(const std::string &s);

struct SynthSpec {
    SynthKind kind = SynthKind::separable;
    std::size_t n = 200;
    std::size_t d = 10;
    std::size_t informative = 5;  // madelon_like only
    std::uint64_t seed = 0;
};

/// Two balanced classes.
///   separable       class means at -4 and +4 in every column, unit variance
///   madelon_like    the first k columns drive a linear rule, the rest is noise; 5% labels flipped
///   scale_sensitive d-1 unit-variance columns drive a linear rule, the last column is N(0, 1000^2) noise
///   noise_only      labels independent of the features
Dataset synthesize(const SynthSpec &spec);

/// Column-wise z-scores (population std); constant columns are left unchanged.
Dataset standardized(const Dataset &d);

struct BenchDataset {
    std::string id;
    Dataset data;
};

struct BenchSpec {
    std::vector<BenchDataset> datasets;
    std::vector<SchemeConfig> schemes;  // scheme name is the approach id
    std::size_t n_splits = 10;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    /// Per-cell report.json / journal.jsonl written under <cells_dir>/<dataset>/<scheme>/<split>/.
    std::optional<std::filesystem::path> cells_dir;
};

struct BenchResult {
    ResultMatrix results;
    std::vector<std::string> failures;  // cells left missing
};

/// Outer split s of a dataset; identical for every scheme.
SplitSpec outer_split(const BenchSpec &spec, const std::string &dataset_id, std::size_t s);

BenchResult bench(const BenchSpec &spec, const Registry &registry = registry_default());

/// Writes report.json, journal.jsonl and stages.json into dir.
void write_run_outputs(const RunReport &report, const std::filesystem::path &dir);

struct ReportOptions {
    std::string baseline = "primitive";
    VerdictOptions verdict;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::string csv() const;
    [[nodiscard]] std::string text() const;  // aligned columns
};

struct ReportTables {
    Table summary;     // per dataset and approach: trimmed mean, std, best / indistinguishable marks
    Table tournament;  // single-stage variants against the baseline
    Table synergy;     // monotone ranges against their constituent single stages
};

ReportTables build_report(const ResultMatrix &results, const ReportOptions &options = {});

/// results.csv inside a directory, or else every cells/**/cell.json; a plain file is read as CSV.
ResultMatrix load_results(const std::filesystem::path &path);

}  // namespace stagewise
