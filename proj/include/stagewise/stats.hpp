#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stagewise {

/// Mean after dropping floor(trim * n) values from each tail of the sorted sample.
double trimmed_mean(std::span<const double> values, double trim = 0.10);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> values);

struct WilcoxonResult {
    double statistic = 0.0;  // min(W+, W-)
    double p_value = 1.0;    // two-sided
    std::size_t n = 0;       // non-zero differences
    bool exact = true;
};

/// Paired signed-rank test on a - b. Zero differences are dropped, ties get midranks.
/// Exact null distribution for n <= 12, otherwise normal approximation with tie-corrected
/// variance and continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kWilcoxonExactLimit = 12;

enum class Outcome { better, worse, draw };
std::string to_string(Outcome o);

struct Verdict {
    Outcome outcome = Outcome::draw;
    double p_value = 1.0;
    double delta = 0.0;  // trimmed_mean(b) - trimmed_mean(a); positive when a has lower error
};

struct VerdictOptions {
    double alpha = 0.05;
    double delta = 0.01;
    double trim = 0.10;
};

/// Decision rule from a p-value and a trimmed-mean difference.
Outcome decide(double p_value, double delta, const VerdictOptions &opt = {});

/// a is the approach under test; lower error is better.
Verdict verdict(std::span<const double> a, std::span<const double> b, const VerdictOptions &opt = {});

/// Per-split error rates keyed by dataset and approach. Missing splits are NaN.
class ResultMatrix {
  public:
    void set(const std::string &dataset, const std::string &approach, std::size_t split, double error);

    [[nodiscard]] std::vector<std::string> datasets() const;
    [[nodiscard]] std::vector<std::string> approaches() const;
    [[nodiscard]] bool has(const std::string &dataset, const std::string &approach) const;
    /// Every split recorded and finite.
    [[nodiscard]] bool complete(const std::string &dataset, const std::string &approach) const;
    [[nodiscard]] const std::vector<double> &errors(const std::string &dataset, const std::string &approach) const;

    /// Throws parse_error on malformed rows or duplicate cells.
    static ResultMatrix from_csv(std::string_view text);
    static ResultMatrix load_csv(const std::filesystem::path &path);
    /// Rows ordered by dataset, approach, split; header dataset_id,approach_id,split_index,error.
    [[nodiscard]] std::string to_csv() const;

  private:
    std::map<std::string, std::map<std::string, std::vector<double>>> cells_;
};

struct TournamentRow {
    std::string variant;
    std::size_t wins = 0;
    std::size_t unique_wins = 0;
    std::size_t losses = 0;
    std::size_t draws = 0;
};

/// Datasets lacking a complete cell for the baseline or any variant are skipped.
std::vector<TournamentRow> tournament(const ResultMatrix &results, const std::string &baseline,
                                      const std::vector<std::string> &variants, const VerdictOptions &opt = {});

struct SynergyRange {
    std::string range;                 // approach id of the combined scheme
    std::vector<std::string> singles;  // approach ids of its constituent single stages
};

struct SynergyRow {
    std::string range;
    std::size_t wins = 0;
    std::size_t losses = 0;
    std::size_t draws = 0;
};

/// A range wins when it is better than the baseline and its improvement exceeds that of every
/// constituent single stage by at least delta; it loses when worse than the baseline.
std::vector<SynergyRow> synergy(const ResultMatrix &results, const std::string &baseline,
                                const std::vector<SynergyRange> &ranges, const VerdictOptions &opt = {});

}  // namespace stagewise
