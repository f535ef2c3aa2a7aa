#pragma once

#include "stagewise/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace stagewise {

enum class Encoding { numeric, one_hot, ordinal };

/// Where an encoded column came from.
struct SourceColumn {
    std::string column;   // original column name
    Encoding encoding = Encoding::numeric;
    std::string level;    // category level for one-hot columns, empty otherwise

    friend bool operator==(const SourceColumn &, const SourceColumn &) = default;
};

/// Strictly increasing set of encoded-column indices. Construction sorts and de-duplicates.
class FeatureSet {
  public:
    FeatureSet() = default;
    explicit FeatureSet(std::vector<std::size_t> indices);
    FeatureSet(std::initializer_list<std::size_t> indices) : FeatureSet(std::vector<std::size_t>(indices)) {}

    /// The prefix of length l of a ranking.
    static FeatureSet prefix(const std::vector<std::size_t> &ranking, std::size_t l);
    static FeatureSet all(std::size_t cols);

    [[nodiscard]] const std::vector<std::size_t> &indices() const { return indices_; }
    [[nodiscard]] std::size_t size() const { return indices_.size(); }
    [[nodiscard]] bool empty() const { return indices_.empty(); }

    friend bool operator==(const FeatureSet &, const FeatureSet &) = default;

  private:
    std::vector<std::size_t> indices_;
};

/// Encoded supervised tabular dataset. Immutable once constructed.
///
/// row_ids carries the index of each row in the originally loaded file; splits and
/// projections preserve it so tests can audit which rows reached which fold.
class Dataset {
  public:
    Dataset() = default;
    Dataset(Matrix instances, std::vector<int> labels, std::vector<std::string> feature_names,
            std::vector<SourceColumn> source_columns, std::vector<std::string> class_names,
            std::vector<std::size_t> row_ids = {});

    /// Convenience for tests and generators: numeric columns named x0, x1, ... and classes "0", "1", ...
    static Dataset from_numeric(Matrix instances, std::vector<int> labels, std::size_t n_classes = 0);

    [[nodiscard]] const Matrix &instances() const { return instances_; }
    [[nodiscard]] const std::vector<int> &labels() const { return labels_; }
    [[nodiscard]] const std::vector<std::string> &feature_names() const { return feature_names_; }
    [[nodiscard]] const std::vector<SourceColumn> &source_columns() const { return source_columns_; }
    [[nodiscard]] const std::vector<std::string> &class_names() const { return class_names_; }
    [[nodiscard]] const std::vector<std::size_t> &row_ids() const { return row_ids_; }

    [[nodiscard]] std::size_t rows() const { return instances_.rows(); }
    [[nodiscard]] std::size_t cols() const { return instances_.cols(); }
    [[nodiscard]] std::size_t n_classes() const { return class_names_.size(); }
    [[nodiscard]] bool empty() const { return rows() == 0; }

    /// Per-class example counts (length n_classes).
    [[nodiscard]] std::vector<std::size_t> class_counts() const;

    /// Hash of instances, labels and class count; identifies content for caching.
    [[nodiscard]] std::uint64_t content_hash() const { return hash_; }

    /// Rows selected by position, in the given order.
    [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const;

    /// Same rows, replaced feature matrix (used by scalers); column metadata kept.
    [[nodiscard]] Dataset with_instances(Matrix instances) const;

    /// Equality over content: instances, labels, feature names, class names.
    friend bool operator==(const Dataset &a, const Dataset &b);

  private:
    Matrix instances_;
    std::vector<int> labels_;
    std::vector<std::string> feature_names_;
    std::vector<SourceColumn> source_columns_;
    std::vector<std::string> class_names_;
    std::vector<std::size_t> row_ids_;
    std::uint64_t hash_ = 0;
};

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
};

/// Row positions of a two-way partition, each list ascending.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Partition of label positions. Train size is round(train_fraction * N).
/// Stratified: each class contributes floor(f * n_c) rows, the remainder goes to the
/// classes with the largest fractional parts (lowest class index on ties).
/// Throws invalid_argument when stratified and a present class has fewer than 2 rows
/// or fewer than 2 classes are present.
SplitIndices split_indices(std::span<const int> labels, std::size_t n_classes, const SplitSpec &spec, bool stratified);

std::pair<Dataset, Dataset> split(const Dataset &d, const SplitSpec &spec, bool stratified = true);

/// Keeps the columns of f, in f's order. Empty or out-of-range sets are rejected.
Dataset project(const Dataset &d, const FeatureSet &f);

enum class FileFormat { csv, arff };

/// Label column given by name or by zero-based index.
using LabelColumn = std::variant<std::string, std::size_t>;

/// Index value selecting the last column.
inline constexpr std::size_t kLastColumn = static_cast<std::size_t>(-1);

struct LoadOptions {
    /// Categorical columns with more levels than this are ordinal-encoded.
    std::size_t one_hot_max_levels = 32;
    /// Reject files with a single label value (caller intends a stratified split).
    bool require_multiple_classes = false;
};

Dataset load_dataset(const std::filesystem::path &path, FileFormat format, const LabelColumn &label,
                     const LoadOptions &options = {});
Dataset parse_csv(std::string_view text, const LabelColumn &label, const LoadOptions &options = {});
Dataset parse_arff(std::string_view text, const LabelColumn &label, const LoadOptions &options = {});

/// Format from file extension (.arff -> arff, otherwise csv).
FileFormat format_from_path(const std::filesystem::path &path);

/// Writes encoded columns plus a trailing label column named label_name.
/// Doubles are written in shortest round-trip form so reloading is lossless.
std::string to_csv(const Dataset &d, const std::string &label_name = "class");
void write_csv(const Dataset &d, const std::filesystem::path &path, const std::string &label_name = "class");

/// Shortest decimal form of a double that parses back to the same value.
std::string format_double(double v);

}  // namespace stagewise
