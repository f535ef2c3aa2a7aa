#include "stagewise/data.hpp"

#include "stagewise/error.hpp"
#include "stagewise/rng.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace stagewise {

// ---------------------------------------------------------------------------
// FeatureSet

FeatureSet::FeatureSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

FeatureSet FeatureSet::prefix(const std::vector<std::size_t> &ranking, std::size_t l) {
    l = std::min(l, ranking.size());
    return FeatureSet(std::vector<std::size_t>(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(l)));
}

FeatureSet FeatureSet::all(std::size_t cols) {
    std::vector<std::size_t> idx(cols);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return FeatureSet(std::move(idx));
}

// ---------------------------------------------------------------------------
// Dataset

namespace {

std::uint64_t hash_content(const Matrix &x, const std::vector<int> &y, std::size_t n_classes) {
    std::uint64_t h = mix64(x.rows()) ^ mix64(x.cols() + 0x51ULL) ^ mix64(n_classes + 0xa3ULL);
    for (const double v : x.values()) {
        h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    }
    for (const int label : y) {
        h = mix64(h ^ static_cast<std::uint64_t>(label) ^ 0x7f4a7c15ULL);
    }
    return h;
}

}  // namespace

Dataset::Dataset(Matrix instances, std::vector<int> labels, std::vector<std::string> feature_names,
                 std::vector<SourceColumn> source_columns, std::vector<std::string> class_names,
                 std::vector<std::size_t> row_ids)
    : instances_(std::move(instances)),
      labels_(std::move(labels)),
      feature_names_(std::move(feature_names)),
      source_columns_(std::move(source_columns)),
      class_names_(std::move(class_names)),
      row_ids_(std::move(row_ids)) {
    if (instances_.rows() != labels_.size()) {
        throw invalid_argument("row count does not match label count");
    }
    if (feature_names_.size() != instances_.cols() || source_columns_.size() != instances_.cols()) {
        throw invalid_argument("column metadata does not match column count");
    }
    for (const int y : labels_) {
        if (y < 0 || static_cast<std::size_t>(y) >= class_names_.size()) {
            throw invalid_argument("label index out of range");
        }
    }
    for (const double v : instances_.values()) {
        if (!std::isfinite(v)) {
            throw invalid_argument("dataset contains NaN or infinite values");
        }
    }
    if (row_ids_.empty()) {
        row_ids_.resize(labels_.size());
        std::iota(row_ids_.begin(), row_ids_.end(), std::size_t{0});
    } else if (row_ids_.size() != labels_.size()) {
        throw invalid_argument("row id count does not match row count");
    }
    hash_ = hash_content(instances_, labels_, class_names_.size());
}

Dataset Dataset::from_numeric(Matrix instances, std::vector<int> labels, std::size_t n_classes) {
    if (n_classes == 0) {
        for (const int y : labels) {
            n_classes = std::max(n_classes, static_cast<std::size_t>(std::max(y, 0)) + 1);
        }
    }
    std::vector<std::string> names(instances.cols());
    std::vector<SourceColumn> sources(instances.cols());
    for (std::size_t c = 0; c < instances.cols(); ++c) {
        names[c] = "x" + std::to_string(c);
        sources[c] = SourceColumn{names[c], Encoding::numeric, {}};
    }
    std::vector<std::string> classes(n_classes);
    for (std::size_t k = 0; k < n_classes; ++k) {
        classes[k] = std::to_string(k);
    }
    return Dataset(std::move(instances), std::move(labels), std::move(names), std::move(sources), std::move(classes));
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(n_classes(), 0);
    for (const int y : labels_) {
        ++counts[static_cast<std::size_t>(y)];
    }
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    std::vector<int> labels(rows.size());
    std::vector<std::size_t> ids(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= this->rows()) {
            throw invalid_argument("row index out of range");
        }
        labels[i] = labels_[rows[i]];
        ids[i] = row_ids_[rows[i]];
    }
    return Dataset(instances_.select_rows(rows), std::move(labels), feature_names_, source_columns_, class_names_,
                   std::move(ids));
}

Dataset Dataset::with_instances(Matrix instances) const {
    return Dataset(std::move(instances), labels_, feature_names_, source_columns_, class_names_, row_ids_);
}

bool operator==(const Dataset &a, const Dataset &b) {
    return a.instances_ == b.instances_ && a.labels_ == b.labels_ && a.feature_names_ == b.feature_names_ &&
           a.class_names_ == b.class_names_;
}

// ---------------------------------------------------------------------------
// Splitting

SplitIndices split_indices(std::span<const int> labels, std::size_t n_classes, const SplitSpec &spec, bool stratified) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw invalid_argument("train_fraction must lie in (0, 1)");
    }
    const std::size_t n = labels.size();
    if (n == 0) {
        throw invalid_argument("cannot split an empty dataset");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    Rng rng(spec.seed);
    std::vector<bool> in_train(n, false);

    if (!stratified) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        for (std::size_t i = 0; i < n_train; ++i) {
            in_train[order[i]] = true;
        }
    } else {
        std::vector<std::vector<std::size_t>> by_class(n_classes);
        for (std::size_t i = 0; i < n; ++i) {
            by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
        }
        std::size_t present = 0;
        for (const auto &members : by_class) {
            if (members.size() == 1) {
                throw invalid_argument("stratified split needs at least 2 examples per class");
            }
            present += members.empty() ? 0 : 1;
        }
        if (present < 2) {
            throw invalid_argument("stratified split needs at least 2 classes");
        }
        std::vector<std::size_t> quota(n_classes);
        std::vector<double> remainder(n_classes);
        std::size_t assigned = 0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            const double exact = spec.train_fraction * static_cast<double>(by_class[k].size());
            quota[k] = static_cast<std::size_t>(std::floor(exact));
            remainder[k] = exact - static_cast<double>(quota[k]);
            assigned += quota[k];
        }
        std::vector<std::size_t> order(n_classes);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t i = 0; assigned < n_train && i < order.size(); ++i) {
            if (quota[order[i]] < by_class[order[i]].size() && remainder[order[i]] > 0.0) {
                ++quota[order[i]];
                ++assigned;
            }
        }
        for (std::size_t k = 0; k < n_classes; ++k) {
            rng.shuffle(by_class[k]);
            for (std::size_t i = 0; i < quota[k]; ++i) {
                in_train[by_class[k][i]] = true;
            }
        }
    }

    SplitIndices out;
    out.train.reserve(n_train);
    out.test.reserve(n - n_train);
    for (std::size_t i = 0; i < n; ++i) {
        (in_train[i] ? out.train : out.test).push_back(i);
    }
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset &d, const SplitSpec &spec, bool stratified) {
    const auto idx = split_indices(d.labels(), d.n_classes(), spec, stratified);
    return {d.subset(idx.train), d.subset(idx.test)};
}

Dataset project(const Dataset &d, const FeatureSet &f) {
    if (f.empty()) {
        throw invalid_argument("feature set must not be empty");
    }
    if (f.indices().back() >= d.cols()) {
        throw invalid_argument("feature index " + std::to_string(f.indices().back()) + " out of range");
    }
    std::vector<std::string> names;
    std::vector<SourceColumn> sources;
    for (const auto c : f.indices()) {
        names.push_back(d.feature_names()[c]);
        sources.push_back(d.source_columns()[c]);
    }
    return Dataset(d.instances().select_cols(f.indices()), d.labels(), std::move(names), std::move(sources),
                   d.class_names(), d.row_ids());
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

struct RawTable {
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<std::string>>> cells;  // [row][col], nullopt = missing
    // declared nominal levels per column (ARFF); nullopt = infer
    std::vector<std::optional<std::vector<std::string>>> declared_levels;
    std::vector<bool> declared_numeric;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_number(const std::string &s) {
    if (s.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    const char *first = s.data();
    if (*first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::optional<std::string> as_cell(std::string raw, bool quoted) {
    if (!quoted) {
        raw = trim(raw);
        if (raw.empty() || raw == "?") {
            return std::nullopt;
        }
    }
    return raw;
}

/// RFC-4180 records. Quoted fields may contain separators, doubled quotes and newlines.
std::vector<std::vector<std::pair<std::string, bool>>> split_records(std::string_view text, char quote) {
    std::vector<std::vector<std::pair<std::string, bool>>> records;
    std::vector<std::pair<std::string, bool>> record;
    std::string field;
    bool quoted = false;
    bool in_quotes = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == quote) {
                if (i + 1 < text.size() && text[i + 1] == quote) {
                    field.push_back(quote);
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == quote && trim(field).empty()) {
            field.clear();
            in_quotes = true;
            quoted = true;
            any = true;
        } else if (c == ',') {
            record.emplace_back(std::move(field), quoted);
            field.clear();
            quoted = false;
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
                ++i;
            }
            if (any || !field.empty()) {
                record.emplace_back(std::move(field), quoted);
                records.push_back(std::move(record));
            }
            record.clear();
            field.clear();
            quoted = false;
            any = false;
        } else {
            field.push_back(c);
            any = true;
        }
    }
    if (in_quotes) {
        throw parse_error("unterminated quoted field");
    }
    if (any || !field.empty()) {
        record.emplace_back(std::move(field), quoted);
        records.push_back(std::move(record));
    }
    return records;
}

std::size_t resolve_label(const RawTable &t, const LabelColumn &label) {
    if (const auto *idx = std::get_if<std::size_t>(&label)) {
        if (*idx == kLastColumn && !t.names.empty()) {
            return t.names.size() - 1;
        }
        if (*idx >= t.names.size()) {
            throw invalid_argument("label column index " + std::to_string(*idx) + " out of range");
        }
        return *idx;
    }
    const auto &name = std::get<std::string>(label);
    const auto it = std::find(t.names.begin(), t.names.end(), name);
    if (it == t.names.end()) {
        throw invalid_argument("label column '" + name + "' not found");
    }
    return static_cast<std::size_t>(it - t.names.begin());
}

Dataset encode(const RawTable &t, const LabelColumn &label, const LoadOptions &options) {
    const std::size_t n = t.cells.size();
    if (n == 0) {
        throw parse_error("dataset has no rows");
    }
    const std::size_t label_col = resolve_label(t, label);

    std::vector<std::string> class_names;
    std::unordered_map<std::string, int> class_index;
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto &cell = t.cells[r][label_col];
        if (!cell) {
            throw parse_error("missing label in row " + std::to_string(r + 1));
        }
        auto [it, inserted] = class_index.try_emplace(*cell, static_cast<int>(class_names.size()));
        if (inserted) {
            class_names.push_back(*cell);
        }
        labels[r] = it->second;
    }
    if (options.require_multiple_classes && class_names.size() < 2) {
        throw invalid_argument("label column has a single distinct value; a stratified split is impossible");
    }

    std::vector<std::vector<double>> columns;  // encoded, column-major
    std::vector<std::string> names;
    std::vector<SourceColumn> sources;

    for (std::size_t c = 0; c < t.names.size(); ++c) {
        if (c == label_col) {
            continue;
        }
        const auto &name = t.names[c];
        bool numeric = t.declared_numeric[c];
        std::vector<std::optional<double>> parsed(n);
        if (!t.declared_levels[c]) {
            bool all_numeric = true;
            for (std::size_t r = 0; r < n; ++r) {
                if (const auto &cell = t.cells[r][c]) {
                    parsed[r] = parse_number(*cell);
                    if (!parsed[r]) {
                        if (numeric) {
                            throw parse_error("non-numeric value '" + *cell + "' in numeric column '" + name + "'");
                        }
                        all_numeric = false;
                    }
                }
            }
            numeric = numeric || all_numeric;
        }

        if (numeric) {
            double sum = 0.0;
            std::size_t count = 0;
            for (const auto &v : parsed) {
                if (v) {
                    sum += *v;
                    ++count;
                }
            }
            const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
            std::vector<double> col(n);
            for (std::size_t r = 0; r < n; ++r) {
                col[r] = parsed[r].value_or(mean);
            }
            columns.push_back(std::move(col));
            names.push_back(name);
            sources.push_back(SourceColumn{name, Encoding::numeric, {}});
            continue;
        }

        // Categorical: declared levels (ARFF) or first-appearance order.
        std::vector<std::string> levels = t.declared_levels[c].value_or(std::vector<std::string>{});
        std::unordered_map<std::string, std::size_t> level_index;
        for (std::size_t i = 0; i < levels.size(); ++i) {
            level_index.emplace(levels[i], i);
        }
        std::vector<std::size_t> counts(levels.size(), 0);
        std::vector<std::optional<std::size_t>> codes(n);
        for (std::size_t r = 0; r < n; ++r) {
            const auto &cell = t.cells[r][c];
            if (!cell) {
                continue;
            }
            auto it = level_index.find(*cell);
            if (it == level_index.end()) {
                if (t.declared_levels[c]) {
                    throw parse_error("undeclared nominal value '" + *cell + "' in column '" + name + "'");
                }
                it = level_index.emplace(*cell, levels.size()).first;
                levels.push_back(*cell);
                counts.push_back(0);
            }
            codes[r] = it->second;
            ++counts[it->second];
        }
        std::size_t mode = 0;
        for (std::size_t i = 1; i < counts.size(); ++i) {
            if (counts[i] > counts[mode]) {
                mode = i;
            }
        }
        if (levels.empty()) {
            columns.emplace_back(n, 0.0);
            names.push_back(name);
            sources.push_back(SourceColumn{name, Encoding::ordinal, {}});
            continue;
        }
        if (levels.size() <= options.one_hot_max_levels) {
            for (std::size_t l = 0; l < levels.size(); ++l) {
                std::vector<double> col(n);
                for (std::size_t r = 0; r < n; ++r) {
                    col[r] = codes[r].value_or(mode) == l ? 1.0 : 0.0;
                }
                columns.push_back(std::move(col));
                names.push_back(name + "=" + levels[l]);
                sources.push_back(SourceColumn{name, Encoding::one_hot, levels[l]});
            }
        } else {
            std::vector<double> col(n);
            for (std::size_t r = 0; r < n; ++r) {
                col[r] = static_cast<double>(codes[r].value_or(mode));
            }
            columns.push_back(std::move(col));
            names.push_back(name);
            sources.push_back(SourceColumn{name, Encoding::ordinal, {}});
        }
    }

    Matrix x(n, columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        for (std::size_t r = 0; r < n; ++r) {
            x(r, c) = columns[c][r];
        }
    }
    return Dataset(std::move(x), std::move(labels), std::move(names), std::move(sources), std::move(class_names));
}

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw parse_error("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
}

/// Reads one possibly quoted ARFF token starting at pos.
std::string arff_token(const std::string &line, std::size_t &pos) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) {
        ++pos;
    }
    if (pos >= line.size()) {
        return {};
    }
    std::string out;
    const char q = line[pos];
    if (q == '\'' || q == '"') {
        ++pos;
        while (pos < line.size() && line[pos] != q) {
            if (line[pos] == '\\' && pos + 1 < line.size()) {
                ++pos;
            }
            out.push_back(line[pos++]);
        }
        if (pos >= line.size()) {
            throw parse_error("unterminated quoted name in ARFF header");
        }
        ++pos;
        return out;
    }
    while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos])) && line[pos] != '{') {
        out.push_back(line[pos++]);
    }
    return out;
}

}  // namespace

Dataset parse_csv(std::string_view text, const LabelColumn &label, const LoadOptions &options) {
    if (text.starts_with("\xEF\xBB\xBF")) {
        text.remove_prefix(3);
    }
    auto records = split_records(text, '"');
    if (records.empty()) {
        throw parse_error("CSV has no header row");
    }
    RawTable t;
    for (auto &[name, quoted] : records.front()) {
        t.names.push_back(quoted ? name : trim(name));
    }
    const std::size_t cols = t.names.size();
    t.declared_levels.assign(cols, std::nullopt);
    t.declared_numeric.assign(cols, false);
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != cols) {
            throw parse_error("row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                              " fields, expected " + std::to_string(cols));
        }
        std::vector<std::optional<std::string>> row;
        row.reserve(cols);
        for (auto &[value, quoted] : records[r]) {
            row.push_back(as_cell(std::move(value), quoted));
        }
        t.cells.push_back(std::move(row));
    }
    return encode(t, label, options);
}

Dataset parse_arff(std::string_view text, const LabelColumn &label, const LoadOptions &options) {
    RawTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    bool in_data = false;
    std::string data_text;
    while (std::getline(in, line)) {
        if (in_data) {
            const auto trimmed = trim(line);
            if (trimmed.empty() || trimmed.front() == '%') {
                continue;
            }
            if (trimmed.front() == '{') {
                throw parse_error("sparse ARFF data is not supported");
            }
            data_text += trimmed;
            data_text.push_back('\n');
            continue;
        }
        const auto trimmed = trim(line);
        if (trimmed.empty() || trimmed.front() == '%') {
            continue;
        }
        const auto head = lower(trimmed.substr(0, trimmed.find_first_of(" \t")));
        if (head == "@relation") {
            continue;
        }
        if (head == "@data") {
            in_data = true;
            continue;
        }
        if (head != "@attribute") {
            throw parse_error("unexpected ARFF header line: " + trimmed);
        }
        std::size_t pos = head.size();
        const std::string name = arff_token(trimmed, pos);
        while (pos < trimmed.size() && std::isspace(static_cast<unsigned char>(trimmed[pos]))) {
            ++pos;
        }
        if (name.empty() || pos >= trimmed.size()) {
            throw parse_error("malformed ARFF attribute: " + trimmed);
        }
        t.names.push_back(name);
        if (trimmed[pos] == '{') {
            const auto close = trimmed.find('}', pos);
            if (close == std::string::npos) {
                throw parse_error("unterminated nominal specification: " + trimmed);
            }
            std::vector<std::string> levels;
            auto spec = split_records(trimmed.substr(pos + 1, close - pos - 1), '\'');
            if (spec.empty()) {
                throw parse_error("empty nominal specification: " + trimmed);
            }
            for (auto &[value, quoted] : spec.front()) {
                levels.push_back(quoted ? value : trim(value));
            }
            t.declared_levels.emplace_back(std::move(levels));
            t.declared_numeric.push_back(false);
            continue;
        }
        const auto type = lower(arff_token(trimmed, pos));
        if (type == "numeric" || type == "real" || type == "integer") {
            t.declared_levels.emplace_back(std::nullopt);
            t.declared_numeric.push_back(true);
        } else {
            throw parse_error("unsupported ARFF attribute type '" + type + "' for '" + name + "'");
        }
    }
    if (!in_data) {
        throw parse_error("ARFF file has no @data section");
    }
    const std::size_t cols = t.names.size();
    auto records = split_records(data_text, '\'');
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (records[r].size() != cols) {
            throw parse_error("ARFF data row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                              " values, expected " + std::to_string(cols));
        }
        std::vector<std::optional<std::string>> row;
        for (auto &[value, quoted] : records[r]) {
            row.push_back(as_cell(std::move(value), quoted));
        }
        t.cells.push_back(std::move(row));
    }
    // The label column is always categorical, even when declared numeric.
    const std::size_t label_col = resolve_label(t, label);
    t.declared_numeric[label_col] = false;
    return encode(t, label, options);
}

FileFormat format_from_path(const std::filesystem::path &path) {
    return lower(path.extension().string()) == ".arff" ? FileFormat::arff : FileFormat::csv;
}

Dataset load_dataset(const std::filesystem::path &path, FileFormat format, const LabelColumn &label,
                     const LoadOptions &options) {
    const auto text = read_file(path);
    return format == FileFormat::arff ? parse_arff(text, label, options) : parse_csv(text, label, options);
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

namespace {

std::string csv_field(const std::string &s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos && s != "?" && !s.empty() && trim(s) == s) {
        return s;
    }
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string to_csv(const Dataset &d, const std::string &label_name) {
    std::string out;
    for (const auto &name : d.feature_names()) {
        out += csv_field(name);
        out.push_back(',');
    }
    out += csv_field(label_name);
    out.push_back('\n');
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (const double v : d.instances().row(r)) {
            out += format_double(v);
            out.push_back(',');
        }
        out += csv_field(d.class_names()[static_cast<std::size_t>(d.labels()[r])]);
        out.push_back('\n');
    }
    return out;
}

void write_csv(const Dataset &d, const std::filesystem::path &path, const std::string &label_name) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw error("cannot write '" + path.string() + "'");
    }
    out << to_csv(d, label_name);
}

}  // namespace stagewise
