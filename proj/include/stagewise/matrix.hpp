#pragma once

#include "stagewise/error.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace stagewise {

/// Dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw invalid_argument("matrix data size does not match shape");
        }
    }

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }
    [[nodiscard]] bool empty() const { return rows_ == 0; }

    double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    [[nodiscard]] std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            out[r] = (*this)(r, c);
        }
        return out;
    }

    [[nodiscard]] const std::vector<double> &values() const { return data_; }

    /// Rows selected by index, in the given order.
    [[nodiscard]] Matrix select_rows(std::span<const std::size_t> rows) const {
        Matrix out(rows.size(), cols_);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto src = row(rows[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    /// Columns selected by index, in the given order.
    [[nodiscard]] Matrix select_cols(std::span<const std::size_t> cols) const {
        Matrix out(rows_, cols.size());
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t j = 0; j < cols.size(); ++j) {
                out(r, j) = (*this)(r, cols[j]);
            }
        }
        return out;
    }

    friend bool operator==(const Matrix &, const Matrix &) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace stagewise
