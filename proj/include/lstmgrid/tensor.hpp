#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lstmgrid/qformat.hpp"

namespace lstmgrid {

/// Dense row-major matrix.
template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

struct QVector {
    QFormat format{};
    std::vector<std::int8_t> codes;

    QVector() = default;
    QVector(QFormat fmt, std::size_t n) : format(fmt), codes(n, 0) {}
    QVector(QFormat fmt, std::vector<std::int8_t> c) : format(fmt), codes(std::move(c)) {}

    std::size_t size() const { return codes.size(); }
    Q8 at(std::size_t i) const { return Q8{codes[i], format}; }

    friend bool operator==(const QVector&, const QVector&) = default;
};

struct QMatrix {
    QFormat format{};
    Matrix<std::int8_t> codes;

    QMatrix() = default;
    QMatrix(QFormat fmt, std::size_t rows, std::size_t cols) : format(fmt), codes(rows, cols, 0) {}

    std::size_t rows() const { return codes.rows(); }
    std::size_t cols() const { return codes.cols(); }
    Q8 at(std::size_t r, std::size_t c) const { return Q8{codes(r, c), format}; }

    friend bool operator==(const QMatrix&, const QMatrix&) = default;
};

QVector quantize_vector(std::span<const double> v, QFormat fmt);
QMatrix quantize_matrix(const Matrix<double>& m, QFormat fmt);
std::vector<double> dequantize_vector(const QVector& v);
Matrix<double> dequantize_matrix(const QMatrix& m);

}  // namespace lstmgrid
