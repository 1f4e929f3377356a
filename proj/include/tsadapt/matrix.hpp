#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace tsadapt::num {

/**
 * @brief Dense row-major matrix of doubles.
 *
 * Sized for desk-scale experiments: no views, no expression templates, every
 * operation allocates its result. Shape violations throw std::invalid_argument
 * naming both shapes so callers can report exact dimensions.
 */
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Matrix transpose() const;
    Matrix row(std::size_t r) const;
    Matrix col(std::size_t c) const;

    double frobenius_norm() const;
    double sum() const;
    double max_abs() const;
    bool all_finite() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    /// Shape as "RxC", used in error messages.
    std::string shape_str() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// Matrix product. Throws std::invalid_argument naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Elementwise product; shapes must match exactly.
Matrix hadamard(const Matrix& a, const Matrix& b);

}  // namespace tsadapt::num
