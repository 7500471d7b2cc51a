#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "fdialab/common.hpp"

namespace fdialab {

using Vec = std::vector<double>;
using Complex = std::complex<double>;

/// Dense row-major matrix of doubles. Networks at desk scale (n <= 300)
/// never justify sparse storage here.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    Mat& operator+=(const Mat& o);
    Mat& operator-=(const Mat& o);
    Mat& operator*=(double s);

    bool operator==(const Mat& o) const = default;

    void fill(double v) { data_.assign(data_.size(), v); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator*(Mat a, double s);

/// C = A * B
Mat matmul(const Mat& a, const Mat& b);
/// C = A^T * B
Mat matmul_tn(const Mat& a, const Mat& b);
/// C = A * B^T
Mat matmul_nt(const Mat& a, const Mat& b);
/// C += A * B (accumulating form used by gradient passes)
void matmul_acc(const Mat& a, const Mat& b, Mat& c);
void matmul_tn_acc(const Mat& a, const Mat& b, Mat& c);
void matmul_nt_acc(const Mat& a, const Mat& b, Mat& c);

Mat transpose(const Mat& a);

/// y = A * x
Vec matvec(const Mat& a, const Vec& x);

Vec colsum(const Mat& a);

double max_abs(const Mat& a);
double max_abs(const Vec& v);
double frobenius_norm(const Mat& a);
double norm2(const Vec& v);
double dot(const Vec& a, const Vec& b);

/// Solve A x = b by LU with partial pivoting. A is overwritten-safe (copied).
/// Throws NumericalError on singular pivots.
Vec lu_solve(Mat a, Vec b);

/// Solve A X = B column-by-column against a shared factorization.
Mat lu_solve(Mat a, const Mat& b);

/// In-place LU factorization with partial pivoting; returns pivot row order.
/// Used where many right-hand sides share one matrix.
class LuFactor {
public:
    explicit LuFactor(Mat a);
    Vec solve(Vec b) const;

private:
    Mat lu_;
    std::vector<std::size_t> piv_;
};

/// Complex dense matrix, used for the nodal admittance matrix.
class CMat {
public:
    CMat() = default;
    CMat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    Complex& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    Complex operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> data_;
};

}  // namespace fdialab
