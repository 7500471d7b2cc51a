#include "fdialab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fdialab {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ContractError(std::string(op) + ": shape mismatch");
    }
}

}  // namespace

Mat& Mat::operator+=(const Mat& o) {
    check_same_shape(*this, o, "Mat::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Mat& Mat::operator-=(const Mat& o) {
    check_same_shape(*this, o, "Mat::operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Mat& Mat::operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

Mat operator+(Mat a, const Mat& b) { return a += b; }
Mat operator-(Mat a, const Mat& b) { return a -= b; }
Mat operator*(Mat a, double s) { return a *= s; }

void matmul_acc(const Mat& a, const Mat& b, Mat& c) {
    if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
        throw ContractError("matmul: shape mismatch");
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b.row(p);
            for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.rows(), b.cols());
    matmul_acc(a, b, c);
    return c;
}

void matmul_tn_acc(const Mat& a, const Mat& b, Mat& c) {
    if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
        throw ContractError("matmul_tn: shape mismatch");
    }
    const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a.row(p);
        const double* bp = b.row(p);
        for (std::size_t i = 0; i < n; ++i) {
            const double av = ap[i];
            if (av == 0.0) continue;
            double* ci = c.row(i);
            for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    Mat c(a.cols(), b.cols());
    matmul_tn_acc(a, b, c);
    return c;
}

void matmul_nt_acc(const Mat& a, const Mat& b, Mat& c) {
    if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
        throw ContractError("matmul_nt: shape mismatch");
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] += s;
        }
    }
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    Mat c(a.rows(), b.rows());
    matmul_nt_acc(a, b, c);
    return c;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    }
    return t;
}

Vec matvec(const Mat& a, const Vec& x) {
    if (a.cols() != x.size()) throw ContractError("matvec: shape mismatch");
    Vec y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) s += ai[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vec colsum(const Mat& a) {
    Vec s(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) s[j] += ai[j];
    }
    return s;
}

double max_abs(const Mat& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(ai[j]));
    }
    return m;
}

double max_abs(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double frobenius_norm(const Mat& a) {
    double s = 0.0;
    const double* p = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += p[i] * p[i];
    return std::sqrt(s);
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ContractError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

LuFactor::LuFactor(Mat a) : lu_(std::move(a)), piv_(lu_.rows()) {
    if (lu_.rows() != lu_.cols()) throw ContractError("LuFactor: matrix must be square");
    const std::size_t n = lu_.rows();
    std::iota(piv_.begin(), piv_.end(), std::size_t{0});
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(lu_(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(lu_(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best < 1e-14) throw NumericalError("LU: singular pivot at column " + std::to_string(k));
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
            std::swap(piv_[k], piv_[p]);
        }
        const double inv = 1.0 / lu_(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = lu_(i, k) * inv;
            lu_(i, k) = f;
            if (f == 0.0) continue;
            const double* rk = lu_.row(k);
            double* ri = lu_.row(i);
            for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
        }
    }
}

Vec LuFactor::solve(Vec b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw ContractError("LuFactor::solve: length mismatch");
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[piv_[i]];
    for (std::size_t i = 0; i < n; ++i) {
        const double* ri = lu_.row(i);
        double s = x[i];
        for (std::size_t j = 0; j < i; ++j) s -= ri[j] * x[j];
        x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        const double* ri = lu_.row(i);
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= ri[j] * x[j];
        x[i] = s / ri[i];
    }
    return x;
}

Vec lu_solve(Mat a, Vec b) { return LuFactor(std::move(a)).solve(std::move(b)); }

Mat lu_solve(Mat a, const Mat& b) {
    LuFactor f(std::move(a));
    Mat x(b.rows(), b.cols());
    Vec col(b.rows());
    for (std::size_t j = 0; j < b.cols(); ++j) {
        for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
        Vec xj = f.solve(col);
        for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = xj[i];
    }
    return x;
}

}  // namespace fdialab
