#pragma once

// Small dense row-major matrix and a forward-mode dual number. The layer code
// is templated on the scalar so the same forward computes exact
// Jacobian-vector products when instantiated with Dual.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfget {

template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows_ * cols_)
            throw std::invalid_argument("matrix payload has " + std::to_string(data_.size()) +
                                        " values, expected " + std::to_string(rows_ * cols_));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// value + eps * tangent, eps^2 = 0.
struct Dual {
    double v = 0.0;
    double d = 0.0;

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants
    Dual(double value, double tangent) : v(value), d(tangent) {}

    Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
    Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
    Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
    Dual& operator/=(const Dual& o) { d = (d * o.v - v * o.d) / (o.v * o.v); v /= o.v; return *this; }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
    friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }

    friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
    friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
    friend bool operator==(const Dual& a, const Dual& b) { return a.v == b.v; }
};

inline Dual exp(const Dual& x) {
    const double e = std::exp(x.v);
    return {e, e * x.d};
}

inline Dual sqrt(const Dual& x) {
    const double s = std::sqrt(x.v);
    return {s, x.d / (2.0 * s)};
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

inline double tangent_of(double) { return 0.0; }
inline double tangent_of(const Dual& x) { return x.d; }

inline bool is_finite(double x) { return std::isfinite(x); }
inline bool is_finite(const Dual& x) { return std::isfinite(x.v) && std::isfinite(x.d); }

/// min(x, hi); the derivative is zero on the clamped side.
template <class T>
T clamp_above(const T& x, double hi) {
    return value_of(x) > hi ? T(hi) : x;
}

template <class T>
T relu(const T& x) {
    return value_of(x) > 0.0 ? x : T(0.0);
}

inline Matrix<Dual> lift(const Matrix<double>& m, const Matrix<double>& tangent) {
    if (m.rows() != tangent.rows() || m.cols() != tangent.cols())
        throw std::invalid_argument("tangent shape does not match point shape");
    Matrix<Dual> out(m.rows(), m.cols());
    for (std::size_t k = 0; k < m.size(); ++k)
        out.values()[k] = Dual(m.values()[k], tangent.values()[k]);
    return out;
}

}  // namespace dfget
