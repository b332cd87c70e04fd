#pragma once

// Real-coefficient polynomials and rational functions of the Laplace
// variable. Coefficients are stored in ascending powers of s.

#include <Eigen/Dense>
#include <unsupported/Eigen/Polynomials>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "aclink/errors.hpp"

namespace aclink {

namespace poly {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Drop exactly-zero highest-order coefficients (keeps at least one).
template <typename Scalar>
Vector<Scalar> trim(const Vector<Scalar>& p) {
    Eigen::Index n = p.size();
    while (n > 1 && p[n - 1] == Scalar(0)) --n;
    if (n == 0) return Vector<Scalar>::Zero(1);
    return p.head(n);
}

template <typename Scalar>
bool is_zero(const Vector<Scalar>& p) {
    return (p.array() == Scalar(0)).all();
}

template <typename Scalar>
int degree(const Vector<Scalar>& p) {
    return static_cast<int>(trim(p).size()) - 1;
}

template <typename Scalar>
Vector<Scalar> multiply(const Vector<Scalar>& a, const Vector<Scalar>& b) {
    Vector<Scalar> out = Vector<Scalar>::Zero(a.size() + b.size() - 1);
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i, b.size()) += a[i] * b;
    return trim(out);
}

template <typename Scalar>
Vector<Scalar> add(const Vector<Scalar>& a, const Vector<Scalar>& b) {
    Vector<Scalar> out = Vector<Scalar>::Zero(std::max(a.size(), b.size()));
    out.head(a.size()) += a;
    out.head(b.size()) += b;
    return trim(out);
}

template <typename Scalar>
std::complex<Scalar> evaluate(const Vector<Scalar>& p, std::complex<Scalar> s) {
    std::complex<Scalar> acc(0);
    for (Eigen::Index i = p.size(); i-- > 0;) acc = acc * s + p[i];
    return acc;
}

template <typename Scalar>
std::vector<std::complex<Scalar>> roots(const Vector<Scalar>& p) {
    const Vector<Scalar> t = trim(p);
    if (t.size() < 2) return {};
    Eigen::PolynomialSolver<Scalar, Eigen::Dynamic> solver;
    solver.compute(t);
    const auto& r = solver.roots();
    return {r.data(), r.data() + r.size()};
}

/// lead * prod (s - r_i); the imaginary residue of conjugate pairs is dropped.
template <typename Scalar>
Vector<Scalar> from_roots(const std::vector<std::complex<Scalar>>& rs, Scalar lead) {
    std::vector<std::complex<Scalar>> c{std::complex<Scalar>(lead)};
    for (const auto& r : rs) {
        std::vector<std::complex<Scalar>> next(c.size() + 1, std::complex<Scalar>(0));
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] -= r * c[i];
            next[i + 1] += c[i];
        }
        c = std::move(next);
    }
    Vector<Scalar> out(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) out[static_cast<Eigen::Index>(i)] = c[i].real();
    return out;
}

}  // namespace poly

/// Ratio of two real polynomials in s. Normalized so the denominator's
/// constant term is 1 when it is nonzero, otherwise its leading coefficient.
template <typename Scalar = double>
class RationalTF {
public:
    using Vector = poly::Vector<Scalar>;
    using Complex = std::complex<Scalar>;

    RationalTF() : RationalTF(Vector::Ones(1), Vector::Ones(1)) {}

    RationalTF(Vector num, Vector den) : num_(poly::trim(num)), den_(poly::trim(den)) {
        if (poly::is_zero(den_)) throw DegenerateSystem("transfer function denominator is identically zero");
        const Scalar scale = den_[0] != Scalar(0) ? den_[0] : den_[den_.size() - 1];
        num_ /= scale;
        den_ /= scale;
    }

    static RationalTF constant(Scalar k) { return RationalTF(Vector::Constant(1, k), Vector::Ones(1)); }

    const Vector& numerator() const { return num_; }
    const Vector& denominator() const { return den_; }

    Complex operator()(Complex s) const { return poly::evaluate(num_, s) / poly::evaluate(den_, s); }

    Complex frequency_response(Scalar f_hz) const {
        return (*this)(Complex(0, Scalar(2) * std::numbers::pi_v<Scalar> * f_hz));
    }

    std::vector<Complex> poles() const { return poly::roots(den_); }
    std::vector<Complex> zeros() const { return poly::roots(num_); }

    /// Cancel pole/zero pairs closer than `tol` (relative to the pole magnitude, floor 1).
    RationalTF reduced(Scalar tol = Scalar(1e-9)) const {
        if (poly::is_zero(num_)) return RationalTF(Vector::Zero(1), Vector::Ones(1));
        std::vector<Complex> z = zeros();
        std::vector<Complex> p = poles();
        bool cancelled = false;
        for (auto zi = z.begin(); zi != z.end();) {
            auto match = std::find_if(p.begin(), p.end(), [&](const Complex& pole) {
                return std::abs(pole - *zi) <= tol * std::max(Scalar(1), std::abs(pole));
            });
            if (match != p.end()) {
                p.erase(match);
                zi = z.erase(zi);
                cancelled = true;
            } else {
                ++zi;
            }
        }
        if (!cancelled) return *this;
        return RationalTF(poly::from_roots(z, num_[num_.size() - 1]), poly::from_roots(p, den_[den_.size() - 1]));
    }

    friend RationalTF operator*(const RationalTF& a, const RationalTF& b) {
        return RationalTF(poly::multiply(a.num_, b.num_), poly::multiply(a.den_, b.den_));
    }

    friend RationalTF operator+(const RationalTF& a, const RationalTF& b) {
        return RationalTF(poly::add(poly::multiply(a.num_, b.den_), poly::multiply(b.num_, a.den_)),
                          poly::multiply(a.den_, b.den_));
    }

    /// forward / (1 + forward * feedback)
    static RationalTF feedback(const RationalTF& forward, const RationalTF& fb) {
        Vector num = poly::multiply(forward.num_, fb.den_);
        Vector den = poly::add(poly::multiply(forward.den_, fb.den_), poly::multiply(forward.num_, fb.num_));
        if (poly::is_zero(den)) throw DegenerateSystem("closed-loop denominator is identically zero");
        return RationalTF(std::move(num), std::move(den));
    }

private:
    Vector num_;
    Vector den_;
};

using TransferFunction = RationalTF<double>;

}  // namespace aclink
