#pragma once

// Reference-frame transforms and the synchronous-frame PLL.
//
// Convention: the grid voltage space vector is aligned with the q-axis, so a
// balanced set x_k = A cos(theta_g - phi_k) maps to (d = 0, q = A) when
// theta = theta_g. I_q carries active power, I_d reactive power. Scaling is
// amplitude invariant: dq magnitudes read directly as phase amplitudes.

#include <cmath>
#include <numbers>

namespace aclink {

template <typename Scalar>
struct BasicThreePhase {
    Scalar a{};
    Scalar b{};
    Scalar c{};

    constexpr BasicThreePhase& operator+=(const BasicThreePhase& o) {
        a += o.a;
        b += o.b;
        c += o.c;
        return *this;
    }
    constexpr BasicThreePhase& operator-=(const BasicThreePhase& o) {
        a -= o.a;
        b -= o.b;
        c -= o.c;
        return *this;
    }
    constexpr BasicThreePhase& operator*=(Scalar k) {
        a *= k;
        b *= k;
        c *= k;
        return *this;
    }

    constexpr Scalar operator[](int phase) const { return phase == 0 ? a : (phase == 1 ? b : c); }
    constexpr Scalar& operator[](int phase) { return phase == 0 ? a : (phase == 1 ? b : c); }

    constexpr Scalar sum() const { return a + b + c; }
};

template <typename Scalar>
constexpr BasicThreePhase<Scalar> operator+(BasicThreePhase<Scalar> x, const BasicThreePhase<Scalar>& y) {
    return x += y;
}
template <typename Scalar>
constexpr BasicThreePhase<Scalar> operator-(BasicThreePhase<Scalar> x, const BasicThreePhase<Scalar>& y) {
    return x -= y;
}
template <typename Scalar>
constexpr BasicThreePhase<Scalar> operator*(Scalar k, BasicThreePhase<Scalar> x) {
    return x *= k;
}
template <typename Scalar>
constexpr BasicThreePhase<Scalar> operator-(BasicThreePhase<Scalar> x) {
    return x *= Scalar(-1);
}

template <typename Scalar>
struct BasicDqPair {
    Scalar d{};
    Scalar q{};

    Scalar magnitude() const { return std::hypot(d, q); }
};

template <typename Scalar>
constexpr BasicDqPair<Scalar> operator+(const BasicDqPair<Scalar>& x, const BasicDqPair<Scalar>& y) {
    return {x.d + y.d, x.q + y.q};
}
template <typename Scalar>
constexpr BasicDqPair<Scalar> operator-(const BasicDqPair<Scalar>& x, const BasicDqPair<Scalar>& y) {
    return {x.d - y.d, x.q - y.q};
}
template <typename Scalar>
constexpr BasicDqPair<Scalar> operator*(Scalar k, const BasicDqPair<Scalar>& x) {
    return {k * x.d, k * x.q};
}

using ThreePhase = BasicThreePhase<double>;
using DqPair = BasicDqPair<double>;

namespace detail {
template <typename Scalar>
inline constexpr Scalar kPhaseShift = Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(3);
}

/// Wrap an angle into [0, 2*pi).
template <typename Scalar>
Scalar wrap_angle(Scalar theta) {
    constexpr Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
    Scalar w = std::fmod(theta, two_pi);
    if (w < Scalar(0)) w += two_pi;
    // fmod of a tiny negative value can round up to exactly 2*pi
    if (w >= two_pi) w = Scalar(0);
    return w;
}

/// Balanced positive-sequence set of amplitude `amplitude` at angle `theta`.
template <typename Scalar>
BasicThreePhase<Scalar> balanced(Scalar amplitude, Scalar theta) {
    using detail::kPhaseShift;
    return {amplitude * std::cos(theta), amplitude * std::cos(theta - kPhaseShift<Scalar>),
            amplitude * std::cos(theta + kPhaseShift<Scalar>)};
}

/// Zero-sequence component (a + b + c) / 3. The transforms below ignore it.
template <typename Scalar>
Scalar zero_sequence(const BasicThreePhase<Scalar>& x) {
    return x.sum() / Scalar(3);
}

template <typename Scalar>
BasicDqPair<Scalar> abc_to_dq(const BasicThreePhase<Scalar>& x, Scalar theta) {
    using detail::kPhaseShift;
    const Scalar ta = theta;
    const Scalar tb = theta - kPhaseShift<Scalar>;
    const Scalar tc = theta + kPhaseShift<Scalar>;
    constexpr Scalar two_thirds = Scalar(2) / Scalar(3);
    return {two_thirds * (x.a * std::sin(ta) + x.b * std::sin(tb) + x.c * std::sin(tc)),
            two_thirds * (x.a * std::cos(ta) + x.b * std::cos(tb) + x.c * std::cos(tc))};
}

template <typename Scalar>
BasicThreePhase<Scalar> dq_to_abc(const BasicDqPair<Scalar>& x, Scalar theta) {
    using detail::kPhaseShift;
    const Scalar ta = theta;
    const Scalar tb = theta - kPhaseShift<Scalar>;
    const Scalar tc = theta + kPhaseShift<Scalar>;
    BasicThreePhase<Scalar> out{x.q * std::cos(ta) + x.d * std::sin(ta), x.q * std::cos(tb) + x.d * std::sin(tb),
                                x.q * std::cos(tc) + x.d * std::sin(tc)};
    // remove the rounding residue so the result is exactly zero-sum
    const Scalar z = out.sum() / Scalar(3);
    out.a -= z;
    out.b -= z;
    out.c -= z;
    return out;
}

/// Line-line voltages (V_ab, V_bc, V_ca).
template <typename Scalar>
BasicThreePhase<Scalar> line_line_voltages(const BasicThreePhase<Scalar>& v) {
    return {v.a - v.b, v.b - v.c, v.c - v.a};
}

// ---------------------------------------------------------------------------
// Phase-locked loop
// ---------------------------------------------------------------------------

struct PllState {
    double theta = 0.0;       ///< rad, always in [0, 2*pi)
    double omega = 0.0;       ///< rad/s
    double integrator = 0.0;  ///< loop-filter accumulator, rad/s
};

struct PllGains {
    double nominal_omega = 2.0 * std::numbers::pi * 60.0;
    double kp = 0.0;
    double ki = 0.0;

    /// PI loop filter placing the linearized loop at natural frequency
    /// 2*pi*bandwidth_hz with the given damping ratio.
    static PllGains from_bandwidth(double f_grid, double bandwidth_hz, double damping) {
        const double wn = 2.0 * std::numbers::pi * bandwidth_hz;
        return {2.0 * std::numbers::pi * f_grid, 2.0 * damping * wn, wn * wn};
    }
};

/// Normalized orthogonal-axis error of the PLL: -v_d / |v_dq| at the current angle.
inline double pll_error(const ThreePhase& v_grid, double theta) {
    const DqPair v = abc_to_dq(v_grid, theta);
    const double mag = v.magnitude();
    return mag > 0.0 ? -v.d / mag : 0.0;
}

/// One SRF-PLL update. The error is evaluated at the incoming angle, then the
/// angle is advanced by the new frequency estimate.
inline PllState pll_step(const ThreePhase& v_grid, const PllState& state, double dt, const PllGains& gains) {
    const double err = pll_error(v_grid, state.theta);
    PllState next;
    next.integrator = state.integrator + gains.ki * err * dt;
    next.omega = gains.nominal_omega + gains.kp * err + next.integrator;
    next.theta = wrap_angle(state.theta + next.omega * dt);
    return next;
}

}  // namespace aclink
