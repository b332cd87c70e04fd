#include "aclink/analysis.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "aclink/errors.hpp"

namespace aclink {

namespace {

using Vec = TransferFunction::Vector;

Vec coeffs(std::initializer_list<double> c) {
    Vec v(static_cast<Eigen::Index>(c.size()));
    Eigen::Index i = 0;
    for (double x : c) v[i++] = x;
    return v;
}

double log_magnitude(const TransferFunction& tf, double f) { return std::log(std::abs(tf.frequency_response(f))); }

}  // namespace

TransferFunction gp_tf(double L, double C, double r_s) {
    if (!(L > 0.0) || !(C > 0.0)) throw DomainError("gp_tf: L and C must be positive");
    if (!(r_s >= 0.0)) throw DomainError("gp_tf: r_s must be non-negative");
    return {coeffs({1.0}), coeffs({1.0, r_s * C, L * C})};
}

TransferFunction hpf_tf(double k, double omega_c) {
    if (!(omega_c > 0.0)) throw DomainError("hpf_tf: omega_c must be positive");
    return {coeffs({0.0, k}), coeffs({1.0, 1.0 / omega_c})};
}

double damping_gain(double xi, double L, double C) {
    if (!(xi > 0.0) || !(L > 0.0) || !(C > 0.0)) throw DomainError("damping_gain: inputs must be positive");
    return 2.0 * xi * std::sqrt(L * C);
}

double damping_ratio(double k, double L, double C) {
    if (!(k >= 0.0) || !(L > 0.0) || !(C > 0.0)) throw DomainError("damping_ratio: invalid inputs");
    return k / (2.0 * std::sqrt(L * C));
}

TransferFunction closed_inner_loop(const TransferFunction& gp, const TransferFunction& hpf) {
    if (poly::is_zero(hpf.numerator())) return gp;
    return TransferFunction::feedback(gp, hpf).reduced();
}

TransferFunction pi_tf(double K_p, double K_i) { return {coeffs({K_i, K_p}), coeffs({0.0, 1.0})}; }

TransferFunction loop_gain(const TransferFunction& gig, const TransferFunction& gi) { return (gig * gi).reduced(); }

std::vector<BodePoint> bode(const TransferFunction& tf, double f_min, double f_max, int n) {
    if (!(f_min > 0.0) || !(f_max > f_min) || n < 2) throw DomainError("bode: need 0 < f_min < f_max and n >= 2");
    constexpr double tol = 1e-12;
    const Vec& num = tf.numerator();
    const Vec& den = tf.denominator();
    std::vector<BodePoint> out;
    out.reserve(static_cast<std::size_t>(n));
    const double ratio = std::log(f_max / f_min) / (n - 1);
    double previous = 0.0;
    for (int i = 0; i < n; ++i) {
        BodePoint pt;
        pt.f = i == n - 1 ? f_max : f_min * std::exp(ratio * i);
        const std::complex<double> s(0.0, 2.0 * std::numbers::pi * pt.f);
        const std::complex<double> dv = poly::evaluate(den, s);
        const std::complex<double> nv = poly::evaluate(num, s);
        double scale = 0.0;
        for (Eigen::Index k = 0; k < den.size(); ++k) scale += std::abs(den[k]) * std::pow(std::abs(s), double(k));
        pt.pole_on_axis = std::abs(dv) <= tol * scale;
        pt.magnitude_db = 20.0 * std::log10(std::abs(nv) / std::abs(dv));
        double phase = (std::arg(nv) - std::arg(dv)) * 180.0 / std::numbers::pi;
        if (i == 0) {
            phase = std::remainder(phase, 360.0);
        } else {
            phase = previous + std::remainder(phase - previous, 360.0);
        }
        pt.phase_deg = phase;
        previous = phase;
        out.push_back(pt);
    }
    return out;
}

std::vector<double> unity_crossings(const TransferFunction& tf, double f_min, double f_max, int grid) {
    std::vector<double> out;
    const double step = std::log(f_max / f_min) / grid;
    double f0 = f_min;
    double g0 = log_magnitude(tf, f0);
    for (int i = 1; i <= grid; ++i) {
        const double f1 = f_min * std::exp(step * i);
        const double g1 = log_magnitude(tf, f1);
        if (std::isfinite(g0) && std::isfinite(g1) && (g0 > 0.0) != (g1 > 0.0)) {
            double lo = std::log(f0);
            double hi = std::log(f1);
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                if ((log_magnitude(tf, std::exp(mid)) > 0.0) == (g0 > 0.0)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push_back(std::exp(0.5 * (lo + hi)));
        }
        f0 = f1;
        g0 = g1;
    }
    return out;
}

double phase_margin(const TransferFunction& tf, double f_min, double f_max) {
    const std::vector<double> fc = unity_crossings(tf, f_min, f_max);
    if (fc.empty()) return std::numeric_limits<double>::quiet_NaN();
    // unwrap from f_min to the crossing on a dense grid, ending exactly on it
    const std::vector<BodePoint> sweep = bode(tf, f_min, fc.back(), 4000);
    return 180.0 + sweep.back().phase_deg;
}

LoopDesign design(const ConverterParams& p) {
    LoopDesign d;
    d.gp = gp_tf(p.L_f, p.C_f, p.r_s);
    d.hpf = hpf_tf(p.k_damp, p.omega_hpf());
    d.gig = closed_inner_loop(d.gp, d.hpf);
    d.gi = pi_tf(p.K_p, p.K_i);
    d.loop = loop_gain(d.gig, d.gi);
    d.inner_loop_gain = (d.gp * d.hpf).reduced();
    d.gi_closed = TransferFunction::feedback(d.loop, TransferFunction::constant(1.0)).reduced();
    return d;
}

BandwidthCheck bandwidth_check(const ConverterParams& p) {
    const LoopDesign d = design(p);
    BandwidthCheck b;
    const std::vector<double> loop_fc = unity_crossings(d.loop);
    const std::vector<double> inner_fc = unity_crossings(d.inner_loop_gain);
    b.loop_crossover = loop_fc.empty() ? 0.0 : loop_fc.back();
    b.inner_crossover = inner_fc.empty() ? 0.0 : inner_fc.back();
    b.phase_margin = phase_margin(d.loop);
    b.satisfies_rule = !loop_fc.empty() && !inner_fc.empty() && b.loop_crossover <= b.inner_crossover / 5.0;
    return b;
}

double predicted_settling_time(double loop_crossover_hz, double step, double target, double band) {
    if (!(loop_crossover_hz > 0.0) || !(band > 0.0) || target == 0.0) {
        throw DomainError("predicted_settling_time: invalid inputs");
    }
    const double ratio = std::abs(step) / (band * std::abs(target));
    if (ratio <= 1.0) return 0.0;
    return std::log(ratio) / (2.0 * std::numbers::pi * loop_crossover_hz);
}

}  // namespace aclink
