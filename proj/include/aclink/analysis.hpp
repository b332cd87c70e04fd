#pragma once

// Filter, damping and loop transfer functions, Bode sweeps and the loop
// design rules built on them.

#include <vector>

#include "aclink/params.hpp"
#include "aclink/rational.hpp"

namespace aclink {

/// 1 / (L C s^2 + r_s C s + 1): converter current to grid current.
TransferFunction gp_tf(double L, double C, double r_s);

/// k s / (1 + s / omega_c)
TransferFunction hpf_tf(double k, double omega_c);

/// k = 2 xi sqrt(L C)
double damping_gain(double xi, double L, double C);

/// Inverse of damping_gain.
double damping_ratio(double k, double L, double C);

/// gp / (1 + gp * hpf), common factors cancelled.
TransferFunction closed_inner_loop(const TransferFunction& gp, const TransferFunction& hpf);

/// (K_p s + K_i) / s
TransferFunction pi_tf(double K_p, double K_i);

/// gig * gi, common factors cancelled.
TransferFunction loop_gain(const TransferFunction& gig, const TransferFunction& gi);

struct BodePoint {
    double f = 0.0;
    double magnitude_db = 0.0;
    double phase_deg = 0.0;
    bool pole_on_axis = false;
};

/// n log-spaced points in [f_min, f_max]. Phase is unwrapped along the sweep.
/// Points closer to a pole than the evaluation can resolve are flagged
/// instead of throwing. Throws DomainError on a bad sweep.
std::vector<BodePoint> bode(const TransferFunction& tf, double f_min, double f_max, int n);

/// Frequencies where |H(j2 pi f)| crosses 1, found on a log grid and refined
/// by bisection. Ascending.
std::vector<double> unity_crossings(const TransferFunction& tf, double f_min = 1.0, double f_max = 1e6,
                                    int grid = 4000);

/// 180 deg plus the phase at the highest unity crossing, with the phase
/// unwrapped from f_min. NaN when there is no crossing.
double phase_margin(const TransferFunction& tf, double f_min = 1.0, double f_max = 1e6);

/// The transfer functions of one parameter set.
struct LoopDesign {
    TransferFunction gp;
    TransferFunction hpf;
    TransferFunction gig;   ///< closed inner (damped) loop
    TransferFunction gi;    ///< PI
    TransferFunction loop;  ///< gig * gi
    TransferFunction inner_loop_gain;  ///< gp * hpf
    TransferFunction gi_closed;        ///< loop / (1 + loop)
};

LoopDesign design(const ConverterParams& p);

struct BandwidthCheck {
    double loop_crossover = 0.0;   ///< Hz
    double inner_crossover = 0.0;  ///< Hz, highest crossing of gp * hpf
    double phase_margin = 0.0;     ///< deg
    bool satisfies_rule = false;   ///< loop_crossover <= inner_crossover / 5
};

BandwidthCheck bandwidth_check(const ConverterParams& p);

/// Time for a first-order response with bandwidth equal to the loop
/// crossover to bring a step of size `step` within band * |target| of target.
double predicted_settling_time(double loop_crossover_hz, double step, double target, double band = 0.05);

}  // namespace aclink
