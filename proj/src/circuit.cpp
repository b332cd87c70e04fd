#include "aclink/circuit.hpp"

#include <cmath>
#include <complex>
#include <bit>
#include <numbers>
#include <sstream>

#include "aclink/errors.hpp"

namespace aclink {

namespace si = state_index;

const char* switch_name(SwitchId id) {
    switch (id) {
        case SwitchId::q1a: return "Q1a";
        case SwitchId::q1b: return "Q1b";
        case SwitchId::q1c: return "Q1c";
        case SwitchId::q2a: return "Q2a";
        case SwitchId::q2b: return "Q2b";
        case SwitchId::q2c: return "Q2c";
        case SwitchId::output: return "Qout";
    }
    return "?";
}

double Guard::value(const StateVector& x, const ConverterParams& p) const {
    switch (kind) {
        case Kind::charge: return x[si::charge + phase];
        case Kind::link_energy:
            return 0.5 * p.C_link * x[si::v_link] * x[si::v_link] + 0.5 * p.L_m * x[si::i_link] * x[si::i_link];
        case Kind::link_current: return x[si::i_link];
    }
    return 0.0;
}

double link_energy(const CircuitState& s, const ConverterParams& p) {
    return 0.5 * p.C_link * s.v_link() * s.v_link() + 0.5 * p.L_m * s.i_link() * s.i_link();
}

double resonance_frequency(double L, double C) {
    if (!(L > 0.0) || !(C > 0.0)) throw DomainError("resonance_frequency: L and C must be strictly positive");
    return 1.0 / (2.0 * std::numbers::pi * std::sqrt(L * C));
}

namespace {

struct FilterPhasors {
    std::complex<double> current;
    std::complex<double> cap_voltage;
};

FilterPhasors no_load_phasors(const ConverterParams& p, const GridSource& grid) {
    using namespace std::complex_literals;
    const double w = grid.omega;
    const std::complex<double> z_l = p.r_s + 1i * w * p.L_f;
    const std::complex<double> z_c = 1.0 / (1i * w * p.C_f);
    const std::complex<double> e = std::polar(grid.amplitude, grid.phase);
    const std::complex<double> i = e / (z_l + z_c);
    return {i, i * z_c};
}

ThreePhase from_phasor(std::complex<double> ph, double omega, double t) {
    return balanced(std::abs(ph), omega * t + std::arg(ph));
}

}  // namespace

ThreePhase no_load_capacitor_voltage(const ConverterParams& p, const GridSource& grid, double t) {
    return from_phasor(no_load_phasors(p, grid).cap_voltage, grid.omega, t);
}

ThreePhase no_load_inductor_current(const ConverterParams& p, const GridSource& grid, double t) {
    return from_phasor(no_load_phasors(p, grid).current, grid.omega, t);
}

CircuitState initial_state(const ConverterParams& p, const GridSource& grid) {
    CircuitState s;
    s.set_v_cf(no_load_capacitor_voltage(p, grid, 0.0));
    s.set_i_lf(no_load_inductor_current(p, grid, 0.0));
    s.x[si::v_link] = p.v_link_peak;
    s.x[si::i_link] = 0.0;
    s.x[si::v_out] = p.output_model == OutputModel::source ? p.v_out_dc : p.v_out_init;
    s.mode = Mode::m6;
    return s;
}

PowerStage::PowerStage(const ConverterParams& params, GridSource grid) : params_(params), grid_(grid) {
    B_.setZero();
    for (int k = 0; k < 3; ++k) {
        B_(si::i_lf + k, k) = 1.0 / params_.L_f;
        B_(si::v_cf + k, 3 + k) = -1.0 / params_.C_f;
    }
}

const PowerStage::Topology& PowerStage::topology(const Conduction& c) const {
    auto& slot = topologies_[static_cast<std::size_t>(c.key())];
    if (slot) return *slot;

    const auto& p = params_;
    Topology topo;
    Matrix& A = topo.A;
    A.setZero();
    for (Row& r : topo.phase_current) r.setZero();
    topo.input_current.setZero();
    topo.output_current.setZero();

    for (int k = 0; k < 3; ++k) {
        A(si::i_lf + k, si::i_lf + k) = -p.r_s / p.L_f;
        A(si::i_lf + k, si::v_cf + k) = -1.0 / p.L_f;
        A(si::v_cf + k, si::i_lf + k) = 1.0 / p.C_f;
    }
    A(si::i_link, si::v_link) = 1.0 / p.L_m;
    A(si::v_link, si::i_link) = -1.0 / p.C_link;

    if (c.input()) {
        // Bridge currents j_k follow from the algebraic constraints of the
        // conducting set: they sum to zero, phases on one rail keep equal
        // voltages, and the link voltage tracks the rail difference.
        std::array<int, 3> tops{};
        std::array<int, 3> bottoms{};
        int nt = 0;
        int nb = 0;
        for (int k = 0; k < 3; ++k) {
            if (c.top & (1u << k)) tops[nt++] = k;
            if (c.bottom & (1u << k)) bottoms[nb++] = k;
        }
        const int n = nt + nb;
        std::array<int, 6> phase{};
        for (int i = 0; i < nt; ++i) phase[i] = tops[i];
        for (int i = 0; i < nb; ++i) phase[nt + i] = bottoms[i];

        const double cf = 1.0 / p.C_f;
        const double kl = 1.0 / p.C_link;
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, kStateSize);
        int row = 0;
        G.row(row++).setOnes();
        for (int i = 1; i < nt; ++i, ++row) {
            G(row, 0) = 1.0;
            G(row, i) = -1.0;
            H(row, si::i_lf + tops[0]) = 1.0;
            H(row, si::i_lf + tops[i]) = -1.0;
        }
        for (int i = 1; i < nb; ++i, ++row) {
            G(row, nt) = 1.0;
            G(row, nt + i) = -1.0;
            H(row, si::i_lf + bottoms[0]) = 1.0;
            H(row, si::i_lf + bottoms[i]) = -1.0;
        }
        for (int i = 0; i < nt; ++i) G(row, i) += kl;
        G(row, 0) += cf;
        G(row, nt) -= cf;
        H(row, si::i_lf + tops[0]) += cf;
        H(row, si::i_lf + bottoms[0]) -= cf;
        H.row(row) -= A.row(si::v_link);
        const Eigen::MatrixXd J = G.partialPivLu().solve(H);

        for (int i = 0; i < n; ++i) {
            const Row j = J.row(i);
            const int k = phase[i];
            topo.phase_current[k] = j;
            A.row(si::v_cf + k) -= cf * j;
            A.row(si::charge + k) += j;
            if (i < nt) topo.input_current += j;
        }
        A.row(si::v_link) += kl * topo.input_current;
    }

    if (p.output_model == OutputModel::capacitor) {
        A(si::v_out, si::v_out) = -1.0 / (p.R_load * p.C_out);
    }
    if (c.output) {
        Row& w = topo.output_current;
        if (p.output_model == OutputModel::source) {
            w(si::i_link) = 1.0;
        } else {
            const double rho = p.C_link / p.C_out;
            w(si::i_link) = 1.0 / (1.0 + rho);
            w(si::v_out) = (rho / p.R_load) / (1.0 + rho);
            A.row(si::v_out) += w / p.C_out;
        }
        A.row(si::v_link) += w / p.C_link;
    }

    slot = topo;
    return *slot;
}

PowerStage::Discrete PowerStage::discretize(const Topology& topo, double h) const {
    const Matrix I = Matrix::Identity();
    const Eigen::PartialPivLU<Matrix> lu(I - 0.5 * h * topo.A);
    Discrete d;
    d.M = lu.solve(I + 0.5 * h * topo.A);
    d.N = lu.solve(0.5 * h * B_);
    return d;
}

StateVector PowerStage::advance(const StateVector& x, double t, double h, const Conduction& c,
                                const Input& inject) const {
    // trapezoidal input sum; the injection is held over the step
    Input u = 2.0 * inject;
    const ThreePhase e0 = grid_.voltage(t);
    const ThreePhase e1 = grid_.voltage(t + h);
    u[0] += e0.a + e1.a;
    u[1] += e0.b + e1.b;
    u[2] += e0.c + e1.c;

    const Topology& topo = topology(c);
    if (h == params_.dt) {
        auto& slot = nominal_[static_cast<std::size_t>(c.key())];
        if (!slot) slot = discretize(topo, h);
        return slot->M * x + slot->N * u;
    }
    const Discrete d = discretize(topo, h);
    return d.M * x + d.N * u;
}

StateVector PowerStage::derivative(const StateVector& x, double t, const Conduction& c, const Input& inject) const {
    Input u = inject;
    const ThreePhase e = grid_.voltage(t);
    u[0] += e.a;
    u[1] += e.b;
    u[2] += e.c;
    return topology(c).A * x + B_ * u;
}

ThreePhase PowerStage::switch_currents(const CircuitState& s) const {
    const Topology& topo = topology(s.conduction);
    return {topo.phase_current[0].dot(s.x), topo.phase_current[1].dot(s.x), topo.phase_current[2].dot(s.x)};
}

double PowerStage::input_current(const CircuitState& s) const {
    return topology(s.conduction).input_current.dot(s.x);
}

double PowerStage::output_current(const CircuitState& s) const {
    return topology(s.conduction).output_current.dot(s.x);
}

bool Conduction::conducts(SwitchId id) const {
    if (id == SwitchId::output) return output;
    const int k = static_cast<int>(id);
    return k < 3 ? (top & (1u << k)) != 0 : (bottom & (1u << (k - 3))) != 0;
}

namespace {

bool has(std::uint8_t mask, int k) { return (mask & (1u << k)) != 0; }

std::uint8_t gated_mask(const GateSet& g, int offset) {
    std::uint8_t m = 0;
    for (int k = 0; k < 3; ++k) {
        if (g[static_cast<std::size_t>(offset + k)]) m |= static_cast<std::uint8_t>(1u << k);
    }
    return m;
}

int first_phase(std::uint8_t mask) {
    for (int k = 0; k < 3; ++k) {
        if (has(mask, k)) return k;
    }
    return -1;
}

struct Rails {
    double plus = 0.0;
    double minus = 0.0;
};

Rails rails(const StateVector& x, const Conduction& c) {
    return {x[si::v_cf + first_phase(c.top)], x[si::v_cf + first_phase(c.bottom)]};
}

}  // namespace

void PowerStage::resolve_input(CircuitState& s, const Input& inject, std::vector<SwitchEvent>& events) const {
    const Conduction old = s.conduction;
    const std::uint8_t gt = gated_mask(s.gates, 0);
    const std::uint8_t gb = gated_mask(s.gates, 3);
    const double tol = 1e-6 * params_.v_link_peak;
    const auto v = [&](const StateVector& x, int k) { return x[si::v_cf + k]; };

    struct Choice {
        Conduction c;
        StateVector x;
        int changes = 0;
        int members = 0;
        double v_pair = 0.0;
    };
    std::optional<Choice> best;

    // Subsets of the gated switches; a phase never sits on both rails.
    for (std::uint8_t T = gt;; T = static_cast<std::uint8_t>((T - 1) & gt)) {
        for (std::uint8_t B = gb;; B = static_cast<std::uint8_t>((B - 1) & gb)) {
            const bool empty = T == 0 && B == 0;
            if (empty || (T != 0 && B != 0 && (T & B) == 0)) {
                Conduction cand = old;
                cand.top = T;
                cand.bottom = B;
                StateVector x = s.x;
                bool ok = true;
                double v_pair = 0.0;
                if (empty) {
                    const StateVector xd = derivative(x, s.t, cand, inject);
                    for (int t = 0; t < 3 && ok; ++t) {
                        if (!has(gt, t)) continue;
                        for (int b = 0; b < 3 && ok; ++b) {
                            if (b == t || !has(gb, b)) continue;
                            const double f = v(x, t) - v(x, b) - x[si::v_link];
                            const double df = v(xd, t) - v(xd, b) - xd[si::v_link];
                            if (f > tol || (f >= -tol && df > 0.0)) ok = false;
                        }
                    }
                } else {
                    const Rails r = rails(x, cand);
                    for (int k = 0; k < 3 && ok; ++k) {
                        if (has(T, k) && std::abs(v(x, k) - r.plus) > tol) ok = false;
                        if (has(B, k) && std::abs(v(x, k) - r.minus) > tol) ok = false;
                    }
                    v_pair = r.plus - r.minus;
                    if (ok && v_pair < x[si::v_link] - tol) ok = false;
                    if (ok) {
                        x[si::v_link] = v_pair;
                        const Topology& topo = topology(cand);
                        for (int k = 0; k < 3 && ok; ++k) {
                            const double j = topo.phase_current[k].dot(x);
                            if (has(T, k) && !(j > 0.0)) ok = false;
                            if (has(B, k) && !(j < 0.0)) ok = false;
                        }
                    }
                    if (ok) {
                        const StateVector xd = derivative(x, s.t, cand, inject);
                        const Rails rd = rails(xd, cand);
                        for (int k = 0; k < 3 && ok; ++k) {
                            if (has(gt, k) && !has(T, k) && !has(B, k)) {
                                const double f = v(x, k) - r.plus;
                                if (f > tol || (f >= -tol && v(xd, k) - rd.plus > 0.0)) ok = false;
                            }
                            if (has(gb, k) && !has(B, k) && !has(T, k)) {
                                const double f = r.minus - v(x, k);
                                if (f > tol || (f >= -tol && rd.minus - v(xd, k) > 0.0)) ok = false;
                            }
                        }
                    }
                }
                if (ok) {
                    Choice ch{cand, x, std::popcount(static_cast<unsigned>((T ^ old.top) | ((B ^ old.bottom) << 3))),
                              std::popcount(static_cast<unsigned>(T | (B << 3))), v_pair};
                    const bool better = !best || ch.changes < best->changes ||
                                        (ch.changes == best->changes &&
                                         (ch.members > best->members ||
                                          (ch.members == best->members && ch.v_pair > best->v_pair)));
                    if (better) best = ch;
                }
            }
            if (B == 0) break;
        }
        if (T == 0) break;
    }

    // Nothing consistent (a forward-biased pair whose current would start
    // negative): keep whatever of the present set is still gated.
    if (!best) {
        Conduction kept = old;
        kept.top &= gt;
        kept.bottom &= gb;
        if (!kept.input()) kept.top = kept.bottom = 0;
        best = Choice{kept, s.x};
    }
    if (best->c == old) return;

    const ThreePhase i_old = switch_currents(s);
    const bool was_on = old.input();
    const Rails r_old = was_on ? rails(s.x, old) : Rails{};
    const double v_link_old = s.v_link();
    s.conduction = best->c;
    s.x = best->x;
    const ThreePhase i_new = switch_currents(s);
    const Rails r_new = s.conduction.input() ? rails(s.x, s.conduction) : Rails{};

    for (int side = 0; side < 2; ++side) {
        const std::uint8_t before = side == 0 ? old.top : old.bottom;
        const std::uint8_t after = side == 0 ? s.conduction.top : s.conduction.bottom;
        for (int k = 0; k < 3; ++k) {
            if (has(before, k) == has(after, k)) continue;
            const SwitchId id = side == 0 ? top_switch(k) : bottom_switch(k);
            const double vk = s.x[si::v_cf + k];
            double v_across = 0.0;
            if (has(after, k)) {
                if (was_on) {
                    v_across = side == 0 ? vk - r_old.plus : r_old.minus - vk;
                } else {
                    v_across = r_new.plus - r_new.minus - v_link_old;
                }
                events.push_back({s.t, id, Edge::on, v_across, i_new[k], s.mode});
            } else {
                if (s.conduction.input()) {
                    v_across = side == 0 ? vk - r_new.plus : r_new.minus - vk;
                } else {
                    v_across = r_old.plus - r_old.minus - s.v_link();
                }
                events.push_back({s.t, id, Edge::off, v_across, i_old[k], s.mode});
            }
        }
    }
}

void PowerStage::resolve_output(CircuitState& s, std::vector<SwitchEvent>& events) const {
    if (s.conduction.output || !s.gates[bit(SwitchId::output)]) return;
    const double v_across = -s.v_link() - s.v_out();
    if (v_across < 0.0) return;
    Conduction trial = s.conduction;
    trial.output = true;
    if (topology(trial).output_current.dot(s.x) <= 0.0) return;
    s.conduction.output = true;
    s.x[si::v_link] = -s.v_out();
    events.push_back({s.t, SwitchId::output, Edge::on, v_across, output_current(s), s.mode});
}

void PowerStage::apply_gates(CircuitState& s, const GateSet& gates, const Input& inject,
                             std::vector<SwitchEvent>& events) const {
    if (gates == s.gates) return;
    if (s.conduction.output && !gates[bit(SwitchId::output)]) {
        events.push_back({s.t, SwitchId::output, Edge::off, -s.v_link() - s.v_out(), output_current(s), s.mode});
        s.conduction.output = false;
    }
    s.gates = gates;
    resolve_input(s, inject, events);
    resolve_output(s, events);
}

namespace {

enum class WatchKind : std::uint8_t { pair_bias, rail_bias, switch_current, output_bias, output_current, guard };

struct Watch {
    WatchKind kind;
    int a = -1;  ///< phase (top side for pair_bias), or switch index
    int b = -1;  ///< bottom phase for pair_bias
    int guard = -1;
};

}  // namespace

StepResult PowerStage::step(const CircuitState& state, const GateSet& gates, double dt, std::span<const Guard> guards,
                            const ThreePhase& inject) const {
    StepResult r;
    r.state = state;
    CircuitState& s = r.state;
    const Input inj = (Input() << 0.0, 0.0, 0.0, inject.a, inject.b, inject.c).finished();
    apply_gates(s, gates, inj, r.events);
    // edges caused by the gating itself are reported at their own instant
    if (!r.events.empty()) {
        r.interrupted = true;
        return r;
    }
    if (!(dt > 0.0)) return r;

    const Topology& topo = topology(s.conduction);
    const Conduction& c = s.conduction;
    const std::uint8_t gt = gated_mask(s.gates, 0);
    const std::uint8_t gb = gated_mask(s.gates, 3);

    std::array<Watch, 24> watches;
    std::size_t n_watch = 0;
    if (!c.input()) {
        for (int t = 0; t < 3; ++t) {
            if (!has(gt, t)) continue;
            for (int b = 0; b < 3; ++b) {
                if (b != t && has(gb, b)) watches[n_watch++] = {WatchKind::pair_bias, t, b};
            }
        }
    } else {
        for (int k = 0; k < 6; ++k) {
            const int ph = k % 3;
            const std::uint8_t own = k < 3 ? c.top : c.bottom;
            const std::uint8_t gated = k < 3 ? gt : gb;
            if (has(own, ph)) {
                watches[n_watch++] = {WatchKind::switch_current, k};
            } else if (has(gated, ph) && !has(c.top | c.bottom, ph)) {
                watches[n_watch++] = {WatchKind::rail_bias, k};
            }
        }
    }
    if (c.output) {
        watches[n_watch++] = {WatchKind::output_current};
    } else if (s.gates[bit(SwitchId::output)]) {
        watches[n_watch++] = {WatchKind::output_bias};
    }
    for (std::size_t g = 0; g < guards.size() && n_watch < watches.size(); ++g) {
        watches[n_watch++] = {WatchKind::guard, -1, -1, static_cast<int>(g)};
    }

    const int t0_phase = first_phase(c.top);
    const int b0_phase = first_phase(c.bottom);
    auto eval = [&](const Watch& w, const StateVector& x) -> double {
        switch (w.kind) {
            case WatchKind::pair_bias: return x[si::v_cf + w.a] - x[si::v_cf + w.b] - x[si::v_link];
            case WatchKind::rail_bias:
                return w.a < 3 ? x[si::v_cf + w.a] - x[si::v_cf + t0_phase]
                               : x[si::v_cf + b0_phase] - x[si::v_cf + w.a - 3];
            case WatchKind::switch_current: {
                const double j = topo.phase_current[static_cast<std::size_t>(w.a % 3)].dot(x);
                return w.a < 3 ? -j : j;
            }
            case WatchKind::output_bias: return -x[si::v_link] - x[si::v_out];
            case WatchKind::output_current: return -topo.output_current.dot(x);
            case WatchKind::guard: {
                const Guard& g = guards[static_cast<std::size_t>(w.guard)];
                return g.direction * (g.value(x, params_) - g.level);
            }
        }
        return -1.0;
    };

    const StateVector x0 = s.x;
    const double t0 = s.t;
    const StateVector x1 = advance(x0, t0, dt, c, inj);
    if (!x1.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite circuit state at t = " << t0 << " s (dt = " << dt << " s)";
        throw NonFiniteState(msg.str(), t0);
    }

    std::array<double, 24> h0{};
    int first = -1;
    double first_frac = 2.0;
    for (std::size_t i = 0; i < n_watch; ++i) {
        h0[i] = eval(watches[i], x0);
        const double h1 = eval(watches[i], x1);
        if (h0[i] < 0.0 && h1 >= 0.0) {
            const double frac = h0[i] / (h0[i] - h1);
            if (frac < first_frac) {
                first_frac = frac;
                first = static_cast<int>(i);
            }
        }
    }

    if (first < 0) {
        s.x = x1;
        s.t = t0 + dt;
        return r;
    }

    // Illinois regula falsi on the re-integrated partial step; keeps the
    // bracket end where the condition already holds.
    const Watch& w = watches[static_cast<std::size_t>(first)];
    double lo = 0.0;
    double hi = dt;
    double f_lo = h0[static_cast<std::size_t>(first)];
    double f_hi = eval(w, x1);
    StateVector x_hi = x1;
    const double scale = std::abs(f_lo) + std::abs(f_hi);
    int side = 0;
    for (int iter = 0; iter < 60; ++iter) {
        if (hi - lo <= 1e-12 * dt || std::abs(f_hi) <= 1e-13 * scale) break;
        double tau = lo + (hi - lo) * (-f_lo) / (f_hi - f_lo);
        if (!(tau > lo && tau < hi)) tau = 0.5 * (lo + hi);
        const StateVector x_tau = advance(x0, t0, tau, c, inj);
        const double f_tau = eval(w, x_tau);
        if (f_tau >= 0.0) {
            hi = tau;
            f_hi = f_tau;
            x_hi = x_tau;
            if (side == 1) f_lo *= 0.5;
            side = 1;
        } else {
            lo = tau;
            f_lo = f_tau;
            if (side == -1) f_hi *= 0.5;
            side = -1;
        }
    }

    s.x = x_hi;
    s.t = t0 + hi;
    r.interrupted = hi < dt;

    // Guards that also hold at the localized instant are reported together.
    for (std::size_t i = 0; i < n_watch; ++i) {
        if (watches[i].kind == WatchKind::guard && h0[i] < 0.0 && eval(watches[i], s.x) >= 0.0) {
            r.guard_hit = watches[i].guard;
            break;
        }
    }

    switch (w.kind) {
        case WatchKind::pair_bias:
        case WatchKind::rail_bias:
        case WatchKind::switch_current: resolve_input(s, inj, r.events); break;
        case WatchKind::output_bias: resolve_output(s, r.events); break;
        case WatchKind::output_current:
            r.events.push_back({s.t, SwitchId::output, Edge::off, -s.v_link() - s.v_out(), output_current(s), s.mode});
            s.conduction.output = false;
            break;
        case WatchKind::guard: break;
    }
    return r;
}

}  // namespace aclink
