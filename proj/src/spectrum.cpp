#include "aclink/spectrum.hpp"

#include <unsupported/Eigen/FFT>
#include <cmath>
#include <complex>

#include "aclink/errors.hpp"

namespace aclink {

Spectrum amplitude_spectrum(std::span<const double> samples, double f_sample, double f_fundamental) {
    if (samples.size() < 4) throw DomainError("spectrum: record too short");
    if (!(f_sample > 0.0) || !(f_fundamental > 0.0)) throw DomainError("spectrum: frequencies must be positive");
    const double n = static_cast<double>(samples.size());
    const double periods = n * f_fundamental / f_sample;
    const double whole = std::round(periods);
    if (whole < 1.0 || std::abs(periods - whole) > 1e-6 * std::max(1.0, whole)) {
        throw DomainError("spectrum: record does not span an integer number of fundamental periods");
    }

    std::vector<double> in(samples.begin(), samples.end());
    std::vector<std::complex<double>> out;
    Eigen::FFT<double> fft;
    fft.fwd(out, in);

    Spectrum s;
    const std::size_t half = samples.size() / 2;
    s.bin_width = f_sample / n;
    s.fundamental_index = static_cast<std::size_t>(whole);
    s.frequency.resize(half + 1);
    s.amplitude.resize(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        s.frequency[k] = static_cast<double>(k) * s.bin_width;
        const bool single = k == 0 || (samples.size() % 2 == 0 && k == half);
        s.amplitude[k] = std::abs(out[k]) / n * (single ? 1.0 : 2.0);
    }
    return s;
}

ThdReport thd_report(std::span<const double> samples, double f_sample, double f_fundamental, int n_harmonics) {
    if (n_harmonics < 1) throw DomainError("thd: need at least one harmonic");
    if (!(f_sample > 2.0 * n_harmonics * f_fundamental)) {
        throw DomainError("thd: sample rate must exceed twice the highest harmonic");
    }
    ThdReport r;
    r.spectrum = amplitude_spectrum(samples, f_sample, f_fundamental);
    const Spectrum& s = r.spectrum;
    const std::size_t m = s.fundamental_index;
    if (m >= s.amplitude.size()) throw DomainError("thd: fundamental above Nyquist");

    double mean_square = 0.0;
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(samples.size());
    for (double x : samples) mean_square += (x - mean) * (x - mean);
    mean_square /= static_cast<double>(samples.size());

    r.fundamental = s.amplitude[m];
    if (!(r.fundamental > 1e-9 * std::sqrt(2.0 * mean_square)) || !(r.fundamental > 1e-300)) {
        throw NoFundamental("thd: fundamental amplitude is below the noise floor");
    }

    r.harmonics.assign(static_cast<std::size_t>(n_harmonics) + 1, 0.0);
    const std::size_t last = std::min(s.amplitude.size() - 1, m * static_cast<std::size_t>(n_harmonics) + m / 2);
    double harmonic_power = 0.0;
    double residual_power = 0.0;
    double best = -1.0;
    for (std::size_t k = 1; k <= last; ++k) {
        if (k == m) continue;
        const double a = s.amplitude[k];
        if (k % m == 0) {
            r.harmonics[k / m] = a;
            harmonic_power += a * a;
        } else {
            residual_power += a * a;
        }
        if (a > best) {
            best = a;
            r.dominant_frequency = s.frequency[k];
        }
    }
    r.harmonics[1] = r.fundamental;
    r.interharmonic_residual = std::sqrt(residual_power);
    r.harmonic_thd_percent = 100.0 * std::sqrt(harmonic_power) / r.fundamental;
    r.thd_percent = 100.0 * std::sqrt(harmonic_power + residual_power) / r.fundamental;
    return r;
}

double thd(std::span<const double> samples, double f_sample, double f_fundamental, int n_harmonics) {
    return thd_report(samples, f_sample, f_fundamental, n_harmonics).thd_percent;
}

}  // namespace aclink
