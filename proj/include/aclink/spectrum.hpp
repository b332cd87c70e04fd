#pragma once

// One-sided amplitude spectra and total distortion over integer-period
// records.

#include <span>
#include <vector>

namespace aclink {

struct Spectrum {
    std::vector<double> frequency;  ///< Hz, bins 0 .. N/2
    std::vector<double> amplitude;  ///< peak amplitude per bin
    std::size_t fundamental_index = 0;
    double bin_width = 0.0;
};

/// Rectangular-window FFT. Throws DomainError unless the record spans a
/// whole number of fundamental periods.
Spectrum amplitude_spectrum(std::span<const double> samples, double f_sample, double f_fundamental);

struct ThdReport {
    double thd_percent = 0.0;           ///< all non-fundamental content up to the harmonic limit
    double harmonic_thd_percent = 0.0;  ///< integer harmonics only
    double fundamental = 0.0;           ///< amplitude
    std::vector<double> harmonics;      ///< amplitude of harmonic h at index h (0 unused)
    double interharmonic_residual = 0.0;  ///< RSS amplitude of bins between harmonics
    double dominant_frequency = 0.0;    ///< largest non-fundamental bin
    Spectrum spectrum;
};

/// Distortion over bins from just above DC up to half a harmonic past
/// n_harmonics. Throws NoFundamental when the fundamental is below the noise
/// floor and DomainError on a bad record.
ThdReport thd_report(std::span<const double> samples, double f_sample, double f_fundamental, int n_harmonics);

double thd(std::span<const double> samples, double f_sample, double f_fundamental, int n_harmonics);

}  // namespace aclink
