#pragma once

// CSV and text serialization of waveforms, spectra, Bode sweeps and reports.
// Doubles are written in the shortest form that reads back exactly.

#include <iosfwd>
#include <string>
#include <vector>

#include "aclink/analysis.hpp"
#include "aclink/sequencer.hpp"
#include "aclink/simulation.hpp"
#include "aclink/spectrum.hpp"

namespace aclink {

std::string format_double(double x);

/// Header `t,va,vb,vc,ia,ib,ic,vlink,ilink,vout,mode,id,iq`.
void write_waveform_csv(std::ostream& os, const std::vector<WaveformSample>& w);
void write_bode_csv(std::ostream& os, const std::vector<BodePoint>& points);
/// One row per bin up to the harmonic limit: f,amplitude,harmonic (0 for
/// interharmonic bins).
void write_spectrum_csv(std::ostream& os, const ThdReport& report, int n_harmonics);
void write_cycles_csv(std::ostream& os, const std::vector<CycleDiagnostics>& cycles);
void write_sweep_csv(std::ostream& os, const std::string& param, const std::vector<SweepRow>& rows);
/// Human-readable key = value summary.
void write_report(std::ostream& os, const RunReport& report);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    /// Throws FormatError when the column is absent.
    const std::vector<double>& column(const std::string& name) const;
};

/// Numeric CSV with a header row. Throws FormatError naming the line on
/// ragged rows or unparsable numbers.
CsvTable read_csv(std::istream& is);

}  // namespace aclink
