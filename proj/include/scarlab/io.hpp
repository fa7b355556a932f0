#pragma once

// Plot-ready text formats. Every CSV has a one-line header and prints reals
// with 17 significant digits ("%.17g"), so values round-trip exactly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "scarlab/experiments.hpp"
#include "scarlab/observables.hpp"
#include "scarlab/operators.hpp"
#include "scarlab/spectral.hpp"

namespace scarlab {

std::string format_double(double v);
std::string hex64(std::uint64_t v);

/// Writes to `<path>.tmp` and renames over `path`, so readers never see a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);
std::uint64_t file_digest(const std::filesystem::path& path);

/// index,bitstring,pattern; bitstring is site N first, pattern site 1 first.
std::string basis_csv(const BasisMap& basis);
/// time,value
std::string time_series_csv(const TimeSeries& series);
/// energy,overlap
std::string overlap_csv(const OverlapSpectrum& spectrum);
/// energy,entropy
std::string entropy_csv(const EntropyScatter& scatter);
/// W,mean_peak,std_error
std::string sweep_summary_csv(const DisorderSweepResult& result);
/// W,realization,seed,peak_time,peak_value
std::string sweep_cells_csv(const DisorderSweepResult& result);
/// Coordinate format, one "row col re im" line per stored entry.
std::string operator_coo(const OperatorMatrix& op);

nlohmann::json to_json(const DisorderRealization& fields);
DisorderRealization disorder_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GaussianFit& fit);

}  // namespace scarlab
