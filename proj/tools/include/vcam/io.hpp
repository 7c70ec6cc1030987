#pragma once

/// File formats of the command-line tool.
///
/// Dataset CSV:        header `t,y,x1,...,xp`, t = 1..T in order.
/// Function-grid CSV:  header `x,value`.
/// Fit artifact:       JSON with the bases (order + full knot vector),
///                     coefficient blocks and diagnostics of a VcamFit.
/// Numbers are written in the shortest form that parses back exactly.

#include "vcam/identification.hpp"
#include "vcam/simulation.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vcam::io {

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Writes to a temporary sibling and renames it over `path`, so readers never
/// see a partial file. Throws std::runtime_error on I/O failure.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

std::string dataset_to_csv(const TimeSeriesDataset& data);

/// Throws std::invalid_argument naming the missing column or the bad line.
/// `source` only labels error messages.
TimeSeriesDataset dataset_from_csv(std::string_view text, const std::string& source = "dataset");
TimeSeriesDataset read_dataset(const std::filesystem::path& path);

std::string grid_to_csv(const std::vector<std::pair<double, double>>& grid);

nlohmann::json component_to_json(const ComponentFunction& f);
ComponentFunction component_from_json(const nlohmann::json& j);

nlohmann::json fit_to_json(const VcamFit& fit);
/// Throws std::invalid_argument on a malformed artifact.
VcamFit fit_from_json(const nlohmann::json& j);
VcamFit read_fit(const std::filesystem::path& path);

nlohmann::json identification_to_json(const IdentificationResult& result, const PenaltyConfig& cfg);

/// Truth sidecar of a simulated dataset: scenario, seed, truth masks and the
/// standardized noise draws.
nlohmann::json truth_to_json(const SimulatedData& sim, const std::string& example, std::uint64_t seed,
                             std::uint64_t stream);

/// Long-format `record,key,value` CSV. Contains no timing, so identical
/// specs give byte-identical output.
std::string report_to_csv(const MonteCarloReport& report);

/// Aligned text table for humans (includes wall-clock time).
std::string report_to_table(const MonteCarloReport& report);

}  // namespace vcam::io
