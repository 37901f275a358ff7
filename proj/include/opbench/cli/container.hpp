#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "opbench/grid/grid.hpp"

namespace opbench::cli {

/// Native dataset container: a directory holding manifest.json plus one raw
/// little-endian float64 file per array (inputs, outputs and, for stored
/// rollouts, trajectories), each listed in the manifest with its shape and
/// FNV-1a checksum.
void write_container(const DatasetBundle& bundle, const std::filesystem::path& dir);
/// Throws IntegrityError on checksum or size mismatch, IngestionError on a
/// malformed manifest.
DatasetBundle read_container(const std::filesystem::path& dir);
/// Checksums listed in a container's manifest, by array name.
nlohmann::json container_checksums(const std::filesystem::path& dir);

void write_f64(const std::filesystem::path& file, std::span<const double> values);
std::vector<double> read_f64(const std::filesystem::path& file);
/// Checksum over the little-endian byte image of `values`.
std::string checksum_f64(std::span<const double> values);

nlohmann::json grid_to_json(const GridSpec& grid);
GridSpec grid_from_json(const nlohmann::json& j);

/// Writes through a temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);

}  // namespace opbench::cli
