#pragma once

#include <filesystem>
#include <string>

#include "opbench/grid/grid.hpp"

namespace opbench::forge {

enum class Adapter { PdeBench, MechanicalMnist };

Adapter adapter_from_string(const std::string& name);

/// Reads an externally published dataset into a bundle (see docs/formats.md).
///
/// pdebench: an HDF5 file in one of three layouts, detected in this order
///   - "nu" [N, X, Y] with "tensor" [N, 1, X, Y]: steady 2D (input nu, output tensor)
///   - "tensor" [N, T, X]: 1D time series (input t = 0, output t = T - 1)
///   - groups "0000", "0001", ... each holding "data" [T, X, Y, C]: 2D time series
///   Optional "x-coordinate" decides the grid layout (nodal, periodic or cell).
///
/// mechanical-mnist: a directory with input.txt, ux.txt and uy.txt, one sample
///   per line, R = n^2 comma- or whitespace-separated values per line. Output
///   channels are the two element-wise displacement components.
DatasetBundle ingest_external(const std::filesystem::path& path, Adapter adapter,
                              const std::string& name = "");

}  // namespace opbench::forge
