#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace opbench {

/// How sample points sit inside each axis' physical extent.
///  - Nodal: both endpoints included, x_j = j * L / (n - 1).
///  - Periodic: right endpoint excluded, x_j = j * L / n.
///  - CellCentered: finite-volume / pixel centres, x_j = (j + 1/2) * L / n.
enum class GridLayout { Nodal, Periodic, CellCentered };

std::string to_string(GridLayout layout);
GridLayout grid_layout_from_string(const std::string& name);

struct GridSpec {
  std::vector<std::size_t> shape;
  std::vector<double> extent;
  GridLayout layout = GridLayout::Nodal;

  static GridSpec line(std::size_t n, GridLayout layout = GridLayout::Nodal);
  static GridSpec square(std::size_t n, GridLayout layout = GridLayout::Nodal);

  std::size_t ndim() const { return shape.size(); }
  /// Discretization parameter R: total number of grid points.
  std::size_t points() const;
  /// Throws ConfigError when the invariants do not hold.
  void validate() const;

  bool operator==(const GridSpec& other) const = default;
};

/// Uniformly spaced, ascending coordinates along each axis.
std::vector<std::vector<double>> make_grid(const GridSpec& spec);

/// Point coordinates scaled to the unit box, flattened row-major as
/// [points, ndim]. Models consume these as coordinate channels.
std::vector<double> unit_coordinates(const GridSpec& spec);

struct TimeMeta {
  double t0 = 0.0;
  double t_final = 0.0;
  std::size_t stored_steps = 0;

  bool operator==(const TimeMeta& other) const = default;
};

/// One discretized input/output function pair. Values are stored point-major
/// with channels contiguous: value(point p, channel c) = data[p * channels + c].
struct FieldSample {
  GridSpec grid;
  std::vector<double> input;
  std::size_t in_channels = 1;
  std::vector<double> output;
  std::size_t out_channels = 1;
  std::optional<TimeMeta> time;
  /// Optional stored intermediate output snapshots, [steps, points, out_channels].
  std::vector<double> trajectory;

  void validate() const;
};

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;

  bool operator==(const ChannelStats& other) const = default;
};

inline constexpr double kStdFloor = 1e-8;

struct NormStats {
  ChannelStats input;
  ChannelStats output;

  bool operator==(const NormStats& other) const = default;
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  /// Pairwise disjoint and all indices < count.
  void validate(std::size_t count) const;
  bool operator==(const Splits& other) const = default;
};

struct DatasetBundle {
  std::string name;
  GridSpec grid;
  std::vector<std::string> input_channels;
  std::vector<std::string> output_channels;
  std::vector<FieldSample> samples;
  Splits splits;
  std::optional<NormStats> norm;
  nlohmann::json pde_meta = nlohmann::json::object();
  bool normalized = false;

  std::size_t in_channels() const { return input_channels.size(); }
  std::size_t out_channels() const { return output_channels.size(); }
  void validate() const;
};

/// ||pred - truth||_2 / ||truth||_2 over every point and channel of one sample.
double relative_l2(std::span<const double> pred, std::span<const double> truth);

/// Mean of per-sample relative norms, accumulated in sample order.
double relative_l2_mean(const std::vector<std::vector<double>>& preds,
                        const std::vector<std::vector<double>>& truths);

ChannelStats channel_stats(const std::vector<const std::vector<double>*>& fields,
                           std::size_t channels);
/// Statistics from the training split only.
NormStats compute_norm_stats(const DatasetBundle& bundle);

void normalize_in_place(std::span<double> values, const ChannelStats& stats);
void denormalize_in_place(std::span<double> values, const ChannelStats& stats);
std::vector<double> denormalize(std::span<const double> values, const ChannelStats& stats);

/// Standardizes every input and output channel with `stats`; the result is
/// flagged as normalized and carries the stats.
DatasetBundle normalize(const DatasetBundle& bundle, const NormStats& stats);
/// Uses the bundle's own training-split statistics.
DatasetBundle normalize(const DatasetBundle& bundle);

/// Keeps every stride-th point on each axis, endpoints included.
FieldSample subsample(const FieldSample& field, std::size_t stride);
GridSpec subsample_grid(const GridSpec& grid, std::size_t stride);
std::vector<double> subsample_values(const GridSpec& grid, std::span<const double> values,
                                     std::size_t channels, std::size_t stride);

}  // namespace opbench
