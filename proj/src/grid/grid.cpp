#include "opbench/grid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "opbench/errors.hpp"

namespace opbench {

std::string to_string(GridLayout layout) {
  switch (layout) {
    case GridLayout::Nodal: return "nodal";
    case GridLayout::Periodic: return "periodic";
    case GridLayout::CellCentered: return "cell";
  }
  return "nodal";
}

GridLayout grid_layout_from_string(const std::string& name) {
  if (name == "nodal") return GridLayout::Nodal;
  if (name == "periodic") return GridLayout::Periodic;
  if (name == "cell") return GridLayout::CellCentered;
  throw ConfigError("unknown grid layout '" + name + "'");
}

GridSpec GridSpec::line(std::size_t n, GridLayout layout) {
  return GridSpec{{n}, {1.0}, layout};
}

GridSpec GridSpec::square(std::size_t n, GridLayout layout) {
  return GridSpec{{n, n}, {1.0, 1.0}, layout};
}

std::size_t GridSpec::points() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void GridSpec::validate() const {
  if (shape.empty() || shape.size() > 2)
    throw ConfigError("grid must be 1D or 2D, got ndim=" + std::to_string(shape.size()));
  if (extent.size() != shape.size())
    throw ConfigError("grid extent has " + std::to_string(extent.size()) +
                      " entries for " + std::to_string(shape.size()) + " axes");
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (shape[a] < 2)
      throw ConfigError("grid axis " + std::to_string(a) + " needs at least 2 points");
    if (!(extent[a] > 0.0) || !std::isfinite(extent[a]))
      throw ConfigError("grid axis " + std::to_string(a) + " extent must be positive");
  }
}

std::vector<std::vector<double>> make_grid(const GridSpec& spec) {
  spec.validate();
  std::vector<std::vector<double>> axes(spec.ndim());
  for (std::size_t a = 0; a < spec.ndim(); ++a) {
    const std::size_t n = spec.shape[a];
    const double L = spec.extent[a];
    auto& axis = axes[a];
    axis.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double jd = static_cast<double>(j);
      switch (spec.layout) {
        case GridLayout::Nodal: axis[j] = L * jd / static_cast<double>(n - 1); break;
        case GridLayout::Periodic: axis[j] = L * jd / static_cast<double>(n); break;
        case GridLayout::CellCentered: axis[j] = L * (jd + 0.5) / static_cast<double>(n); break;
      }
    }
  }
  return axes;
}

std::vector<double> unit_coordinates(const GridSpec& spec) {
  const auto axes = make_grid(spec);
  const std::size_t d = spec.ndim();
  std::vector<double> coords(spec.points() * d);
  if (d == 1) {
    for (std::size_t i = 0; i < spec.shape[0]; ++i) coords[i] = axes[0][i] / spec.extent[0];
  } else {
    const std::size_t n1 = spec.shape[1];
    for (std::size_t i = 0; i < spec.shape[0]; ++i)
      for (std::size_t j = 0; j < n1; ++j) {
        const std::size_t p = i * n1 + j;
        coords[2 * p] = axes[0][i] / spec.extent[0];
        coords[2 * p + 1] = axes[1][j] / spec.extent[1];
      }
  }
  return coords;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void FieldSample::validate() const {
  grid.validate();
  const std::size_t p = grid.points();
  if (input.size() != p * in_channels)
    throw ShapeError("input has " + std::to_string(input.size()) + " values, expected " +
                     std::to_string(p * in_channels));
  if (output.size() != p * out_channels)
    throw ShapeError("output has " + std::to_string(output.size()) + " values, expected " +
                     std::to_string(p * out_channels));
  if (!trajectory.empty() && trajectory.size() % (p * out_channels) != 0)
    throw ShapeError("trajectory size is not a whole number of snapshots");
  if (!all_finite(input) || !all_finite(output) || !all_finite(trajectory))
    throw DomainError("sample contains non-finite values");
}

void Splits::validate(std::size_t count) const {
  std::set<std::size_t> seen;
  for (const auto* part : {&train, &val, &test}) {
    for (std::size_t i : *part) {
      if (i >= count)
        throw ConfigError("split index " + std::to_string(i) + " out of range " +
                          std::to_string(count));
      if (!seen.insert(i).second)
        throw ConfigError("split index " + std::to_string(i) + " appears twice");
    }
  }
}

void DatasetBundle::validate() const {
  grid.validate();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (!(s.grid == grid))
      throw ShapeError("sample " + std::to_string(k) + " grid differs from bundle grid");
    if (s.in_channels != in_channels() || s.out_channels != out_channels())
      throw ShapeError("sample " + std::to_string(k) + " channel count differs from bundle");
    try {
      s.validate();
    } catch (const Error& e) {
      throw ShapeError("sample " + std::to_string(k) + ": " + e.what());
    }
  }
  splits.validate(samples.size());
}

double relative_l2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw ShapeError("relative_l2: prediction has " + std::to_string(pred.size()) +
                     " values, reference has " + std::to_string(truth.size()));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - truth[i];
    num += r * r;
    den += truth[i] * truth[i];
  }
  if (!(den > 0.0))
    throw DegenerateReferenceError("relative_l2: reference has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

double relative_l2_mean(const std::vector<std::vector<double>>& preds,
                        const std::vector<std::vector<double>>& truths) {
  if (preds.size() != truths.size() || preds.empty())
    throw ShapeError("relative_l2_mean: mismatched or empty sample lists");
  double sum = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) sum += relative_l2(preds[k], truths[k]);
  return sum / static_cast<double>(preds.size());
}

ChannelStats channel_stats(const std::vector<const std::vector<double>*>& fields,
                           std::size_t channels) {
  ChannelStats st;
  st.mean.assign(channels, 0.0);
  st.std.assign(channels, 0.0);
  std::size_t count = 0;
  for (const auto* f : fields) {
    for (std::size_t i = 0; i < f->size(); ++i) st.mean[i % channels] += (*f)[i];
    count += f->size() / channels;
  }
  if (count == 0) throw ConfigError("cannot compute statistics from an empty split");
  for (auto& m : st.mean) m /= static_cast<double>(count);
  for (const auto* f : fields)
    for (std::size_t i = 0; i < f->size(); ++i) {
      const double d = (*f)[i] - st.mean[i % channels];
      st.std[i % channels] += d * d;
    }
  for (auto& s : st.std) s = std::max(std::sqrt(s / static_cast<double>(count)), kStdFloor);
  return st;
}

NormStats compute_norm_stats(const DatasetBundle& bundle) {
  std::vector<const std::vector<double>*> in, out;
  for (std::size_t i : bundle.splits.train) {
    in.push_back(&bundle.samples.at(i).input);
    out.push_back(&bundle.samples.at(i).output);
  }
  return NormStats{channel_stats(in, bundle.in_channels()),
                   channel_stats(out, bundle.out_channels())};
}

void normalize_in_place(std::span<double> values, const ChannelStats& stats) {
  const std::size_t c = stats.mean.size();
  if (c == 0 || values.size() % c != 0)
    throw ShapeError("normalize: value count not a multiple of channel count");
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = (values[i] - stats.mean[i % c]) / stats.std[i % c];
}

void denormalize_in_place(std::span<double> values, const ChannelStats& stats) {
  const std::size_t c = stats.mean.size();
  if (c == 0 || values.size() % c != 0)
    throw ShapeError("denormalize: value count not a multiple of channel count");
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = values[i] * stats.std[i % c] + stats.mean[i % c];
}

std::vector<double> denormalize(std::span<const double> values, const ChannelStats& stats) {
  std::vector<double> out(values.begin(), values.end());
  denormalize_in_place(out, stats);
  return out;
}

DatasetBundle normalize(const DatasetBundle& bundle, const NormStats& stats) {
  if (stats.input.mean.size() != bundle.in_channels() ||
      stats.output.mean.size() != bundle.out_channels())
    throw ShapeError("normalization statistics do not match bundle channels");
  if (bundle.normalized) throw ConfigError("bundle '" + bundle.name + "' is already normalized");
  DatasetBundle out = bundle;
  for (auto& s : out.samples) {
    normalize_in_place(s.input, stats.input);
    normalize_in_place(s.output, stats.output);
    if (!s.trajectory.empty()) normalize_in_place(s.trajectory, stats.output);
  }
  out.norm = stats;
  out.normalized = true;
  return out;
}

DatasetBundle normalize(const DatasetBundle& bundle) {
  return normalize(bundle, compute_norm_stats(bundle));
}

GridSpec subsample_grid(const GridSpec& grid, std::size_t stride) {
  if (stride == 0) throw AlignmentError("subsample stride must be >= 1");
  GridSpec out = grid;
  for (std::size_t a = 0; a < grid.ndim(); ++a) {
    const std::size_t n = grid.shape[a];
    switch (grid.layout) {
      case GridLayout::Nodal:
        if ((n - 1) % stride != 0)
          throw AlignmentError("axis " + std::to_string(a) + ": shape " + std::to_string(n) +
                               " - 1 is not divisible by stride " + std::to_string(stride));
        out.shape[a] = (n - 1) / stride + 1;
        break;
      case GridLayout::Periodic:
        if (n % stride != 0)
          throw AlignmentError("axis " + std::to_string(a) + ": periodic shape " +
                               std::to_string(n) + " is not divisible by stride " +
                               std::to_string(stride));
        out.shape[a] = n / stride;
        break;
      case GridLayout::CellCentered:
        if (stride != 1)
          throw AlignmentError("cell-centred grids have no nested coarse lattice");
        break;
    }
  }
  out.validate();
  return out;
}

std::vector<double> subsample_values(const GridSpec& grid, std::span<const double> values,
                                     std::size_t channels, std::size_t stride) {
  const GridSpec coarse = subsample_grid(grid, stride);
  std::vector<double> out(coarse.points() * channels);
  if (grid.ndim() == 1) {
    for (std::size_t i = 0; i < coarse.shape[0]; ++i)
      for (std::size_t c = 0; c < channels; ++c)
        out[i * channels + c] = values[i * stride * channels + c];
  } else {
    const std::size_t n1 = grid.shape[1], m1 = coarse.shape[1];
    for (std::size_t i = 0; i < coarse.shape[0]; ++i)
      for (std::size_t j = 0; j < m1; ++j)
        for (std::size_t c = 0; c < channels; ++c)
          out[(i * m1 + j) * channels + c] =
              values[((i * stride) * n1 + j * stride) * channels + c];
  }
  return out;
}

FieldSample subsample(const FieldSample& field, std::size_t stride) {
  FieldSample out = field;
  out.grid = subsample_grid(field.grid, stride);
  out.input = subsample_values(field.grid, field.input, field.in_channels, stride);
  out.output = subsample_values(field.grid, field.output, field.out_channels, stride);
  out.trajectory.clear();
  if (!field.trajectory.empty()) {
    const std::size_t snap = field.grid.points() * field.out_channels;
    for (std::size_t s = 0; s * snap < field.trajectory.size(); ++s) {
      auto part = subsample_values(
          field.grid, std::span<const double>(field.trajectory).subspan(s * snap, snap),
          field.out_channels, stride);
      out.trajectory.insert(out.trajectory.end(), part.begin(), part.end());
    }
  }
  return out;
}

}  // namespace opbench
