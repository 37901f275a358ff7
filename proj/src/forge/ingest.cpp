#include "opbench/forge/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <hdf5.h>

#include "opbench/errors.hpp"

namespace opbench::forge {

Adapter adapter_from_string(const std::string& name) {
  if (name == "pdebench" || name == "pdebench-style") return Adapter::PdeBench;
  if (name == "mechanical-mnist" || name == "mechanical-mnist-style") return Adapter::MechanicalMnist;
  throw ConfigError("unknown ingestion adapter '" + name + "'");
}

namespace {

struct H5Array {
  std::vector<hsize_t> dims;
  std::vector<double> data;
};

class H5File {
 public:
  explicit H5File(const std::filesystem::path& p) {
    H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
    id_ = H5Fopen(p.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT);
    if (id_ < 0) throw IngestionError("cannot open HDF5 file " + p.string());
  }
  ~H5File() { H5Fclose(id_); }
  H5File(const H5File&) = delete;
  H5File& operator=(const H5File&) = delete;

  bool exists(const std::string& name) const {
    return H5Lexists(id_, name.c_str(), H5P_DEFAULT) > 0;
  }

  H5Array read(const std::string& name) const {
    const hid_t ds = H5Dopen2(id_, name.c_str(), H5P_DEFAULT);
    if (ds < 0) throw IngestionError("missing HDF5 dataset '" + name + "'");
    const hid_t space = H5Dget_space(ds);
    H5Array arr;
    const int rank = H5Sget_simple_extent_ndims(space);
    arr.dims.resize(std::size_t(std::max(rank, 0)));
    H5Sget_simple_extent_dims(space, arr.dims.data(), nullptr);
    hsize_t total = 1;
    for (auto d : arr.dims) total *= d;
    arr.data.resize(total);
    const herr_t st = H5Dread(ds, H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL, H5P_DEFAULT, arr.data.data());
    H5Sclose(space);
    H5Dclose(ds);
    if (st < 0) throw IngestionError("cannot read HDF5 dataset '" + name + "' as floating point");
    return arr;
  }

  std::vector<std::string> sample_groups() const {
    std::vector<std::string> names;
    for (std::size_t k = 0;; ++k) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%04zu", k);
      if (!exists(buf)) break;
      names.emplace_back(buf);
    }
    return names;
  }

 private:
  hid_t id_;
};

GridLayout layout_from_coordinates(const H5File& f, GridLayout fallback) {
  if (!f.exists("x-coordinate")) return fallback;
  const auto x = f.read("x-coordinate").data;
  if (x.size() < 2) return fallback;
  const double h = x[1] - x[0];
  if (std::abs(x.front()) > 0.25 * h) return GridLayout::CellCentered;
  const double span = x.back() + h - x.front();
  // Periodic grids stop one spacing short of the closing endpoint.
  if (std::abs(x.back() - x.front() - (span - h)) < 1e-9 && std::abs(span - std::round(span)) < 1e-6 &&
      std::abs(x.back() - std::round(x.back())) > 0.25 * h)
    return GridLayout::Periodic;
  return GridLayout::Nodal;
}

void check_finite(const std::vector<double>& v, std::size_t sample, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw IngestionError("sample " + std::to_string(sample) + ": non-finite " + what +
                           " value at element " + std::to_string(i));
}

void finish(DatasetBundle& b) {
  for (std::size_t k = 0; k < b.samples.size(); ++k) {
    check_finite(b.samples[k].input, k, "input");
    check_finite(b.samples[k].output, k, "output");
  }
  b.validate();
}

DatasetBundle read_pdebench(const std::filesystem::path& path, const std::string& name) {
  H5File f(path);
  DatasetBundle b;
  b.name = name;
  b.pde_meta["source"] = "pdebench";
  if (f.exists("nu") && f.exists("tensor")) {
    const auto nu = f.read("nu");
    const auto t = f.read("tensor");
    if (nu.dims.size() != 3 || t.dims.size() != 4 || t.dims[1] != 1 || t.dims[0] != nu.dims[0] ||
        t.dims[2] != nu.dims[1] || t.dims[3] != nu.dims[2])
      throw IngestionError("steady 2D layout expects nu [N,X,Y] and tensor [N,1,X,Y]");
    const std::size_t N = nu.dims[0], X = nu.dims[1], Y = nu.dims[2];
    b.grid = GridSpec{{X, Y}, {1.0, 1.0}, layout_from_coordinates(f, GridLayout::Nodal)};
    b.input_channels = {"nu"};
    b.output_channels = {"u"};
    for (std::size_t k = 0; k < N; ++k) {
      FieldSample s;
      s.grid = b.grid;
      s.input.assign(nu.data.begin() + long(k * X * Y), nu.data.begin() + long((k + 1) * X * Y));
      s.output.assign(t.data.begin() + long(k * X * Y), t.data.begin() + long((k + 1) * X * Y));
      b.samples.push_back(std::move(s));
    }
  } else if (f.exists("tensor")) {
    const auto t = f.read("tensor");
    if (t.dims.size() != 3 || t.dims[1] < 2)
      throw IngestionError("1D time-series layout expects tensor [N,T,X] with T >= 2");
    const std::size_t N = t.dims[0], T = t.dims[1], X = t.dims[2];
    b.grid = GridSpec{{X}, {1.0}, layout_from_coordinates(f, GridLayout::Periodic)};
    b.input_channels = {"u0"};
    b.output_channels = {"u"};
    for (std::size_t k = 0; k < N; ++k) {
      FieldSample s;
      s.grid = b.grid;
      const auto base = t.data.begin() + long(k * T * X);
      s.input.assign(base, base + long(X));
      s.output.assign(base + long((T - 1) * X), base + long(T * X));
      s.time = TimeMeta{0.0, 1.0, 0};
      b.samples.push_back(std::move(s));
    }
  } else {
    const auto groups = f.sample_groups();
    if (groups.empty())
      throw IngestionError("no recognised PDEBench layout in " + path.string());
    std::size_t C = 0;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const auto d = f.read(groups[k] + "/data");
      if (d.dims.size() != 4 || d.dims[0] < 2)
        throw IngestionError("sample " + std::to_string(k) + ": data must be [T,X,Y,C] with T >= 2");
      const std::size_t T = d.dims[0], X = d.dims[1], Y = d.dims[2];
      if (k == 0) {
        C = d.dims[3];
        b.grid = GridSpec{{X, Y}, {1.0, 1.0}, layout_from_coordinates(f, GridLayout::CellCentered)};
        for (std::size_t c = 0; c < C; ++c) {
          b.input_channels.push_back("q" + std::to_string(c) + "_0");
          b.output_channels.push_back("q" + std::to_string(c));
        }
      } else if (X != b.grid.shape[0] || Y != b.grid.shape[1] || d.dims[3] != C) {
        throw IngestionError("sample " + std::to_string(k) + ": shape differs from sample 0");
      }
      FieldSample s;
      s.grid = b.grid;
      s.in_channels = s.out_channels = C;
      const std::size_t snap = X * Y * C;
      s.input.assign(d.data.begin(), d.data.begin() + long(snap));
      s.output.assign(d.data.begin() + long((T - 1) * snap), d.data.begin() + long(T * snap));
      s.time = TimeMeta{0.0, 1.0, 0};
      b.samples.push_back(std::move(s));
    }
  }
  finish(b);
  return b;
}

std::vector<std::vector<double>> read_rows(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestionError("cannot open " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw IngestionError(file.filename().string() + ": sample " + std::to_string(rows.size()) +
                             ": malformed value '" + tok + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

DatasetBundle read_mechanical_mnist(const std::filesystem::path& dir, const std::string& name) {
  const auto input = read_rows(dir / "input.txt");
  const auto ux = read_rows(dir / "ux.txt");
  const auto uy = read_rows(dir / "uy.txt");
  if (input.empty()) throw IngestionError("input.txt holds no samples");
  if (ux.size() != input.size() || uy.size() != input.size())
    throw IngestionError("input.txt, ux.txt and uy.txt must hold the same number of samples");
  const std::size_t R = input[0].size();
  const auto n = std::size_t(std::llround(std::sqrt(double(R))));
  if (n * n != R || n < 2) throw IngestionError("sample 0: " + std::to_string(R) + " values is not a square grid");
  DatasetBundle b;
  b.name = name;
  b.pde_meta["source"] = "mechanical-mnist";
  b.grid = GridSpec::square(n, GridLayout::CellCentered);
  b.input_channels = {"material"};
  b.output_channels = {"ux", "uy"};
  for (std::size_t k = 0; k < input.size(); ++k) {
    if (input[k].size() != R || ux[k].size() != R || uy[k].size() != R)
      throw IngestionError("sample " + std::to_string(k) + ": expected " + std::to_string(R) +
                           " values in every file");
    FieldSample s;
    s.grid = b.grid;
    s.input = input[k];
    s.out_channels = 2;
    s.output.resize(2 * R);
    for (std::size_t p = 0; p < R; ++p) {
      s.output[2 * p] = ux[k][p];
      s.output[2 * p + 1] = uy[k][p];
    }
    b.samples.push_back(std::move(s));
  }
  finish(b);
  return b;
}

}  // namespace

DatasetBundle ingest_external(const std::filesystem::path& path, Adapter adapter,
                              const std::string& name) {
  const std::string nm = name.empty() ? path.stem().string() : name;
  switch (adapter) {
    case Adapter::PdeBench: return read_pdebench(path, nm);
    case Adapter::MechanicalMnist: return read_mechanical_mnist(path, nm);
  }
  throw ConfigError("unknown adapter");
}

}  // namespace opbench::forge
