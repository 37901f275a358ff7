#include "opbench/cli/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "opbench/errors.hpp"
#include "opbench/util/hash.hpp"

namespace opbench::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "opbench-native";
constexpr int kVersion = 1;

std::uint64_t swap_bytes(std::uint64_t v) {
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

std::vector<unsigned char> little_endian_image(std::span<const double> values) {
  std::vector<unsigned char> bytes(values.size_bytes());
  std::memcpy(bytes.data(), values.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint64_t w;
      std::memcpy(&w, bytes.data() + 8 * i, 8);
      w = swap_bytes(w);
      std::memcpy(bytes.data() + 8 * i, &w, 8);
    }
  }
  return bytes;
}

nlohmann::json array_entry(const std::string& file, std::vector<std::size_t> shape, std::span<const double> v) {
  return {{"file", file}, {"shape", shape}, {"dtype", "float64-le"}, {"fnv1a64", checksum_f64(v)}};
}

std::vector<double> load_array(const fs::path& dir, const nlohmann::json& entry, const std::string& name) {
  const auto file = dir / entry.at("file").get<std::string>();
  auto values = read_f64(file);
  std::size_t expected = 1;
  for (std::size_t d : entry.at("shape").get<std::vector<std::size_t>>()) expected *= d;
  if (values.size() != expected)
    throw IntegrityError("container array '" + name + "' holds " + std::to_string(values.size()) +
                         " values, manifest says " + std::to_string(expected));
  if (checksum_f64(values) != entry.at("fnv1a64").get<std::string>())
    throw IntegrityError("checksum mismatch for container array '" + name + "' in " + dir.string());
  return values;
}

nlohmann::json stats_to_json(const ChannelStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

ChannelStats stats_from_json(const nlohmann::json& j) {
  return {j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
}

}  // namespace

std::string checksum_f64(std::span<const double> values) {
  const auto bytes = little_endian_image(values);
  Fnv1a64 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

void write_f64(const fs::path& file, std::span<const double> values) {
  const auto bytes = little_endian_image(values);
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IngestionError("short write to " + tmp.string());
  }
  fs::rename(tmp, file);
}

std::vector<double> read_f64(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IntegrityError("missing array file " + file.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8) throw IntegrityError("array file " + file.string() + " is not a whole number of doubles");
  std::vector<double> v(bytes.size() / 8);
  std::memcpy(v.data(), bytes.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& d : v) {
      std::uint64_t w;
      std::memcpy(&w, &d, 8);
      w = swap_bytes(w);
      std::memcpy(&d, &w, 8);
    }
  }
  return v;
}

void write_text_atomic(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, file);
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestionError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json grid_to_json(const GridSpec& g) {
  return {{"shape", g.shape}, {"extent", g.extent}, {"layout", to_string(g.layout)}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  g.shape = j.at("shape").get<std::vector<std::size_t>>();
  g.extent = j.at("extent").get<std::vector<double>>();
  g.layout = grid_layout_from_string(j.at("layout").get<std::string>());
  g.validate();
  return g;
}

void write_container(const DatasetBundle& b, const fs::path& dir) {
  b.validate();
  fs::create_directories(dir);
  const std::size_t n = b.samples.size(), pts = b.grid.points();
  std::vector<double> inputs, outputs, traj;
  inputs.reserve(n * pts * b.in_channels());
  outputs.reserve(n * pts * b.out_channels());
  const std::size_t steps = n ? b.samples[0].trajectory.size() / (pts * b.out_channels()) : 0;
  for (const auto& s : b.samples) {
    if (s.grid != b.grid) throw ShapeError("container: every sample must live on the bundle grid");
    if (s.time.has_value() != b.samples[0].time.has_value() || (s.time && !(*s.time == *b.samples[0].time)) ||
        s.trajectory.size() != steps * pts * b.out_channels())
      throw ShapeError("container: samples must share their time metadata");
    inputs.insert(inputs.end(), s.input.begin(), s.input.end());
    outputs.insert(outputs.end(), s.output.begin(), s.output.end());
    traj.insert(traj.end(), s.trajectory.begin(), s.trajectory.end());
  }
  nlohmann::json arrays{{"inputs", array_entry("inputs.f64", {n, pts, b.in_channels()}, inputs)},
                        {"outputs", array_entry("outputs.f64", {n, pts, b.out_channels()}, outputs)}};
  write_f64(dir / "inputs.f64", inputs);
  write_f64(dir / "outputs.f64", outputs);
  if (steps) {
    arrays["trajectories"] = array_entry("trajectories.f64", {n, steps, pts, b.out_channels()}, traj);
    write_f64(dir / "trajectories.f64", traj);
  }
  nlohmann::json m{{"format", kFormat},
                   {"version", kVersion},
                   {"name", b.name},
                   {"grid", grid_to_json(b.grid)},
                   {"input_channels", b.input_channels},
                   {"output_channels", b.output_channels},
                   {"samples", n},
                   {"splits", {{"train", b.splits.train}, {"val", b.splits.val}, {"test", b.splits.test}}},
                   {"pde_meta", b.pde_meta},
                   {"normalized", b.normalized},
                   {"arrays", arrays}};
  m["time"] = nullptr;
  if (n && b.samples[0].time) {
    const TimeMeta& t = *b.samples[0].time;
    m["time"] = {{"t0", t.t0}, {"t_final", t.t_final}, {"stored_steps", t.stored_steps}};
  }
  m["norm"] = b.norm ? nlohmann::json{{"input", stats_to_json(b.norm->input)}, {"output", stats_to_json(b.norm->output)}}
                     : nlohmann::json(nullptr);
  write_text_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

nlohmann::json container_checksums(const fs::path& dir) {
  const auto m = nlohmann::json::parse(read_text(dir / "manifest.json"));
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, entry] : m.at("arrays").items()) out[name] = entry.at("fnv1a64");
  return out;
}

DatasetBundle read_container(const fs::path& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (m.value("format", "") != kFormat || m.value("version", 0) != kVersion)
    throw IngestionError(dir.string() + " is not a native container (format/version)");
  try {
    DatasetBundle b;
    b.name = m.at("name").get<std::string>();
    b.grid = grid_from_json(m.at("grid"));
    b.input_channels = m.at("input_channels").get<std::vector<std::string>>();
    b.output_channels = m.at("output_channels").get<std::vector<std::string>>();
    b.pde_meta = m.at("pde_meta");
    b.normalized = m.at("normalized").get<bool>();
    const auto& sp = m.at("splits");
    b.splits = {sp.at("train").get<std::vector<std::size_t>>(), sp.at("val").get<std::vector<std::size_t>>(),
                sp.at("test").get<std::vector<std::size_t>>()};
    if (!m.at("norm").is_null())
      b.norm = NormStats{stats_from_json(m.at("norm").at("input")), stats_from_json(m.at("norm").at("output"))};
    std::optional<TimeMeta> time;
    if (!m.at("time").is_null())
      time = TimeMeta{m["time"].at("t0").get<double>(), m["time"].at("t_final").get<double>(),
                      m["time"].at("stored_steps").get<std::size_t>()};
    const std::size_t n = m.at("samples").get<std::size_t>(), pts = b.grid.points();
    const auto& arrays = m.at("arrays");
    const auto inputs = load_array(dir, arrays.at("inputs"), "inputs");
    const auto outputs = load_array(dir, arrays.at("outputs"), "outputs");
    std::vector<double> traj;
    if (arrays.contains("trajectories")) traj = load_array(dir, arrays.at("trajectories"), "trajectories");
    const std::size_t ci = b.in_channels(), co = b.out_channels();
    if (inputs.size() != n * pts * ci || outputs.size() != n * pts * co || traj.size() % (n ? n : 1))
      throw IntegrityError("container arrays disagree with the manifest sample count");
    const std::size_t per_traj = n ? traj.size() / n : 0;
    for (std::size_t k = 0; k < n; ++k) {
      FieldSample s;
      s.grid = b.grid;
      s.in_channels = ci;
      s.out_channels = co;
      s.input.assign(inputs.begin() + std::ptrdiff_t(k * pts * ci), inputs.begin() + std::ptrdiff_t((k + 1) * pts * ci));
      s.output.assign(outputs.begin() + std::ptrdiff_t(k * pts * co),
                      outputs.begin() + std::ptrdiff_t((k + 1) * pts * co));
      s.trajectory.assign(traj.begin() + std::ptrdiff_t(k * per_traj), traj.begin() + std::ptrdiff_t((k + 1) * per_traj));
      s.time = time;
      b.samples.push_back(std::move(s));
    }
    b.validate();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("malformed manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace opbench::cli
