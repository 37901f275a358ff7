#include "opbench/cli/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <map>
#include <sstream>

#include "opbench/cli/container.hpp"
#include "opbench/errors.hpp"
#include "opbench/util/hash.hpp"

namespace opbench::cli {

namespace fs = std::filesystem;

namespace {

class FileLock {
 public:
  explicit FileLock(const fs::path& file) {
    fd_ = ::open(file.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw IngestionError("cannot open lock file " + file.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw IngestionError("cannot lock " + file.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

std::vector<std::string> read_lines(const fs::path& file) {
  std::vector<std::string> lines;
  std::ifstream in(file);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  return lines;
}

void append_lines(const fs::path& file, const std::vector<std::string>& lines) {
  std::ofstream out(file, std::ios::app | std::ios::binary);
  if (!out) throw IngestionError("cannot append to " + file.string());
  for (const auto& l : lines) out << l << '\n';
  out.flush();
  if (!out) throw IngestionError("short write to " + file.string());
}

nlohmann::json context_to_json(const zoo::ModelContext& c) {
  return {{"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"grid", grid_to_json(c.grid)},
          {"time_dependent", c.time_dependent},
          {"stored_steps", c.stored_steps}};
}

zoo::ModelContext context_from_json(const nlohmann::json& j) {
  zoo::ModelContext c;
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.out_channels = j.at("out_channels").get<std::size_t>();
  c.grid = grid_from_json(j.at("grid"));
  c.time_dependent = j.at("time_dependent").get<bool>();
  c.stored_steps = j.at("stored_steps").get<std::size_t>();
  return c;
}

}  // namespace

// ------------------------------------------------------------------ checkpoints

void save_checkpoint(const train::SeedRun& run, const fs::path& stem) {
  if (!run.model) throw ConfigError("checkpoint: run holds no model");
  const zoo::Model& m = *run.model;
  std::vector<double> values;
  nlohmann::json tensors = nlohmann::json::array();
  auto add = [&](const zoo::Param& p, const char* kind) {
    tensors.push_back({{"name", p.name},
                       {"kind", kind},
                       {"shape", p.value.shape()},
                       {"group", p.group},
                       {"offset", values.size()}});
    values.insert(values.end(), p.value.value().begin(), p.value.value().end());
  };
  for (const auto& p : m.params()) add(p, "param");
  for (const auto& p : m.buffers()) add(p, "buffer");
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  write_f64(stem.string() + ".f64", values);
  const nlohmann::json j{{"spec", m.spec().to_json()},
                         {"init_seed", m.seed()},
                         {"seed", run.seed},
                         {"context", context_to_json(m.context())},
                         {"train_curve", run.train_curve},
                         {"val_curve", run.val_curve},
                         {"best_epoch", run.best_epoch},
                         {"train_seconds", run.train_seconds},
                         {"tensors", tensors},
                         {"values", values.size()},
                         {"fnv1a64", checksum_f64(values)},
                         {"param_hash", zoo::param_hash(m)}};
  write_text_atomic(stem.string() + ".json", j.dump(2) + "\n");
}

train::SeedRun load_checkpoint(const fs::path& stem) {
  const auto j = nlohmann::json::parse(read_text(stem.string() + ".json"));
  const auto values = read_f64(stem.string() + ".f64");
  if (values.size() != j.at("values").get<std::size_t>() || checksum_f64(values) != j.at("fnv1a64").get<std::string>())
    throw IntegrityError("checkpoint " + stem.string() + " does not match its checksum");
  const auto spec = zoo::ModelSpec::from_json(j.at("spec"));
  std::shared_ptr<zoo::Model> m =
      zoo::make_model(spec, context_from_json(j.at("context")), j.at("init_seed").get<std::uint64_t>());
  std::map<std::string, zoo::Param*> by_name;
  for (auto& p : m->params()) by_name[p.name] = &p;
  for (auto& p : m->buffers()) by_name[p.name] = &p;
  if (by_name.size() != j.at("tensors").size())
    throw IntegrityError("checkpoint " + stem.string() + " lists a different tensor set");
  for (const auto& t : j.at("tensors")) {
    auto it = by_name.find(t.at("name").get<std::string>());
    if (it == by_name.end()) throw IntegrityError("checkpoint tensor '" + t.at("name").get<std::string>() + "' unknown");
    auto& dst = it->second->value.mutable_value();
    if (t.at("shape").get<ag::Shape>() != it->second->value.shape())
      throw IntegrityError("checkpoint tensor '" + it->first + "' has the wrong shape");
    const std::size_t off = t.at("offset").get<std::size_t>();
    if (off + dst.size() > values.size()) throw IntegrityError("checkpoint tensor '" + it->first + "' is truncated");
    std::copy(values.begin() + std::ptrdiff_t(off), values.begin() + std::ptrdiff_t(off + dst.size()), dst.begin());
  }
  if (zoo::param_hash(*m) != j.at("param_hash").get<std::string>())
    throw IntegrityError("checkpoint " + stem.string() + " restores to a different state");
  train::SeedRun run;
  run.seed = j.at("seed").get<std::uint64_t>();
  run.model = std::move(m);
  run.train_curve = j.at("train_curve").get<std::vector<double>>();
  run.val_curve = j.at("val_curve").get<std::vector<double>>();
  run.best_epoch = j.at("best_epoch").get<std::size_t>();
  run.train_seconds = j.at("train_seconds").get<double>();
  return run;
}

// ------------------------------------------------------------------ store

ResultStore::ResultStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

void ResultStore::append(const std::vector<harness::ExperimentRecord>& records, bool deterministic) {
  FileLock lock(root_ / "records.lock");
  std::map<std::string, std::size_t> lines;
  std::size_t n = 0;
  for (const auto& line : read_lines(records_path()))
    lines.emplace(harness::ExperimentRecord::from_json(nlohmann::json::parse(line)).key(), ++n);
  std::vector<std::string> out, side;
  for (const auto& r : records) {
    const auto key = r.key();
    if (auto it = lines.find(key); it != lines.end())
      throw DuplicateRecordError("record " + key + " already stored at " + records_path().string() + ":" +
                                     std::to_string(it->second),
                                 it->second);
    lines.emplace(key, ++n);
    out.push_back(r.to_json(!deterministic).dump());
    if (deterministic) {
      auto v = r.volatile_json();
      v["key"] = key;
      side.push_back(v.dump());
    }
  }
  append_lines(records_path(), out);
  if (!side.empty()) append_lines(volatile_path(), side);
}

std::vector<harness::ExperimentRecord> ResultStore::records() const {
  std::map<std::string, nlohmann::json> side;
  for (const auto& line : read_lines(volatile_path())) {
    auto j = nlohmann::json::parse(line);
    side[j.at("key").get<std::string>()] = j;
  }
  std::vector<harness::ExperimentRecord> out;
  for (const auto& line : read_lines(records_path())) {
    auto r = harness::ExperimentRecord::from_json(nlohmann::json::parse(line));
    if (auto it = side.find(r.key()); it != side.end()) r.apply_volatile(it->second);
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<train::SeedRun> ResultStore::load(const std::string& key, const zoo::ModelSpec& spec,
                                                const zoo::ModelContext& ctx) {
  const fs::path stem = root_ / "checkpoints" / key;
  if (!fs::exists(stem.string() + ".json")) return std::nullopt;
  auto run = load_checkpoint(stem);
  const auto& c = run.model->context();
  if (run.model->family() != spec.family || c.grid != ctx.grid || c.in_channels != ctx.in_channels ||
      c.out_channels != ctx.out_channels)
    throw IntegrityError("checkpoint " + key + " was trained for a different model or dataset");
  return run;
}

void ResultStore::save(const std::string& key, const train::SeedRun& run) {
  save_checkpoint(run, root_ / "checkpoints" / key);
}

fs::path ResultStore::dataset_dir(const harness::DatasetSpec& spec, std::size_t resolution) const {
  auto id = spec.to_json();
  id["resolution"] = resolution ? resolution : spec.resolution;
  return root_ / "datasets" / (spec.name + "-" + fnv1a_hex(id.dump()));
}

harness::DataCatalog::Loader ResultStore::dataset_loader() {
  return [this](const harness::DatasetSpec& spec, std::size_t resolution) {
    if (spec.source == "native") {
      DatasetBundle b = read_container(spec.path);
      if (resolution && resolution != b.grid.shape.at(0))
        throw ConfigError("dataset '" + spec.name + "' is only available at its stored resolution");
      if (spec.count && spec.count < b.samples.size()) {
        b.samples.resize(spec.count);
        b.splits = {};
      }
      b.name = spec.name;
      if (b.splits.train.empty()) b.splits = train::split_dataset(b.samples.size(), spec.seed, spec.split);
      return b;
    }
    const fs::path dir = dataset_dir(spec, resolution);
    if (fs::exists(dir / "manifest.json")) return read_container(dir);
    DatasetBundle b = harness::load_dataset(spec, resolution);
    write_container(b, dir);
    return b;
  };
}

}  // namespace opbench::cli
