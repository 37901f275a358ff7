#include "opbench/cli/config.hpp"

#include <set>

#include "opbench/cli/container.hpp"
#include "opbench/errors.hpp"
#include "opbench/util/hash.hpp"

namespace opbench::cli {

SuiteConfig SuiteConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("suite config must be a JSON object");
  static const std::set<std::string> keys{"datasets", "models", "train", "tasks", "output", "seed", "deterministic"};
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw ConfigError("unknown suite config key '" + k + "'");
  SuiteConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.output = j.value("output", c.output.string());
    for (const auto& d : j.value("datasets", nlohmann::json::array())) {
      c.datasets.push_back(harness::DatasetSpec::from_json(d));
      c.explicit_seed_.push_back(d.contains("seed"));
      if (!d.contains("seed")) c.datasets.back().seed = c.seed;
    }
    for (const auto& m : j.value("models", nlohmann::json::array())) c.models.push_back(harness::ModelEntry::from_json(m));
    if (j.contains("train")) c.train = train::TrainConfig::from_json(j.at("train"));
    for (const auto& t : j.value("tasks", nlohmann::json::array())) c.tasks.push_back(harness::TaskSpec::from_json(t));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed suite config: ") + e.what());
  }
  c.validate();
  return c;
}

SuiteConfig SuiteConfig::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  } catch (const IngestionError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return from_json(j);
}

nlohmann::json SuiteConfig::to_json() const {
  nlohmann::json ds = nlohmann::json::array(), ms = nlohmann::json::array(), ts = nlohmann::json::array();
  for (const auto& d : datasets) ds.push_back(d.to_json());
  for (const auto& m : models) ms.push_back(m.to_json());
  for (const auto& t : tasks) ts.push_back(t.to_json());
  return {{"datasets", ds},          {"models", ms}, {"train", train.to_json()}, {"tasks", ts},
          {"output", output.string()}, {"seed", seed}, {"deterministic", deterministic}};
}

std::string SuiteConfig::hash() const {
  auto j = to_json();
  j.erase("output");
  return fnv1a_hex(j.dump());
}

void SuiteConfig::set_seed(std::uint64_t s) {
  seed = s;
  for (std::size_t i = 0; i < datasets.size(); ++i)
    if (i >= explicit_seed_.size() || !explicit_seed_[i]) datasets[i].seed = s;
}

void SuiteConfig::validate() const {
  std::set<std::string> model_names, dataset_names;
  for (const auto& m : models)
    if (!model_names.insert(m.name).second) throw ConfigError("model name '" + m.name + "' is used twice");
  for (const auto& d : datasets)
    if (!dataset_names.insert(d.name).second) throw ConfigError("dataset name '" + d.name + "' is used twice");
  train.validate();
  for (const auto& t : tasks) {
    t.validate();
    for (const auto& m : t.models)
      if (!model_names.count(m)) throw ConfigError("task " + harness::to_string(t.task) + " names unknown model '" + m + "'");
    const auto& used = t.task == harness::Task::OodSwap ? std::vector<std::string>(t.pair.begin(), t.pair.end())
                                                        : t.datasets;
    for (const auto& d : used)
      if (!dataset_names.count(d))
        throw ConfigError("task " + harness::to_string(t.task) + " names unknown dataset '" + d + "'");
  }
}

}  // namespace opbench::cli
