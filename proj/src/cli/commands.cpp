#include "opbench/cli/commands.hpp"

#include <map>
#include <set>

#include "opbench/cli/container.hpp"
#include "opbench/cli/report.hpp"
#include "opbench/cli/store.hpp"
#include "opbench/cli/validate.hpp"
#include "opbench/errors.hpp"
#include "opbench/harness/harness.hpp"

namespace opbench::cli {

namespace fs = std::filesystem;

namespace {

fs::path output_dir(const CommandOptions& opts, const SuiteConfig& cfg) { return opts.out ? *opts.out : cfg.output; }

harness::HarnessOptions harness_options(const SuiteConfig& cfg) {
  harness::HarnessOptions h;
  h.train = cfg.train;
  h.config_hash = cfg.hash();
  h.master_seed = cfg.seed;
  h.deterministic = cfg.deterministic;
  return h;
}

/// Extra resolutions the tasks will ask for, per dataset.
std::map<std::string, std::set<std::size_t>> requested_resolutions(const SuiteConfig& cfg) {
  std::map<std::string, std::set<std::size_t>> out;
  for (const auto& d : cfg.datasets) out[d.name].insert(0);
  for (const auto& t : cfg.tasks) {
    if (t.task != harness::Task::SuperResolution) continue;
    for (const auto& d : t.datasets) {
      if (t.train_resolution) out[d].insert(t.train_resolution);
      for (auto r : t.test_resolutions) out[d].insert(r);
    }
  }
  return out;
}

nlohmann::json config_echo(const SuiteConfig& cfg) {
  auto j = cfg.to_json();
  j["config_hash"] = cfg.hash();
  return j;
}

}  // namespace

SuiteConfig resolve_config(const CommandOptions& opts) {
  if (opts.config.empty()) throw UsageError("--config is required");
  SuiteConfig cfg = SuiteConfig::load(opts.config);
  if (opts.seed) cfg.set_seed(*opts.seed);
  if (opts.deterministic) cfg.deterministic = true;
  if (opts.out) cfg.output = *opts.out;
  cfg.validate();
  return cfg;
}

int cmd_generate(const CommandOptions& opts, std::ostream& log) {
  const SuiteConfig cfg = resolve_config(opts);
  ResultStore store(output_dir(opts, cfg));
  auto loader = store.dataset_loader();
  for (const auto& [name, resolutions] : requested_resolutions(cfg)) {
    const auto& spec = *std::find_if(cfg.datasets.begin(), cfg.datasets.end(), [&](const auto& d) { return d.name == name; });
    for (auto r : resolutions) {
      if (spec.source == "native" && r) continue;
      DatasetBundle b;
      try {
        b = loader(spec, r);
      } catch (const SolverError& e) {
        throw SolverError("dataset '" + name + "': " + e.what());
      }
      log << "dataset " << name << " resolution " << b.grid.shape.at(0) << ": " << b.samples.size() << " samples";
      if (spec.source != "native") {
        const auto dir = store.dataset_dir(spec, r);
        log << " -> " << dir.string();
        const auto sums = container_checksums(dir);
        for (auto it = sums.begin(); it != sums.end(); ++it) log << " " << it.key() << "=" << it->get<std::string>();
      }
      log << "\n";
    }
  }
  return 0;
}

int cmd_train(const CommandOptions& opts, std::ostream& log) {
  const SuiteConfig cfg = resolve_config(opts);
  const Filter filter = Filter::parse(opts.filter);
  ResultStore store(output_dir(opts, cfg));
  harness::DataCatalog catalog(cfg.datasets, store.dataset_loader());
  auto cache = std::make_shared<harness::StateCache>();
  cache->set_store(&store);
  harness::Harness h(catalog, harness_options(cfg), cache);
  for (const auto& m : cfg.models)
    for (const auto& d : cfg.datasets)
      for (auto seed : cfg.train.seeds) {
        harness::ExperimentRecord probe;
        probe.model = m.name;
        probe.dataset = d.name;
        probe.task = "accuracy";
        probe.seed = seed;
        if (m.oracle() || !filter.matches(probe)) continue;
        const auto run = h.state(m, d.name, 0, seed);
        log << "train " << m.name << " on " << d.name << " seed " << seed << ": ";
        if (run->failed)
          log << "failed (" << run->error << ")\n";
        else
          log << "best epoch " << run->best_epoch << ", validation " << run->val_curve.at(run->best_epoch) << ", "
              << run->train_seconds << " s\n";
      }
  log << "trainings performed: " << h.trainings() << "\n";
  return 0;
}

int cmd_benchmark(const CommandOptions& opts, std::ostream& log) {
  const SuiteConfig cfg = resolve_config(opts);
  ResultStore store(output_dir(opts, cfg));
  write_text_atomic(store.root() / "config.json", config_echo(cfg).dump(2) + "\n");
  harness::DataCatalog catalog(cfg.datasets, store.dataset_loader());
  auto cache = std::make_shared<harness::StateCache>();
  cache->set_store(&store);
  harness::Harness h(catalog, harness_options(cfg), cache);
  std::vector<harness::ExperimentRecord> all;
  for (const auto& t : cfg.tasks) {
    const auto recs = h.run(t, cfg.models);
    std::size_t failed = 0;
    for (const auto& r : recs) failed += r.failed;
    log << "task " << harness::to_string(t.task) << ": " << recs.size() << " records";
    if (failed) log << " (" << failed << " failed)";
    log << "\n";
    all.insert(all.end(), recs.begin(), recs.end());
  }
  store.append(all, cfg.deterministic);
  log << "appended " << all.size() << " records to " << store.records_path().string() << "\n";
  const auto rep = render_report(store.records(), store.root() / "report", config_echo(cfg));
  for (const auto& w : rep.warnings) log << "warning: " << w << "\n";
  log << "report: " << (store.root() / "report").string() << "\n";
  return 0;
}

int cmd_report(const CommandOptions& opts, std::ostream& log) {
  const Filter filter = Filter::parse(opts.filter);
  fs::path root;
  nlohmann::json echo = nullptr;
  if (!opts.config.empty()) {
    const SuiteConfig cfg = resolve_config(opts);
    root = output_dir(opts, cfg);
    echo = config_echo(cfg);
  } else if (opts.out) {
    root = *opts.out;
  } else {
    throw UsageError("report needs --out (the store directory) or --config");
  }
  if (!fs::exists(root / "records.jsonl")) throw UsageError("no record log under " + root.string());
  if (echo.is_null() && fs::exists(root / "config.json")) echo = nlohmann::json::parse(read_text(root / "config.json"));
  ResultStore store(root);
  std::vector<harness::ExperimentRecord> selected;
  for (auto& r : store.records())
    if (filter.matches(r)) selected.push_back(std::move(r));
  const auto rep = render_report(selected, root / "report", echo);
  for (const auto& w : rep.warnings) log << "warning: " << w << "\n";
  log << "rendered " << rep.records << " records into " << (root / "report").string() << "\n";
  return 0;
}

int cmd_validate(const CommandOptions& opts, std::ostream& log) {
  std::set<OracleGroup> groups;
  for (const auto& g : opts.groups) {
    bool found = false;
    for (int k = 1; k <= 5; ++k)
      if (to_string(OracleGroup(k)) == g) {
        groups.insert(OracleGroup(k));
        found = true;
      }
    if (!found) throw UsageError("unknown oracle group '" + g + "' (metric, solver, layer, gradient, mesh-invariance)");
  }
  std::size_t failed = 0;
  const auto checks = run_oracles(groups);
  for (const auto& c : checks) {
    log << (c.pass ? "PASS " : "FAIL ") << "[" << to_string(c.group) << "] " << c.name << ": " << c.value
        << " (tolerance " << c.tolerance << ")";
    if (!c.detail.empty()) log << " " << c.detail;
    log << "\n";
    failed += !c.pass;
  }
  log << checks.size() - failed << "/" << checks.size() << " oracle checks passed\n";
  return failed ? 1 : 0;
}

}  // namespace opbench::cli
