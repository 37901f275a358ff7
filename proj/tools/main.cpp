#include <iostream>

#include <CLI11.hpp>

#include "opbench/cli/commands.hpp"
#include "opbench/errors.hpp"

int main(int argc, char** argv) {
  using namespace opbench;
  using namespace opbench::cli;

  CLI::App app{"Operator-learning benchmark suite"};
  app.require_subcommand(1);
  CommandOptions opts;
  std::uint64_t seed = 0;
  std::string out;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opts.config, "Suite config (JSON)");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_flag("--deterministic", opts.deterministic, "Keep volatile fields out of the record log");
    sub->add_option("--out", out, "Result store directory");
    sub->add_option("--filter", opts.filter, "Record filter key=value[,value...] (repeatable)");
  };
  auto* generate = app.add_subcommand("generate", "Generate or ingest the configured datasets");
  common(generate, true);
  auto* train = app.add_subcommand("train", "Train every model on every dataset and store the states");
  common(train, true);
  auto* benchmark = app.add_subcommand("benchmark", "Run the configured tasks, append records, render the report");
  common(benchmark, true);
  auto* report = app.add_subcommand("report", "Render tables and plots from stored records");
  common(report, false);
  auto* validate = app.add_subcommand("validate", "Run the solver and model oracle suites");
  validate->add_option("--group", opts.groups, "Oracle group (metric, solver, layer, gradient, mesh-invariance)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  for (auto* sub : {generate, train, benchmark, report}) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--out")) opts.out = out;
  }

  try {
    if (generate->parsed()) return cmd_generate(opts, std::cout);
    if (train->parsed()) return cmd_train(opts, std::cout);
    if (benchmark->parsed()) return cmd_benchmark(opts, std::cout);
    if (report->parsed()) return cmd_report(opts, std::cout);
    return cmd_validate(opts, std::cout);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DuplicateRecordError& e) {
    std::cerr << "duplicate record: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
