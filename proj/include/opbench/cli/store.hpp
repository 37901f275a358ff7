#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "opbench/harness/harness.hpp"
#include "opbench/train/train.hpp"
#include "opbench/zoo/model.hpp"

namespace opbench::cli {

/// Model state as a pair of files: <stem>.json (spec, context, curves and the
/// tensor index) and <stem>.f64 (parameter and buffer values).
void save_checkpoint(const train::SeedRun& run, const std::filesystem::path& stem);
train::SeedRun load_checkpoint(const std::filesystem::path& stem);

/// Result store rooted at one directory:
///   records.jsonl           one canonical record per line, append-only
///   records.volatile.jsonl  timings and timestamps of deterministic runs
///   checkpoints/            trained states by cache key
///   datasets/               native containers by dataset identity
class ResultStore : public harness::StateStore {
 public:
  explicit ResultStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path records_path() const { return root_ / "records.jsonl"; }
  std::filesystem::path volatile_path() const { return root_ / "records.volatile.jsonl"; }

  /// Appends under an exclusive lock. Every key is checked against the log
  /// (and the batch) first; a duplicate raises DuplicateRecordError naming the
  /// line that already holds it and nothing is written. In deterministic mode
  /// volatile fields go to the sidecar so the log depends only on the config.
  void append(const std::vector<harness::ExperimentRecord>& records, bool deterministic);
  /// Stored records with their volatile fields merged back.
  std::vector<harness::ExperimentRecord> records() const;

  std::optional<train::SeedRun> load(const std::string& key, const zoo::ModelSpec& spec,
                                     const zoo::ModelContext& ctx) override;
  void save(const std::string& key, const train::SeedRun& run) override;

  /// Loader for the data catalog: native containers are read in place,
  /// everything else is materialized once under datasets/.
  harness::DataCatalog::Loader dataset_loader();
  std::filesystem::path dataset_dir(const harness::DatasetSpec& spec, std::size_t resolution) const;

 private:
  std::filesystem::path root_;
};

}  // namespace opbench::cli
