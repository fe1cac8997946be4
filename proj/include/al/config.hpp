#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "al/corpus.hpp"
#include "al/loop.hpp"
#include "json.hpp"

namespace al {

/// Invalid configuration; key() names the offending entry, e.g. "loop.seeds".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct DatasetSection {
  std::string name;
  std::filesystem::path train;
  std::optional<std::filesystem::path> test;
  DatasetFormat format = DatasetFormat::kJsonl;
  std::vector<std::string> classes;
  double test_fraction = 0.10;  // used only without a test file
  bool stratified = true;
  std::uint64_t split_seed = 0;
};

/// The declarative experiment file: sections dataset, classifier, strategy
/// and loop. `base` carries every per-run setting except strategy and seed.
struct AppConfig {
  DatasetSection dataset;
  ExperimentConfig base;
  std::vector<Strategy> strategies;
  std::vector<std::uint64_t> seeds;
  std::size_t parallelism = 1;
};

/// Relative dataset paths resolve against base_dir. Unknown keys are errors.
AppConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
AppConfig load_config_file(const std::filesystem::path& path);

/// Canonical snapshot with absolute paths; parse_config(config_to_json(c))
/// reproduces c.
nlohmann::json config_to_json(const AppConfig& config);

struct LoadedData {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;  // null when unavailable
};

/// Loads the training file and the test file, or splits the training file
/// when it is fully gold-labeled and no test file is given.
LoadedData load_data(const DatasetSection& section);

}  // namespace al
