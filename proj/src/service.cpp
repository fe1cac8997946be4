#include "al/service.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "al/config.hpp"
#include "al/results_io.hpp"

namespace al {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace

RunManifest read_manifest(const fs::path& path) {
  const json doc = read_json(path);
  RunManifest manifest;
  manifest.dir = path.parent_path();
  try {
    manifest.config_file = doc.at("config").get<std::string>();
    manifest.results_csv = doc.at("results_csv").get<std::string>();
    for (const auto& run : doc.at("runs")) {
      ManifestEntry entry;
      entry.run_id = run.at("run_id").get<std::string>();
      entry.file = run.at("file").get<std::string>();
      entry.dataset = run.at("dataset").get<std::string>();
      entry.strategy = run.at("strategy").get<std::string>();
      entry.classifier = run.at("classifier").get<std::string>();
      entry.seed = run.at("seed").get<std::uint64_t>();
      manifest.runs.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": malformed manifest: " + e.what());
  }
  return manifest;
}

void write_manifest(const RunManifest& manifest, const fs::path& path) {
  json runs = json::array();
  for (const auto& r : manifest.runs) {
    runs.push_back({{"run_id", r.run_id},
                    {"file", r.file.generic_string()},
                    {"dataset", r.dataset},
                    {"strategy", r.strategy},
                    {"classifier", r.classifier},
                    {"seed", r.seed}});
  }
  const json doc{{"config", manifest.config_file.generic_string()},
                 {"results_csv", manifest.results_csv.generic_string()},
                 {"runs", std::move(runs)}};
  write_text(path, doc.dump(2) + "\n");
}

AppConfig apply_overrides(AppConfig config, const RunOverrides& overrides) {
  if (overrides.strategy) {
    try {
      config.strategies = {parse_strategy(*overrides.strategy)};
    } catch (const std::exception& e) {
      throw ConfigError("--strategy", e.what());
    }
  }
  if (overrides.seed) config.seeds = {*overrides.seed};
  return config;
}

RunManifest cmd_run(const fs::path& config_path, const RunOverrides& overrides, std::ostream& log) {
  const AppConfig config = apply_overrides(load_config_file(config_path), overrides);
  const LoadedData data = load_data(config.dataset);
  if (!data.train->fully_labeled()) {
    throw DataError(config.dataset.train.string() + ": simulated runs need a gold label on every training instance");
  }
  if (!data.test || !data.test->fully_labeled()) {
    throw DataError("dataset '" + config.dataset.name + "' has no gold-labeled test set");
  }
  config.base.validate(data.train->size());

  const fs::path out = overrides.out.value_or(fs::path("al_results"));
  fs::create_directories(out / "runs");

  log << "dataset " << config.dataset.name << ": " << data.train->size() << " train, " << data.test->size()
      << " test\n";
  log << "running " << config.strategies.size() * config.seeds.size() << " runs\n";
  const auto results = run_suite(config.base, config.strategies, config.seeds, data.train, data.test,
                                 SuiteOptions{config.parallelism});

  RunManifest manifest;
  manifest.dir = out;
  manifest.config_file = "config.json";
  manifest.results_csv = "results.csv";
  write_text(out / manifest.config_file, config_to_json(config).dump(2) + "\n");

  std::set<std::string> seen;
  for (const auto& result : results) {
    ManifestEntry entry;
    entry.run_id = run_id(result);
    if (!seen.insert(entry.run_id).second) throw ConfigError("loop.seeds", "duplicate run " + entry.run_id);
    entry.file = fs::path("runs") / (entry.run_id + ".json");
    entry.dataset = result.config.dataset_name;
    entry.strategy = std::string(to_string(result.config.strategy));
    entry.classifier = result.config.classifier.name();
    entry.seed = result.config.run_seed;
    write_text(out / entry.file, result_to_json(result).dump(2) + "\n");
    log << entry.run_id << ": final accuracy " << format_fixed(result.final_accuracy, 4) << ", auc "
        << format_fixed(result.auc, 4) << "\n";
    manifest.runs.push_back(std::move(entry));
  }

  std::ostringstream csv;
  write_results_csv(csv, results);
  write_text(out / manifest.results_csv, csv.str());
  write_manifest(manifest, out / "manifest.json");
  return manifest;
}

std::vector<fs::path> cmd_report(const fs::path& manifest_path, ReportFormat format,
                                 const std::optional<fs::path>& out_dir) {
  const RunManifest manifest = read_manifest(manifest_path);
  if (manifest.runs.empty()) throw std::runtime_error(manifest_path.string() + ": manifest lists no runs");

  std::vector<ExperimentResult> results;
  for (const auto& entry : manifest.runs) {
    const fs::path file = manifest.dir / entry.file;
    if (!fs::exists(file)) throw std::runtime_error("result file missing: " + file.string());
    try {
      results.push_back(result_from_json(read_json(file)));
    } catch (const json::exception& e) {
      throw std::runtime_error(file.string() + ": " + e.what());
    }
  }

  const fs::path out = out_dir.value_or(manifest.dir / "report");
  fs::create_directories(out);
  std::vector<fs::path> written;
  for (const auto& doc : render_report(results, format)) {
    write_text(out / doc.name, doc.content);
    written.push_back(out / doc.name);
  }
  return written;
}

std::pair<std::string, int> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw std::invalid_argument("address must be HOST:PORT, got '" + address + "'");
  }
  std::string host = address.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(address.substr(colon + 1), &used);
    if (used != address.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid port in '" + address + "'");
  }
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range in '" + address + "'");
  return {host, port};
}

}  // namespace al
