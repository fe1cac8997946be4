#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "al/metrics.hpp"
#include "al/oracle.hpp"
#include "json.hpp"

namespace al {

struct RunOverrides {
  std::optional<std::string> strategy;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

struct ManifestEntry {
  std::string run_id;
  std::filesystem::path file;  // relative to the manifest directory
  std::string dataset;
  std::string strategy;
  std::string classifier;
  std::uint64_t seed = 0;
};

/// Index of a batch run's outputs: config snapshot, flat results CSV and one
/// JSON file per run.
struct RunManifest {
  std::filesystem::path dir;
  std::filesystem::path config_file;
  std::filesystem::path results_csv;
  std::vector<ManifestEntry> runs;
};

RunManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

/// Applies overrides to a parsed config file (flags win over file values).
AppConfig apply_overrides(AppConfig config, const RunOverrides& overrides);

/// Runs the configured suite and writes <out>/config.json, results.csv,
/// runs/<run_id>.json and manifest.json. Progress lines go to `log`.
RunManifest cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides, std::ostream& log);

/// Renders the report for every run in the manifest into `out_dir`
/// (default: <manifest dir>/report) and returns the written files.
std::vector<std::filesystem::path> cmd_report(const std::filesystem::path& manifest_path, ReportFormat format,
                                              const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// HTTP facade over a SessionStore:
///   POST /sessions                 config -> 201 {session_id}
///   GET  /sessions                 -> [{session_id, status, iteration, num_labeled}]
///   GET  /sessions/{id}/batch      -> {batch_id, instances:[{id,text}], class_names, status}
///   POST /sessions/{id}/labels     {batch_id, labels:[{id,label}]} -> {status}
///   GET  /sessions/{id}/progress   -> {iteration, num_labeled, curve, status}
/// Errors are {error, detail}; a label conflict returns 409 "stale_batch".
class HttpService {
 public:
  explicit HttpService(std::shared_ptr<SessionStore> store);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "HOST:PORT".
std::pair<std::string, int> parse_address(const std::string& address);

}  // namespace al
