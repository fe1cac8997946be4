#include <csignal>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "al/service.hpp"
#include "al/synthetic.hpp"

namespace {

int serve(const std::string& address, const std::string& store_dir) {
  const auto [host, port] = al::parse_address(address);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto store = std::make_shared<al::SessionStore>(store_dir);
  for (const auto& [id, detail] : store->corrupt()) {
    std::cerr << "al: refusing session " << id << ": " << detail << "\n";
  }
  al::HttpService service(store);
  const int bound = service.bind(host, port);
  if (bound < 0) {
    std::cerr << "al: cannot bind " << address << "\n";
    return 1;
  }
  std::cerr << "al: serving " << store->list().size() << " sessions on " << host << ":" << bound << "\n";

  std::jthread waiter([&service, signals] {
    int received = 0;
    sigwait(&signals, &received);
    service.stop();
  });
  const bool ok = service.listen();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pool-based active learning for text classification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string strategy;
  std::uint64_t seed = 0;
  std::string out;
  auto* run = app.add_subcommand("run", "Run the configured strategies x seeds");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* strategy_opt = run->add_option("--strategy", strategy, "Override the strategies with one of pe, bt, lc, ca, rs");
  auto* seed_opt = run->add_option("--seed", seed, "Override the seeds with a single seed");
  auto* out_opt = run->add_option("--out", out, "Output directory (default ./al_results)");

  std::string manifest;
  std::string format;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Render tables from a run manifest");
  report->add_option("--manifest", manifest, "manifest.json written by 'al run'")->required();
  report->add_option("--format", format, "csv or markdown")->required();
  auto* report_out_opt = report->add_option("--out", report_out, "Output directory (default <manifest dir>/report)");

  std::string address;
  std::string store_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Serve labeling sessions over HTTP");
  serve_cmd->add_option("--addr", address, "HOST:PORT")->required();
  serve_cmd->add_option("--store", store_dir, "Session store directory")->required();

  al::SyntheticSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic separable text dataset as JSONL");
  synth->add_option("--out", synth_out, "Output file")->required();
  synth->add_option("--size", synth_spec.size, "Number of instances");
  synth->add_option("--classes", synth_spec.num_classes, "Number of classes");
  synth->add_option("--seed", synth_spec.seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      al::RunOverrides overrides;
      if (*strategy_opt) overrides.strategy = strategy;
      if (*seed_opt) overrides.seed = seed;
      if (*out_opt) overrides.out = out;
      const auto result = al::cmd_run(config_path, overrides, std::cerr);
      std::cout << (result.dir / "manifest.json").string() << "\n";
    } else if (*report) {
      std::optional<std::filesystem::path> dir;
      if (*report_out_opt) dir = report_out;
      for (const auto& file : al::cmd_report(manifest, al::parse_report_format(format), dir)) {
        std::cout << file.string() << "\n";
      }
    } else if (*serve_cmd) {
      return serve(address, store_dir);
    } else if (*synth) {
      al::write_jsonl(al::make_synthetic_dataset(synth_spec), synth_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "al: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
