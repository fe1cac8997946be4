#include "al/external_classifier.hpp"

#include <csignal>
#include <cstring>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <thread>

extern char** environ;

namespace al {

using nlohmann::json;

ChildProcess::ChildProcess(const std::string& command) : command_(command) {
  // A dead child must surface as a write error, not kill the host.
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw ClassifierError("pipe() failed: " + std::string(std::strerror(errno)));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw ClassifierError("pipe() failed: " + std::string(std::strerror(errno)));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

  std::string shell = "/bin/sh";
  std::string flag = "-c";
  std::string cmd = command;
  char* argv[] = {shell.data(), flag.data(), cmd.data(), nullptr};
  const int rc = posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  close(in_pipe[0]);
  close(out_pipe[1]);
  if (rc != 0) {
    close(in_pipe[1]);
    close(out_pipe[0]);
    throw ClassifierError("cannot start external classifier '" + command + "': " + std::strerror(rc));
  }
  to_child_ = in_pipe[1];
  from_child_ = fdopen(out_pipe[0], "r");
}

ChildProcess::~ChildProcess() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_) std::fclose(from_child_);
  if (pid_ <= 0) return;
  int status = 0;
  for (int i = 0; i < 200; ++i) {
    if (waitpid(pid_, &status, WNOHANG) != 0) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  kill(pid_, SIGKILL);
  waitpid(pid_, &status, 0);
}

json ChildProcess::request(const json& message) {
  std::string line = message.dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ClassifierError("external classifier '" + command_ + "' is not accepting input: " + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }

  std::string response;
  char buffer[65536];
  while (std::fgets(buffer, sizeof buffer, from_child_)) {
    response += buffer;
    if (!response.empty() && response.back() == '\n') break;
  }
  if (response.empty()) throw ClassifierError("external classifier '" + command_ + "' closed its output");

  json reply;
  try {
    reply = json::parse(response);
  } catch (const json::parse_error& e) {
    throw ClassifierError("external classifier sent malformed JSON: " + std::string(e.what()));
  }
  if (!reply.is_object() || !reply.contains("ok") || !reply["ok"].is_boolean()) {
    throw ClassifierError("external classifier reply lacks boolean 'ok'");
  }
  if (!reply["ok"].get<bool>()) {
    const auto error = reply.value("error", json("unspecified error"));
    throw ClassifierError("external classifier failed on '" + message.value("op", "") +
                          "': " + (error.is_string() ? error.get<std::string>() : error.dump()));
  }
  return reply;
}

namespace {

class ExternalModel final : public Model {
 public:
  ExternalModel(std::shared_ptr<ExternalTrainer::Channel> channel, std::uint64_t generation,
                std::size_t num_classes, TrainTelemetry telemetry)
      : channel_(std::move(channel)),
        generation_(generation),
        num_classes_(num_classes),
        telemetry_(std::move(telemetry)) {}

  std::size_t num_classes() const override { return num_classes_; }
  const TrainTelemetry& telemetry() const override { return telemetry_; }

  std::vector<ClassDistribution> predict_proba(std::span<const Instance> instances) const override {
    const auto reply = call("predict_proba", instances);
    const auto probs = reply.find("probs");
    if (probs == reply.end() || !probs->is_array() || probs->size() != instances.size()) {
      throw ClassifierError("external classifier: 'probs' must hold one row per text");
    }
    std::vector<ClassDistribution> out;
    out.reserve(instances.size());
    for (const auto& row : *probs) {
      auto values = row.get<std::vector<double>>();
      if (values.size() != num_classes_) throw ClassifierError("external classifier: probability row has wrong length");
      try {
        out.emplace_back(std::move(values));
      } catch (const std::invalid_argument& e) {
        throw ClassifierError(std::string("external classifier: ") + e.what());
      }
    }
    return out;
  }

  std::vector<SparseVector> embed(std::span<const Instance> instances) const override {
    const auto reply = call("embed", instances);
    const auto embeddings = reply.find("embeddings");
    if (embeddings == reply.end() || !embeddings->is_array() || embeddings->size() != instances.size()) {
      throw ClassifierError("external classifier: 'embeddings' must hold one entry per text");
    }
    std::vector<SparseVector> out;
    out.reserve(instances.size());
    try {
      for (const auto& e : *embeddings) {
        if (e.is_array()) {
          out.push_back(SparseVector::from_dense(e.get<std::vector<double>>()));
        } else {
          const auto dims = e.at("dims").get<std::vector<std::uint32_t>>();
          const auto weights = e.at("weights").get<std::vector<double>>();
          if (dims.size() != weights.size()) throw ClassifierError("external classifier: dims/weights length mismatch");
          std::vector<SparseVector::Entry> entries;
          for (std::size_t i = 0; i < dims.size(); ++i) entries.push_back({dims[i], weights[i]});
          out.emplace_back(std::move(entries));
        }
      }
    } catch (const json::exception& e) {
      throw ClassifierError(std::string("external classifier: bad embedding: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ClassifierError(std::string("external classifier: bad embedding: ") + e.what());
    }
    return out;
  }

 private:
  json call(const char* op, std::span<const Instance> instances) const {
    std::lock_guard lock(channel_->mutex);
    if (channel_->generation != generation_) {
      throw ClassifierError("external model was superseded by a later fit");
    }
    json texts = json::array();
    for (const auto& x : instances) texts.push_back(x.text);
    return channel_->process.request({{"op", op}, {"texts", std::move(texts)}});
  }

  std::shared_ptr<ExternalTrainer::Channel> channel_;
  std::uint64_t generation_;
  std::size_t num_classes_;
  TrainTelemetry telemetry_;
};

}  // namespace

ExternalTrainer::ExternalTrainer(std::string command) : command_(std::move(command)) {
  if (command_.empty()) throw ClassifierError("external classifier command is empty");
}

std::unique_ptr<Model> ExternalTrainer::fit(std::span<const LabeledInstance> examples, const LabelSchema& schema,
                                            const TrainConfig& config) {
  check_training_set(examples, schema);
  if (!channel_) channel_ = std::make_shared<Channel>(command_);

  json payload = json::array();
  for (const auto& e : examples) payload.push_back({{"text", e.instance.text}, {"label", e.label}});
  const json message = {{"op", "fit"},
                        {"examples", std::move(payload)},
                        {"num_classes", schema.num_classes()},
                        {"class_names", schema.class_names()},
                        {"seed", config.seed}};
  std::lock_guard lock(channel_->mutex);
  ++channel_->generation;
  const auto reply = channel_->process.request(message);

  TrainTelemetry telemetry;
  telemetry.stop_reason = StopReason::kExternal;
  telemetry.val_loss = std::nan("");
  if (const auto v = reply.find("val_loss"); v != reply.end() && v->is_number()) telemetry.val_loss = v->get<double>();
  if (const auto v = reply.find("epochs"); v != reply.end() && v->is_number_unsigned()) {
    telemetry.epochs_run = telemetry.best_epoch = v->get<std::size_t>();
  }
  return std::make_unique<ExternalModel>(channel_, channel_->generation, schema.num_classes(), std::move(telemetry));
}

}  // namespace al
