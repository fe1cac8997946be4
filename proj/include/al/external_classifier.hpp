#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include "al/classifier.hpp"
#include "json.hpp"

namespace al {

/// Line-delimited JSON channel to a child process started with /bin/sh -c.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  /// Sends one request line and reads one response line. Throws
  /// ClassifierError on I/O failure, malformed JSON or {"ok": false}.
  nlohmann::json request(const nlohmann::json& message);

 private:
  std::string command_;
  int pid_ = -1;
  int to_child_ = -1;
  std::FILE* from_child_ = nullptr;
};

/// Trainer backed by an external process speaking the adapter protocol:
///   {"op":"fit","examples":[{"text":..,"label":k}],"num_classes":c,"seed":s,...}
///   {"op":"predict_proba","texts":[..]} -> {"ok":true,"probs":[[..]]}
///   {"op":"embed","texts":[..]}         -> {"ok":true,"embeddings":[..]}
/// Embeddings are dense arrays or {"dims":[..],"weights":[..]} objects.
/// The process is started on the first fit and reused; each fit invalidates
/// models returned by earlier fits.
class ExternalTrainer final : public Trainer {
 public:
  explicit ExternalTrainer(std::string command);

  std::unique_ptr<Model> fit(std::span<const LabeledInstance> examples, const LabelSchema& schema,
                             const TrainConfig& config) override;
  std::string name() const override { return "external"; }

  struct Channel {
    ChildProcess process;
    std::mutex mutex;
    std::uint64_t generation = 0;
    explicit Channel(const std::string& command) : process(command) {}
  };

 private:
  std::string command_;
  std::shared_ptr<Channel> channel_;
};

}  // namespace al
