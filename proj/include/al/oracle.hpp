#pragma once

#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "al/config.hpp"
#include "al/corpus.hpp"
#include "al/loop.hpp"
#include "json.hpp"

namespace al {

/// Gold labels of `ids`, in order. Throws DataError for an unlabeled id.
std::vector<std::size_t> simulated_label(const Dataset& dataset, std::span<const std::size_t> ids);

class SimulatedOracle final : public Oracle {
 public:
  explicit SimulatedOracle(std::shared_ptr<const Dataset> dataset) : dataset_(std::move(dataset)) {}
  std::vector<std::size_t> label(std::span<const std::size_t> ids) override {
    return simulated_label(*dataset_, ids);
  }

 private:
  std::shared_ptr<const Dataset> dataset_;
};

enum class SessionStatus { kAwaitingLabels, kTraining, kFinished, kFailed };

std::string_view to_string(SessionStatus status);

class SessionError : public std::runtime_error {
 public:
  enum class Code { kNotFound, kCorrupt, kInvalidConfig, kStaleBatch, kIncompleteLabels, kInvalidLabel, kStorage };

  SessionError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

std::string_view to_string(SessionError::Code code);

struct Batch {
  std::size_t batch_id = 0;
  std::vector<std::size_t> ids;
};

struct SubmittedLabel {
  std::size_t id = 0;
  std::size_t label = 0;
  friend bool operator==(const SubmittedLabel&, const SubmittedLabel&) = default;
};

struct SessionProgress {
  SessionStatus status = SessionStatus::kAwaitingLabels;
  std::size_t iteration = 0;  // id of the batch being labeled next
  std::size_t num_labeled = 0;
  std::size_t num_iterations = 0;
  std::vector<IterationRecord> records;
  bool has_accuracy = false;
  std::optional<Batch> pending;
  std::string error;  // set when status is kFailed
};

/// Interactive labeling run over one ActiveLearner. The seed set is the
/// first batch (batch id 0); batch t is the query of iteration t.
///
/// The directory holds config.json (snapshot), labels.jsonl (append-only,
/// one {batch_id, instance_id, label, timestamp} record per label) and
/// results.csv. Reopening a directory replays the log.
class Session {
 public:
  static std::shared_ptr<Session> create(const std::filesystem::path& dir, std::string id, const AppConfig& config);
  /// Throws SessionError(kCorrupt) when the directory cannot be replayed.
  static std::shared_ptr<Session> open(const std::filesystem::path& dir);
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }
  const LabelSchema& schema() const { return train_->schema(); }
  const Dataset& train() const { return *train_; }
  const AppConfig& config() const { return config_; }

  SessionProgress progress() const;
  std::optional<Batch> pending_batch() const;
  Pool pool() const;

  /// Validates, appends the labels to the log, then retrains and queries,
  /// in the background when `async`. Resubmitting an applied batch with the
  /// same labels is a no-op.
  SessionStatus submit_labels(std::size_t batch_id, std::span<const SubmittedLabel> labels, bool async);

  /// Blocks until no training is in progress.
  void wait_idle();

 private:
  Session(std::filesystem::path dir, std::string id, AppConfig config, LoadedData data);

  void append_log(std::size_t batch_id, std::span<const SubmittedLabel> labels) const;
  void replay();
  // Runs the learner step for a validated batch; takes no locks on entry.
  void train_batch(std::vector<std::size_t> labels);
  void refresh_snapshot_locked();

  std::filesystem::path dir_;
  std::string id_;
  AppConfig config_;
  std::shared_ptr<const Dataset> train_;
  std::shared_ptr<const Dataset> test_;
  std::unique_ptr<ActiveLearner> learner_;  // touched only by the thread owning kTraining

  mutable std::mutex mutex_;
  std::condition_variable idle_;
  SessionStatus status_ = SessionStatus::kAwaitingLabels;
  std::optional<Batch> pending_;
  std::vector<IterationRecord> records_;
  Pool pool_snapshot_{0};
  std::map<std::size_t, std::vector<SubmittedLabel>> applied_;
  std::string error_;
  std::mutex worker_mutex_;
  std::jthread worker_;
};

/// Directory of sessions, one subdirectory each. Sessions that fail to
/// replay at startup are refused individually; the rest are served.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root, bool async_training = true);

  /// Creates a session from a config document; relative paths resolve
  /// against the process working directory.
  std::shared_ptr<Session> create(const nlohmann::json& config);
  /// Throws SessionError kNotFound or kCorrupt.
  std::shared_ptr<Session> get(const std::string& id) const;
  std::vector<std::shared_ptr<Session>> list() const;
  std::map<std::string, std::string> corrupt() const;
  bool async_training() const { return async_training_; }

 private:
  std::filesystem::path root_;
  bool async_training_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::string> corrupt_;
};

}  // namespace al
