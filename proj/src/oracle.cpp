#include "al/oracle.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "al/results_io.hpp"
#include "al/rng.hpp"

namespace al {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::size_t> simulated_label(const Dataset& dataset, std::span<const std::size_t> ids) {
  std::vector<std::size_t> labels;
  labels.reserve(ids.size());
  for (const auto id : ids) {
    if (id >= dataset.size()) throw DataError("instance " + std::to_string(id) + " does not exist");
    const auto& gold = dataset.at(id).gold_label;
    if (!gold) throw DataError("instance " + std::to_string(id) + " has no gold label");
    labels.push_back(*gold);
  }
  return labels;
}

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::kAwaitingLabels: return "awaiting_labels";
    case SessionStatus::kTraining: return "training";
    case SessionStatus::kFinished: return "finished";
    case SessionStatus::kFailed: return "failed";
  }
  return "unknown";
}

std::string_view to_string(SessionError::Code code) {
  switch (code) {
    case SessionError::Code::kNotFound: return "not_found";
    case SessionError::Code::kCorrupt: return "corrupt_session";
    case SessionError::Code::kInvalidConfig: return "invalid_config";
    case SessionError::Code::kStaleBatch: return "stale_batch";
    case SessionError::Code::kIncompleteLabels: return "incomplete_labels";
    case SessionError::Code::kInvalidLabel: return "invalid_label";
    case SessionError::Code::kStorage: return "storage_error";
  }
  return "error";
}

namespace {

constexpr const char* kConfigFile = "config.json";
constexpr const char* kLabelLog = "labels.jsonl";
constexpr const char* kResultsFile = "results.csv";

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::string join_ids(const std::vector<std::size_t>& ids) {
  std::string out;
  for (const auto id : ids) out += (out.empty() ? "" : ", ") + std::to_string(id);
  return out;
}

ExperimentConfig session_experiment(const AppConfig& config) {
  ExperimentConfig experiment = config.base;
  experiment.strategy = config.strategies.front();
  experiment.run_seed = config.seeds.front();
  return experiment;
}

std::vector<SubmittedLabel> sorted_by_id(std::span<const SubmittedLabel> labels) {
  std::vector<SubmittedLabel> out(labels.begin(), labels.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

}  // namespace

Session::Session(fs::path dir, std::string id, AppConfig config, LoadedData data)
    : dir_(std::move(dir)),
      id_(std::move(id)),
      config_(std::move(config)),
      train_(std::move(data.train)),
      test_(std::move(data.test)) {
  learner_ = std::make_unique<ActiveLearner>(session_experiment(config_), train_, test_);
  std::lock_guard lock(mutex_);
  refresh_snapshot_locked();
}

Session::~Session() = default;

std::shared_ptr<Session> Session::create(const fs::path& dir, std::string id, const AppConfig& config) {
  std::shared_ptr<Session> session;
  try {
    session.reset(new Session(dir, std::move(id), config, load_data(config.dataset)));
  } catch (const std::exception& e) {
    throw SessionError(SessionError::Code::kInvalidConfig, e.what());
  }
  std::ofstream out(dir / kConfigFile);
  out << config_to_json(config).dump(2) << '\n';
  if (!out) throw SessionError(SessionError::Code::kStorage, "cannot write " + (dir / kConfigFile).string());
  return session;
}

std::shared_ptr<Session> Session::open(const fs::path& dir) {
  try {
    auto config = load_config_file(dir / kConfigFile);
    auto data = load_data(config.dataset);
    std::shared_ptr<Session> session(new Session(dir, dir.filename().string(), std::move(config), std::move(data)));
    session->replay();
    return session;
  } catch (const SessionError&) {
    throw;
  } catch (const std::exception& e) {
    throw SessionError(SessionError::Code::kCorrupt, "session " + dir.filename().string() + ": " + e.what());
  }
}

void Session::refresh_snapshot_locked() {
  records_ = learner_->records();
  pool_snapshot_ = learner_->pool();
  if (learner_->finished()) {
    status_ = SessionStatus::kFinished;
    pending_.reset();
  } else {
    status_ = SessionStatus::kAwaitingLabels;
    pending_ = Batch{learner_->pending_iteration(), learner_->pending()};
  }
}

SessionProgress Session::progress() const {
  std::lock_guard lock(mutex_);
  SessionProgress p;
  p.status = status_;
  p.iteration = records_.size();
  p.num_labeled = pool_snapshot_.labeled().size();
  p.num_iterations = config_.base.num_iterations;
  p.records = records_;
  p.has_accuracy = test_ && test_->fully_labeled();
  p.pending = pending_;
  p.error = error_;
  return p;
}

std::optional<Batch> Session::pending_batch() const {
  std::lock_guard lock(mutex_);
  return pending_;
}

Pool Session::pool() const {
  std::lock_guard lock(mutex_);
  return pool_snapshot_;
}

void Session::append_log(std::size_t batch_id, std::span<const SubmittedLabel> labels) const {
  std::string payload;
  const auto timestamp = utc_timestamp();
  for (const auto& l : labels) {
    payload += json{{"batch_id", batch_id}, {"instance_id", l.id}, {"label", l.label}, {"timestamp", timestamp}}.dump();
    payload += '\n';
  }
  const auto path = dir_ / kLabelLog;
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw SessionError(SessionError::Code::kStorage, "cannot open " + path.string() + ": " + std::strerror(errno));
  std::size_t written = 0;
  while (written < payload.size()) {
    const ssize_t n = ::write(fd, payload.data() + written, payload.size() - written);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      ::close(fd);
      throw SessionError(SessionError::Code::kStorage, "cannot append to " + path.string());
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

SessionStatus Session::submit_labels(std::size_t batch_id, std::span<const SubmittedLabel> labels, bool async) {
  std::vector<std::size_t> ordered;
  {
    std::lock_guard lock(mutex_);
    if (const auto it = applied_.find(batch_id); it != applied_.end()) {
      if (it->second == sorted_by_id(labels)) return status_;
      throw SessionError(SessionError::Code::kStaleBatch,
                         "batch " + std::to_string(batch_id) + " was already applied with different labels");
    }
    if (!pending_ || pending_->batch_id != batch_id) {
      const std::string expected =
          pending_ ? "pending batch is " + std::to_string(pending_->batch_id) : "no batch is pending";
      throw SessionError(SessionError::Code::kStaleBatch,
                         "batch " + std::to_string(batch_id) + " is not pending (" + expected + ")");
    }

    const std::size_t c = train_->num_classes();
    std::map<std::size_t, std::size_t> by_id;
    std::vector<std::size_t> unexpected;
    for (const auto& l : labels) {
      if (l.label >= c) {
        throw SessionError(SessionError::Code::kInvalidLabel,
                           "label " + std::to_string(l.label) + " for instance " + std::to_string(l.id) +
                               " is not a valid class index");
      }
      if (!by_id.emplace(l.id, l.label).second) {
        throw SessionError(SessionError::Code::kIncompleteLabels, "instance " + std::to_string(l.id) + " labeled twice");
      }
      if (std::find(pending_->ids.begin(), pending_->ids.end(), l.id) == pending_->ids.end()) unexpected.push_back(l.id);
    }
    if (!unexpected.empty()) {
      throw SessionError(SessionError::Code::kIncompleteLabels, "ids not in batch: " + join_ids(unexpected));
    }
    std::vector<std::size_t> missing;
    for (const auto id : pending_->ids) {
      if (const auto it = by_id.find(id); it == by_id.end()) {
        missing.push_back(id);
      } else {
        ordered.push_back(it->second);
      }
    }
    if (!missing.empty()) {
      throw SessionError(SessionError::Code::kIncompleteLabels, "missing ids: " + join_ids(missing));
    }

    append_log(batch_id, labels);
    applied_[batch_id] = sorted_by_id(labels);
    status_ = SessionStatus::kTraining;
    pending_.reset();
  }

  if (async) {
    std::lock_guard worker_lock(worker_mutex_);
    if (worker_.joinable()) worker_.join();
    worker_ = std::jthread([this, ordered = std::move(ordered)]() mutable { train_batch(std::move(ordered)); });
    return SessionStatus::kTraining;
  }
  train_batch(std::move(ordered));
  std::lock_guard lock(mutex_);
  return status_;
}

void Session::train_batch(std::vector<std::size_t> labels) {
  std::string failure;
  try {
    learner_->submit(labels);
  } catch (const std::exception& e) {
    failure = e.what();
  }
  {
    std::lock_guard lock(mutex_);
    if (failure.empty()) {
      refresh_snapshot_locked();
    } else {
      status_ = SessionStatus::kFailed;
      error_ = failure;
    }
  }
  if (failure.empty()) {
    std::ofstream out(dir_ / kResultsFile);
    const ExperimentResult result = learner_->result();
    write_results_csv(out, std::span(&result, 1));
  }
  idle_.notify_all();
}

void Session::wait_idle() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [this] { return status_ != SessionStatus::kTraining; });
}

void Session::replay() {
  const auto path = dir_ / kLabelLog;
  std::ifstream in(path);
  if (!in) return;

  std::map<std::size_t, std::vector<SubmittedLabel>> groups;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto entry = json::parse(line);
      groups[entry.at("batch_id").get<std::size_t>()].push_back(
          {entry.at("instance_id").get<std::size_t>(), entry.at("label").get<std::size_t>()});
    } catch (const json::exception& e) {
      // A torn final line is what a crash mid-append leaves behind.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw SessionError(SessionError::Code::kCorrupt,
                         path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }

  for (auto it = groups.begin(); it != groups.end(); ++it) {
    const bool last = std::next(it) == groups.end();
    const auto batch = pending_batch();
    if (!batch || batch->batch_id != it->first) {
      throw SessionError(SessionError::Code::kCorrupt, "label log batch " + std::to_string(it->first) +
                                                           " does not match the replayed state");
    }
    // Later entries for an id win; an earlier torn write may precede them.
    std::map<std::size_t, std::size_t> merged;
    for (const auto& l : it->second) merged[l.id] = l.label;
    std::vector<SubmittedLabel> labels;
    for (const auto& [id, label] : merged) labels.push_back({id, label});
    const bool complete = merged.size() == batch->ids.size() &&
                          std::all_of(batch->ids.begin(), batch->ids.end(), [&](auto id) { return merged.contains(id); });
    if (!complete) {
      if (last) break;
      throw SessionError(SessionError::Code::kCorrupt,
                         "label log batch " + std::to_string(it->first) + " is incomplete");
    }
    std::vector<std::size_t> ordered;
    for (const auto id : batch->ids) ordered.push_back(merged.at(id));
    {
      std::lock_guard lock(mutex_);
      applied_[it->first] = labels;
      status_ = SessionStatus::kTraining;
      pending_.reset();
    }
    train_batch(std::move(ordered));
    std::lock_guard lock(mutex_);
    if (status_ == SessionStatus::kFailed) throw SessionError(SessionError::Code::kCorrupt, error_);
  }
}

SessionStore::SessionStore(fs::path root, bool async_training)
    : root_(std::move(root)), async_training_(async_training) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw SessionError(SessionError::Code::kStorage, "cannot create session store " + root_.string());
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_directory()) continue;
    const auto id = entry.path().filename().string();
    try {
      sessions_[id] = Session::open(entry.path());
    } catch (const std::exception& e) {
      corrupt_[id] = e.what();
    }
  }
}

std::shared_ptr<Session> SessionStore::create(const json& config) {
  AppConfig parsed;
  try {
    parsed = parse_config(config, fs::current_path());
  } catch (const std::exception& e) {
    throw SessionError(SessionError::Code::kInvalidConfig, e.what());
  }

  std::random_device device;
  std::lock_guard lock(mutex_);
  fs::path dir;
  std::string id;
  // Random ids; a collision with an existing directory draws again.
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t bits = mix64((static_cast<std::uint64_t>(device()) << 32) ^ device());
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(bits));
    id = buffer;
    dir = root_ / id;
    std::error_code ec;
    if (fs::create_directory(dir, ec)) break;
    if (ec || attempt > 16) throw SessionError(SessionError::Code::kStorage, "cannot allocate a session directory");
  }
  try {
    auto session = Session::create(dir, id, parsed);
    sessions_[id] = session;
    return session;
  } catch (...) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    throw;
  }
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  if (const auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  if (const auto it = corrupt_.find(id); it != corrupt_.end()) {
    throw SessionError(SessionError::Code::kCorrupt, it->second);
  }
  throw SessionError(SessionError::Code::kNotFound, "no session '" + id + "'");
}

std::vector<std::shared_ptr<Session>> SessionStore::list() const {
  std::lock_guard lock(mutex_);
  std::vector<std::shared_ptr<Session>> out;
  for (const auto& [id, session] : sessions_) out.push_back(session);
  return out;
}

std::map<std::string, std::string> SessionStore::corrupt() const {
  std::lock_guard lock(mutex_);
  return corrupt_;
}

}  // namespace al
