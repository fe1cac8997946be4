#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "al/classifier.hpp"
#include "al/corpus.hpp"
#include "al/features.hpp"
#include "al/strategies.hpp"

namespace al {

enum class ClassifierKind { kBuiltin, kExternal };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::kBuiltin;
  std::string command;  // external only

  std::string name() const { return kind == ClassifierKind::kBuiltin ? "builtin" : "external"; }
};

struct ExperimentConfig {
  std::string dataset_name = "dataset";
  Strategy strategy = Strategy::kBreakingTies;
  CAConfig ca;
  ClassifierSpec classifier;
  TrainConfig train;
  VectorizerConfig vectorizer;
  std::size_t seed_set_size = 25;
  SeedMode seed_mode = SeedMode::kRandom;
  std::size_t num_iterations = 20;
  std::size_t query_size = 25;
  std::uint64_t run_seed = 0;
  bool auc_includes_seed_model = true;

  /// Checks counts and nested configs against a training pool of this size.
  void validate(std::size_t pool_size) const;
};

struct IterationRecord {
  std::size_t iteration = 0;  // 0 is the seed model
  std::size_t num_labeled = 0;
  double test_accuracy = 0.0;  // NaN without a gold-labeled test set
  double val_loss = 0.0;
  double query_seconds = 0.0;
  std::vector<std::size_t> queried_ids;  // the seed set for iteration 0
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<IterationRecord> records;
  double final_accuracy = 0.0;
  double auc = 0.0;
};

/// Label source for a simulated or scripted run.
class Oracle {
 public:
  virtual ~Oracle() = default;
  /// Class indices for `ids`, in order.
  virtual std::vector<std::size_t> label(std::span<const std::size_t> ids) = 0;
};

enum class Phase { kSeed, kQuery, kLabel, kTrain, kEvaluate };

/// Instrumentation for tests and telemetry. `clock` returns seconds and
/// defaults to a steady clock.
struct LoopHooks {
  std::function<double()> clock;
  std::function<void(Phase, bool begin, std::size_t iteration)> on_phase;
};

/// Builds the trainer named by the spec. Builtin trainers share `vectorizer`.
std::unique_ptr<Trainer> make_trainer(const ClassifierSpec& spec, std::shared_ptr<const Vectorizer> vectorizer);

/// Step-wise pool-based active-learning state machine: expose a batch, accept
/// its labels, retrain from scratch, evaluate, query the next batch. Used both
/// by run_experiment and by interactive sessions.
class ActiveLearner {
 public:
  /// `test` may be null. With a null trainer one is built from
  /// config.classifier with a vectorizer fitted on the training pool.
  ActiveLearner(ExperimentConfig config, std::shared_ptr<const Dataset> train,
                std::shared_ptr<const Dataset> test, std::unique_ptr<Trainer> trainer = nullptr,
                LoopHooks hooks = {});

  const ExperimentConfig& config() const { return config_; }
  const Dataset& train() const { return *train_; }
  const Pool& pool() const { return pool_; }
  const std::vector<IterationRecord>& records() const { return records_; }
  bool finished() const { return finished_; }
  /// Iteration whose labels are awaited (0 = seed set).
  std::size_t pending_iteration() const { return records_.size(); }
  /// Empty once finished.
  const std::vector<std::size_t>& pending() const { return pending_; }
  const Model* model() const { return model_.get(); }

  /// Labels for pending() in the same order. Trains, evaluates, records, and
  /// queries the next batch unless the run is complete.
  void submit(std::span<const std::size_t> labels);

  ExperimentResult result() const;

 private:
  void train_and_record();
  void query_next();
  double now() const;
  void phase(Phase p, bool begin) const;

  ExperimentConfig config_;
  std::shared_ptr<const Dataset> train_;
  std::shared_ptr<const Dataset> test_;
  std::unique_ptr<Trainer> trainer_;
  LoopHooks hooks_;
  Pool pool_;
  std::unique_ptr<Model> model_;
  std::vector<IterationRecord> records_;
  std::vector<std::size_t> pending_;
  double pending_query_seconds_ = 0.0;
  bool finished_ = false;
};

/// Runs the full protocol against an oracle.
ExperimentResult run_experiment(const ExperimentConfig& config, std::shared_ptr<const Dataset> train,
                                std::shared_ptr<const Dataset> test, Oracle& oracle, LoopHooks hooks = {});

/// Convenience overload with a gold-label oracle over `train`.
ExperimentResult run_experiment(const ExperimentConfig& config, std::shared_ptr<const Dataset> train,
                                std::shared_ptr<const Dataset> test, LoopHooks hooks = {});

struct SuiteOptions {
  std::size_t parallelism = 1;
};

/// strategies x seeds with gold-label oracles; results ordered by
/// (strategy, seed). Every strategy sees the same seed set for a given seed.
std::vector<ExperimentResult> run_suite(const ExperimentConfig& base, std::span<const Strategy> strategies,
                                        std::span<const std::uint64_t> seeds, std::shared_ptr<const Dataset> train,
                                        std::shared_ptr<const Dataset> test, SuiteOptions options = {});

/// Seeds of the independent random streams of a run.
namespace seed_stream {
inline constexpr std::uint64_t kSeedSet = 1;
inline constexpr std::uint64_t kTrain = 2;
inline constexpr std::uint64_t kQuery = 3;
}  // namespace seed_stream

}  // namespace al
