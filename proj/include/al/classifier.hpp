#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "al/corpus.hpp"
#include "al/features.hpp"

namespace al {

/// Raised by classifier backends (bad input, failed training, adapter errors).
class ClassifierError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Predicted class distribution. Entries are >= 0 and sum to 1 within 1e-6.
class ClassDistribution {
 public:
  explicit ClassDistribution(std::vector<double> probs);

  std::span<const double> probs() const { return probs_; }
  std::size_t num_classes() const { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }
  /// Index of the largest entry, lowest index on ties.
  std::size_t argmax() const;

  friend bool operator==(const ClassDistribution&, const ClassDistribution&) = default;

 private:
  std::vector<double> probs_;
};

struct TrainConfig {
  std::size_t max_epochs = 50;
  double learning_rate = 1.0;
  double l2_penalty = 1e-4;
  std::size_t batch_size = 1;
  double val_fraction = 0.10;
  std::size_t early_stop_patience = 5;
  double early_stop_accuracy = 0.98;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

enum class StopReason { kMaxEpochs, kAccuracy, kPatience, kExternal };

std::string_view to_string(StopReason reason);

struct TrainTelemetry {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based; the returned parameters come from here
  double val_loss = 0.0;       // at best_epoch
  double val_accuracy = 0.0;   // at best_epoch
  StopReason stop_reason = StopReason::kMaxEpochs;
  std::vector<double> val_loss_history;
  std::vector<double> val_accuracy_history;
};

struct LabeledInstance {
  Instance instance;
  std::size_t label = 0;
};

/// A trained probabilistic classifier. Immutable once returned by a Trainer.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::size_t num_classes() const = 0;
  virtual std::vector<ClassDistribution> predict_proba(std::span<const Instance> instances) const = 0;
  /// Representation used for neighbourhood search.
  virtual std::vector<SparseVector> embed(std::span<const Instance> instances) const = 0;
  virtual const TrainTelemetry& telemetry() const = 0;
};

/// Trains a fresh model from scratch on each call.
class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual std::unique_ptr<Model> fit(std::span<const LabeledInstance> examples, const LabelSchema& schema,
                                     const TrainConfig& config) = 0;
  virtual std::string name() const = 0;
};

struct Evaluation {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// Argmax accuracy and mean cross-entropy (probabilities clamped at 1e-12).
Evaluation evaluate(const Model& model, const Dataset& test);

/// Shared precondition check for all trainers: non-empty, at least c
/// examples, at least two distinct labels, labels in range.
void check_training_set(std::span<const LabeledInstance> examples, const LabelSchema& schema);

}  // namespace al
