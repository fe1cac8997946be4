#include "al/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace al {

ClassDistribution::ClassDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("class distribution is empty");
  double sum = 0.0;
  for (const double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("class distribution has a negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("class distribution sums to " + std::to_string(sum));
  }
}

std::size_t ClassDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

void TrainConfig::validate() const {
  if (max_epochs == 0) throw std::invalid_argument("max_epochs must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(l2_penalty >= 0.0)) throw std::invalid_argument("l2_penalty must be non-negative");
  if (learning_rate * l2_penalty >= 1.0) throw std::invalid_argument("learning_rate * l2_penalty must be below 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must lie in (0, 1)");
  if (early_stop_patience == 0) throw std::invalid_argument("early_stop_patience must be positive");
  if (!(early_stop_accuracy > 0.0 && early_stop_accuracy <= 1.0)) {
    throw std::invalid_argument("early_stop_accuracy must lie in (0, 1]");
  }
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kMaxEpochs: return "max_epochs";
    case StopReason::kAccuracy: return "accuracy";
    case StopReason::kPatience: return "patience";
    case StopReason::kExternal: return "external";
  }
  return "unknown";
}

Evaluation evaluate(const Model& model, const Dataset& test) {
  if (test.size() == 0) throw std::invalid_argument("cannot evaluate on an empty test set");
  for (const auto& x : test.instances()) {
    if (!x.gold_label) throw std::invalid_argument("test instance " + std::to_string(x.id) + " has no gold label");
  }
  const auto predictions = model.predict_proba(test.instances());
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::size_t gold = *test.at(i).gold_label;
    if (predictions[i].argmax() == gold) ++correct;
    loss -= std::log(std::max(predictions[i][gold], 1e-12));
  }
  const auto n = static_cast<double>(predictions.size());
  return {static_cast<double>(correct) / n, loss / n};
}

void check_training_set(std::span<const LabeledInstance> examples, const LabelSchema& schema) {
  if (examples.empty()) throw ClassifierError("cannot train on an empty example list");
  if (examples.size() < schema.num_classes()) {
    throw ClassifierError("need at least " + std::to_string(schema.num_classes()) + " examples, got " +
                          std::to_string(examples.size()));
  }
  std::set<std::size_t> labels;
  for (const auto& e : examples) {
    if (e.label >= schema.num_classes()) throw ClassifierError("example label out of range");
    labels.insert(e.label);
  }
  if (labels.size() < 2) throw ClassifierError("training set contains a single class");
}

}  // namespace al
