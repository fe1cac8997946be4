#include "al/softmax_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "al/rng.hpp"

namespace al {

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - top);
    sum += out[k];
  }
  for (auto& p : out) p /= sum;
  return out;
}

std::vector<double> logits(const SoftmaxParams& params, const SparseVector& x) {
  std::vector<double> z(params.bias);
  for (std::size_t k = 0; k < params.num_classes; ++k) {
    for (const auto& e : x.entries()) {
      if (e.dim < params.dimension) z[k] += params.weight(k, e.dim) * e.weight;
    }
  }
  return z;
}

double softmax_objective(const SoftmaxParams& params, std::span<const SparseVector> xs,
                         std::span<const std::size_t> ys, double l2, SoftmaxParams* gradient) {
  if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("softmax_objective: bad batch");
  const auto n = static_cast<double>(xs.size());
  if (gradient) *gradient = SoftmaxParams(params.num_classes, params.dimension);
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto p = softmax(logits(params, xs[i]));
    loss -= std::log(p[ys[i]]);
    if (!gradient) continue;
    for (std::size_t k = 0; k < params.num_classes; ++k) {
      const double residual = (p[k] - (k == ys[i] ? 1.0 : 0.0)) / n;
      gradient->bias[k] += residual;
      for (const auto& e : xs[i].entries()) gradient->weight(k, e.dim) += residual * e.weight;
    }
  }
  double sq = 0.0;
  for (const double w : params.weights) sq += w * w;
  if (gradient) {
    for (std::size_t j = 0; j < params.weights.size(); ++j) gradient->weights[j] += l2 * params.weights[j];
  }
  return loss / n + 0.5 * l2 * sq;
}

SoftmaxRegression::SoftmaxRegression(std::shared_ptr<const Vectorizer> vectorizer, SoftmaxParams params,
                                     TrainTelemetry telemetry)
    : vectorizer_(std::move(vectorizer)), params_(std::move(params)), telemetry_(std::move(telemetry)) {
  if (!vectorizer_) throw std::invalid_argument("softmax regression needs a vectorizer");
  for (const double w : params_.weights) {
    if (!std::isfinite(w)) throw ClassifierError("non-finite weight");
  }
  for (const double b : params_.bias) {
    if (!std::isfinite(b)) throw ClassifierError("non-finite bias");
  }
}

ClassDistribution SoftmaxRegression::predict_vector(const SparseVector& x) const {
  return ClassDistribution(softmax(logits(params_, x)));
}

std::vector<ClassDistribution> SoftmaxRegression::predict_proba(std::span<const Instance> instances) const {
  std::vector<ClassDistribution> out;
  out.reserve(instances.size());
  for (const auto& x : instances) out.push_back(predict_vector(vectorizer_->transform(x.text)));
  return out;
}

std::vector<SparseVector> SoftmaxRegression::embed(std::span<const Instance> instances) const {
  std::vector<SparseVector> out;
  out.reserve(instances.size());
  for (const auto& x : instances) out.push_back(vectorizer_->transform(x.text));
  return out;
}

SoftmaxTrainer::SoftmaxTrainer(std::shared_ptr<const Vectorizer> vectorizer, VectorizerConfig vectorizer_config)
    : vectorizer_(std::move(vectorizer)), vectorizer_config_(vectorizer_config) {}

namespace {

struct Batch {
  std::vector<SparseVector> xs;
  std::vector<std::size_t> ys;
};

// Weights are held as scale * raw so that L2 decay costs O(1) per step.
class ScaledParams {
 public:
  ScaledParams(std::size_t classes, std::size_t dim) : raw_(classes, dim) {}

  std::vector<double> logits(const SparseVector& x) const {
    std::vector<double> z(raw_.bias);
    for (std::size_t k = 0; k < raw_.num_classes; ++k) {
      double s = 0.0;
      for (const auto& e : x.entries()) s += raw_.weight(k, e.dim) * e.weight;
      z[k] += scale_ * s;
    }
    return z;
  }

  // One gradient step on the mean cross-entropy of the batch members.
  void step(const std::vector<const SparseVector*>& xs, const std::vector<std::size_t>& ys, double lr,
            double l2) {
    const auto n = static_cast<double>(xs.size());
    const std::size_t c = raw_.num_classes;
    std::vector<std::vector<double>> residuals(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      auto p = softmax(logits(*xs[i]));
      p[ys[i]] -= 1.0;
      residuals[i] = std::move(p);
    }
    scale_ *= 1.0 - lr * l2;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t k = 0; k < c; ++k) {
        const double g = residuals[i][k] / n;
        raw_.bias[k] -= lr * g;
        for (const auto& e : xs[i]->entries()) raw_.weight(k, e.dim) -= lr * g * e.weight / scale_;
      }
    }
    if (scale_ < 1e-9) fold();
  }

  SoftmaxParams materialize() const {
    SoftmaxParams out = raw_;
    for (auto& w : out.weights) w *= scale_;
    return out;
  }

 private:
  void fold() {
    for (auto& w : raw_.weights) w *= scale_;
    scale_ = 1.0;
  }

  SoftmaxParams raw_;
  double scale_ = 1.0;
};

}  // namespace

std::unique_ptr<Model> SoftmaxTrainer::fit(std::span<const LabeledInstance> examples, const LabelSchema& schema,
                                           const TrainConfig& config) {
  check_training_set(examples, schema);
  config.validate();

  auto vectorizer = vectorizer_;
  if (!vectorizer) {
    std::vector<std::string> texts;
    for (const auto& e : examples) texts.push_back(e.instance.text);
    vectorizer = std::make_shared<const Vectorizer>(Vectorizer::fit(texts, vectorizer_config_));
  }

  const std::size_t n = examples.size();
  const auto wanted_val = static_cast<std::size_t>(std::lround(config.val_fraction * static_cast<double>(n)));
  const std::size_t n_val = std::clamp<std::size_t>(wanted_val, 1, n - 1);

  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));

  std::vector<SparseVector> features;
  features.reserve(n);
  for (const auto& e : examples) features.push_back(vectorizer->transform(e.instance.text));

  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  const std::size_t c = schema.num_classes();
  ScaledParams params(c, vectorizer->dimension());
  SoftmaxParams best = params.materialize();
  TrainTelemetry telemetry;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span(train_idx));
    for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
      const std::size_t end = std::min(train_idx.size(), start + config.batch_size);
      std::vector<const SparseVector*> xs;
      std::vector<std::size_t> ys;
      for (std::size_t i = start; i < end; ++i) {
        xs.push_back(&features[train_idx[i]]);
        ys.push_back(examples[train_idx[i]].label);
      }
      params.step(xs, ys, config.learning_rate, config.l2_penalty);
    }

    double loss = 0.0;
    std::size_t correct = 0;
    for (const auto i : val_idx) {
      const auto p = softmax(params.logits(features[i]));
      const std::size_t gold = examples[i].label;
      loss -= std::log(std::max(p[gold], 1e-12));
      if (static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) == gold) ++correct;
    }
    loss /= static_cast<double>(n_val);
    const double accuracy = static_cast<double>(correct) / static_cast<double>(n_val);
    telemetry.epochs_run = epoch;
    telemetry.val_loss_history.push_back(loss);
    telemetry.val_accuracy_history.push_back(accuracy);

    if (loss < best_loss) {
      best_loss = loss;
      best = params.materialize();
      telemetry.best_epoch = epoch;
      telemetry.val_loss = loss;
      telemetry.val_accuracy = accuracy;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (accuracy > config.early_stop_accuracy) {
      telemetry.stop_reason = StopReason::kAccuracy;
      break;
    }
    if (since_improvement >= config.early_stop_patience) {
      telemetry.stop_reason = StopReason::kPatience;
      break;
    }
  }
  return std::make_unique<SoftmaxRegression>(std::move(vectorizer), std::move(best), std::move(telemetry));
}

}  // namespace al
