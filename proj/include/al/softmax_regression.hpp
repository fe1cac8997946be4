#pragma once

#include <memory>
#include <span>
#include <vector>

#include "al/classifier.hpp"
#include "al/features.hpp"

namespace al {

/// Dense parameters of a multinomial logistic regression: weights are
/// row-major (num_classes x dimension).
struct SoftmaxParams {
  std::size_t num_classes = 0;
  std::size_t dimension = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  SoftmaxParams() = default;
  SoftmaxParams(std::size_t classes, std::size_t dim)
      : num_classes(classes), dimension(dim), weights(classes * dim, 0.0), bias(classes, 0.0) {}

  double& weight(std::size_t k, std::size_t d) { return weights[k * dimension + d]; }
  double weight(std::size_t k, std::size_t d) const { return weights[k * dimension + d]; }

  friend bool operator==(const SoftmaxParams&, const SoftmaxParams&) = default;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

std::vector<double> logits(const SoftmaxParams& params, const SparseVector& x);

/// Mean cross-entropy over the batch plus (l2/2)*|W|^2 (bias unpenalised).
/// When `gradient` is non-null it receives the analytic gradient.
double softmax_objective(const SoftmaxParams& params, std::span<const SparseVector> xs,
                         std::span<const std::size_t> ys, double l2, SoftmaxParams* gradient = nullptr);

class SoftmaxRegression final : public Model {
 public:
  SoftmaxRegression(std::shared_ptr<const Vectorizer> vectorizer, SoftmaxParams params,
                    TrainTelemetry telemetry = {});

  std::size_t num_classes() const override { return params_.num_classes; }
  std::vector<ClassDistribution> predict_proba(std::span<const Instance> instances) const override;
  std::vector<SparseVector> embed(std::span<const Instance> instances) const override;
  const TrainTelemetry& telemetry() const override { return telemetry_; }

  const SoftmaxParams& params() const { return params_; }
  const Vectorizer& vectorizer() const { return *vectorizer_; }
  ClassDistribution predict_vector(const SparseVector& x) const;

 private:
  std::shared_ptr<const Vectorizer> vectorizer_;
  SoftmaxParams params_;
  TrainTelemetry telemetry_;
};

/// Mini-batch gradient descent on softmax_objective from zero parameters with
/// a seeded validation hold-out and early stopping. Keeps the parameters of
/// the epoch with the lowest validation loss.
class SoftmaxTrainer final : public Trainer {
 public:
  /// With a null vectorizer, one is fitted on the training texts per call.
  explicit SoftmaxTrainer(std::shared_ptr<const Vectorizer> vectorizer = nullptr,
                          VectorizerConfig vectorizer_config = {});

  std::unique_ptr<Model> fit(std::span<const LabeledInstance> examples, const LabelSchema& schema,
                             const TrainConfig& config) override;
  std::string name() const override { return "builtin"; }

 private:
  std::shared_ptr<const Vectorizer> vectorizer_;
  VectorizerConfig vectorizer_config_;
};

}  // namespace al
