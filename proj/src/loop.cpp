#include "al/loop.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "al/external_classifier.hpp"
#include "al/metrics.hpp"
#include "al/oracle.hpp"
#include "al/rng.hpp"
#include "al/softmax_regression.hpp"

namespace al {

void ExperimentConfig::validate(std::size_t pool_size) const {
  if (seed_set_size == 0) throw std::invalid_argument("seed_set_size must be positive");
  if (query_size == 0) throw std::invalid_argument("query_size must be positive");
  const std::size_t budget = seed_set_size + num_iterations * query_size;
  if (budget > pool_size) {
    throw std::invalid_argument("labeling budget " + std::to_string(budget) + " exceeds the training pool of " +
                                std::to_string(pool_size));
  }
  if (classifier.kind == ClassifierKind::kExternal && classifier.command.empty()) {
    throw std::invalid_argument("external classifier needs a command");
  }
  ca.validate();
  train.validate();
}

std::unique_ptr<Trainer> make_trainer(const ClassifierSpec& spec, std::shared_ptr<const Vectorizer> vectorizer) {
  if (spec.kind == ClassifierKind::kExternal) return std::make_unique<ExternalTrainer>(spec.command);
  return std::make_unique<SoftmaxTrainer>(std::move(vectorizer));
}

ActiveLearner::ActiveLearner(ExperimentConfig config, std::shared_ptr<const Dataset> train,
                             std::shared_ptr<const Dataset> test, std::unique_ptr<Trainer> trainer, LoopHooks hooks)
    : config_(std::move(config)),
      train_(std::move(train)),
      test_(std::move(test)),
      trainer_(std::move(trainer)),
      hooks_(std::move(hooks)),
      pool_(train_ ? train_->size() : 0) {
  if (!train_) throw std::invalid_argument("active learner needs a training pool");
  config_.validate(train_->size());
  if (test_ && test_->schema() != train_->schema()) {
    throw std::invalid_argument("train and test datasets use different label schemas");
  }
  if (!trainer_) {
    std::shared_ptr<const Vectorizer> vectorizer;
    if (config_.classifier.kind == ClassifierKind::kBuiltin) {
      std::vector<std::string> texts;
      texts.reserve(train_->size());
      for (const auto& x : train_->instances()) texts.push_back(x.text);
      vectorizer = std::make_shared<const Vectorizer>(Vectorizer::fit(texts, config_.vectorizer));
    }
    trainer_ = make_trainer(config_.classifier, std::move(vectorizer));
  }
  phase(Phase::kSeed, true);
  pending_ = init_seed_set(pool_, *train_, config_.seed_set_size, config_.seed_mode,
                           derive_seed(config_.run_seed, seed_stream::kSeedSet));
  phase(Phase::kSeed, false);
}

double ActiveLearner::now() const {
  if (hooks_.clock) return hooks_.clock();
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void ActiveLearner::phase(Phase p, bool begin) const {
  if (hooks_.on_phase) hooks_.on_phase(p, begin, records_.size());
}

void ActiveLearner::submit(std::span<const std::size_t> labels) {
  if (finished_) throw std::logic_error("active learning run is already finished");
  if (labels.size() != pending_.size()) {
    throw std::invalid_argument("expected " + std::to_string(pending_.size()) + " labels, got " +
                                std::to_string(labels.size()));
  }
  const std::size_t c = train_->num_classes();
  for (const auto label : labels) {
    if (label >= c) throw std::invalid_argument("label " + std::to_string(label) + " is not a valid class index");
  }
  phase(Phase::kLabel, true);
  for (std::size_t i = 0; i < pending_.size(); ++i) pool_.assign(pending_[i], labels[i]);
  phase(Phase::kLabel, false);
  train_and_record();
  if (records_.size() > config_.num_iterations) {
    finished_ = true;
    pending_.clear();
  } else {
    query_next();
  }
}

void ActiveLearner::train_and_record() {
  const std::size_t iteration = records_.size();
  std::vector<LabeledInstance> examples;
  examples.reserve(pool_.labeled().size());
  for (const auto& [index, label] : pool_.labels()) examples.push_back({train_->at(index), label});

  TrainConfig train_config = config_.train;
  train_config.seed = derive_seed(config_.run_seed, seed_stream::kTrain, iteration);
  phase(Phase::kTrain, true);
  model_ = trainer_->fit(examples, train_->schema(), train_config);
  phase(Phase::kTrain, false);

  IterationRecord record;
  record.iteration = iteration;
  record.num_labeled = pool_.labeled().size();
  record.val_loss = model_->telemetry().val_loss;
  record.query_seconds = iteration == 0 ? 0.0 : pending_query_seconds_;
  record.queried_ids = pending_;
  record.test_accuracy = std::nan("");
  phase(Phase::kEvaluate, true);
  if (test_ && test_->fully_labeled()) record.test_accuracy = evaluate(*model_, *test_).accuracy;
  phase(Phase::kEvaluate, false);
  records_.push_back(std::move(record));
}

void ActiveLearner::query_next() {
  const std::size_t iteration = records_.size();
  const Strategy strategy = config_.strategy;
  phase(Phase::kQuery, true);
  const double start = now();

  QueryContext ctx;
  ctx.unlabeled = pool_.unlabeled_vector();
  ctx.rng_seed = derive_seed(config_.run_seed, seed_stream::kQuery, iteration);
  if (needs_predictions(strategy)) {
    std::vector<Instance> instances;
    instances.reserve(ctx.unlabeled.size());
    for (const auto index : ctx.unlabeled) instances.push_back(train_->at(index));
    ctx.distributions = model_->predict_proba(instances);
    if (needs_embeddings(strategy)) ctx.embeddings = model_->embed(instances);
  }
  pending_ = query(strategy, ctx, config_.query_size, config_.ca);

  pending_query_seconds_ = std::max(0.0, now() - start);
  phase(Phase::kQuery, false);
}

ExperimentResult ActiveLearner::result() const {
  ExperimentResult out;
  out.config = config_;
  out.records = records_;
  if (!records_.empty()) {
    out.final_accuracy = records_.back().test_accuracy;
    const bool has_accuracy = std::all_of(records_.begin(), records_.end(),
                                          [](const IterationRecord& r) { return !std::isnan(r.test_accuracy); });
    out.auc = has_accuracy ? auc(learning_curve(out, config_.auc_includes_seed_model)) : std::nan("");
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::shared_ptr<const Dataset> train,
                                std::shared_ptr<const Dataset> test, Oracle& oracle, LoopHooks hooks) {
  ActiveLearner learner(config, std::move(train), std::move(test), nullptr, std::move(hooks));
  while (!learner.finished()) {
    const auto labels = oracle.label(learner.pending());
    learner.submit(labels);
  }
  return learner.result();
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::shared_ptr<const Dataset> train,
                                std::shared_ptr<const Dataset> test, LoopHooks hooks) {
  SimulatedOracle oracle(train);
  return run_experiment(config, train, std::move(test), oracle, std::move(hooks));
}

std::vector<ExperimentResult> run_suite(const ExperimentConfig& base, std::span<const Strategy> strategies,
                                        std::span<const std::uint64_t> seeds, std::shared_ptr<const Dataset> train,
                                        std::shared_ptr<const Dataset> test, SuiteOptions options) {
  if (strategies.empty()) throw std::invalid_argument("suite needs at least one strategy");
  if (seeds.empty()) throw std::invalid_argument("suite needs at least one seed");
  const std::size_t total = strategies.size() * seeds.size();
  std::vector<std::optional<ExperimentResult>> slots(total);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      ExperimentConfig config = base;
      config.strategy = strategies[job / seeds.size()];
      config.run_seed = seeds[job % seeds.size()];
      try {
        slots[job] = run_experiment(config, train, test);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.parallelism, total));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<ExperimentResult> results;
  results.reserve(total);
  for (auto& slot : slots) results.push_back(std::move(*slot));
  return results;
}

}  // namespace al
