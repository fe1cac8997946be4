#include <cmath>
#include <memory>
#include <random>

#include "al/classifier.hpp"
#include "al/softmax_regression.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace al;

namespace {

const LabelSchema kBinary({"left", "right"});

std::vector<LabeledInstance> two_clusters(std::size_t per_class) {
  std::vector<LabeledInstance> out;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const std::size_t label = i % 2;
    std::string text = label == 0 ? "apple banana cherry" : "xray yankee zulu";
    text += label == 0 ? " apple" + std::to_string(i % 3) : " zulu" + std::to_string(i % 3);
    out.push_back({{i, i, text, label}, label});
  }
  return out;
}

std::shared_ptr<const Vectorizer> vectorizer_for(const std::vector<LabeledInstance>& examples) {
  std::vector<std::string> texts;
  for (const auto& e : examples) texts.push_back(e.instance.text);
  return std::make_shared<const Vectorizer>(Vectorizer::fit(texts));
}

Dataset as_dataset(const std::vector<LabeledInstance>& examples, const LabelSchema& schema) {
  std::vector<Instance> xs;
  for (std::size_t i = 0; i < examples.size(); ++i) xs.push_back({i, i, examples[i].instance.text, examples[i].label});
  return Dataset(schema, std::move(xs));
}

}  // namespace

TEST_CASE("class distribution validation") {
  CHECK_THROWS_AS(ClassDistribution({0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(ClassDistribution({1.1, -0.1}), std::invalid_argument);
  CHECK_THROWS_AS(ClassDistribution({}), std::invalid_argument);
  CHECK_NOTHROW(ClassDistribution({0.5, 0.5 + 5e-7}));
  CHECK(ClassDistribution({0.4, 0.4, 0.2}).argmax() == 0);
  CHECK(ClassDistribution({0.2, 0.4, 0.4}).argmax() == 1);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.val_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.early_stop_accuracy = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.max_epochs = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("softmax of zeros is uniform") {
  for (std::size_t c = 2; c <= 6; ++c) {
    const auto p = softmax(std::vector<double>(c, 0.0));
    for (const double v : p) CHECK(v == doctest::Approx(1.0 / static_cast<double>(c)).epsilon(1e-15));
  }
  const std::vector<std::string> texts{"a b"};
  const SoftmaxRegression zero(std::make_shared<const Vectorizer>(Vectorizer::fit(texts)), SoftmaxParams(3, 2));
  const std::vector<Instance> xs{{0, 0, "a", std::nullopt}, {1, 1, "b b", std::nullopt}};
  for (const auto& d : zero.predict_proba(xs)) {
    for (const double v : d.probs()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("logits ln2 and 0 give two thirds and one third") {
  const std::vector<double> z{std::log(2.0), 0.0};
  const auto p = softmax(z);
  CHECK(std::abs(p[0] - 2.0 / 3.0) <= 1e-15);
  CHECK(std::abs(p[1] - 1.0 / 3.0) <= 1e-15);
}

TEST_CASE("softmax is shift invariant and sums to one") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(2 + gen() % 6);
    for (auto& v : z) v = normal(gen);
    const auto p = softmax(z);
    double sum = 0.0;
    for (const double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    const double shift = normal(gen) * 100.0;
    auto shifted = z;
    for (auto& v : shifted) v += shift;
    const auto q = softmax(shifted);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p[k] - q[k]) <= 1e-12);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int problem = 0; problem < 20; ++problem) {
    const std::size_t c = 2 + gen() % 3;
    const std::size_t v = 2 + gen() % 19;
    const std::size_t n = 1 + gen() % 8;
    SoftmaxParams params(c, v);
    for (auto& w : params.weights) w = normal(gen);
    for (auto& b : params.bias) b = normal(gen);
    std::vector<SparseVector> xs;
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> dense(v, 0.0);
      for (auto& x : dense) x = gen() % 3 == 0 ? 0.0 : normal(gen);
      xs.push_back(SparseVector::from_dense(dense));
      ys.push_back(gen() % c);
    }
    const double l2 = 0.01 * static_cast<double>(gen() % 10);
    SoftmaxParams grad;
    softmax_objective(params, xs, ys, l2, &grad);

    const double h = 1e-5;
    const auto check = [&](double& slot, double analytic) {
      const double saved = slot;
      slot = saved + h;
      const double up = softmax_objective(params, xs, ys, l2);
      slot = saved - h;
      const double down = softmax_objective(params, xs, ys, l2);
      slot = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      CHECK(std::abs(analytic - numeric) / denom <= 1e-4);
    };
    for (std::size_t j = 0; j < params.weights.size(); ++j) check(params.weights[j], grad.weights[j]);
    for (std::size_t k = 0; k < c; ++k) check(params.bias[k], grad.bias[k]);
  }
}

TEST_CASE("trainer steps follow the objective gradient") {
  // Full-batch steps from zero: the returned parameters must equal plain
  // gradient descent on softmax_objective over the training part of the
  // split, for whichever example the seeded split held out.
  const auto examples = two_clusters(3);
  const auto vectorizer = vectorizer_for(examples);
  TrainConfig config;
  config.batch_size = 64;
  config.max_epochs = 3;
  config.early_stop_accuracy = 1.0;
  config.early_stop_patience = 10;
  config.learning_rate = 0.7;
  config.l2_penalty = 0.05;
  SoftmaxTrainer trainer(vectorizer);
  const auto model = trainer.fit(examples, kBinary, config);
  const auto& learned = dynamic_cast<const SoftmaxRegression&>(*model).params();
  const std::size_t steps = model->telemetry().best_epoch;
  REQUIRE(steps >= 1);

  bool matched = false;
  for (std::size_t held = 0; held < examples.size(); ++held) {
    std::vector<SparseVector> xs;
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (i == held) continue;
      xs.push_back(vectorizer->transform(examples[i].instance.text));
      ys.push_back(examples[i].label);
    }
    SoftmaxParams params(2, vectorizer->dimension());
    for (std::size_t s = 0; s < steps; ++s) {
      SoftmaxParams grad;
      softmax_objective(params, xs, ys, config.l2_penalty, &grad);
      for (std::size_t j = 0; j < params.weights.size(); ++j) params.weights[j] -= config.learning_rate * grad.weights[j];
      for (std::size_t k = 0; k < 2; ++k) params.bias[k] -= config.learning_rate * grad.bias[k];
    }
    double diff = 0.0;
    for (std::size_t j = 0; j < params.weights.size(); ++j) {
      diff = std::max(diff, std::abs(params.weights[j] - learned.weights[j]));
    }
    for (std::size_t k = 0; k < 2; ++k) diff = std::max(diff, std::abs(params.bias[k] - learned.bias[k]));
    if (diff <= 1e-12) matched = true;
  }
  CHECK(matched);
}

TEST_CASE("separable clusters reach training accuracy 1") {
  const auto examples = two_clusters(20);
  SoftmaxTrainer trainer;
  const auto model = trainer.fit(examples, kBinary, TrainConfig{});
  const auto eval = evaluate(*model, as_dataset(examples, kBinary));
  CHECK(eval.accuracy == 1.0);
}

TEST_CASE("training is deterministic given the seed") {
  const auto examples = two_clusters(20);
  TrainConfig config;
  config.seed = 99;
  SoftmaxTrainer trainer;
  const auto a = trainer.fit(examples, kBinary, config);
  const auto b = trainer.fit(examples, kBinary, config);
  CHECK(dynamic_cast<const SoftmaxRegression&>(*a).params() == dynamic_cast<const SoftmaxRegression&>(*b).params());
  CHECK(a->telemetry().val_loss_history == b->telemetry().val_loss_history);
}

TEST_CASE("single-class and undersized training sets are rejected") {
  auto examples = two_clusters(5);
  for (auto& e : examples) e.label = 0;
  SoftmaxTrainer trainer;
  CHECK_THROWS_AS(trainer.fit(examples, kBinary, TrainConfig{}), ClassifierError);
  CHECK_THROWS_AS(trainer.fit({}, kBinary, TrainConfig{}), ClassifierError);
  const auto one = two_clusters(1);
  CHECK_THROWS_AS(trainer.fit(std::span(one).first(1), kBinary, TrainConfig{}), ClassifierError);
}

TEST_CASE("early stopping keeps the best validation epoch") {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<LabeledInstance> examples;
    const std::size_t n = 10 + gen() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t label = i < 2 ? i : gen() % 2;
      std::string text;
      for (int t = 0; t < 6; ++t) text += "t" + std::to_string(gen() % 12 + (label == 0 && gen() % 3 == 0 ? 20 : 0)) + " ";
      examples.push_back({{i, i, text, label}, label});
    }
    TrainConfig config;
    config.max_epochs = 1 + gen() % 30;
    config.seed = gen();
    config.val_fraction = 0.3;
    SoftmaxTrainer trainer;
    const auto model = trainer.fit(examples, kBinary, config);
    const auto& t = model->telemetry();
    CHECK(t.epochs_run <= config.max_epochs);
    CHECK(t.epochs_run == t.val_loss_history.size());
    REQUIRE(t.best_epoch >= 1);
    REQUIRE(t.best_epoch <= t.epochs_run);
    for (std::size_t e = t.best_epoch; e <= t.epochs_run; ++e) CHECK(t.val_loss <= t.val_loss_history[e - 1]);
    CHECK(t.val_loss == t.val_loss_history[t.best_epoch - 1]);
    if (t.stop_reason == StopReason::kAccuracy) CHECK(t.val_accuracy_history.back() > config.early_stop_accuracy);
    if (t.stop_reason == StopReason::kPatience) CHECK(t.epochs_run - t.best_epoch == config.early_stop_patience);
    for (const double w : dynamic_cast<const SoftmaxRegression&>(*model).params().weights) CHECK(std::isfinite(w));
  }
}

TEST_CASE("embed returns the tf-idf vector") {
  const auto examples = two_clusters(4);
  const auto vectorizer = vectorizer_for(examples);
  SoftmaxTrainer trainer(vectorizer);
  const auto model = trainer.fit(examples, kBinary, TrainConfig{});
  const std::vector<Instance> xs{examples[0].instance, examples[0].instance, {9, 9, "qqq www", std::nullopt}};
  const auto e = model->embed(xs);
  CHECK(e[0] == vectorize(*vectorizer, xs[0].text));
  CHECK(e[0] == e[1]);
  CHECK(e[2].empty());
  CHECK(model->predict_proba(xs).size() == 3);
}

TEST_CASE("evaluate of a uniform predictor has loss ln 2") {
  const auto examples = two_clusters(5);
  const SoftmaxRegression uniform(vectorizer_for(examples), SoftmaxParams(2, vectorizer_for(examples)->dimension()));
  const auto eval = evaluate(uniform, as_dataset(examples, kBinary));
  CHECK(std::abs(eval.mean_loss - std::log(2.0)) <= 1e-12);
  CHECK(eval.mean_loss == doctest::Approx(0.6931).epsilon(1e-4));
  // Ties go to class 0, so exactly the class-0 half is correct.
  CHECK(eval.accuracy == 0.5);
}

TEST_CASE("evaluate of a perfect predictor") {
  const std::vector<std::string> texts{"a", "b"};
  auto vectorizer = std::make_shared<const Vectorizer>(Vectorizer::fit(texts));
  SoftmaxParams params(2, 2);
  params.weight(0, *vectorizer->index_of("a")) = 40.0;
  params.weight(1, *vectorizer->index_of("b")) = 40.0;
  const SoftmaxRegression model(vectorizer, params);
  const Dataset test(kBinary, {{0, 0, "a", 0}, {1, 1, "b", 1}, {2, 2, "a a", 0}});
  const auto eval = evaluate(model, test);
  CHECK(eval.accuracy == 1.0);
  CHECK(eval.mean_loss < 1e-11);
}

TEST_CASE("evaluate needs gold labels") {
  const auto examples = two_clusters(2);
  const SoftmaxRegression model(vectorizer_for(examples), SoftmaxParams(2, vectorizer_for(examples)->dimension()));
  const Dataset unlabeled(kBinary, {{0, 0, "apple", std::nullopt}});
  CHECK_THROWS_AS(evaluate(model, unlabeled), std::invalid_argument);
}

TEST_CASE("evaluate accuracy equals a per-instance count") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::string> vocab;
  for (int i = 0; i < 15; ++i) vocab.push_back("v" + std::to_string(i));
  const auto vectorizer = std::make_shared<const Vectorizer>(Vectorizer::fit(vocab));
  const LabelSchema schema({"a", "b", "c"});
  for (int trial = 0; trial < 20; ++trial) {
    SoftmaxParams params(3, vectorizer->dimension());
    for (auto& w : params.weights) w = normal(gen);
    const SoftmaxRegression model(vectorizer, params);
    std::vector<Instance> xs;
    for (std::size_t i = 0; i < 40; ++i) {
      xs.push_back({i, i, vocab[gen() % 15] + " " + vocab[gen() % 15], gen() % 3});
    }
    const Dataset test(schema, xs);
    std::size_t correct = 0;
    for (const auto& x : xs) {
      const auto z = logits(params, vectorizer->transform(x.text));
      const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
      if (best == *x.gold_label) ++correct;
    }
    CHECK(evaluate(model, test).accuracy == static_cast<double>(correct) / 40.0);
  }
}
