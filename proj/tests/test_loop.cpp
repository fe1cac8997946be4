#include <cmath>
#include <memory>
#include <set>

#include "al/loop.hpp"
#include "al/oracle.hpp"
#include "al/synthetic.hpp"
#include "doctest.h"

using namespace al;

namespace {

struct Data {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
};

Data synthetic(std::size_t size, std::size_t classes = 2, std::uint64_t seed = 0) {
  SyntheticSpec spec;
  spec.size = size;
  spec.num_classes = classes;
  spec.seed = seed;
  auto split = split_dataset(make_synthetic_dataset(spec), 0.2, seed, true);
  return {std::make_shared<const Dataset>(std::move(split.train)), std::make_shared<const Dataset>(std::move(split.test))};
}

ExperimentConfig small_config(Strategy strategy) {
  ExperimentConfig config;
  config.strategy = strategy;
  config.seed_set_size = 10;
  config.query_size = 10;
  config.num_iterations = 5;
  return config;
}

bool same_records(const ExperimentResult& a, const ExperimentResult& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.queried_ids != y.queried_ids || x.num_labeled != y.num_labeled || x.test_accuracy != y.test_accuracy ||
        x.val_loss != y.val_loss) {
      return false;
    }
  }
  return true;
}

// Counts a fixed step per call, so timings are reproducible.
struct TickClock {
  double t = 0.0;
  double operator()() { return t += 0.5; }
};

}  // namespace

TEST_CASE("default protocol gives 21 records from 25 to 525 labels") {
  const auto data = synthetic(2500);
  for (const auto s : kAllStrategies) {
    ExperimentConfig config;
    config.strategy = s;
    const auto result = run_experiment(config, data.train, data.test);
    REQUIRE(result.records.size() == 21);
    std::set<std::size_t> queried;
    for (std::size_t t = 0; t < result.records.size(); ++t) {
      const auto& r = result.records[t];
      CHECK(r.iteration == t);
      CHECK(r.num_labeled == 25 + 25 * t);
      CHECK(r.queried_ids.size() == 25);
      CHECK(r.query_seconds >= 0.0);
      CHECK(r.test_accuracy >= 0.0);
      CHECK(r.test_accuracy <= 1.0);
      for (const auto id : r.queried_ids) CHECK(queried.insert(id).second);
    }
    CHECK(result.records.front().query_seconds == 0.0);
    CHECK(result.final_accuracy == result.records.back().test_accuracy);
    CHECK(result.auc >= 0.0);
    CHECK(result.auc <= 1.0);
  }
}

TEST_CASE("zero iterations give only the seed model") {
  const auto data = synthetic(300);
  auto config = small_config(Strategy::kBreakingTies);
  config.num_iterations = 0;
  const auto result = run_experiment(config, data.train, data.test);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].num_labeled == 10);
  CHECK(result.auc == result.records[0].test_accuracy);
}

TEST_CASE("budget beyond the pool is rejected") {
  const auto data = synthetic(100);
  auto config = small_config(Strategy::kRandom);
  config.num_iterations = 100;
  CHECK_THROWS_AS(run_experiment(config, data.train, data.test), std::invalid_argument);
  config = small_config(Strategy::kRandom);
  config.query_size = 0;
  CHECK_THROWS_AS(run_experiment(config, data.train, data.test), std::invalid_argument);
}

TEST_CASE("pool is conserved at every step") {
  const auto data = synthetic(400, 3);
  for (const auto s : kAllStrategies) {
    ActiveLearner learner(small_config(s), data.train, data.test);
    SimulatedOracle oracle(data.train);
    std::size_t expected_labeled = 0;
    while (!learner.finished()) {
      const auto batch = learner.pending();
      for (const auto id : batch) CHECK(learner.pool().unlabeled().contains(id));
      learner.submit(oracle.label(batch));
      expected_labeled += batch.size();
      const auto& pool = learner.pool();
      CHECK(pool.labeled().size() == expected_labeled);
      CHECK(pool.labeled().size() + pool.unlabeled().size() == data.train->size());
      CHECK(pool.labels().size() == pool.labeled().size());
      for (const auto id : batch) CHECK(pool.labeled().contains(id));
    }
    CHECK(learner.pending().empty());
    CHECK_THROWS_AS(learner.submit(std::vector<std::size_t>{}), std::logic_error);
  }
}

TEST_CASE("runs are reproducible") {
  const auto data = synthetic(400);
  for (const auto s : kAllStrategies) {
    const auto a = run_experiment(small_config(s), data.train, data.test);
    const auto b = run_experiment(small_config(s), data.train, data.test);
    CHECK(same_records(a, b));
    CHECK(a.auc == b.auc);
  }
  auto other = small_config(Strategy::kRandom);
  other.run_seed = 1;
  CHECK_FALSE(same_records(run_experiment(small_config(Strategy::kRandom), data.train, data.test),
                           run_experiment(other, data.train, data.test)));
}

TEST_CASE("adding iterations does not change earlier ones") {
  const auto data = synthetic(400);
  auto shorter = small_config(Strategy::kContrastive);
  auto longer = shorter;
  longer.num_iterations = 8;
  const auto a = run_experiment(shorter, data.train, data.test);
  const auto b = run_experiment(longer, data.train, data.test);
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    CHECK(a.records[t].queried_ids == b.records[t].queried_ids);
    CHECK(a.records[t].test_accuracy == b.records[t].test_accuracy);
  }
}

TEST_CASE("query time covers the query step and nothing else") {
  const auto data = synthetic(300);
  double clock = 0.0;
  Phase current = Phase::kSeed;
  bool inside = false;
  LoopHooks hooks;
  // Time advances by 1 per clock read inside a query and by 1000 per phase
  // change outside of it, so any leakage shows up as a large value.
  hooks.clock = [&] { return clock += 1.0; };
  hooks.on_phase = [&](Phase p, bool begin, std::size_t) {
    current = p;
    inside = begin && p == Phase::kQuery;
    if (p != Phase::kQuery) clock += 1000.0;
  };
  const auto result = run_experiment(small_config(Strategy::kContrastive), data.train, data.test, hooks);
  for (std::size_t t = 1; t < result.records.size(); ++t) CHECK(result.records[t].query_seconds == 1.0);
  CHECK(current == Phase::kEvaluate);
  CHECK_FALSE(inside);
}

TEST_CASE("phases run in protocol order") {
  const auto data = synthetic(300);
  std::vector<std::pair<Phase, bool>> events;
  LoopHooks hooks;
  hooks.on_phase = [&](Phase p, bool begin, std::size_t) { events.emplace_back(p, begin); };
  auto config = small_config(Strategy::kBreakingTies);
  config.num_iterations = 2;
  run_experiment(config, data.train, data.test, hooks);
  const std::vector<Phase> expected{Phase::kSeed, Phase::kLabel, Phase::kTrain, Phase::kEvaluate,
                                    Phase::kQuery, Phase::kLabel, Phase::kTrain, Phase::kEvaluate,
                                    Phase::kQuery, Phase::kLabel, Phase::kTrain, Phase::kEvaluate};
  REQUIRE(events.size() == 2 * expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(events[2 * i].first == expected[i]);
    CHECK(events[2 * i].second);
    CHECK(events[2 * i + 1].first == expected[i]);
    CHECK_FALSE(events[2 * i + 1].second);
  }
}

TEST_CASE("deterministic clock makes whole results identical") {
  const auto data = synthetic(300);
  LoopHooks hooks;
  hooks.clock = TickClock{};
  const auto a = run_experiment(small_config(Strategy::kLeastConfidence), data.train, data.test, hooks);
  hooks.clock = TickClock{};
  const auto b = run_experiment(small_config(Strategy::kLeastConfidence), data.train, data.test, hooks);
  for (std::size_t t = 0; t < a.records.size(); ++t) CHECK(a.records[t].query_seconds == b.records[t].query_seconds);
}

TEST_CASE("suite orders results by strategy then seed") {
  const auto data = synthetic(400);
  const std::vector<Strategy> strategies(std::begin(kAllStrategies), std::end(kAllStrategies));
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  auto base = small_config(Strategy::kRandom);
  base.num_iterations = 2;
  for (const std::size_t parallelism : {1, 3}) {
    const auto results = run_suite(base, strategies, seeds, data.train, data.test, SuiteOptions{parallelism});
    REQUIRE(results.size() == 25);
    for (std::size_t i = 0; i < 25; ++i) {
      CHECK(results[i].config.strategy == strategies[i / 5]);
      CHECK(results[i].config.run_seed == seeds[i % 5]);
      // Every strategy starts from the seed set of its seed.
      CHECK(results[i].records[0].queried_ids == results[i % 5].records[0].queried_ids);
    }
  }
  CHECK_THROWS_AS(run_suite(base, {}, seeds, data.train, data.test), std::invalid_argument);
}

TEST_CASE("singleton suite equals run_experiment") {
  const auto data = synthetic(300);
  const auto config = small_config(Strategy::kContrastive);
  const std::vector<Strategy> strategies{Strategy::kContrastive};
  const std::vector<std::uint64_t> seeds{0};
  const auto suite = run_suite(config, strategies, seeds, data.train, data.test);
  REQUIRE(suite.size() == 1);
  CHECK(same_records(suite[0], run_experiment(config, data.train, data.test)));
}

TEST_CASE("binary pe and bt query the same instances") {
  const auto data = synthetic(800);
  const std::vector<Strategy> strategies{Strategy::kPredictionEntropy, Strategy::kBreakingTies,
                                         Strategy::kLeastConfidence};
  const std::vector<std::uint64_t> seeds{3};
  const auto results = run_suite(small_config(Strategy::kRandom), strategies, seeds, data.train, data.test);
  for (std::size_t t = 0; t < results[0].records.size(); ++t) {
    const auto& pe = results[0].records[t].queried_ids;
    const auto& bt = results[1].records[t].queried_ids;
    const auto& lc = results[2].records[t].queried_ids;
    CHECK(std::set<std::size_t>(pe.begin(), pe.end()) == std::set<std::size_t>(bt.begin(), bt.end()));
    CHECK(std::set<std::size_t>(lc.begin(), lc.end()) == std::set<std::size_t>(bt.begin(), bt.end()));
  }
}

TEST_CASE("runs without a labeled test set have no accuracy") {
  const auto data = synthetic(300);
  const auto result = run_experiment(small_config(Strategy::kBreakingTies), data.train, nullptr);
  for (const auto& r : result.records) CHECK(std::isnan(r.test_accuracy));
  CHECK(std::isnan(result.auc));
}

TEST_CASE("class-balanced seeding is honored") {
  const auto data = synthetic(600, 5);
  auto config = small_config(Strategy::kRandom);
  config.seed_mode = SeedMode::kClassBalanced;
  const auto result = run_experiment(config, data.train, data.test);
  std::vector<int> counts(5, 0);
  for (const auto id : result.records[0].queried_ids) ++counts[*data.train->at(id).gold_label];
  for (const int c : counts) CHECK(c == 2);
}
