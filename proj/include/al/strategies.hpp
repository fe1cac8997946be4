#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "al/classifier.hpp"
#include "al/features.hpp"

namespace al {

enum class Strategy { kPredictionEntropy, kBreakingTies, kLeastConfidence, kContrastive, kRandom };

/// Accepts the tokens pe, bt, lc, ca and rs.
Strategy parse_strategy(std::string_view token);
std::string_view to_string(Strategy strategy);
inline constexpr Strategy kAllStrategies[] = {Strategy::kPredictionEntropy, Strategy::kBreakingTies,
                                              Strategy::kLeastConfidence, Strategy::kContrastive,
                                              Strategy::kRandom};

enum class Direction { kMaximize, kMinimize };

/// Which way the strategy's per-instance score is optimised.
Direction score_direction(Strategy strategy);
/// Whether the strategy needs predictions / embeddings of the unlabeled pool.
bool needs_predictions(Strategy strategy);
bool needs_embeddings(Strategy strategy);

struct CAConfig {
  std::size_t num_neighbors = 10;
  double epsilon = 1e-10;
  NeighborMetric metric = NeighborMetric::kCosine;

  void validate() const;
};

/// Model outputs over the unlabeled pool; entry i of `distributions` and
/// `embeddings` belongs to unlabeled[i]. `unlabeled` is ascending.
struct QueryContext {
  std::vector<std::size_t> unlabeled;
  std::vector<ClassDistribution> distributions;
  std::vector<SparseVector> embeddings;
  std::uint64_t rng_seed = 0;
};

using ScoreMap = std::map<std::size_t, double>;

/// -sum p ln p with 0 ln 0 = 0.
double entropy_score(const ClassDistribution& d);
/// Largest minus second-largest probability.
double margin_score(const ClassDistribution& d);
/// 1 - largest probability.
double least_confidence_score(const ClassDistribution& d);
/// sum p ln(p/q) with both arguments clamped below at epsilon.
double kl_divergence(std::span<const double> p, std::span<const double> q, double epsilon);
double kl_divergence(const ClassDistribution& p, const ClassDistribution& q, double epsilon);

/// Mean KL(neighbour || instance) over each unlabeled instance's m nearest
/// unlabeled neighbours in embedding space.
ScoreMap contrastive_scores(const QueryContext& ctx, const CAConfig& config);

/// Per-instance scores for a score-based strategy (everything except rs).
ScoreMap uncertainty_scores(Strategy strategy, const QueryContext& ctx, const CAConfig& config = {});

/// The k best entries under `direction`, best first, ties to the smaller index.
std::vector<std::size_t> select_batch(const ScoreMap& scores, std::size_t k, Direction direction);

/// k distinct indices drawn uniformly without replacement.
std::vector<std::size_t> random_batch(std::span<const std::size_t> unlabeled, std::size_t k, std::uint64_t seed);

/// Runs a strategy end to end on a context.
std::vector<std::size_t> query(Strategy strategy, const QueryContext& ctx, std::size_t k, const CAConfig& config = {});

}  // namespace al
