#include "al/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "al/rng.hpp"

namespace al {

Strategy parse_strategy(std::string_view token) {
  if (token == "pe") return Strategy::kPredictionEntropy;
  if (token == "bt") return Strategy::kBreakingTies;
  if (token == "lc") return Strategy::kLeastConfidence;
  if (token == "ca") return Strategy::kContrastive;
  if (token == "rs") return Strategy::kRandom;
  throw std::invalid_argument("unknown strategy '" + std::string(token) + "' (expected pe, bt, lc, ca or rs)");
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kPredictionEntropy: return "pe";
    case Strategy::kBreakingTies: return "bt";
    case Strategy::kLeastConfidence: return "lc";
    case Strategy::kContrastive: return "ca";
    case Strategy::kRandom: return "rs";
  }
  return "?";
}

Direction score_direction(Strategy strategy) {
  return strategy == Strategy::kBreakingTies ? Direction::kMinimize : Direction::kMaximize;
}

bool needs_predictions(Strategy strategy) { return strategy != Strategy::kRandom; }

bool needs_embeddings(Strategy strategy) { return strategy == Strategy::kContrastive; }

void CAConfig::validate() const {
  if (num_neighbors == 0) throw std::invalid_argument("num_neighbors must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 1e-3)) throw std::invalid_argument("epsilon must lie in (0, 1e-3)");
}

namespace {

// Binary scores are functions of the top probability alone.
double binary_top(const ClassDistribution& d) { return std::max(d[0], d[1]); }

double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

}  // namespace

double entropy_score(const ClassDistribution& d) {
  if (d.num_classes() == 2) {
    const double top = binary_top(d);
    return -(plogp(top) + plogp(1.0 - top));
  }
  double h = 0.0;
  for (const double p : d.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

namespace {

std::pair<double, double> top_two(const ClassDistribution& d) {
  if (d.num_classes() < 2) throw std::invalid_argument("margin needs at least 2 classes");
  double first = -1.0, second = -1.0;
  for (const double p : d.probs()) {
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  return {first, second};
}

}  // namespace

double margin_score(const ClassDistribution& d) {
  if (d.num_classes() == 2) return 2.0 * binary_top(d) - 1.0;
  const auto [first, second] = top_two(d);
  return first - second;
}

double least_confidence_score(const ClassDistribution& d) {
  if (d.num_classes() == 2) return 1.0 - binary_top(d);
  return 1.0 - *std::max_element(d.probs().begin(), d.probs().end());
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double epsilon) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  if (!(epsilon > 0.0)) throw std::invalid_argument("kl_divergence: epsilon must be positive");
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double pj = std::max(p[j], epsilon);
    const double qj = std::max(q[j], epsilon);
    sum += pj * std::log(pj / qj);
  }
  // Clamping can push a true zero a hair below it.
  return std::max(sum, 0.0);
}

double kl_divergence(const ClassDistribution& p, const ClassDistribution& q, double epsilon) {
  return kl_divergence(p.probs(), q.probs(), epsilon);
}

namespace {

void check_context(const QueryContext& ctx, bool with_embeddings) {
  if (ctx.distributions.size() != ctx.unlabeled.size()) {
    throw std::invalid_argument("query context: one distribution per unlabeled instance required");
  }
  if (with_embeddings && ctx.embeddings.size() != ctx.unlabeled.size()) {
    throw std::invalid_argument("query context: one embedding per unlabeled instance required");
  }
  for (std::size_t i = 1; i < ctx.unlabeled.size(); ++i) {
    if (ctx.unlabeled[i] <= ctx.unlabeled[i - 1]) throw std::invalid_argument("query context: unlabeled must be ascending");
  }
}

}  // namespace

ScoreMap contrastive_scores(const QueryContext& ctx, const CAConfig& config) {
  config.validate();
  check_context(ctx, true);
  const std::size_t n = ctx.unlabeled.size();
  const std::size_t m = config.num_neighbors;
  if (n < m + 1) {
    throw std::invalid_argument("contrastive scoring needs at least " + std::to_string(m + 1) +
                                " unlabeled instances, have " + std::to_string(n));
  }
  std::vector<std::size_t> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = i;
  const NeighborIndex index(ctx.embeddings, positions);

  ScoreMap scores;
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (const auto j : index.query(i, m)) {
      total += kl_divergence(ctx.distributions[j], ctx.distributions[i], config.epsilon);
    }
    scores.emplace_hint(scores.end(), ctx.unlabeled[i], total / static_cast<double>(m));
  }
  return scores;
}

ScoreMap uncertainty_scores(Strategy strategy, const QueryContext& ctx, const CAConfig& config) {
  if (strategy == Strategy::kContrastive) return contrastive_scores(ctx, config);
  if (strategy == Strategy::kRandom) throw std::invalid_argument("random sampling has no scores");
  check_context(ctx, false);
  ScoreMap scores;
  for (std::size_t i = 0; i < ctx.unlabeled.size(); ++i) {
    const auto& d = ctx.distributions[i];
    double s = 0.0;
    switch (strategy) {
      case Strategy::kPredictionEntropy: s = entropy_score(d); break;
      case Strategy::kBreakingTies: s = margin_score(d); break;
      case Strategy::kLeastConfidence: s = least_confidence_score(d); break;
      default: break;
    }
    scores.emplace_hint(scores.end(), ctx.unlabeled[i], s);
  }
  return scores;
}

std::vector<std::size_t> select_batch(const ScoreMap& scores, std::size_t k, Direction direction) {
  if (k > scores.size()) {
    throw std::invalid_argument("cannot select " + std::to_string(k) + " of " + std::to_string(scores.size()) +
                                " candidates");
  }
  std::vector<std::pair<std::size_t, double>> entries(scores.begin(), scores.end());
  for (const auto& [index, score] : entries) {
    if (std::isnan(score)) throw std::invalid_argument("score for index " + std::to_string(index) + " is NaN");
  }
  const bool maximize = direction == Direction::kMaximize;
  const auto better = [maximize](const auto& a, const auto& b) {
    if (a.second != b.second) return maximize ? a.second > b.second : a.second < b.second;
    return a.first < b.first;
  };
  std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(k), entries.end(), better);
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(entries[i].first);
  return out;
}

std::vector<std::size_t> random_batch(std::span<const std::size_t> unlabeled, std::size_t k, std::uint64_t seed) {
  if (k > unlabeled.size()) {
    throw std::invalid_argument("cannot draw " + std::to_string(k) + " of " + std::to_string(unlabeled.size()) +
                                " unlabeled instances");
  }
  std::vector<std::size_t> items(unlabeled.begin(), unlabeled.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

std::vector<std::size_t> query(Strategy strategy, const QueryContext& ctx, std::size_t k, const CAConfig& config) {
  if (strategy == Strategy::kRandom) return random_batch(ctx.unlabeled, k, ctx.rng_seed);
  return select_batch(uncertainty_scores(strategy, ctx, config), k, score_direction(strategy));
}

}  // namespace al
