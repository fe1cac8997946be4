#include "al/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace al {

SparseVector::SparseVector(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i > 0 && entries_[i].dim <= entries_[i - 1].dim) {
      throw std::invalid_argument("sparse vector dimensions must be strictly increasing");
    }
    if (!std::isfinite(entries_[i].weight) || entries_[i].weight == 0.0) {
      throw std::invalid_argument("sparse vector weights must be finite and non-zero");
    }
  }
}

SparseVector SparseVector::from_dense(std::span<const double> values) {
  std::vector<Entry> entries;
  for (std::size_t d = 0; d < values.size(); ++d) {
    if (values[d] != 0.0) entries.push_back({static_cast<std::uint32_t>(d), values[d]});
  }
  return SparseVector(std::move(entries));
}

double SparseVector::norm() const {
  double sum = 0.0;
  for (const auto& e : entries_) sum += e.weight * e.weight;
  return std::sqrt(sum);
}

double dot(const SparseVector& a, const SparseVector& b) {
  const auto ea = a.entries();
  const auto eb = b.entries();
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].dim < eb[j].dim) {
      ++i;
    } else if (eb[j].dim < ea[i].dim) {
      ++j;
    } else {
      sum += ea[i].weight * eb[j].weight;
      ++i;
      ++j;
    }
  }
  return sum;
}

double cosine_similarity(const SparseVector& a, const SparseVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    const bool word = (ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'z') ||
                      (ch >= 'A' && ch <= 'Z') || ch >= 0x80;
    if (word) {
      current.push_back(lowercase && ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : raw);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

std::vector<std::string> truncated_tokens(std::string_view text, const VectorizerConfig& config) {
  auto tokens = tokenize(text, config.lowercase);
  if (config.max_tokens > 0 && tokens.size() > config.max_tokens) tokens.resize(config.max_tokens);
  return tokens;
}

}  // namespace

Vectorizer Vectorizer::fit(std::span<const std::string> texts, const VectorizerConfig& config) {
  std::map<std::string, std::size_t> df;
  bool any_tokens = false;
  for (const auto& text : texts) {
    const auto tokens = truncated_tokens(text, config);
    any_tokens = any_tokens || !tokens.empty();
    for (const auto& token : std::set<std::string>(tokens.begin(), tokens.end())) ++df[token];
  }
  if (!any_tokens) throw std::invalid_argument("cannot fit vectorizer: all texts are empty after tokenization");

  Vectorizer v;
  v.config_ = config;
  const double n = static_cast<double>(texts.size());
  for (const auto& [token, count] : df) {
    if (count < config.min_df) continue;
    v.vocabulary_.emplace(token, static_cast<std::uint32_t>(v.terms_.size()));
    v.terms_.push_back(token);
    v.df_.push_back(count);
    v.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  if (v.terms_.empty()) throw std::invalid_argument("cannot fit vectorizer: no token meets min_df");
  return v;
}

std::optional<std::uint32_t> Vectorizer::index_of(std::string_view token) const {
  const auto it = vocabulary_.find(std::string(token));
  if (it == vocabulary_.end()) return std::nullopt;
  return it->second;
}

SparseVector Vectorizer::transform(std::string_view text) const {
  std::map<std::uint32_t, double> counts;
  for (const auto& token : truncated_tokens(text, config_)) {
    if (const auto it = vocabulary_.find(token); it != vocabulary_.end()) counts[it->second] += 1.0;
  }
  std::vector<SparseVector::Entry> entries;
  entries.reserve(counts.size());
  double sum_sq = 0.0;
  for (const auto& [dim, tf] : counts) {
    const double w = tf * idf_[dim];
    entries.push_back({dim, w});
    sum_sq += w * w;
  }
  const double norm = std::sqrt(sum_sq);
  for (auto& e : entries) e.weight /= norm;
  return SparseVector(std::move(entries));
}

NeighborMetric parse_neighbor_metric(std::string_view name) {
  if (name == "cosine") return NeighborMetric::kCosine;
  throw std::invalid_argument("unknown neighbor metric '" + std::string(name) + "' (expected cosine)");
}

namespace {

struct Scored {
  double similarity;
  std::size_t index;
};

bool better(const Scored& a, const Scored& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.index < b.index;
}

std::vector<Scored> top_m(std::vector<Scored> scored, std::size_t m) {
  if (scored.size() < m) {
    throw std::invalid_argument("knn: need " + std::to_string(m) + " candidates besides the query, have " +
                                std::to_string(scored.size()));
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(m), scored.end(), better);
  scored.resize(m);
  return scored;
}

}  // namespace

std::vector<std::size_t> knn(std::size_t query_index, std::span<const SparseVector> vectors,
                             std::span<const std::size_t> candidate_indices, std::size_t m) {
  if (m == 0) throw std::invalid_argument("knn: m must be at least 1");
  const auto& query = vectors[query_index];
  std::vector<Scored> scored;
  scored.reserve(candidate_indices.size());
  for (const auto index : candidate_indices) {
    if (index == query_index) continue;
    scored.push_back({cosine_similarity(query, vectors[index]), index});
  }
  std::vector<std::size_t> out;
  for (const auto& s : top_m(std::move(scored), m)) out.push_back(s.index);
  return out;
}

NeighborIndex::NeighborIndex(std::span<const SparseVector> vectors, std::span<const std::size_t> candidates) {
  docs_.reserve(candidates.size());
  norms_.reserve(candidates.size());
  for (std::size_t pos = 0; pos < candidates.size(); ++pos) {
    const auto& v = vectors[candidates[pos]];
    docs_.push_back(&v);
    norms_.push_back(v.norm());
    for (const auto& e : v.entries()) {
      postings_[e.dim].push_back({static_cast<std::uint32_t>(pos), e.weight});
    }
  }
}

std::vector<std::size_t> NeighborIndex::query(std::size_t query, std::size_t m) const {
  if (m == 0) throw std::invalid_argument("knn: m must be at least 1");
  const std::size_t n = docs_.size();
  // Accumulating per dimension in increasing order matches the summation
  // order of dot(), so similarities are bit-identical to cosine_similarity().
  std::vector<double> acc(n, 0.0);
  for (const auto& e : docs_[query]->entries()) {
    const auto it = postings_.find(e.dim);
    for (const auto& p : it->second) acc[p.doc] += e.weight * p.weight;
  }
  const double qn = norms_[query];
  std::vector<Scored> scored;
  scored.reserve(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (pos == query) continue;
    const double denom = qn * norms_[pos];
    scored.push_back({qn == 0.0 || norms_[pos] == 0.0 ? 0.0 : acc[pos] / denom, pos});
  }
  std::vector<std::size_t> out;
  for (const auto& s : top_m(std::move(scored), m)) out.push_back(s.index);
  return out;
}

}  // namespace al
