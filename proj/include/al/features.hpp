#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace al {

/// Sparse vector with strictly increasing dimensions and no explicit zeros.
class SparseVector {
 public:
  struct Entry {
    std::uint32_t dim;
    double weight;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  SparseVector() = default;
  /// Throws std::invalid_argument if the invariants do not hold.
  explicit SparseVector(std::vector<Entry> entries);
  /// Dense-to-sparse conversion that drops zeros.
  static SparseVector from_dense(std::span<const double> values);

  std::span<const Entry> entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double norm() const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::vector<Entry> entries_;
};

double dot(const SparseVector& a, const SparseVector& b);

/// dot(a,b)/(|a||b|); 0 when either vector is empty.
double cosine_similarity(const SparseVector& a, const SparseVector& b);

/// Lowercases ASCII (optionally) and splits on runs of non-alphanumeric
/// bytes. Bytes >= 0x80 are kept as token characters so UTF-8 words survive.
std::vector<std::string> tokenize(std::string_view text, bool lowercase);

struct VectorizerConfig {
  bool lowercase = true;
  std::size_t max_tokens = 60;
  std::size_t min_df = 1;
};

/// TF-IDF featurizer with smoothed idf, ln((1+N)/(1+df)) + 1.
class Vectorizer {
 public:
  /// Throws std::invalid_argument if every text is empty after tokenization.
  static Vectorizer fit(std::span<const std::string> texts, const VectorizerConfig& config = {});

  /// Term frequency times idf, L2-normalised. Unknown tokens are ignored.
  SparseVector transform(std::string_view text) const;

  std::size_t dimension() const { return idf_.size(); }
  const VectorizerConfig& config() const { return config_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  const std::vector<std::size_t>& document_frequency() const { return df_; }
  std::optional<std::uint32_t> index_of(std::string_view token) const;

 private:
  VectorizerConfig config_;
  std::unordered_map<std::string, std::uint32_t> vocabulary_;
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::vector<std::size_t> df_;
};

inline SparseVector vectorize(const Vectorizer& v, std::string_view text) { return v.transform(text); }

enum class NeighborMetric { kCosine };

NeighborMetric parse_neighbor_metric(std::string_view name);

/// The m candidates most similar to vectors[query_index], excluding the query,
/// ordered by descending similarity with ties going to the smaller index.
std::vector<std::size_t> knn(std::size_t query_index, std::span<const SparseVector> vectors,
                             std::span<const std::size_t> candidate_indices, std::size_t m);

/// Inverted index over a fixed candidate set for repeated kNN queries. With
/// candidates in ascending order it gives the same neighbours, bit for bit, as
/// knn() over the same candidates.
class NeighborIndex {
 public:
  NeighborIndex(std::span<const SparseVector> vectors, std::span<const std::size_t> candidates);

  /// Neighbours of candidate position `query` (not an original index);
  /// returned values are candidate positions.
  std::vector<std::size_t> query(std::size_t query, std::size_t m) const;

 private:
  struct Posting {
    std::uint32_t doc;
    double weight;
  };
  std::vector<const SparseVector*> docs_;
  std::vector<double> norms_;
  std::unordered_map<std::uint32_t, std::vector<Posting>> postings_;
};

}  // namespace al
