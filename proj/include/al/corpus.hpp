#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace al {

/// Raised for unreadable, malformed or inconsistent datasets.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered, unique class names. Class indices are positions in this list.
class LabelSchema {
 public:
  LabelSchema() = default;
  explicit LabelSchema(std::vector<std::string> class_names);

  const std::vector<std::string>& class_names() const { return class_names_; }
  std::size_t num_classes() const { return class_names_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  const std::string& name_of(std::size_t index) const { return class_names_.at(index); }

  friend bool operator==(const LabelSchema&, const LabelSchema&) = default;

 private:
  std::vector<std::string> class_names_;
};

struct Instance {
  std::size_t id = 0;         // position within its dataset
  std::size_t source_id = 0;  // id from the source file, kept across splits
  std::string text;
  std::optional<std::size_t> gold_label;

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Instances with ids 0..n-1 in order.
class Dataset {
 public:
  Dataset(LabelSchema schema, std::vector<Instance> instances);

  const LabelSchema& schema() const { return schema_; }
  std::span<const Instance> instances() const { return instances_; }
  const Instance& at(std::size_t id) const { return instances_.at(id); }
  std::size_t size() const { return instances_.size(); }
  std::size_t num_classes() const { return schema_.num_classes(); }
  bool fully_labeled() const;

  /// Builds a dataset from a subset of this one's instances, re-assigning ids
  /// by position and preserving source ids.
  Dataset subset(std::span<const std::size_t> ids) const;

 private:
  LabelSchema schema_;
  std::vector<Instance> instances_;
};

enum class DatasetFormat { kJsonl, kCsv };

DatasetFormat parse_dataset_format(std::string_view name);

/// Reads JSONL records {"id"?: int, "text": str, "label"?: str} or CSV with a
/// `text,label` header. A missing or empty label yields an unlabeled instance.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LabelSchema& schema);

struct Split {
  Dataset train;
  Dataset test;
};

/// Seeded split. Stratified mode takes floor(test_fraction * n) test instances,
/// apportioned per class with remainders going to the largest classes first.
Split split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed,
                    bool stratified);

/// Labeled/unlabeled partition of a fixed training pool.
class Pool {
 public:
  explicit Pool(std::size_t size);

  std::size_t size() const { return size_; }
  const std::set<std::size_t>& labeled() const { return labeled_; }
  const std::set<std::size_t>& unlabeled() const { return unlabeled_; }
  const std::map<std::size_t, std::size_t>& labels() const { return labels_; }
  std::vector<std::size_t> unlabeled_vector() const { return {unlabeled_.begin(), unlabeled_.end()}; }

  /// Moves an unlabeled index into the labeled set with the given class.
  void assign(std::size_t index, std::size_t label);

  friend bool operator==(const Pool&, const Pool&) = default;

 private:
  std::size_t size_;
  std::set<std::size_t> labeled_;
  std::set<std::size_t> unlabeled_;
  std::map<std::size_t, std::size_t> labels_;
};

enum class SeedMode { kRandom, kClassBalanced };

SeedMode parse_seed_mode(std::string_view name);
std::string_view to_string(SeedMode mode);

/// Picks the initial labeled set from pool.unlabeled(). Class-balanced mode
/// reads gold labels from `dataset` and takes size/c per class, drawing the
/// remainder uniformly from what is left. Result is sorted ascending.
std::vector<std::size_t> init_seed_set(const Pool& pool, const Dataset& dataset,
                                       std::size_t size, SeedMode mode, std::uint64_t seed);

}  // namespace al
