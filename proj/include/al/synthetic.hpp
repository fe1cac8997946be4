#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "al/corpus.hpp"

namespace al {

/// Generator for linearly separable bag-of-words classification data.
///
/// A hidden lexicon assigns a fraction of the vocabulary to one class each,
/// with a strength in [min_strength, max_strength]; the other words are
/// neutral. A text is a uniform draw of words and its label is the class with
/// the largest summed strength (texts with a tie are redrawn). The label is
/// therefore a linear function of the word counts, and texts close to a tie
/// are hard.
struct SyntheticSpec {
  std::size_t size = 2000;
  std::size_t num_classes = 2;
  std::size_t vocabulary = 100;
  double cue_fraction = 0.3;
  double min_strength = 0.2;
  double max_strength = 2.0;
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 20;
  std::uint64_t seed = 0;
};

/// Classes are named class0, class1, ...; words w0, w1, ...
Dataset make_synthetic_dataset(const SyntheticSpec& spec);

/// Writes {"id","text","label"} records.
void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace al
