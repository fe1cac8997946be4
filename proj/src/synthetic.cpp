#include "al/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "al/rng.hpp"
#include "json.hpp"

namespace al {

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.size == 0 || spec.num_classes < 2 || spec.vocabulary == 0 || !(spec.cue_fraction > 0.0) ||
      spec.cue_fraction > 1.0 || !(spec.min_strength > 0.0) || spec.max_strength < spec.min_strength ||
      spec.min_tokens == 0 || spec.max_tokens < spec.min_tokens) {
    throw std::invalid_argument("invalid synthetic dataset spec");
  }
  std::vector<std::string> names;
  for (std::size_t k = 0; k < spec.num_classes; ++k) names.push_back("class" + std::to_string(k));

  struct Cue {
    std::size_t label = 0;
    double strength = 0.0;  // 0 for neutral words
  };
  Rng rng(spec.seed);
  std::vector<Cue> lexicon(spec.vocabulary);
  for (auto& cue : lexicon) {
    if (rng.uniform_real() >= spec.cue_fraction) continue;
    cue.label = static_cast<std::size_t>(rng.uniform_index(spec.num_classes));
    cue.strength = spec.min_strength + (spec.max_strength - spec.min_strength) * rng.uniform_real();
  }

  std::vector<Instance> instances;
  instances.reserve(spec.size);
  std::size_t attempts = 0;
  while (instances.size() < spec.size) {
    if (++attempts > 100 * spec.size + 1000) throw std::invalid_argument("synthetic spec yields too many ties");
    const auto length =
        spec.min_tokens + static_cast<std::size_t>(rng.uniform_index(spec.max_tokens - spec.min_tokens + 1));
    std::vector<double> score(spec.num_classes, 0.0);
    std::string text;
    for (std::size_t t = 0; t < length; ++t) {
      const auto word = static_cast<std::size_t>(rng.uniform_index(spec.vocabulary));
      score[lexicon[word].label] += lexicon[word].strength;
      if (t > 0) text += ' ';
      text += "w" + std::to_string(word);
    }
    const auto top = std::max_element(score.begin(), score.end());
    const auto winners = std::count_if(score.begin(), score.end(), [&](double s) { return std::abs(s - *top) < 1e-9; });
    if (winners > 1) continue;
    const std::size_t id = instances.size();
    instances.push_back({id, id, std::move(text), static_cast<std::size_t>(top - score.begin())});
  }
  return Dataset(LabelSchema(names), std::move(instances));
}

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& x : dataset.instances()) {
    nlohmann::json record = {{"id", x.source_id}, {"text", x.text}};
    if (x.gold_label) record["label"] = dataset.schema().name_of(*x.gold_label);
    out << record.dump() << '\n';
  }
}

}  // namespace al
