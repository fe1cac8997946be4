#include "al/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "al/rng.hpp"
#include "json.hpp"

namespace al {

using nlohmann::json;

LabelSchema::LabelSchema(std::vector<std::string> class_names)
    : class_names_(std::move(class_names)) {
  if (class_names_.size() < 2) throw DataError("label schema needs at least 2 classes");
  std::unordered_set<std::string> seen;
  for (const auto& name : class_names_) {
    if (name.empty()) throw DataError("label schema contains an empty class name");
    if (!seen.insert(name).second) throw DataError("duplicate class name '" + name + "'");
  }
}

std::optional<std::size_t> LabelSchema::index_of(std::string_view name) const {
  const auto it = std::find(class_names_.begin(), class_names_.end(), name);
  if (it == class_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - class_names_.begin());
}

Dataset::Dataset(LabelSchema schema, std::vector<Instance> instances)
    : schema_(std::move(schema)), instances_(std::move(instances)) {
  if (instances_.empty()) throw DataError("empty dataset");
  if (schema_.num_classes() < 2) throw DataError("dataset schema needs at least 2 classes");
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (instances_[i].id != i) throw DataError("instance ids must be 0..n-1 in order");
    const auto& gold = instances_[i].gold_label;
    if (gold && *gold >= schema_.num_classes()) {
      throw DataError("instance " + std::to_string(i) + " has out-of-range label");
    }
  }
}

bool Dataset::fully_labeled() const {
  return std::all_of(instances_.begin(), instances_.end(),
                     [](const Instance& x) { return x.gold_label.has_value(); });
}

Dataset Dataset::subset(std::span<const std::size_t> ids) const {
  std::vector<Instance> out;
  out.reserve(ids.size());
  for (const auto id : ids) {
    Instance x = instances_.at(id);
    x.id = out.size();
    out.push_back(std::move(x));
  }
  return Dataset(schema_, std::move(out));
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "jsonl") return DatasetFormat::kJsonl;
  if (name == "csv") return DatasetFormat::kCsv;
  throw DataError("unknown dataset format '" + std::string(name) + "' (expected jsonl or csv)");
}

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::optional<std::size_t> resolve_label(const std::filesystem::path& path, std::size_t line,
                                         const std::string& label, const LabelSchema& schema) {
  if (label.empty()) return std::nullopt;
  const auto index = schema.index_of(label);
  if (!index) throw DataError(where(path, line) + "unknown label '" + label + "'");
  return index;
}

struct RawRecord {
  std::size_t line = 0;
  std::optional<std::size_t> source_id;
  std::string text;
  std::optional<std::size_t> label;
};

std::vector<RawRecord> read_jsonl(const std::filesystem::path& path, std::istream& in,
                                  const LabelSchema& schema) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where(path, line_no) + "malformed JSON record: " + e.what());
    }
    if (!record.is_object()) throw DataError(where(path, line_no) + "record is not an object");
    RawRecord raw;
    raw.line = line_no;
    const auto text = record.find("text");
    if (text == record.end() || !text->is_string()) {
      throw DataError(where(path, line_no) + "missing string field 'text'");
    }
    raw.text = text->get<std::string>();
    if (const auto id = record.find("id"); id != record.end()) {
      if (!id->is_number_unsigned()) {
        throw DataError(where(path, line_no) + "field 'id' must be a non-negative integer");
      }
      raw.source_id = id->get<std::size_t>();
    }
    if (const auto label = record.find("label"); label != record.end() && !label->is_null()) {
      if (!label->is_string()) throw DataError(where(path, line_no) + "field 'label' must be a string");
      raw.label = resolve_label(path, line_no, label->get<std::string>(), schema);
    }
    records.push_back(std::move(raw));
  }
  return records;
}

// Splits one CSV record, honouring quoted fields that may span lines.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no,
                     const std::filesystem::path& path) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  const std::size_t start_line = line_no + 1;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      ++line_no;
      fields.push_back(std::move(field));
      return true;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (in_quotes) throw DataError(where(path, start_line) + "unterminated quoted field");
  if (!any) return false;
  ++line_no;
  fields.push_back(std::move(field));
  return true;
}

std::vector<RawRecord> read_csv(const std::filesystem::path& path, std::istream& in,
                                const LabelSchema& schema) {
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  if (!read_csv_record(in, fields, line_no, path)) return {};
  const auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(fields.begin(), fields.end(), name);
    if (it == fields.end()) return std::nullopt;
    return static_cast<std::size_t>(it - fields.begin());
  };
  const auto text_col = column("text");
  const auto label_col = column("label");
  if (!text_col || !label_col) {
    throw DataError(where(path, 1) + "CSV header must contain columns 'text' and 'label'");
  }
  const std::size_t width = fields.size();
  std::vector<RawRecord> records;
  while (true) {
    const std::size_t record_line = line_no + 1;
    if (!read_csv_record(in, fields, line_no, path)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != width) {
      throw DataError(where(path, record_line) + "expected " + std::to_string(width) +
                      " fields, found " + std::to_string(fields.size()));
    }
    RawRecord raw;
    raw.line = record_line;
    raw.text = fields[*text_col];
    raw.label = resolve_label(path, record_line, fields[*label_col], schema);
    records.push_back(std::move(raw));
  }
  return records;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LabelSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read dataset file " + path.string());
  auto records = format == DatasetFormat::kJsonl ? read_jsonl(path, in, schema)
                                                 : read_csv(path, in, schema);
  if (records.empty()) throw DataError("empty dataset: " + path.string());

  std::unordered_set<std::size_t> seen;
  std::vector<Instance> instances;
  instances.reserve(records.size());
  for (auto& raw : records) {
    Instance x;
    x.id = instances.size();
    x.source_id = raw.source_id.value_or(x.id);
    if (!seen.insert(x.source_id).second) {
      throw DataError(where(path, raw.line) + "duplicate id " + std::to_string(x.source_id));
    }
    x.text = std::move(raw.text);
    x.gold_label = raw.label;
    instances.push_back(std::move(x));
  }
  return Dataset(schema, std::move(instances));
}

Split split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed,
                    bool stratified) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DataError("test fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  const auto test_size = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n) + 1e-9));
  if (test_size == 0 || test_size >= n) {
    throw DataError("test fraction " + std::to_string(test_fraction) + " on " + std::to_string(n) +
                    " instances yields an empty split");
  }

  Rng rng(seed);
  std::vector<std::size_t> test_ids;
  if (!stratified) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span(order));
    test_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_size));
  } else {
    const std::size_t c = dataset.num_classes();
    std::vector<std::vector<std::size_t>> by_class(c);
    for (const auto& x : dataset.instances()) {
      if (!x.gold_label) throw DataError("stratified split requires gold labels on every instance");
      by_class[*x.gold_label].push_back(x.id);
    }
    for (std::size_t k = 0; k < c; ++k) {
      if (!by_class[k].empty() && by_class[k].size() < 2) {
        throw DataError("stratified split: class '" + dataset.schema().name_of(k) +
                        "' has fewer than 2 instances");
      }
    }
    std::vector<std::size_t> quota(c);
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < c; ++k) {
      quota[k] = by_class[k].size() * test_size / n;
      assigned += quota[k];
    }
    std::vector<std::size_t> by_size(c);
    std::iota(by_size.begin(), by_size.end(), 0);
    std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) {
      return by_class[a].size() > by_class[b].size();
    });
    for (std::size_t i = 0; assigned < test_size; i = (i + 1) % c) {
      const std::size_t k = by_size[i];
      if (quota[k] < by_class[k].size()) {
        ++quota[k];
        ++assigned;
      }
    }
    for (std::size_t k = 0; k < c; ++k) {
      auto& members = by_class[k];
      rng.shuffle(std::span(members));
      test_ids.insert(test_ids.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[k]));
    }
  }

  std::sort(test_ids.begin(), test_ids.end());
  std::vector<std::size_t> train_ids;
  train_ids.reserve(n - test_ids.size());
  std::size_t t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t < test_ids.size() && test_ids[t] == i) {
      ++t;
    } else {
      train_ids.push_back(i);
    }
  }
  return Split{dataset.subset(train_ids), dataset.subset(test_ids)};
}

Pool::Pool(std::size_t size) : size_(size) {
  for (std::size_t i = 0; i < size; ++i) unlabeled_.insert(unlabeled_.end(), i);
}

void Pool::assign(std::size_t index, std::size_t label) {
  if (unlabeled_.erase(index) == 0) {
    throw std::invalid_argument("index " + std::to_string(index) + " is not in the unlabeled pool");
  }
  labeled_.insert(index);
  labels_[index] = label;
}

SeedMode parse_seed_mode(std::string_view name) {
  if (name == "random") return SeedMode::kRandom;
  if (name == "class_balanced") return SeedMode::kClassBalanced;
  throw std::invalid_argument("unknown seed mode '" + std::string(name) +
                              "' (expected random or class_balanced)");
}

std::string_view to_string(SeedMode mode) {
  return mode == SeedMode::kRandom ? "random" : "class_balanced";
}

std::vector<std::size_t> init_seed_set(const Pool& pool, const Dataset& dataset,
                                       std::size_t size, SeedMode mode, std::uint64_t seed) {
  if (size > pool.unlabeled().size()) {
    throw DataError("seed set size " + std::to_string(size) + " exceeds the " +
                    std::to_string(pool.unlabeled().size()) + " unlabeled instances");
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> rest = pool.unlabeled_vector();

  if (mode == SeedMode::kClassBalanced) {
    const std::size_t c = dataset.num_classes();
    const std::size_t per_class = size / c;
    std::vector<std::vector<std::size_t>> by_class(c);
    for (const auto index : rest) {
      const auto& gold = dataset.at(index).gold_label;
      if (!gold) throw DataError("class-balanced seeding requires gold labels");
      by_class[*gold].push_back(index);
    }
    for (std::size_t k = 0; k < c; ++k) {
      if (by_class[k].size() < per_class) {
        throw DataError("class-balanced seeding: class '" + dataset.schema().name_of(k) + "' has " +
                        std::to_string(by_class[k].size()) + " unlabeled instances, needs " +
                        std::to_string(per_class));
      }
      rng.shuffle(std::span(by_class[k]));
      chosen.insert(chosen.end(), by_class[k].begin(), by_class[k].begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    std::sort(chosen.begin(), chosen.end());
    std::erase_if(rest, [&](std::size_t i) { return std::binary_search(chosen.begin(), chosen.end(), i); });
  }

  // Partial Fisher-Yates over what remains.
  const std::size_t extra = size - chosen.size();
  for (std::size_t i = 0; i < extra; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(rest.size() - i));
    std::swap(rest[i], rest[j]);
    chosen.push_back(rest[i]);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace al
