#include "al/config.hpp"

#include <fstream>
#include <set>

#include "al/results_io.hpp"

namespace al {

using nlohmann::json;

namespace {

// Typed access to one JSON object section that rejects unknown keys.
class Section {
 public:
  Section(const json& doc, std::string path, std::set<std::string> allowed)
      : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_, "expected an object");
    for (const auto& [key, value] : doc_.items()) {
      if (!allowed.contains(key)) throw ConfigError(key_of(key), "unknown key");
    }
  }

  bool has(const std::string& key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }

  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
    if (!has(key)) return required(key, fallback);
    const auto& v = doc_.at(key);
    if (!v.is_string()) throw ConfigError(key_of(key), "expected a string");
    return v.get<std::string>();
  }

  std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) const {
    if (!has(key)) return required(key, fallback);
    return as_count(doc_.at(key), key_of(key));
  }

  double real(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    if (!has(key)) return required(key, fallback);
    const auto& v = doc_.at(key);
    if (!v.is_number()) throw ConfigError(key_of(key), "expected a number");
    return v.get<double>();
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_boolean()) throw ConfigError(key_of(key), "expected true or false");
    return v.get<bool>();
  }

  std::vector<std::string> strings(const std::string& key) const {
    const auto& v = doc_.at(key);
    if (!v.is_array()) throw ConfigError(key_of(key), "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& item : v) {
      if (!item.is_string()) throw ConfigError(key_of(key), "expected an array of strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  }

  std::vector<std::uint64_t> counts(const std::string& key) const {
    const auto& v = doc_.at(key);
    if (!v.is_array()) throw ConfigError(key_of(key), "expected an array of non-negative integers");
    std::vector<std::uint64_t> out;
    for (const auto& item : v) out.push_back(as_count(item, key_of(key)));
    return out;
  }

  std::string key_of(const std::string& key) const { return path_ + "." + key; }

 private:
  template <typename T>
  T required(const std::string& key, const std::optional<T>& fallback) const {
    if (!fallback) throw ConfigError(key_of(key), "required key is missing");
    return *fallback;
  }

  static std::uint64_t as_count(const json& v, const std::string& key) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(key, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  const json& doc_;
  std::string path_;
};

template <typename F>
auto checked(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

const json& section_or_empty(const json& doc, const char* name) {
  static const json empty = json::object();
  return doc.contains(name) ? doc.at(name) : empty;
}

}  // namespace

AppConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "dataset" && key != "classifier" && key != "strategy" && key != "loop") {
      throw ConfigError(key, "unknown section");
    }
  }
  if (!doc.contains("dataset")) throw ConfigError("dataset", "required section is missing");

  AppConfig config;
  ExperimentConfig& base = config.base;

  const Section dataset(doc.at("dataset"), "dataset",
                        {"name", "train", "test", "format", "classes", "test_fraction", "stratified", "split_seed",
                         "lowercase", "max_tokens", "min_df"});
  auto& ds = config.dataset;
  ds.train = std::filesystem::absolute(base_dir / dataset.string("train"));
  if (dataset.has("test")) ds.test = std::filesystem::absolute(base_dir / dataset.string("test"));
  ds.name = dataset.string("name", ds.train.stem().string());
  ds.format = checked(dataset.key_of("format"), [&] { return parse_dataset_format(dataset.string("format", "jsonl")); });
  if (!dataset.has("classes")) throw ConfigError(dataset.key_of("classes"), "required key is missing");
  ds.classes = dataset.strings("classes");
  checked(dataset.key_of("classes"), [&] { return LabelSchema(ds.classes); });
  ds.test_fraction = dataset.real("test_fraction", 0.10);
  if (!(ds.test_fraction > 0.0 && ds.test_fraction < 1.0)) {
    throw ConfigError(dataset.key_of("test_fraction"), "must lie in (0, 1)");
  }
  ds.stratified = dataset.flag("stratified", true);
  ds.split_seed = dataset.count("split_seed", 0);
  base.dataset_name = ds.name;
  base.vectorizer.lowercase = dataset.flag("lowercase", true);
  base.vectorizer.max_tokens = dataset.count("max_tokens", 60);
  base.vectorizer.min_df = dataset.count("min_df", 1);
  if (base.vectorizer.min_df == 0) throw ConfigError(dataset.key_of("min_df"), "must be at least 1");

  const Section classifier(section_or_empty(doc, "classifier"), "classifier",
                           {"kind", "command", "max_epochs", "learning_rate", "l2_penalty", "batch_size",
                            "val_fraction", "early_stop_patience", "early_stop_accuracy"});
  const auto kind = classifier.string("kind", "builtin");
  if (kind == "builtin") {
    base.classifier.kind = ClassifierKind::kBuiltin;
  } else if (kind == "external") {
    base.classifier.kind = ClassifierKind::kExternal;
    base.classifier.command = classifier.string("command");
  } else {
    throw ConfigError(classifier.key_of("kind"), "expected builtin or external");
  }
  auto& train = base.train;
  train.max_epochs = classifier.count("max_epochs", train.max_epochs);
  train.learning_rate = classifier.real("learning_rate", train.learning_rate);
  train.l2_penalty = classifier.real("l2_penalty", train.l2_penalty);
  train.batch_size = classifier.count("batch_size", train.batch_size);
  train.val_fraction = classifier.real("val_fraction", train.val_fraction);
  train.early_stop_patience = classifier.count("early_stop_patience", train.early_stop_patience);
  train.early_stop_accuracy = classifier.real("early_stop_accuracy", train.early_stop_accuracy);
  checked("classifier", [&] {
    train.validate();
    return 0;
  });

  const Section strategy(section_or_empty(doc, "strategy"), "strategy",
                         {"names", "name", "num_neighbors", "kl_epsilon", "neighbor_metric"});
  std::vector<std::string> names;
  if (strategy.has("names")) {
    names = strategy.strings("names");
    if (names.empty()) throw ConfigError(strategy.key_of("names"), "must not be empty");
  } else if (strategy.has("name")) {
    names = {strategy.string("name")};
  } else {
    for (const auto s : kAllStrategies) names.emplace_back(to_string(s));
  }
  for (const auto& name : names) {
    config.strategies.push_back(checked(strategy.key_of("names"), [&] { return parse_strategy(name); }));
  }
  base.strategy = config.strategies.front();
  base.ca.num_neighbors = strategy.count("num_neighbors", base.ca.num_neighbors);
  base.ca.epsilon = strategy.real("kl_epsilon", base.ca.epsilon);
  base.ca.metric = checked(strategy.key_of("neighbor_metric"),
                           [&] { return parse_neighbor_metric(strategy.string("neighbor_metric", "cosine")); });
  checked("strategy", [&] {
    base.ca.validate();
    return 0;
  });

  const Section loop(section_or_empty(doc, "loop"), "loop",
                     {"seed_set_size", "seed_mode", "num_iterations", "query_size", "seeds", "seed",
                      "auc_includes_seed_model", "parallelism"});
  base.seed_set_size = loop.count("seed_set_size", base.seed_set_size);
  base.seed_mode = checked(loop.key_of("seed_mode"), [&] { return parse_seed_mode(loop.string("seed_mode", "random")); });
  base.num_iterations = loop.count("num_iterations", base.num_iterations);
  base.query_size = loop.count("query_size", base.query_size);
  if (base.seed_set_size == 0) throw ConfigError(loop.key_of("seed_set_size"), "must be positive");
  if (base.query_size == 0) throw ConfigError(loop.key_of("query_size"), "must be positive");
  if (loop.has("seeds")) {
    config.seeds = loop.counts("seeds");
    if (config.seeds.empty()) throw ConfigError(loop.key_of("seeds"), "must not be empty");
  } else if (loop.has("seed")) {
    config.seeds = {loop.count("seed")};
  } else {
    config.seeds = {0, 1, 2, 3, 4};
  }
  base.run_seed = config.seeds.front();
  base.auc_includes_seed_model = loop.flag("auc_includes_seed_model", true);
  config.parallelism = loop.count("parallelism", 1);
  if (config.parallelism == 0) throw ConfigError(loop.key_of("parallelism"), "must be positive");
  return config;
}

AppConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json config_to_json(const AppConfig& config) {
  const auto& ds = config.dataset;
  const auto& base = config.base;
  json dataset = {{"name", ds.name},
                  {"train", ds.train.string()},
                  {"format", ds.format == DatasetFormat::kJsonl ? "jsonl" : "csv"},
                  {"classes", ds.classes},
                  {"test_fraction", ds.test_fraction},
                  {"stratified", ds.stratified},
                  {"split_seed", ds.split_seed},
                  {"lowercase", base.vectorizer.lowercase},
                  {"max_tokens", base.vectorizer.max_tokens},
                  {"min_df", base.vectorizer.min_df}};
  if (ds.test) dataset["test"] = ds.test->string();
  json classifier = {{"kind", base.classifier.name()},
                     {"max_epochs", base.train.max_epochs},
                     {"learning_rate", base.train.learning_rate},
                     {"l2_penalty", base.train.l2_penalty},
                     {"batch_size", base.train.batch_size},
                     {"val_fraction", base.train.val_fraction},
                     {"early_stop_patience", base.train.early_stop_patience},
                     {"early_stop_accuracy", base.train.early_stop_accuracy}};
  if (base.classifier.kind == ClassifierKind::kExternal) classifier["command"] = base.classifier.command;
  json names = json::array();
  for (const auto s : config.strategies) names.push_back(to_string(s));
  return {{"dataset", std::move(dataset)},
          {"classifier", std::move(classifier)},
          {"strategy",
           {{"names", std::move(names)},
            {"num_neighbors", base.ca.num_neighbors},
            {"kl_epsilon", base.ca.epsilon},
            {"neighbor_metric", "cosine"}}},
          {"loop",
           {{"seed_set_size", base.seed_set_size},
            {"seed_mode", to_string(base.seed_mode)},
            {"num_iterations", base.num_iterations},
            {"query_size", base.query_size},
            {"seeds", config.seeds},
            {"auc_includes_seed_model", base.auc_includes_seed_model},
            {"parallelism", config.parallelism}}}};
}

LoadedData load_data(const DatasetSection& section) {
  const LabelSchema schema(section.classes);
  auto train = load_dataset(section.train, section.format, schema);
  LoadedData data;
  if (section.test) {
    data.train = std::make_shared<const Dataset>(std::move(train));
    data.test = std::make_shared<const Dataset>(load_dataset(*section.test, section.format, schema));
  } else if (train.fully_labeled()) {
    auto split = split_dataset(train, section.test_fraction, section.split_seed, section.stratified);
    data.train = std::make_shared<const Dataset>(std::move(split.train));
    data.test = std::make_shared<const Dataset>(std::move(split.test));
  } else {
    data.train = std::make_shared<const Dataset>(std::move(train));
  }
  return data;
}

}  // namespace al
