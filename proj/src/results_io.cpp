#include "al/results_io.hpp"

#include <charconv>
#include <cmath>

namespace al {

using nlohmann::json;

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, end);
}

std::string run_id(const ExperimentConfig& config) {
  std::string id = config.dataset_name + "-" + std::string(to_string(config.strategy)) + "-" +
                   config.classifier.name() + "-s" + std::to_string(config.run_seed);
  for (auto& ch : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    if (!ok) ch = '_';
  }
  return id;
}

namespace {

json number_or_null(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

double number_from(const json& value) { return value.is_null() ? std::nan("") : value.get<double>(); }

}  // namespace

json experiment_config_to_json(const ExperimentConfig& c) {
  json classifier = {{"kind", c.classifier.name()}};
  if (c.classifier.kind == ClassifierKind::kExternal) classifier["command"] = c.classifier.command;
  return {
      {"dataset", c.dataset_name},
      {"strategy", to_string(c.strategy)},
      {"num_neighbors", c.ca.num_neighbors},
      {"kl_epsilon", c.ca.epsilon},
      {"classifier", classifier},
      {"train",
       {{"max_epochs", c.train.max_epochs},
        {"learning_rate", c.train.learning_rate},
        {"l2_penalty", c.train.l2_penalty},
        {"batch_size", c.train.batch_size},
        {"val_fraction", c.train.val_fraction},
        {"early_stop_patience", c.train.early_stop_patience},
        {"early_stop_accuracy", c.train.early_stop_accuracy}}},
      {"vectorizer",
       {{"lowercase", c.vectorizer.lowercase},
        {"max_tokens", c.vectorizer.max_tokens},
        {"min_df", c.vectorizer.min_df}}},
      {"seed_set_size", c.seed_set_size},
      {"seed_mode", to_string(c.seed_mode)},
      {"num_iterations", c.num_iterations},
      {"query_size", c.query_size},
      {"run_seed", c.run_seed},
      {"auc_includes_seed_model", c.auc_includes_seed_model},
  };
}

ExperimentConfig experiment_config_from_json(const json& doc) {
  ExperimentConfig c;
  c.dataset_name = doc.at("dataset").get<std::string>();
  c.strategy = parse_strategy(doc.at("strategy").get<std::string>());
  c.ca.num_neighbors = doc.at("num_neighbors").get<std::size_t>();
  c.ca.epsilon = doc.at("kl_epsilon").get<double>();
  const auto& classifier = doc.at("classifier");
  if (classifier.at("kind").get<std::string>() == "external") {
    c.classifier.kind = ClassifierKind::kExternal;
    c.classifier.command = classifier.at("command").get<std::string>();
  }
  const auto& train = doc.at("train");
  c.train.max_epochs = train.at("max_epochs").get<std::size_t>();
  c.train.learning_rate = train.at("learning_rate").get<double>();
  c.train.l2_penalty = train.at("l2_penalty").get<double>();
  c.train.batch_size = train.at("batch_size").get<std::size_t>();
  c.train.val_fraction = train.at("val_fraction").get<double>();
  c.train.early_stop_patience = train.at("early_stop_patience").get<std::size_t>();
  c.train.early_stop_accuracy = train.at("early_stop_accuracy").get<double>();
  const auto& vectorizer = doc.at("vectorizer");
  c.vectorizer.lowercase = vectorizer.at("lowercase").get<bool>();
  c.vectorizer.max_tokens = vectorizer.at("max_tokens").get<std::size_t>();
  c.vectorizer.min_df = vectorizer.at("min_df").get<std::size_t>();
  c.seed_set_size = doc.at("seed_set_size").get<std::size_t>();
  c.seed_mode = parse_seed_mode(doc.at("seed_mode").get<std::string>());
  c.num_iterations = doc.at("num_iterations").get<std::size_t>();
  c.query_size = doc.at("query_size").get<std::size_t>();
  c.run_seed = doc.at("run_seed").get<std::uint64_t>();
  c.auc_includes_seed_model = doc.at("auc_includes_seed_model").get<bool>();
  return c;
}

json result_to_json(const ExperimentResult& result) {
  json records = json::array();
  for (const auto& r : result.records) {
    records.push_back({{"iteration", r.iteration},
                       {"num_labeled", r.num_labeled},
                       {"accuracy", number_or_null(r.test_accuracy)},
                       {"val_loss", number_or_null(r.val_loss)},
                       {"query_seconds", r.query_seconds},
                       {"queried_ids", r.queried_ids}});
  }
  return {{"run_id", run_id(result)},
          {"config", experiment_config_to_json(result.config)},
          {"records", std::move(records)},
          {"final_accuracy", number_or_null(result.final_accuracy)},
          {"auc", number_or_null(result.auc)}};
}

ExperimentResult result_from_json(const json& doc) {
  ExperimentResult result;
  result.config = experiment_config_from_json(doc.at("config"));
  for (const auto& r : doc.at("records")) {
    IterationRecord record;
    record.iteration = r.at("iteration").get<std::size_t>();
    record.num_labeled = r.at("num_labeled").get<std::size_t>();
    record.test_accuracy = number_from(r.at("accuracy"));
    record.val_loss = number_from(r.at("val_loss"));
    record.query_seconds = r.at("query_seconds").get<double>();
    record.queried_ids = r.at("queried_ids").get<std::vector<std::size_t>>();
    result.records.push_back(std::move(record));
  }
  result.final_accuracy = number_from(doc.at("final_accuracy"));
  result.auc = number_from(doc.at("auc"));
  return result;
}

namespace {

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (const char ch : value) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + "\"";
}

}  // namespace

void write_results_csv(std::ostream& out, std::span<const ExperimentResult> results) {
  out << kResultsCsvHeader << '\n';
  for (const auto& result : results) {
    const auto& c = result.config;
    const std::string prefix = csv_field(run_id(c)) + "," + csv_field(c.dataset_name) + "," +
                               std::string(to_string(c.strategy)) + "," + c.classifier.name() + "," +
                               std::to_string(c.run_seed);
    for (const auto& r : result.records) {
      out << prefix << ',' << r.iteration << ',' << r.num_labeled << ',' << format_number(r.test_accuracy) << ','
          << format_number(r.val_loss) << ',' << format_number(r.query_seconds) << '\n';
    }
  }
}

}  // namespace al
