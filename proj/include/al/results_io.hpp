#pragma once

#include <ostream>
#include <span>
#include <string>

#include "al/loop.hpp"
#include "json.hpp"

namespace al {

/// Shortest decimal text that round-trips; "nan"/"inf" for non-finite values.
std::string format_number(double value);

std::string run_id(const ExperimentConfig& config);
inline std::string run_id(const ExperimentResult& result) { return run_id(result.config); }

nlohmann::json experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);

nlohmann::json result_to_json(const ExperimentResult& result);
ExperimentResult result_from_json(const nlohmann::json& doc);

inline constexpr const char* kResultsCsvHeader =
    "run_id,dataset,strategy,classifier,seed,iteration,num_labeled,accuracy,val_loss,query_seconds";

/// One row per iteration record, preceded by kResultsCsvHeader.
void write_results_csv(std::ostream& out, std::span<const ExperimentResult> results);

}  // namespace al
