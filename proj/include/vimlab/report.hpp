#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "vimlab/adversarial.hpp"
#include "vimlab/metrics.hpp"
#include "vimlab/optim.hpp"

namespace vimlab {

std::string code_version();

nlohmann::json history_to_json(const TrainHistory& history);
nlohmann::json repr_to_json(const ReprReport& repr);
nlohmann::json robustness_to_json(const RobustnessReport& rep);

// Shortest text that parses back to the same double.
std::string format_double(double v);

// Pretty-printed, key-sorted, newline-terminated; identical input gives
// identical bytes.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace vimlab
