#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "vimlab/model.hpp"

namespace vimlab {

inline constexpr char kCheckpointMagic[8] = {'V', 'I', 'M', 'L', 'A', 'B', 'C', 'K'};
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  StochasticClassifier model;
  // Everything from the JSON header besides the tensor table: objective, seed, ...
  nlohmann::json meta;
};

nlohmann::json model_shape_to_json(const ModelShape& shape);
ModelShape model_shape_from_json(const nlohmann::json& j);

// Layout: 8-byte magic, u64 LE header length, UTF-8 JSON header, then every
// parameter as raw little-endian f64 in declaration order.
void save_checkpoint(const std::filesystem::path& path, const StochasticClassifier& model,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Throws VersionError unless the checkpoint describes `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelShape& expected);

}  // namespace vimlab
