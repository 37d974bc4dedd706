#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dnagen/models/networks.hpp"

namespace dnagen::models {

// Versioned container: architecture descriptor (JSON) plus named tensors.
//
// Layout (little-endian):
//   "DNAGENCK" | u32 version | u64 descriptor bytes | descriptor | u64 FNV-1a of
//   descriptor | u32 entries | per entry: u32 name bytes, name, u32 rank,
//   u64 dims[rank], f64 values[numel].
struct Checkpoint {
  nlohmann::json descriptor;
  std::vector<std::pair<std::string, ad::Tensor>> entries;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
// Throws CheckpointError on bad magic, version, descriptor hash or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const GeneratorSpec& s);
nlohmann::json to_json(const DiscriminatorSpec& s);
nlohmann::json to_json(const PredictorSpec& s);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
DiscriminatorSpec discriminator_spec_from_json(const nlohmann::json& j);
PredictorSpec predictor_spec_from_json(const nlohmann::json& j);

struct GanModels {
  Generator gen;
  Discriminator disc;
};

void save_gan(const Generator& gen, const Discriminator& disc, const std::filesystem::path& path);
GanModels load_gan(const std::filesystem::path& path);

void save_predictor(const Predictor& p, const std::filesystem::path& path);
Predictor load_predictor(const std::filesystem::path& path);

// FNV-1a over the whole file, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

}  // namespace dnagen::models
