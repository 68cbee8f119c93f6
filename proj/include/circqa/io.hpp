#pragma once

// On-disk formats: JSON-lines datasets with a manifest, checkpoints (JSON
// manifest + little-endian float64 array), prediction CSVs and hashing.

#include <filesystem>
#include <string>

#include "circqa/dataset.hpp"
#include "circqa/metrics.hpp"
#include "circqa/params.hpp"
#include "json.hpp"

namespace circqa {

namespace fs = std::filesystem;

/// 64-bit FNV-1a, as 16 lower-case hex digits.
std::string fnv1a64(std::string_view data);
std::string file_hash(const fs::path& path);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

/// Creates `dir` (and parents). Throws Io when it exists and is not empty.
void ensure_fresh_dir(const fs::path& dir);

nlohmann::json example_to_json(const LabeledExample& e);
LabeledExample example_from_json(const nlohmann::json& j);

/// Hash over every split's JSON lines in a fixed order.
std::string dataset_hash(const DatasetBundle& b);

/// Writes <split>.jsonl files and manifest.json; returns the manifest.
nlohmann::json write_dataset(const fs::path& dir, const DatasetBundle& b, const nlohmann::json& extra = {});
/// Throws Io / Format.
DatasetBundle read_dataset(const fs::path& dir);

struct Checkpoint {
  nlohmann::json model;
  std::uint64_t seed = 0;
  int epoch = 0;
  nlohmann::json metrics;
  ParameterStore store;
};

/// Writes <stem>.json and <stem>.bin. Returns the manifest path.
fs::path save_checkpoint(const fs::path& stem, const nlohmann::json& model, const ParameterStore& store,
                         std::uint64_t seed, int epoch, const nlohmann::json& metrics = {});
Checkpoint load_checkpoint(const fs::path& manifest);

/// "id,prediction" rows.
void write_predictions(const fs::path& path, const Predictions& preds);
Predictions read_predictions(const fs::path& path);

}  // namespace circqa
