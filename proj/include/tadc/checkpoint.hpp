#pragma once

// Binary tensor container and model checkpoints.
//
// Layout (all integers little-endian):
//   "TADC"  u32 version  u8 stage  u64 seed
//   u32 header_len, header_len bytes of JSON (model config and metadata)
//   u32 count, then per tensor:
//     u32 name_len, name bytes, u8 dtype (0 = f32), u32 rank, u64 dims[rank],
//     prod(dims) f32 values
// Nothing may follow the last tensor.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tadc/model.hpp"

namespace tadc {

enum class Stage : std::uint8_t { Stage1 = 1, Stage2 = 2, Maps = 3 };

std::string to_string(Stage stage);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorFile {
    Stage stage = Stage::Stage1;
    std::uint64_t seed = 0;
    nlohmann::json header = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;
};

std::vector<std::uint8_t> encode_tensor_file(const TensorFile& file);
/// Throws CheckpointError on any malformed, truncated or over-long input.
TensorFile decode_tensor_file(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile load_tensor_file(const std::filesystem::path& path);

struct CheckpointMeta {
    Stage stage = Stage::Stage1;
    std::uint64_t seed = 0;
    /// Whether stage-1 pretraining underpins these weights.
    bool pretrained = true;
    std::string variant;  // ablation variant id, empty for plain runs
};

struct LoadedCheckpoint {
    Model model;
    CheckpointMeta meta;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointMeta& meta);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
/// As above, and rejects a checkpoint whose model config differs from `expected`.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

/// Throws CheckpointError unless `meta` describes pretrained weights.
void require_pretrained(const CheckpointMeta& meta, const std::string& origin);

}  // namespace tadc
