#pragma once

// Run configuration (JSON) and the ablation variant table.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tadc/mae.hpp"
#include "tadc/model.hpp"
#include "tadc/score.hpp"
#include "tadc/stage2.hpp"

namespace tadc {

struct EvalConfig {
    Pooling pooling = Pooling::Mean;
    double smooth_sigma = 0.0;
    bool normalize_per_image = false;
    std::size_t mask_draws = 8;
};

struct RunConfig {
    ModelConfig model{};
    PretrainConfig pretrain{};
    Stage2Config stage2{};
    EvalConfig eval{};
    std::uint64_t seed = 0;
};

/// Parses and validates a run config. Missing keys keep their defaults;
/// unknown keys and wrong types raise ConfigError naming the JSON path.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

nlohmann::json to_json(const ModelConfig& config);
/// `path` prefixes error messages (e.g. "/model").
ModelConfig parse_model_config(const nlohmann::json& doc, const std::string& path = "");

/// Cross-section checks (SSIM window vs image size, ranges, ...).
void validate(const RunConfig& config);

enum class VariantId { I, II, III, IV, V, VI, VII, VIII, Ours };

struct AblationVariant {
    VariantId id;
    bool pretrain;           // stage-1 weights underpin the model
    bool stage2;             // runs stage-2 training at all
    InputMode input_mode;    // stage-2 input
    bool use_mse;
    bool use_ssim;
    bool use_ce;
    ScoreMode score_mode;
};

std::string to_string(VariantId id);
VariantId parse_variant(const std::string& name);
const std::vector<AblationVariant>& variant_table();
const AblationVariant& variant(VariantId id);

/// Applies a variant's loss selection, input mode and encoder training flag
/// to a stage-2 config.
Stage2Config stage2_for_variant(const Stage2Config& base, const AblationVariant& v);
/// Scoring options for a variant under the eval config and seed.
ScoreOptions score_options_for_variant(const EvalConfig& eval, const AblationVariant& v, std::uint64_t seed);

/// Throws ConfigError when a variant's flags contradict each other.
void check_variant(const AblationVariant& v);

}  // namespace tadc
