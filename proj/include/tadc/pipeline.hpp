#pragma once

// End-to-end runs: stage 1, stage 2, scoring, evaluation and the ablation
// matrix. Every random stream is keyed by (run seed, category name), so a
// run over one category reproduces the same numbers inside a larger run.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tadc/config.hpp"
#include "tadc/corpus.hpp"
#include "tadc/metrics.hpp"
#include "tadc/model.hpp"

namespace tadc {

enum class SeedStream : std::uint64_t { Init = 1, Pretrain = 2, Stage2 = 3, Score = 4 };

std::uint64_t category_seed(std::uint64_t seed, const std::string& category, SeedStream stream);

/// Randomly initialized model for a category.
Model initial_model(const RunConfig& config, const std::string& category);

/// Appends "epoch,loss,lr" lines (with header) to `log`; optionally echoes
/// each line to `echo`.
Model run_pretrain(const RunConfig& config, const std::string& category, std::span<const Image> train,
                   std::string& log, std::ostream* echo = nullptr);

/// Stage 2 for `v` starting from `model`; appends "epoch,total,mse,ssim,ce,lr" lines.
Model run_stage2(const RunConfig& config, const std::string& category, Model model, const AblationVariant& v,
                 std::span<const Image> train, std::string& log, std::ostream* echo = nullptr);

/// Scores every test item; `maps` (optional) receives the per-item maps.
std::vector<EvalItem> score_corpus(const Model& model, const Corpus& corpus, const ScoreOptions& options,
                                   std::vector<ScoreMaps>* maps = nullptr);

/// "name,label,score" for every test item.
std::string scores_csv(const Corpus& corpus, std::span<const EvalItem> items);

struct AblationRow {
    VariantId variant;
    std::string category;
    double image_auc = 0.0;
    double pixel_auc = 0.0;
};

std::string ablation_csv(std::span<const AblationRow> rows);
/// Image-AUC and pixel-AUC tables, categories as rows and variants as columns.
std::string ablation_markdown(std::span<const AblationRow> rows);
/// Mean image (or pixel) AUC of a variant over categories.
double mean_auc(std::span<const AblationRow> rows, VariantId variant, bool pixel = false);

using ProgressFn = std::function<void(const std::string&)>;

/// Runs the variants over every corpus. Stage-1 weights are trained once per
/// category and shared by every pretrained variant. When `out_dir` is not
/// empty, checkpoints, training logs, ablation.csv and ablation.md are
/// written there.
std::vector<AblationRow> run_ablation(const RunConfig& config, std::span<const Corpus> corpora,
                                      std::span<const VariantId> variants, const std::filesystem::path& out_dir,
                                      const ProgressFn& progress = {});

}  // namespace tadc
