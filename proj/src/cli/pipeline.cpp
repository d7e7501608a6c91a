#include "tadc/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "tadc/checkpoint.hpp"
#include "tadc/error.hpp"
#include "tadc/rng.hpp"

namespace tadc {

namespace fs = std::filesystem;

namespace {

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t name_hash(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string format(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

void emit(std::string& log, std::ostream* echo, const std::string& line) {
    log += line + "\n";
    if (echo) *echo << line << "\n" << std::flush;
}

}  // namespace

std::uint64_t category_seed(std::uint64_t seed, const std::string& category, SeedStream stream) {
    return derive_seed(seed, name_hash(category), static_cast<std::uint64_t>(stream));
}

Model initial_model(const RunConfig& config, const std::string& category) {
    return Model::create(config.model, category_seed(config.seed, category, SeedStream::Init));
}

Model run_pretrain(const RunConfig& config, const std::string& category, std::span<const Image> train,
                   std::string& log, std::ostream* echo) {
    Model model = initial_model(config, category);
    emit(log, echo, "epoch,loss,lr");
    pretrain(model, train, config.pretrain, category_seed(config.seed, category, SeedStream::Pretrain),
             [&](const PretrainEpochStats& s) {
                 emit(log, echo, std::to_string(s.epoch) + "," + format("%.8g", s.loss) + "," + format("%.6e", s.lr));
             });
    return model;
}

Model run_stage2(const RunConfig& config, const std::string& category, Model model, const AblationVariant& v,
                 std::span<const Image> train, std::string& log, std::ostream* echo) {
    if (!v.stage2) return model;
    const Stage2Config cfg = stage2_for_variant(config.stage2, v);
    emit(log, echo, "epoch,total,mse,ssim,ce,lr");
    train_stage2(model, train, cfg, category_seed(config.seed, category, SeedStream::Stage2),
                 [&](const Stage2EpochStats& s) {
                     emit(log, echo,
                          std::to_string(s.epoch) + "," + format("%.8g", s.total) + "," + format("%.8g", s.mse) + "," +
                              format("%.8g", s.ssim) + "," + format("%.8g", s.ce) + "," + format("%.6e", s.lr));
                 });
    return model;
}

std::vector<EvalItem> score_corpus(const Model& model, const Corpus& corpus, const ScoreOptions& options,
                                   std::vector<ScoreMaps>* maps) {
    std::vector<Image> images;
    images.reserve(corpus.test.size());
    for (const TestItem& t : corpus.test) images.push_back(t.image);
    std::vector<ScoreMaps> scored = score_images(model, images, options);
    std::vector<EvalItem> items;
    items.reserve(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        items.push_back({scored[i].image_score, corpus.test[i].anomalous, scored[i].S, corpus.test[i].mask});
    }
    if (maps) *maps = std::move(scored);
    return items;
}

std::string scores_csv(const Corpus& corpus, std::span<const EvalItem> items) {
    std::string out = "name,label,score\n";
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += corpus.test[i].name + "," + (items[i].anomalous ? "1" : "0") + "," + format("%.8g", items[i].score) + "\n";
    }
    return out;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
    std::string out = "variant,category,image_auc,pixel_auc\n";
    for (const AblationRow& r : rows) {
        out += to_string(r.variant) + "," + r.category + "," + format("%.6f", r.image_auc) + "," +
               format("%.6f", r.pixel_auc) + "\n";
    }
    return out;
}

double mean_auc(std::span<const AblationRow> rows, VariantId variant, bool pixel) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const AblationRow& r : rows) {
        if (r.variant != variant) continue;
        sum += pixel ? r.pixel_auc : r.image_auc;
        ++n;
    }
    if (n == 0) throw MetricError("no results for variant " + to_string(variant));
    return sum / static_cast<double>(n);
}

std::string ablation_markdown(std::span<const AblationRow> rows) {
    std::vector<VariantId> variants;
    std::vector<std::string> categories;
    for (const AblationRow& r : rows) {
        if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
        if (std::find(categories.begin(), categories.end(), r.category) == categories.end()) {
            categories.push_back(r.category);
        }
    }
    auto lookup = [&](VariantId v, const std::string& c, bool pixel) -> std::string {
        for (const AblationRow& r : rows) {
            if (r.variant == v && r.category == c) return format("%.3f", pixel ? r.pixel_auc : r.image_auc);
        }
        return "-";
    };
    std::string out;
    for (const bool pixel : {false, true}) {
        out += pixel ? "## Pixel-level AUC\n\n" : "## Image-level AUC\n\n";
        out += "| category |";
        for (VariantId v : variants) out += " " + to_string(v) + " |";
        out += "\n|---|";
        for (std::size_t i = 0; i < variants.size(); ++i) out += "---|";
        out += "\n";
        for (const std::string& c : categories) {
            out += "| " + c + " |";
            for (VariantId v : variants) out += " " + lookup(v, c, pixel) + " |";
            out += "\n";
        }
        out += "| mean |";
        for (VariantId v : variants) out += " " + format("%.3f", mean_auc(rows, v, pixel)) + " |";
        out += pixel ? "\n" : "\n\n";
    }
    return out;
}

std::vector<AblationRow> run_ablation(const RunConfig& config, std::span<const Corpus> corpora,
                                      std::span<const VariantId> variants, const fs::path& out_dir,
                                      const ProgressFn& progress) {
    validate(config);
    if (variants.empty()) throw ConfigError("ablation: no variants selected");
    for (VariantId id : variants) check_variant(variant(id));
    auto note = [&](const std::string& msg) {
        if (progress) progress(msg);
    };
    const bool write = !out_dir.empty();

    std::vector<AblationRow> rows;
    for (const Corpus& corpus : corpora) {
        const fs::path cat_dir = out_dir / corpus.name;
        const bool need_stage1 =
            std::any_of(variants.begin(), variants.end(), [](VariantId id) { return variant(id).pretrain; });
        Model stage1;
        if (need_stage1) {
            note(corpus.name + ": stage 1");
            std::string log;
            stage1 = run_pretrain(config, corpus.name, corpus.train, log);
            if (write) {
                atomic_write(cat_dir / "stage1_log.csv", log);
                save_checkpoint(cat_dir / "stage1.ckpt", stage1, {Stage::Stage1, config.seed, true, ""});
            }
        }
        for (VariantId id : variants) {
            const AblationVariant& v = variant(id);
            const std::string name = to_string(id);
            note(corpus.name + ": variant " + name);
            std::string log;
            Model model = v.pretrain ? stage1.clone() : initial_model(config, corpus.name);
            model = run_stage2(config, corpus.name, std::move(model), v, corpus.train, log);
            const ScoreOptions options =
                score_options_for_variant(config.eval, v, category_seed(config.seed, corpus.name, SeedStream::Score));
            const std::vector<EvalItem> items = score_corpus(model, corpus, options);
            const EvalReport report = evaluate(corpus.name, items);
            rows.push_back({id, corpus.name, report.image_auc, report.pixel_auc});
            note(corpus.name + ": variant " + name + " image_auc=" + format("%.4f", report.image_auc) +
                 " pixel_auc=" + format("%.4f", report.pixel_auc));
            if (write) {
                if (v.stage2) {
                    atomic_write(cat_dir / (name + "_log.csv"), log);
                    save_checkpoint(cat_dir / (name + ".ckpt"), model, {Stage::Stage2, config.seed, v.pretrain, name});
                }
                atomic_write(cat_dir / (name + "_scores.csv"), scores_csv(corpus, items));
            }
        }
    }
    if (write) {
        atomic_write(out_dir / "ablation.csv", ablation_csv(rows));
        atomic_write(out_dir / "ablation.md", ablation_markdown(rows));
    }
    return rows;
}

}  // namespace tadc
