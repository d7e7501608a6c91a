// tadc: command-line front end for synthesis, training, scoring and evaluation.

#include <cstdint>
#include <filesystem>
#include <set>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tadc/augment.hpp"
#include "tadc/checkpoint.hpp"
#include "tadc/config.hpp"
#include "tadc/corpus.hpp"
#include "tadc/error.hpp"
#include "tadc/kernels.hpp"
#include "tadc/metrics.hpp"
#include "tadc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tadc;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
};

RunConfig load_config(const Common& c) {
    RunConfig rc = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
    if (c.seed) rc.seed = *c.seed;
    return rc;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "Run config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Overrides the config seed");
}

std::string category_of(const fs::path& data) {
    return fs::weakly_canonical(data).filename().string();
}

int cmd_synth(const fs::path& out, const std::string& categories, std::uint64_t seed, const SynthSpec& base) {
    for (const std::string& name : split_list(categories)) {
        SynthSpec spec = base;
        spec.category = parse_texture(name);
        spec.seed = seed;
        write_corpus(out, generate_synthetic(spec));
        std::cerr << "wrote " << (out / name).string() << "\n";
    }
    return 0;
}

int cmd_pretrain(const Common& c, const fs::path& data, const fs::path& out) {
    const RunConfig rc = load_config(c);
    const Corpus corpus = load_corpus(data, rc.model.image_size, rc.model.channels);
    std::string log;
    const Model model = run_pretrain(rc, category_of(data), corpus.train, log, &std::cout);
    atomic_write(out / "stage1_log.csv", log);
    save_checkpoint(out / "stage1.ckpt", model, {Stage::Stage1, rc.seed, true, ""});
    return 0;
}

int cmd_train(const Common& c, const fs::path& data, const std::string& init, const fs::path& out,
              const std::string& variant_name) {
    const RunConfig rc = load_config(c);
    const AblationVariant& v = variant(parse_variant(variant_name));
    check_variant(v);
    if (!v.stage2) throw ConfigError("variant " + to_string(v.id) + " has no stage-2 training");
    const std::string category = category_of(data);
    Model model;
    if (v.pretrain) {
        if (init.empty()) throw ConfigError("variant " + to_string(v.id) + " needs a stage-1 checkpoint (--init)");
        LoadedCheckpoint ck = load_checkpoint(init, rc.model);
        if (ck.meta.stage != Stage::Stage1) throw CheckpointError(init + ": expected a stage-1 checkpoint");
        require_pretrained(ck.meta, init);
        model = std::move(ck.model);
    } else {
        if (!init.empty()) throw ConfigError("variant " + to_string(v.id) + " trains from scratch; drop --init");
        model = initial_model(rc, category);
    }
    const Corpus corpus = load_corpus(data, rc.model.image_size, rc.model.channels);
    std::string log;
    model = run_stage2(rc, category, std::move(model), v, corpus.train, log, &std::cout);
    const std::string name = to_string(v.id);
    atomic_write(out / (name + "_log.csv"), log);
    save_checkpoint(out / (name + ".ckpt"), model, {Stage::Stage2, rc.seed, v.pretrain, name});
    return 0;
}

// Variant for scoring: explicit flag, else the one recorded in the checkpoint.
const AblationVariant& scoring_variant(const std::string& flag, const LoadedCheckpoint& ck) {
    if (!flag.empty()) return variant(parse_variant(flag));
    if (!ck.meta.variant.empty()) return variant(parse_variant(ck.meta.variant));
    return variant(ck.meta.stage == Stage::Stage1 ? VariantId::I : VariantId::Ours);
}

void check_scoring(const AblationVariant& v, const LoadedCheckpoint& ck, const std::string& path) {
    if (v.score_mode == ScoreMode::MaskedE) return;
    if (ck.meta.stage != Stage::Stage2) throw ConfigError(path + ": " + to_string(v.score_mode) + " scoring needs a stage-2 checkpoint");
}

int cmd_score(const Common& c, const std::string& ckpt, const std::vector<std::string>& inputs, const fs::path& out,
              const std::string& variant_name, bool png, bool dump_raw) {
    const RunConfig rc = load_config(c);
    const LoadedCheckpoint ck = load_checkpoint(ckpt);
    const AblationVariant& v = scoring_variant(variant_name, ck);
    check_scoring(v, ck, ckpt);
    const ModelConfig& mc = ck.model.config;

    std::vector<fs::path> paths;
    for (const std::string& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(in)) {
                const std::string ext = e.path().extension().string();
                if (e.is_regular_file() && (ext == ".png" || ext == ".pgm")) found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            paths.insert(paths.end(), found.begin(), found.end());
        } else {
            paths.emplace_back(in);
        }
    }
    if (paths.empty()) throw IoError("score: no input images");
    std::vector<Image> images;
    for (const fs::path& p : paths) images.push_back(resize_area(read_image(p, mc.channels), mc.image_size, mc.image_size));

    const ScoreOptions options = score_options_for_variant(rc.eval, v, ck.meta.seed);
    const std::vector<ScoreMaps> maps = score_images(ck.model, images, options);
    std::string csv = "image,score,heatmap\n";
    std::set<std::string> used;
    TensorFile raw;
    raw.stage = Stage::Maps;
    raw.seed = ck.meta.seed;
    raw.header = {{"variant", to_string(v.id)}};
    for (std::size_t i = 0; i < maps.size(); ++i) {
        // Inputs from different directories may share a file stem.
        std::string stem = paths[i].stem().string();
        for (std::size_t k = 1; !used.insert(stem).second; ++k) stem = paths[i].stem().string() + "-" + std::to_string(k);
        char score[32];
        std::snprintf(score, sizeof(score), "%.8g", maps[i].image_score);
        csv += paths[i].string() + "," + score + "," + stem + "_S.pgm\n";
        write_heatmap_pgm(out / (stem + "_S.pgm"), maps[i].S);
        if (png) write_heatmap_png(out / (stem + "_S.png"), maps[i].S);
        if (dump_raw) {
            for (const auto& [suffix, im] : {std::pair{"E", &maps[i].E}, {"P", &maps[i].P}, {"S", &maps[i].S}}) {
                raw.tensors.emplace_back(stem + "." + suffix, Tensor::from({im->height, im->width}, im->data));
            }
        }
    }
    atomic_write(out / "scores.csv", csv);
    if (dump_raw) save_tensor_file(out / "maps.tdc", raw);
    return 0;
}

int cmd_eval(const Common& c, const std::string& ckpt, const fs::path& data, const fs::path& out,
             const std::string& variant_name) {
    const RunConfig rc = load_config(c);
    const LoadedCheckpoint ck = load_checkpoint(ckpt);
    const AblationVariant& v = scoring_variant(variant_name, ck);
    check_scoring(v, ck, ckpt);
    const Corpus corpus = load_corpus(data, ck.model.config.image_size, ck.model.config.channels);
    const std::string category = category_of(data);
    const ScoreOptions options =
        score_options_for_variant(rc.eval, v, category_seed(rc.seed, category, SeedStream::Score));
    const std::vector<EvalItem> items = score_corpus(ck.model, corpus, options);
    const EvalReport report = evaluate(category, items);
    const std::vector<EvalReport> reports{report};
    atomic_write(out / "report.csv", reports_csv(reports));
    atomic_write(out / "report.json", reports_json(reports));
    atomic_write(out / "scores.csv", scores_csv(corpus, items));
    std::cout << reports_csv(reports);
    return 0;
}

int cmd_ablate(const Common& c, const fs::path& data, const fs::path& out, const std::string& categories,
               const std::string& variants) {
    const RunConfig rc = load_config(c);
    std::vector<VariantId> ids;
    for (const std::string& v : split_list(variants)) ids.push_back(parse_variant(v));
    for (VariantId id : ids) check_variant(variant(id));
    const std::vector<std::string> names = categories.empty() ? list_categories(data) : split_list(categories);
    if (names.empty()) throw IoError(data.string() + ": no categories found");
    std::vector<Corpus> corpora;
    for (const std::string& n : names) corpora.push_back(load_corpus(data / n, rc.model.image_size, rc.model.channels));
    const std::vector<AblationRow> rows =
        run_ablation(rc, corpora, ids, out, [](const std::string& msg) { std::cerr << msg << "\n"; });
    std::cout << ablation_markdown(rows);
    return 0;
}

int cmd_augment(const Common& c, const fs::path& data, const fs::path& out, std::size_t count) {
    const RunConfig rc = load_config(c);
    const Corpus corpus = load_corpus(data, rc.model.image_size, rc.model.channels);
    const std::vector<AugmentedSample> stream = make_epoch_stream(corpus.train, rc.stage2.corruption, 0, rc.seed);
    for (std::size_t i = 0; i < std::min(count, stream.size()); ++i) {
        char stem[16];
        std::snprintf(stem, sizeof(stem), "%03zu", i);
        write_png(out / (std::string(stem) + "_original.png"), stream[i].original);
        write_png(out / (std::string(stem) + "_corrupted.png"), stream[i].corrupted);
        write_png(out / (std::string(stem) + "_mask.png"), stream[i].label);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage transformer anomaly detection"};
    app.require_subcommand(1);
    Common common;
    std::string data, out, init, ckpt, variant_name, categories, variants = "I,II,III,IV,V,VI,VII,VIII,OURS";
    std::vector<std::string> images;
    std::uint64_t synth_seed = 0;
    std::size_t count = 16;
    bool png = false, dump_raw = false;
    SynthSpec synth;
    std::string synth_categories = "stripes,checker,blobs";

    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus");
    synth_cmd->add_option("--out", out, "Output root")->required();
    synth_cmd->add_option("--categories", synth_categories, "Comma-separated: stripes,checker,blobs");
    synth_cmd->add_option("--seed", synth_seed);
    synth_cmd->add_option("--image-size", synth.image_size);
    synth_cmd->add_option("--n-train", synth.n_train);
    synth_cmd->add_option("--n-test-normal", synth.n_test_normal);
    synth_cmd->add_option("--n-test-anomalous", synth.n_test_anomalous);

    auto* pre = app.add_subcommand("pretrain", "Stage 1: masked reconstruction on normal images");
    add_common(pre, common);
    pre->add_option("--data", data, "Category directory")->required();
    pre->add_option("--out", out, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Stage 2: frozen-encoder fine-tuning");
    add_common(train, common);
    train->add_option("--data", data, "Category directory")->required();
    train->add_option("--init", init, "Stage-1 checkpoint");
    train->add_option("--out", out, "Output directory")->required();
    train->add_option("--variant", variant_name, "I..VIII or OURS")->default_val("OURS");

    auto* score = app.add_subcommand("score", "Score images and write heatmaps");
    add_common(score, common);
    score->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    score->add_option("--images", images, "Image files or directories")->required();
    score->add_option("--out", out, "Output directory")->required();
    score->add_option("--variant", variant_name);
    score->add_flag("--png", png, "Also write 8-bit PNG heatmaps");
    score->add_flag("--dump-raw", dump_raw, "Write raw E/P/S maps to maps.tdc");

    auto* eval = app.add_subcommand("eval", "Image and pixel AUC on a category");
    add_common(eval, common);
    eval->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data, "Category directory")->required();
    eval->add_option("--out", out, "Output directory")->required();
    eval->add_option("--variant", variant_name);

    auto* ablate = app.add_subcommand("ablate", "Run the variant matrix");
    add_common(ablate, common);
    ablate->add_option("--data", data, "Corpus root")->required();
    ablate->add_option("--out", out, "Output directory")->required();
    ablate->add_option("--categories", categories, "Comma-separated subset");
    ablate->add_option("--variants", variants, "Comma-separated variant ids");

    auto* augment = app.add_subcommand("augment", "Dump corrupted training samples as PNG triplets");
    add_common(augment, common);
    augment->add_option("--data", data, "Category directory")->required();
    augment->add_option("--out", out, "Output directory")->required();
    augment->add_option("--count", count);

    CLI11_PARSE(app, argc, argv);
    try {
        std::cerr << "kernels: " << to_string(kernels::active_backend()) << "\n";
        if (*synth_cmd) return cmd_synth(out, synth_categories, synth_seed, synth);
        if (*pre) return cmd_pretrain(common, data, out);
        if (*train) return cmd_train(common, data, init, out, variant_name);
        if (*score) return cmd_score(common, ckpt, images, out, variant_name, png, dump_raw);
        if (*eval) return cmd_eval(common, ckpt, data, out, variant_name);
        if (*ablate) return cmd_ablate(common, data, out, categories, variants);
        if (*augment) return cmd_augment(common, data, out, count);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
