// Acceptance gate: prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. Criteria 6-8 train the full desk-scale ablation twice.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "suites.hpp"
#include "tadc/config.hpp"
#include "tadc/corpus.hpp"
#include "tadc/kernels.hpp"
#include "tadc/pipeline.hpp"
#include "tadc/stage2.hpp"

using namespace tadc;
using tadc::testing::CheckResult;
using tadc::testing::random_image;
using tadc::testing::tiny_model_config;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    int id;
    bool pass;
    std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
    verdicts.push_back({id, pass, detail});
    std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

void check_suite(int id, const std::vector<CheckResult>& results, double elapsed) {
    std::size_t failed = 0;
    double worst_ratio = 0.0;
    for (const CheckResult& r : results) {
        if (!r.pass()) {
            ++failed;
            std::cerr << "  " << r.name << " error " << r.error << " > " << r.tolerance << "\n";
        }
        worst_ratio = std::max(worst_ratio, r.error / r.tolerance);
    }
    const bool ok = failed == 0 && elapsed < 60.0;
    report(id, ok,
           std::to_string(results.size() - failed) + "/" + std::to_string(results.size()) +
               " checks within tolerance, worst error/tolerance " + fmt("%.3f", worst_ratio) + ", " +
               fmt("%.1f", elapsed) + " s (limit 60 s)");
}

// Visible-row invariance of the masked loss, the channel-mean error map, the
// S = E*P product, mean pooling and the S = E/2 floor of an untrained head.
void identities() {
    Rng rng(31);
    std::vector<std::string> failures;

    std::size_t loss_checks = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 16 + t, d = 12;
        const Tensor target = tadc::testing::random_tensor({n, d}, rng);
        Tensor pred = tadc::testing::random_tensor({n, d}, rng);
        const MaskPlan plan = sample_mask(n, 0.75, rng);
        const float before = masked_mse(target, pred, plan).item();
        for (std::size_t r : plan.visible) {
            for (std::size_t c = 0; c < d; ++c) pred.mutable_data()[r * d + c] += static_cast<float>(rng.uniform(-5, 5));
        }
        if (masked_mse(target, pred, plan).item() != before) failures.push_back("masked loss visible rows");
        ++loss_checks;
    }

    Model m = Model::create(tiny_model_config(), 32);
    ScoreOptions fusion;
    double worst_channel = 0.0, worst_mean = 0.0;
    std::size_t product_mismatch = 0;
    for (int t = 0; t < 20; ++t) {
        const Image im = random_image(3, 16, 16, rng);
        const ScoreMaps maps = score_image(m, im, fusion);
        const Tensor recon_t = head_reconstruct(m, forward_full(m, to_tensor(im)));
        const Image recon = image_from_tensor(recon_t, 0);
        double total = 0.0;
        for (std::size_t px = 0; px < im.plane(); ++px) {
            double e = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                const double diff = static_cast<double>(im.data[c * im.plane() + px]) - recon.data[c * im.plane() + px];
                e += diff * diff;
            }
            e /= 3.0;
            worst_channel = std::max(worst_channel, std::abs(e - maps.E.data[px]) / std::max(e, 1e-12));
            if (maps.S.data[px] != maps.E.data[px] * maps.P.data[px]) ++product_mismatch;
            total += maps.S.data[px];
        }
        const double mean = total / static_cast<double>(im.plane());
        worst_mean = std::max(worst_mean, std::abs(mean - maps.image_score) / std::max(mean, 1e-12));
    }
    if (worst_channel > 1e-5) failures.push_back("channel mean " + fmt("%.2e", worst_channel));
    if (product_mismatch) failures.push_back("S != E*P at " + std::to_string(product_mismatch) + " pixels");
    if (worst_mean > 1e-6) failures.push_back("mean pooling " + fmt("%.2e", worst_mean));

    for (float& v : m.params.head_classify.weight.mutable_data()) v = 0.0f;
    for (float& v : m.params.head_classify.bias.mutable_data()) v = 0.0f;
    std::size_t floor_mismatch = 0;
    for (int t = 0; t < 10; ++t) {
        const ScoreMaps maps = score_image(m, random_image(3, 16, 16, rng), fusion);
        for (std::size_t px = 0; px < maps.S.data.size(); ++px) {
            floor_mismatch += maps.P.data[px] != 0.5f || maps.S.data[px] != maps.E.data[px] / 2.0f;
        }
    }
    if (floor_mismatch) failures.push_back("untrained head floor at " + std::to_string(floor_mismatch) + " pixels");

    std::string detail = std::to_string(loss_checks) + " masked-loss invariance draws, 30 scored images";
    for (const std::string& f : failures) detail += "; " + f;
    report(3, failures.empty(), detail);
}

void freeze(const RunConfig& rc) {
    SynthSpec spec;
    spec.image_size = rc.model.image_size;
    spec.n_train = 24;
    spec.n_test_normal = 1;
    spec.n_test_anomalous = 1;
    spec.seed = 5;
    const Corpus corpus = generate_synthetic(spec);
    Model m = Model::create(rc.model, 6);
    auto snapshot = [&] {
        std::vector<std::vector<float>> out;
        for (const Tensor& t : m.parameters(ParamGroup::Encoder)) out.emplace_back(t.data().begin(), t.data().end());
        return out;
    };
    const auto before = snapshot();
    Stage2Config cfg = rc.stage2;
    cfg.epochs = 5;
    std::size_t epochs = 0, changed = 0;
    train_stage2(m, corpus.train, cfg, 7, [&](const Stage2EpochStats&) {
        ++epochs;
        changed += snapshot() != before;
    });
    const bool ok = epochs >= 5 && changed == 0;
    report(4, ok,
           std::to_string(m.parameters(ParamGroup::Encoder).size()) + " encoder tensors bit-identical after each of " +
               std::to_string(epochs) + " epochs" + (changed ? " (changed in " + std::to_string(changed) + ")" : ""));
}

void augmentation(const RunConfig& rc) {
    const auto c = tadc::testing::augmentation_contract(10000);
    std::vector<Image> dataset;
    Rng rng(8);
    for (int i = 0; i < 60; ++i) dataset.push_back(random_image(3, 16, 16, rng));
    std::size_t bad_epochs = 0;
    for (std::size_t epoch = 0; epoch < 20; ++epoch) {
        std::size_t corrupted = 0;
        for (const AugmentedSample& s : make_epoch_stream(dataset, rc.stage2.corruption, epoch, 9)) {
            corrupted += std::any_of(s.label.data.begin(), s.label.data.end(), [](float v) { return v != 0.0f; });
        }
        bad_epochs += corrupted != 50;
    }
    const bool ok = c.pass() && c.samples == 10000 && bad_epochs == 0;
    report(5, ok,
           std::to_string(c.samples) + " samples: " + std::to_string(c.unlabeled_pixel_mismatches) +
               " unlabeled changes, " + std::to_string(c.coverage_mismatches) + " coverage mismatches, " +
               std::to_string(c.out_of_range + c.non_binary_labels) + " range/label faults; " +
               std::to_string(20 - bad_epochs) + "/20 epochs with exactly 50/60 corrupted");
}

std::vector<Corpus> desk_corpora(const RunConfig& rc, const fs::path& root) {
    std::vector<Corpus> out;
    for (Texture t : {Texture::Stripes, Texture::Checker, Texture::Blobs}) {
        SynthSpec spec;
        spec.category = t;
        spec.image_size = rc.model.image_size;
        spec.seed = rc.seed;
        write_corpus(root, generate_synthetic(spec));
        out.push_back(load_corpus(root / to_string(t), rc.model.image_size, rc.model.channels));
    }
    return out;
}

std::map<std::string, std::string> csv_files(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), root).string()] = ss.str();
    }
    return out;
}

void end_to_end(const RunConfig& rc, const fs::path& work) {
    const std::vector<Corpus> corpora = desk_corpora(rc, work / "corpus");
    const std::vector<VariantId> all{VariantId::I,  VariantId::II,  VariantId::III,  VariantId::IV,  VariantId::V,
                                     VariantId::VI, VariantId::VII, VariantId::VIII, VariantId::Ours};
    auto progress = [](const std::string& line) { std::cerr << line << "\n"; };

    fs::remove_all(work / "run1");
    fs::remove_all(work / "run2");
    const auto t0 = Clock::now();
    const std::vector<AblationRow> rows = run_ablation(rc, corpora, all, work / "run1", progress);
    const double elapsed = seconds_since(t0);
    std::cerr << ablation_markdown(rows);

    std::string detail;
    bool ok6 = true;
    for (const AblationRow& r : rows) {
        if (r.variant != VariantId::Ours) continue;
        const bool ok = r.image_auc >= 0.90 && r.pixel_auc >= 0.85;
        ok6 = ok6 && ok;
        detail += r.category + " image " + fmt("%.4f", r.image_auc) + " pixel " + fmt("%.4f", r.pixel_auc) +
                  (ok ? "" : " (below 0.90/0.85)") + "; ";
    }
    report(6, ok6, detail + "all variants " + fmt("%.0f", elapsed) + " s");

    auto mean = [&](VariantId v) { return mean_auc(rows, v); };
    struct Ordering {
        std::string name;
        double lhs, rhs;
    };
    double best_single = 0.0;
    VariantId best_id = VariantId::I;
    for (VariantId v : all) {
        const ScoreMode mode = variant(v).score_mode;
        if (mode == ScoreMode::Fusion) continue;
        if (mean(v) > best_single) {
            best_single = mean(v);
            best_id = v;
        }
    }
    const std::vector<Ordering> orderings{
        {"OURS>=VII", mean(VariantId::Ours), mean(VariantId::VII)},
        {"OURS>=VIII", mean(VariantId::Ours), mean(VariantId::VIII)},
        {"VII>=III", mean(VariantId::VII), mean(VariantId::III)},
        {"VIII>=IV", mean(VariantId::VIII), mean(VariantId::IV)},
        {"OURS>=best single (" + to_string(best_id) + ")", mean(VariantId::Ours), best_single},
    };
    bool ok7 = true;
    detail.clear();
    for (const Ordering& o : orderings) {
        const bool ok = o.lhs >= o.rhs - 0.02;
        ok7 = ok7 && ok;
        detail += o.name + " " + fmt("%.4f", o.lhs) + " vs " + fmt("%.4f", o.rhs) + (ok ? "" : " VIOLATED") + "; ";
    }
    report(7, ok7, detail + "mean image AUC, tolerance 0.02");

    const auto t1 = Clock::now();
    run_ablation(rc, corpora, all, work / "run2", progress);
    const auto a = csv_files(work / "run1"), b = csv_files(work / "run2");
    std::size_t differing = 0;
    for (const auto& [name, text] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second != text) {
            ++differing;
            std::cerr << "  differs: " << name << "\n";
        }
    }
    const bool ok8 = !a.empty() && a.size() == b.size() && differing == 0;
    report(8, ok8,
           std::to_string(a.size()) + " CSV files compared byte-for-byte, " + std::to_string(differing) +
               " differ; rerun " + fmt("%.0f", seconds_since(t1)) + " s");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = "acceptance_work";
    std::string config_path = std::string(TADC_SOURCE_DIR) + "/configs/desk.json";
    app.add_option("--work", work, "Scratch directory for corpora and runs");
    app.add_option("--config", config_path, "Desk-scale run config")->check(CLI::ExistingFile);
    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig rc = load_run_config(config_path);
        validate(rc);
        fs::create_directories(work);
        std::cerr << "kernels: " << kernels::to_string(kernels::active_backend()) << "\n";

        auto t = Clock::now();
        const auto grads = tadc::testing::gradient_suite();
        check_suite(1, grads, seconds_since(t));
        t = Clock::now();
        const auto oracles = tadc::testing::oracle_suite();
        check_suite(2, oracles, seconds_since(t));
        identities();
        freeze(rc);
        augmentation(rc);
        end_to_end(rc, work);
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        return 2;
    }

    const bool all = verdicts.size() == 8 &&
                     std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
    std::printf("%s: %zu/8 criteria passed\n", all ? "PASS" : "FAIL",
                static_cast<std::size_t>(std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; })));
    return all ? 0 : 1;
}
