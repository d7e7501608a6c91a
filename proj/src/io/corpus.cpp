#include "tadc/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "tadc/error.hpp"
#include "tadc/rng.hpp"

namespace tadc {

namespace fs = std::filesystem;

std::string to_string(Texture t) {
    switch (t) {
        case Texture::Stripes: return "stripes";
        case Texture::Checker: return "checker";
        case Texture::Blobs: return "blobs";
    }
    return "unknown";
}

Texture parse_texture(const std::string& name) {
    if (name == "stripes") return Texture::Stripes;
    if (name == "checker") return Texture::Checker;
    if (name == "blobs") return Texture::Blobs;
    throw ConfigError("unknown synthetic category '" + name + "'");
}

std::string to_string(DefectKind d) {
    switch (d) {
        case DefectKind::ColorBlob: return "color_blob";
        case DefectKind::NoisePatch: return "noise_patch";
        case DefectKind::ScratchLine: return "scratch_line";
    }
    return "unknown";
}

DefectKind parse_defect(const std::string& name) {
    if (name == "color_blob") return DefectKind::ColorBlob;
    if (name == "noise_patch") return DefectKind::NoisePatch;
    if (name == "scratch_line") return DefectKind::ScratchLine;
    throw ConfigError("unknown defect kind '" + name + "'");
}

void SynthSpec::validate() const {
    if (image_size < 16) throw ConfigError("synthetic image_size must be at least 16");
    if (n_train == 0 || n_test_normal == 0 || n_test_anomalous == 0) throw ConfigError("synthetic counts must be positive");
    if (defects.empty()) throw ConfigError("synthetic spec needs at least one defect kind");
}

namespace {

using Rgb = std::array<double, 3>;

Rgb jitter(const Rgb& c, Rng& rng, double amount) {
    const double shift = rng.uniform(-amount, amount);
    return {c[0] + shift, c[1] + shift, c[2] + shift};
}

void put(Image& im, std::size_t y, std::size_t x, const Rgb& c) {
    for (std::size_t ch = 0; ch < 3; ++ch) im.at(ch, y, x) = static_cast<float>(c[ch]);
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

}  // namespace

Image synth_texture(Texture texture, std::size_t size, std::uint64_t seed) {
    Rng rng(seed);
    Image im(3, size, size);
    switch (texture) {
        case Texture::Stripes: {
            const double theta = std::numbers::pi / 6.0 + rng.uniform(-0.03, 0.03);
            const double period = 9.0 + rng.uniform(-0.3, 0.3);
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const Rgb a = jitter({0.85, 0.55, 0.20}, rng, 0.03);
            const Rgb b = jitter({0.25, 0.20, 0.45}, rng, 0.03);
            for (std::size_t y = 0; y < size; ++y) {
                for (std::size_t x = 0; x < size; ++x) {
                    const double u = x * std::cos(theta) + y * std::sin(theta);
                    const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u / period + phase);
                    put(im, y, x, mix(b, a, t));
                }
            }
            break;
        }
        case Texture::Checker: {
            const std::size_t cell = 8;
            const auto oy = static_cast<std::size_t>(rng.bounded(2 * cell));
            const auto ox = static_cast<std::size_t>(rng.bounded(2 * cell));
            const Rgb a = jitter({0.85, 0.85, 0.80}, rng, 0.03);
            const Rgb b = jitter({0.15, 0.35, 0.25}, rng, 0.03);
            for (std::size_t y = 0; y < size; ++y) {
                for (std::size_t x = 0; x < size; ++x) {
                    const bool odd = (((y + oy) / cell) + ((x + ox) / cell)) % 2 == 1;
                    put(im, y, x, odd ? a : b);
                }
            }
            break;
        }
        case Texture::Blobs: {
            const Rgb base = jitter({0.55, 0.45, 0.35}, rng, 0.03);
            struct Bump {
                double y, x, r, amp;
            };
            std::vector<Bump> bumps;
            for (int i = 0; i < 8; ++i) {
                bumps.push_back({rng.uniform(0.0, double(size)), rng.uniform(0.0, double(size)), rng.uniform(4.0, 9.0),
                                 rng.uniform(-0.2, 0.2)});
            }
            for (std::size_t y = 0; y < size; ++y) {
                for (std::size_t x = 0; x < size; ++x) {
                    double v = 0.0;
                    for (const Bump& b : bumps) {
                        const double d2 = (y - b.y) * (y - b.y) + (x - b.x) * (x - b.x);
                        v += b.amp * std::exp(-d2 / (2.0 * b.r * b.r));
                    }
                    put(im, y, x, {base[0] + v, base[1] + v * 0.8, base[2] + v * 0.6});
                }
            }
            break;
        }
    }
    for (float& v : im.data) v += static_cast<float>(rng.normal(0.0, 0.015));
    return quantize8(im);
}

namespace {

// Quantized value for a defect pixel that differs from the base pixel.
void set_defect_pixel(Image& out, const Image& base, std::size_t y, std::size_t x, const Rgb& value) {
    bool changed = false;
    for (std::size_t c = 0; c < out.channels; ++c) {
        out.at(c, y, x) = to_unit_range(from_unit_range(static_cast<float>(value[c])));
        changed = changed || out.at(c, y, x) != base.at(c, y, x);
    }
    if (!changed) {
        const float b = base.at(0, y, x);
        out.at(0, y, x) = to_unit_range(from_unit_range(b > 0.5f ? b - 0.4f : b + 0.4f));
    }
}

Rgb base_rgb(const Image& im, std::size_t y, std::size_t x) {
    return {im.at(0, y, x), im.at(1, y, x), im.at(2, y, x)};
}

}  // namespace

Image plant_defect(const Image& base, DefectKind kind, std::uint64_t seed, Image& mask) {
    if (base.channels != 3) throw DimensionError("plant_defect: expected an RGB image");
    Rng rng(seed);
    const std::size_t h = base.height, w = base.width;
    Image out = base;
    mask = Image(1, h, w, 0.0f);
    auto mark = [&](std::size_t y, std::size_t x, const Rgb& value) {
        set_defect_pixel(out, base, y, x, value);
        mask.at(0, y, x) = 1.0f;
    };
    switch (kind) {
        case DefectKind::ColorBlob: {
            const double cy = rng.uniform(8.0, h - 8.0), cx = rng.uniform(8.0, w - 8.0);
            const double ry = rng.uniform(3.0, 7.0), rx = rng.uniform(3.0, 7.0);
            Rgb color{};
            do {
                for (double& c : color) c = rng.bernoulli(0.5) ? 0.95 : 0.05;
            } while (color[0] == color[1] && color[1] == color[2]);
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
                    if (dy * dy + dx * dx <= 1.0) mark(y, x, mix(base_rgb(base, y, x), color, 0.85));
                }
            }
            break;
        }
        case DefectKind::NoisePatch: {
            const auto ph = static_cast<std::size_t>(rng.uniform_int(6, 14));
            const auto pw = static_cast<std::size_t>(rng.uniform_int(6, 14));
            const auto y0 = static_cast<std::size_t>(rng.bounded(h - ph + 1));
            const auto x0 = static_cast<std::size_t>(rng.bounded(w - pw + 1));
            for (std::size_t y = y0; y < y0 + ph; ++y) {
                for (std::size_t x = x0; x < x0 + pw; ++x) {
                    Rgb v = base_rgb(base, y, x);
                    for (double& c : v) c = std::clamp(c + rng.normal(0.0, 0.3), 0.0, 1.0);
                    mark(y, x, v);
                }
            }
            break;
        }
        case DefectKind::ScratchLine: {
            const double y0 = rng.uniform(4.0, h - 4.0), x0 = rng.uniform(4.0, w - 4.0);
            const double angle = rng.uniform(0.0, std::numbers::pi);
            const double length = rng.uniform(16.0, 36.0);
            const double y1 = std::clamp(y0 + length * std::sin(angle), 1.0, h - 1.0);
            const double x1 = std::clamp(x0 + length * std::cos(angle), 1.0, w - 1.0);
            const double gray = rng.bernoulli(0.5) ? 0.95 : 0.05;
            const double vy = y1 - y0, vx = x1 - x0;
            const double len2 = std::max(1e-9, vy * vy + vx * vx);
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double py = y + 0.5 - y0, px = x + 0.5 - x0;
                    const double t = std::clamp((py * vy + px * vx) / len2, 0.0, 1.0);
                    const double dy = py - t * vy, dx = px - t * vx;
                    if (dy * dy + dx * dx <= 1.0) mark(y, x, {gray, gray, gray});
                }
            }
            break;
        }
    }
    return out;
}

Corpus generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const auto tex = static_cast<std::uint64_t>(spec.category);
    Corpus corpus;
    corpus.name = to_string(spec.category);
    for (std::size_t i = 0; i < spec.n_train; ++i) {
        corpus.train.push_back(synth_texture(spec.category, spec.image_size, derive_seed(spec.seed, tex, 1, i)));
    }
    char stem[16];
    for (std::size_t i = 0; i < spec.n_test_normal; ++i) {
        std::snprintf(stem, sizeof(stem), "%03zu", i);
        TestItem item;
        item.name = std::string("good/") + stem;
        item.defect = "good";
        item.image = synth_texture(spec.category, spec.image_size, derive_seed(spec.seed, tex, 2, i));
        corpus.test.push_back(std::move(item));
    }
    std::vector<std::size_t> per_defect(spec.defects.size(), 0);
    for (std::size_t i = 0; i < spec.n_test_anomalous; ++i) {
        const std::size_t d = i % spec.defects.size();
        std::snprintf(stem, sizeof(stem), "%03zu", per_defect[d]++);
        const Image base = synth_texture(spec.category, spec.image_size, derive_seed(spec.seed, tex, 3, i));
        TestItem item;
        item.defect = to_string(spec.defects[d]);
        item.name = item.defect + "/" + stem;
        item.anomalous = true;
        item.image = plant_defect(base, spec.defects[d], derive_seed(spec.seed, tex, 4, i), item.mask);
        corpus.test.push_back(std::move(item));
    }
    return corpus;
}

void write_corpus(const fs::path& root, const Corpus& corpus) {
    const fs::path dir = root / corpus.name;
    char stem[16];
    for (std::size_t i = 0; i < corpus.train.size(); ++i) {
        std::snprintf(stem, sizeof(stem), "%03zu", i);
        write_png(dir / "train" / "good" / (std::string(stem) + ".png"), corpus.train[i]);
    }
    for (const TestItem& item : corpus.test) {
        const fs::path rel(item.name);
        write_png(dir / "test" / (item.name + ".png"), item.image);
        if (item.anomalous) {
            write_pgm(dir / "ground_truth" / item.defect / (rel.filename().string() + "_mask.pgm"), item.mask);
        }
    }
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (directories ? entry.is_directory() : entry.is_regular_file()) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool is_image_file(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".png" || ext == ".pgm";
}

Image load_resized(const fs::path& path, std::size_t size, std::size_t channels) {
    return resize_area(read_image(path, channels), size, size);
}

}  // namespace

Corpus load_corpus(const fs::path& category_dir, std::size_t image_size, std::size_t channels) {
    const fs::path train_dir = category_dir / "train" / "good";
    if (!fs::is_directory(train_dir)) throw IoError(category_dir.string() + ": missing train/good directory");
    Corpus corpus;
    corpus.name = category_dir.filename().string();
    for (const fs::path& p : sorted_entries(train_dir, false)) {
        if (is_image_file(p)) corpus.train.push_back(load_resized(p, image_size, channels));
    }
    if (corpus.train.empty()) throw IoError(train_dir.string() + ": no training images");

    for (const fs::path& defect_dir : sorted_entries(category_dir / "test", true)) {
        const std::string defect = defect_dir.filename().string();
        for (const fs::path& p : sorted_entries(defect_dir, false)) {
            if (!is_image_file(p)) continue;
            TestItem item;
            item.defect = defect;
            item.name = defect + "/" + p.stem().string();
            item.image = load_resized(p, image_size, channels);
            item.anomalous = defect != "good";
            if (item.anomalous) {
                const fs::path gt = category_dir / "ground_truth" / defect;
                fs::path mask_path;
                for (const char* ext : {".png", ".pgm"}) {
                    const fs::path candidate = gt / (p.stem().string() + "_mask" + ext);
                    if (fs::exists(candidate)) {
                        mask_path = candidate;
                        break;
                    }
                }
                if (mask_path.empty()) throw IoError(p.string() + ": no ground-truth mask in " + gt.string());
                item.mask = binarize(load_resized(mask_path, image_size, 1));
            }
            corpus.test.push_back(std::move(item));
        }
    }
    return corpus;
}

std::vector<std::string> list_categories(const fs::path& root) {
    std::vector<std::string> out;
    for (const fs::path& dir : sorted_entries(root, true)) {
        if (fs::is_directory(dir / "train" / "good")) out.push_back(dir.filename().string());
    }
    return out;
}

}  // namespace tadc
