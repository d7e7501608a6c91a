#pragma once

// Datasets in the MVTec directory layout:
//   <root>/<category>/train/good/*.png
//   <root>/<category>/test/<defect or good>/*.png
//   <root>/<category>/ground_truth/<defect>/<stem>_mask.(png|pgm)
// plus a procedural generator that writes synthetic categories in that layout.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tadc/image.hpp"

namespace tadc {

struct TestItem {
    std::string name;    // "<defect>/<stem>"
    std::string defect;  // "good" for normal items
    Image image;
    bool anomalous = false;
    Image mask;  // [1,H,W] in {0,1}; empty for normal items
};

struct Corpus {
    std::string name;
    std::vector<Image> train;
    std::vector<TestItem> test;
};

enum class Texture { Stripes, Checker, Blobs };
enum class DefectKind { ColorBlob, NoisePatch, ScratchLine };

std::string to_string(Texture t);
Texture parse_texture(const std::string& name);
std::string to_string(DefectKind d);
DefectKind parse_defect(const std::string& name);

struct SynthSpec {
    Texture category = Texture::Stripes;
    std::size_t image_size = 64;
    std::size_t n_train = 60;
    std::size_t n_test_normal = 20;
    std::size_t n_test_anomalous = 30;  // spread round-robin over the defect kinds
    std::vector<DefectKind> defects{DefectKind::ColorBlob, DefectKind::NoisePatch, DefectKind::ScratchLine};
    std::uint64_t seed = 0;

    void validate() const;
};

/// One defect-free image of the texture; deterministic in (texture, size, seed).
Image synth_texture(Texture texture, std::size_t size, std::uint64_t seed);

/// Plants a defect into `base` (8-bit quantized values). Returns the defect
/// image; `mask` receives the defect region. Every pixel inside the mask
/// differs from `base` in at least one channel; pixels outside are unchanged.
Image plant_defect(const Image& base, DefectKind kind, std::uint64_t seed, Image& mask);

Corpus generate_synthetic(const SynthSpec& spec);
/// Writes the corpus under <root>/<corpus.name>.
void write_corpus(const std::filesystem::path& root, const Corpus& corpus);

/// Loads one category directory, resampling images to image_size and
/// binarizing masks.
Corpus load_corpus(const std::filesystem::path& category_dir, std::size_t image_size, std::size_t channels = 3);

/// Category names under `root` (directories with train/good), sorted.
std::vector<std::string> list_categories(const std::filesystem::path& root);

}  // namespace tadc
