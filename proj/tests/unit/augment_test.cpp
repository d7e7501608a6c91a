#include <gtest/gtest.h>

#include <cmath>

#include "suites.hpp"
#include "tadc/augment.hpp"
#include "tadc/error.hpp"

using namespace tadc;
using tadc::testing::random_image;

namespace {

double label_sum(const AugmentedSample& s) {
    double t = 0.0;
    for (float v : s.label.data) t += v;
    return t;
}

// Probability that a block of random length covers coordinate u (both in
// units of the side), averaged over length ~ U(lo, hi) and a uniform start.
double cover_probability(double u, double lo, double hi) {
    constexpr int kSteps = 400;
    double acc = 0.0;
    for (int i = 0; i < kSteps; ++i) {
        const double len = lo + (hi - lo) * (i + 0.5) / kSteps;
        const double a = std::max(0.0, u - len), b = std::min(u, 1.0 - len);
        acc += std::max(0.0, b - a) / (1.0 - len);
    }
    return acc / kSteps;
}

// Expected labeled fraction for block count ~ U{kmin..kmax} with independent
// uniform placements, on a continuous unit square.
double expected_label_fraction(const CorruptionConfig& c) {
    constexpr int kGrid = 128;
    std::vector<double> q(kGrid);
    for (int i = 0; i < kGrid; ++i) q[i] = cover_probability((i + 0.5) / kGrid, c.min_side_fraction, c.max_side_fraction);
    double total = 0.0;
    for (std::size_t k = c.min_blocks; k <= c.max_blocks; ++k) {
        double frac = 0.0;
        for (int y = 0; y < kGrid; ++y) {
            for (int x = 0; x < kGrid; ++x) frac += 1.0 - std::pow(1.0 - q[y] * q[x], static_cast<double>(k));
        }
        total += frac / (kGrid * kGrid);
    }
    return total / static_cast<double>(c.max_blocks - c.min_blocks + 1);
}

}  // namespace

TEST(Augment, OpNamesRoundTrip) {
    for (CorruptionOp op : CorruptionConfig{}.ops) EXPECT_EQ(parse_corruption_op(to_string(op)), op);
    EXPECT_EQ(parse_corruption_op("flip_h"), CorruptionOp::FlipH);
    EXPECT_THROW(parse_corruption_op("blur"), ConfigError);
}

TEST(Augment, ConfigValidation) {
    auto bad = [](auto mutate) {
        CorruptionConfig c;
        mutate(c);
        EXPECT_THROW(c.validate(), ConfigError);
    };
    bad([](CorruptionConfig& c) { c.corrupt_probability = 1.5; });
    bad([](CorruptionConfig& c) { c.min_blocks = 5, c.max_blocks = 2; });
    bad([](CorruptionConfig& c) { c.min_side_fraction = 0.5, c.max_side_fraction = 0.2; });
    bad([](CorruptionConfig& c) { c.ops.clear(); });
    bad([](CorruptionConfig& c) { c.multi_op_probability = -0.1; });
    EXPECT_NO_THROW(CorruptionConfig{}.validate());
}

TEST(Augment, ZeroProbabilityIsIdentity) {
    Rng rng(1);
    CorruptionConfig c;
    c.corrupt_probability = 0.0;
    const Image im = random_image(3, 32, 32, rng);
    for (int i = 0; i < 20; ++i) {
        const AugmentedSample s = corrupt(im, c, rng);
        EXPECT_EQ(s.corrupted, im);
        EXPECT_EQ(label_sum(s), 0.0);
    }
}

TEST(Augment, WholeImageFlipIsAMirror) {
    Rng rng(2);
    const Image im = random_image(3, 8, 6, rng);
    Image out = im;
    apply_op(out, Block{0, 0, 8, 6}, CorruptionOp::FlipH, CorruptionConfig{}, rng);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < 8; ++y) {
            for (std::size_t x = 0; x < 6; ++x) EXPECT_EQ(out.at(c, y, x), im.at(c, y, 5 - x));
        }
    }
    Image v = im;
    apply_op(v, Block{0, 0, 8, 6}, CorruptionOp::FlipV, CorruptionConfig{}, rng);
    EXPECT_EQ(v.at(1, 0, 2), im.at(1, 7, 2));
}

TEST(Augment, RotationsActInPlace) {
    Rng rng(3);
    const Image im = random_image(3, 10, 10, rng);
    const Block sq{2, 3, 4, 4};
    Image r = im;
    for (int i = 0; i < 4; ++i) apply_op(r, sq, CorruptionOp::Rotate90, CorruptionConfig{}, rng);
    EXPECT_EQ(r, im);
    Image once = im;
    apply_op(once, sq, CorruptionOp::Rotate90, CorruptionConfig{}, rng);
    EXPECT_NE(once, im);
    Image twice = once;
    apply_op(twice, sq, CorruptionOp::Rotate90, CorruptionConfig{}, rng);
    Image half = im;
    apply_op(half, sq, CorruptionOp::Rotate180, CorruptionConfig{}, rng);
    EXPECT_EQ(twice, half);

    // A non-square block gets a half turn.
    const Block rect{1, 1, 3, 5};
    Image a = im, b = im;
    apply_op(a, rect, CorruptionOp::Rotate90, CorruptionConfig{}, rng);
    apply_op(b, rect, CorruptionOp::Rotate180, CorruptionConfig{}, rng);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.at(0, 1, 1), im.at(0, 3, 5));

    EXPECT_THROW(apply_op(a, Block{8, 8, 4, 4}, CorruptionOp::FlipH, CorruptionConfig{}, rng), IndexError);
}

TEST(Augment, ChannelShuffleNeverIdentity) {
    Rng rng(4);
    Image im(3, 2, 2);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < 4; ++i) im.data[c * 4 + i] = 0.1f * static_cast<float>(c + 1);
    }
    for (int i = 0; i < 50; ++i) {
        Image out = im;
        apply_op(out, Block{0, 0, 2, 2}, CorruptionOp::ChannelShuffle, CorruptionConfig{}, rng);
        EXPECT_NE(out, im);
        std::vector<float> px{out.at(0, 0, 0), out.at(1, 0, 0), out.at(2, 0, 0)};
        std::sort(px.begin(), px.end());
        EXPECT_EQ(px, (std::vector<float>{0.1f, 0.2f, 0.3f}));
    }
}

TEST(Augment, ShiftAndNoiseStayInRange) {
    Rng rng(5);
    CorruptionConfig c;
    c.noise_sigma = 2.0;
    for (CorruptionOp op : {CorruptionOp::GaussianNoise, CorruptionOp::ChannelShift}) {
        Image im = random_image(3, 16, 16, rng);
        apply_op(im, Block{0, 0, 16, 16}, op, c, rng);
        for (float v : im.data) {
            ASSERT_GE(v, 0.0f);
            ASSERT_LE(v, 1.0f);
        }
    }
}

TEST(Augment, DeterministicForFixedSeed) {
    Rng seed_rng(6);
    const Image im = random_image(3, 32, 32, seed_rng);
    Rng a(77), b(77);
    for (int i = 0; i < 10; ++i) {
        const AugmentedSample x = corrupt(im, CorruptionConfig{}, a), y = corrupt(im, CorruptionConfig{}, b);
        EXPECT_EQ(x.corrupted, y.corrupted);
        EXPECT_EQ(x.label, y.label);
    }
}

TEST(Augment, LabelContractHoldsBitwise) {
    const auto r = tadc::testing::augmentation_contract(400);
    EXPECT_EQ(r.samples, 400u);
    EXPECT_EQ(r.unlabeled_pixel_mismatches, 0u);
    EXPECT_EQ(r.coverage_mismatches, 0u);
    EXPECT_EQ(r.out_of_range, 0u);
    EXPECT_EQ(r.non_binary_labels, 0u);
}

TEST(Augment, LabelAreaMatchesTheBlockModel) {
    const CorruptionConfig c;
    const double expected = expected_label_fraction(c);
    Rng rng(8);
    const Image im = random_image(3, 64, 64, rng);
    double total = 0.0;
    constexpr int kSamples = 2000;
    for (int i = 0; i < kSamples; ++i) total += label_sum(corrupt_forced(im, c, rng)) / (64.0 * 64.0);
    const double observed = total / kSamples;
    EXPECT_GT(observed, 0.8 * expected) << "expected " << expected;
    EXPECT_LT(observed, 1.2 * expected) << "expected " << expected;
}

TEST(EpochStream, ExactCorruptionCount) {
    Rng rng(9);
    std::vector<Image> data;
    for (int i = 0; i < 12; ++i) data.push_back(random_image(3, 16, 16, rng));
    for (std::size_t epoch = 0; epoch < 5; ++epoch) {
        const auto stream = make_epoch_stream(data, CorruptionConfig{}, epoch, 3);
        ASSERT_EQ(stream.size(), 12u);
        int corrupted = 0;
        for (const auto& s : stream) corrupted += label_sum(s) > 0.0 ? 1 : 0;
        EXPECT_EQ(corrupted, 10);
    }
    CorruptionConfig all;
    all.corrupt_probability = 1.0;
    for (const auto& s : make_epoch_stream(data, all, 0, 3)) EXPECT_GT(label_sum(s), 0.0);
}

TEST(EpochStream, DeterministicAndEpochDependent) {
    Rng rng(10);
    std::vector<Image> data;
    for (int i = 0; i < 6; ++i) data.push_back(random_image(3, 16, 16, rng));
    const auto a = make_epoch_stream(data, CorruptionConfig{}, 2, 11);
    const auto b = make_epoch_stream(data, CorruptionConfig{}, 2, 11);
    const auto c = make_epoch_stream(data, CorruptionConfig{}, 3, 11);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].corrupted, b[i].corrupted);
        EXPECT_EQ(a[i].label, b[i].label);
        differs = differs || a[i].corrupted != c[i].corrupted;
    }
    EXPECT_TRUE(differs);
    // Every original appears once.
    std::size_t found = 0;
    for (const Image& im : data) {
        found += static_cast<std::size_t>(std::count_if(a.begin(), a.end(), [&](const auto& s) { return s.original == im; }));
    }
    EXPECT_EQ(found, data.size());
    EXPECT_THROW(make_epoch_stream(std::span<const Image>{}, CorruptionConfig{}, 0, 1), ConfigError);
}
