#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "suites.hpp"
#include "tadc/error.hpp"
#include "tadc/mae.hpp"

using namespace tadc;
using tadc::testing::random_tensor;
using tadc::testing::tiny_model_config;

namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Masked reconstruction loss of `model` on `images` under fixed plans.
double probe_loss(const Model& model, std::span<const Image> images, const std::vector<MaskPlan>& plans) {
    const std::size_t n = model.config.tokens();
    const Tensor patches = patchify(to_tensor(images), model.config.patch_size);
    PositionSets visible;
    std::vector<std::size_t> rows;
    for (std::size_t s = 0; s < plans.size(); ++s) {
        visible.push_back(plans[s].visible);
        for (std::size_t p : plans[s].visible) rows.push_back(s * n + p);
    }
    const Tensor encoded = encode(model, ops::gather_rows(patches, rows), visible);
    const Tensor recon = head_reconstruct_patches(model, decode(model, encoded, visible));
    return masked_mse(patches, recon, plans).item();
}

PretrainConfig small_pretrain() {
    PretrainConfig c;
    c.epochs = 3;
    c.batch_size = 4;
    c.lr_base = 0.256;  // 4e-3 after linear scaling
    c.warmup_fraction = 0.0;
    return c;
}

}  // namespace

TEST(SampleMask, CountsFollowTheFloorRule) {
    Rng rng(1);
    const MaskPlan a = sample_mask(64, 0.75, rng);
    EXPECT_EQ(a.masked.size(), 48u);
    EXPECT_EQ(a.visible.size(), 16u);
    const MaskPlan b = sample_mask(196, 0.75, rng);
    EXPECT_EQ(b.masked.size(), 147u);
    EXPECT_EQ(b.visible.size(), 49u);
    EXPECT_EQ(sample_mask(10, 0.75, rng).masked.size(), 7u);
}

TEST(SampleMask, PartitionsTheTokenRange) {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const MaskPlan p = sample_mask(37, 0.6, rng);
        EXPECT_TRUE(std::is_sorted(p.masked.begin(), p.masked.end()));
        EXPECT_TRUE(std::is_sorted(p.visible.begin(), p.visible.end()));
        std::vector<std::size_t> all = p.masked;
        all.insert(all.end(), p.visible.begin(), p.visible.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expected(37);
        std::iota(expected.begin(), expected.end(), std::size_t{0});
        EXPECT_EQ(all, expected);
    }
}

TEST(SampleMask, DegenerateRatiosAreRejected) {
    Rng rng(3);
    EXPECT_THROW(sample_mask(8, 0.1, rng), ConfigError);
    EXPECT_THROW(sample_mask(8, 1.0, rng), ConfigError);
    EXPECT_THROW(sample_mask(8, 0.0, rng), ConfigError);
}

TEST(SampleMask, EachIndexMaskedWithTheConfiguredFrequency) {
    Rng rng(4);
    constexpr int kDraws = 10000;
    std::vector<int> hits(8, 0);
    for (int d = 0; d < kDraws; ++d) {
        for (std::size_t i : sample_mask(8, 0.75, rng).masked) ++hits[i];
    }
    for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / kDraws, 0.75, 0.02);
}

TEST(SampleMask, DeterministicForAGivenSeed) {
    Rng a(9), b(9);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(sample_mask(64, 0.75, a).masked, sample_mask(64, 0.75, b).masked);
}

TEST(MaskedMse, HandExample) {
    const MaskPlan plan{2, {0}, {1}};
    const Tensor orig = Tensor::from({2, 1}, {1, 5});
    const Tensor recon = Tensor::from({2, 1}, {3, 9});
    EXPECT_FLOAT_EQ(masked_mse(orig, recon, plan).item(), 4.0f);
    EXPECT_FLOAT_EQ(masked_mse(orig, orig, plan).item(), 0.0f);
}

TEST(MaskedMse, NormalizedByMaskedElementCount) {
    const MaskPlan plan{3, {0, 2}, {1}};
    const Tensor orig = Tensor::zeros({3, 2});
    const Tensor recon = Tensor::from({3, 2}, {1, 1, 7, 7, 2, 2});
    EXPECT_FLOAT_EQ(masked_mse(orig, recon, plan).item(), (1 + 1 + 4 + 4) / 4.0f);
    EXPECT_THROW(masked_mse(orig, Tensor::zeros({2, 2}), plan), DimensionError);
}

TEST(MaskedMse, VisibleRowsDoNotMatter) {
    Rng rng(5);
    const MaskPlan plan = sample_mask(16, 0.75, rng);
    const Tensor orig = random_tensor({16, 6}, rng);
    Tensor recon = random_tensor({16, 6}, rng);
    const float base = masked_mse(orig, recon, plan).item();
    Tensor perturbed = recon.clone();
    for (std::size_t r : plan.visible) {
        for (std::size_t c = 0; c < 6; ++c) perturbed.mutable_data()[r * 6 + c] += 3.0f;
    }
    EXPECT_EQ(masked_mse(orig, perturbed, plan).item(), base);

    recon.set_requires_grad(true);
    GradTape tape;
    tape.backward(masked_mse(orig, recon, plan));
    for (std::size_t r : plan.visible) {
        for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(recon.grad()[r * 6 + c], 0.0f);
    }
    for (std::size_t r : plan.masked) EXPECT_NE(recon.grad()[r * 6], 0.0f);
}

TEST(MaskedMse, BatchedPlansOffsetRows) {
    const std::vector<MaskPlan> plans{{2, {1}, {0}}, {2, {0}, {1}}};
    const Tensor orig = Tensor::zeros({4, 1});
    const Tensor recon = Tensor::from({4, 1}, {100, 2, 4, 100});
    EXPECT_FLOAT_EQ(masked_mse(orig, recon, plans).item(), (4 + 16) / 2.0f);
}

TEST(Pretrain, EncoderSeesOnlyVisibleTokens) {
    const Model m = Model::create(tiny_model_config(), 1);
    Rng rng(6);
    const MaskPlan plan = sample_mask(16, 0.75, rng);
    const Tensor visible = random_tensor({plan.visible.size(), 48}, rng);
    EXPECT_EQ(encode(m, visible, {plan.visible}).dim(0), 4u);
}

TEST(Pretrain, ScheduleUsesScaledRateAndWarmup) {
    PretrainConfig c;
    c.epochs = 10;
    c.batch_size = 8;
    c.lr_base = 0.032;
    const ScheduleConfig s = pretrain_schedule(c, 20);
    EXPECT_DOUBLE_EQ(s.base_lr, 1e-3);
    EXPECT_EQ(s.total_steps, 30u);
    EXPECT_EQ(s.warmup_steps, 3u);
}

TEST(Pretrain, OneEpochOnConstantImagesLowersLoss) {
    const Model init = Model::create(tiny_model_config(), 7);
    const std::vector<Image> data(16, Image(3, 16, 16, 0.6f));
    Rng prng(8);
    std::vector<MaskPlan> plans;
    for (int i = 0; i < 4; ++i) plans.push_back(sample_mask(16, 0.75, prng));
    const std::span<const Image> probe(data.data(), 4);
    const double before = probe_loss(init, probe, plans);

    Model m = init.clone();
    PretrainConfig c = small_pretrain();
    c.epochs = 1;
    const auto history = pretrain(m, data, c, 3);
    ASSERT_EQ(history.size(), 1u);
    EXPECT_TRUE(std::isfinite(history[0].loss));
    EXPECT_LT(probe_loss(m, probe, plans), before);
}

TEST(Pretrain, UpdatesEncoderAndDecoderAndIsDeterministic) {
    Rng rng(10);
    std::vector<Image> data;
    for (int i = 0; i < 8; ++i) data.push_back(tadc::testing::random_image(3, 16, 16, rng));
    const Model init = Model::create(tiny_model_config(), 11);

    Model a = init.clone(), b = init.clone();
    const auto ha = pretrain(a, data, small_pretrain(), 42);
    const auto hb = pretrain(b, data, small_pretrain(), 42);
    for (std::size_t e = 0; e < ha.size(); ++e) {
        EXPECT_TRUE(std::isfinite(ha[e].loss));
        EXPECT_EQ(ha[e].loss, hb[e].loss);
    }
    const auto na = a.params.named(), nb = b.params.named(), ni = init.params.named();
    bool encoder_moved = false, decoder_moved = false;
    for (std::size_t i = 0; i < na.size(); ++i) {
        EXPECT_EQ(values(na[i].tensor), values(nb[i].tensor)) << na[i].name;
        const bool moved = values(na[i].tensor) != values(ni[i].tensor);
        if (na[i].group == ParamGroup::Encoder) encoder_moved |= moved;
        if (na[i].group == ParamGroup::Decoder) decoder_moved |= moved;
    }
    EXPECT_TRUE(encoder_moved);
    EXPECT_TRUE(decoder_moved);
}

TEST(Pretrain, EmptyDatasetIsAnError) {
    Model m = Model::create(tiny_model_config(), 1);
    EXPECT_THROW(pretrain(m, std::span<const Image>{}, small_pretrain(), 1), ConfigError);
}
