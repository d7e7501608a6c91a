#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "suites.hpp"
#include "tadc/error.hpp"
#include "tadc/model.hpp"

using namespace tadc;
using tadc::testing::random_tensor;
using tadc::testing::tiny_model_config;

namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(ModelConfig, DefaultsAreValid) {
    const ModelConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.tokens(), 64u);
    EXPECT_EQ(c.patch_dim(), 192u);
    EXPECT_EQ(c.masked_count(), 48u);
}

TEST(ModelConfig, RejectsBrokenInvariants) {
    auto bad = [](auto mutate) {
        ModelConfig c;
        mutate(c);
        EXPECT_THROW(c.validate(), ConfigError);
    };
    bad([](ModelConfig& c) { c.patch_size = 7; });
    bad([](ModelConfig& c) { c.encoder_heads = 3; });
    bad([](ModelConfig& c) { c.decoder_heads = 0; });
    bad([](ModelConfig& c) { c.mask_ratio = 0.0; });
    bad([](ModelConfig& c) { c.mask_ratio = 1.0; });
    bad([](ModelConfig& c) { c.mask_ratio = 0.01; });  // floor(0.64) masks nothing
}

TEST(Patchify, ShapesAndRasterOrder) {
    Rng rng(1);
    EXPECT_EQ(patchify(random_tensor({3, 64, 64}, rng), 8).shape(), (Shape{64, 192}));
    EXPECT_EQ(patchify(random_tensor({3, 224, 224}, rng), 16).shape(), (Shape{196, 768}));

    // 1 channel 4x4, p=2: patch 1 is the top-right 2x2 block.
    std::vector<float> v(16);
    std::iota(v.begin(), v.end(), 0.0f);
    const Tensor p = patchify(Tensor::from({1, 4, 4}, v), 2);
    EXPECT_EQ(p.shape(), (Shape{4, 4}));
    EXPECT_EQ(values(ops::slice_rows(p, 1, 2)), (std::vector<float>{2, 3, 6, 7}));

    // Within a patch the channel index varies fastest.
    std::vector<float> c2(2 * 2 * 2);
    std::iota(c2.begin(), c2.end(), 0.0f);
    const Tensor q = patchify(Tensor::from({2, 2, 2}, c2), 2);
    EXPECT_EQ(values(q), (std::vector<float>{0, 4, 1, 5, 2, 6, 3, 7}));
}

TEST(Patchify, UnpatchifyIsExactInverse) {
    Rng rng(2);
    const Tensor x = random_tensor({2, 3, 64, 64}, rng);
    const Tensor back = unpatchify(patchify(x, 8), 8, 3, 64, 64);
    EXPECT_EQ(back.shape(), x.shape());
    EXPECT_EQ(values(back), values(x));
    EXPECT_THROW(patchify(random_tensor({3, 10, 10}, rng), 4), ConfigError);
}

TEST(Model, InitializationIsReproducibleAndFinite) {
    const ModelConfig c = tiny_model_config();
    const Model a = Model::create(c, 5), b = Model::create(c, 5), other = Model::create(c, 6);
    const auto na = a.params.named(), nb = b.params.named(), no = other.params.named();
    ASSERT_EQ(na.size(), nb.size());
    bool differs = false;
    for (std::size_t i = 0; i < na.size(); ++i) {
        EXPECT_EQ(na[i].name, nb[i].name);
        EXPECT_EQ(values(na[i].tensor), values(nb[i].tensor)) << na[i].name;
        for (float v : na[i].tensor.data()) ASSERT_TRUE(std::isfinite(v));
        differs = differs || values(na[i].tensor) != values(no[i].tensor);
    }
    EXPECT_TRUE(differs);
}

TEST(Model, InitializationConventions) {
    const Model m = Model::create(ModelConfig{}, 1);
    for (const NamedParam& p : m.params.named()) {
        const std::string& n = p.name;
        if (n.ends_with(".bias") || n.ends_with(".beta")) {
            for (float v : p.tensor.data()) ASSERT_EQ(v, 0.0f) << n;
        } else if (n.ends_with(".gamma")) {
            for (float v : p.tensor.data()) ASSERT_EQ(v, 1.0f) << n;
        } else {
            for (float v : p.tensor.data()) ASSERT_LE(std::abs(v), 0.04f + 1e-6f) << n;
        }
        EXPECT_EQ(p.decay, p.tensor.rank() == 2) << n;
    }
}

TEST(Model, ShapesThroughThePipeline) {
    const ModelConfig c;
    const Model m = Model::create(c, 3);
    Rng rng(4);
    const Tensor images = random_tensor({2, 3, 64, 64}, rng, 0, 1);
    const Tensor decoded = forward_full(m, images);
    EXPECT_EQ(decoded.shape(), (Shape{128, 64}));
    EXPECT_EQ(head_reconstruct(m, decoded).shape(), (Shape{2, 3, 64, 64}));
    const Tensor probs = head_classify(m, decoded);
    EXPECT_EQ(probs.shape(), (Shape{2, 64, 64}));
    for (float v : probs.data()) {
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
    }
}

TEST(Model, HeadsOnZeroInput) {
    Model m = Model::create(tiny_model_config(), 3);
    const Tensor zeros = Tensor::zeros({16, 16});
    const Tensor recon = head_reconstruct(m, zeros);
    EXPECT_EQ(recon.shape(), (Shape{1, 3, 16, 16}));
    for (float v : recon.data()) EXPECT_EQ(v, 0.0f);
    const Tensor half = head_classify(m, zeros);
    for (float v : half.data()) EXPECT_EQ(v, 0.5f);
    std::fill(m.params.head_classify.bias.mutable_data().begin(), m.params.head_classify.bias.mutable_data().end(), -200.0f);
    const Tensor low = head_classify(m, zeros);
    for (float v : low.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Model, EncodeIsPermutationEquivariant) {
    const Model m = Model::create(tiny_model_config(), 8);
    Rng rng(9);
    const Tensor patches = random_tensor({5, 48}, rng, 0, 1);
    const PositionSets pos{{3, 7, 0, 12, 9}};
    const std::vector<std::size_t> perm{4, 2, 0, 3, 1};
    PositionSets permuted{{}};
    for (std::size_t i : perm) permuted[0].push_back(pos[0][i]);
    const Tensor a = encode(m, patches, pos);
    const Tensor b = encode(m, ops::gather_rows(patches, perm), permuted);
    EXPECT_EQ(a.shape(), (Shape{5, 16}));
    const Tensor a_perm = ops::gather_rows(a, perm);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.at(i), a_perm.at(i), 1e-5f);
}

TEST(Model, EncodeRejectsBadPositions) {
    const Model m = Model::create(tiny_model_config(), 8);
    const Tensor patches = Tensor::zeros({2, 48});
    EXPECT_THROW(encode(m, patches, PositionSets{{1, 1}}), IndexError);
    EXPECT_THROW(encode(m, patches, PositionSets{{1, 16}}), IndexError);
    EXPECT_THROW(encode(m, Tensor::zeros({3, 48}), PositionSets{{1, 2}}), DimensionError);
}

TEST(Model, DecodeUsesMaskTokenOnlyForMissingPositions) {
    Model m = Model::create(tiny_model_config(), 10);
    Rng rng(11);
    const Tensor images = random_tensor({1, 3, 16, 16}, rng, 0, 1);
    const Tensor patches = patchify(images, 4);

    auto run = [&](const std::vector<std::size_t>& visible) {
        const PositionSets pos{visible};
        return decode(m, encode(m, ops::gather_rows(patches, visible), pos), pos);
    };
    std::vector<std::size_t> all(16), all_but_one;
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t i = 0; i < 16; ++i) {
        if (i != 6) all_but_one.push_back(i);
    }
    const Tensor full_a = run(all), part_a = run(all_but_one);
    EXPECT_EQ(full_a.shape(), (Shape{16, 16}));
    EXPECT_EQ(part_a.shape(), (Shape{16, 16}));

    for (float& v : m.params.mask_token.mutable_data()) v += 0.5f;
    EXPECT_EQ(values(run(all)), values(full_a));
    EXPECT_NE(values(run(all_but_one)), values(part_a));
}

TEST(Model, CloneHasIndependentStorage) {
    const Model a = Model::create(tiny_model_config(), 12);
    Model b = a.clone();
    const auto na = a.params.named();
    auto nb = b.params.named();
    for (std::size_t i = 0; i < na.size(); ++i) EXPECT_EQ(values(na[i].tensor), values(nb[i].tensor));
    nb[0].tensor.mutable_data()[0] += 1.0f;
    EXPECT_NE(na[0].tensor.at(0), nb[0].tensor.at(0));
}

TEST(Model, SetTrainableTogglesGroups) {
    Model m = Model::create(tiny_model_config(), 13);
    m.set_trainable(ParamGroup::Encoder, false);
    m.set_trainable(ParamGroup::Decoder, true);
    for (const NamedParam& p : m.params.named()) {
        if (p.group == ParamGroup::Encoder) {
            EXPECT_FALSE(p.tensor.requires_grad()) << p.name;
        } else if (p.group == ParamGroup::Decoder) {
            EXPECT_TRUE(p.tensor.requires_grad()) << p.name;
        }
    }
}
