#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tadc/error.hpp"
#include "tadc/ops.hpp"
#include "tadc/tensor.hpp"
#include "testing.hpp"

using namespace tadc;
using tadc::testing::random_tensor;

namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(Tensor, ConstructionValidatesShape) {
    EXPECT_EQ(Tensor::zeros({2, 3}).size(), 6u);
    EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
    EXPECT_THROW(Tensor::zeros({2, 0}), DimensionError);
    EXPECT_THROW(Tensor::zeros({2}).dim(1), IndexError);
    EXPECT_EQ(Tensor::scalar(3.0f).item(), 3.0f);
}

TEST(Tensor, CloneIsDetached) {
    Tensor a = Tensor::from({2}, {1, 2});
    Tensor b = a.clone();
    b.mutable_data()[0] = 9;
    EXPECT_EQ(a.at(0), 1.0f);
}

TEST(Ops, MatmulIdentityAndHandArithmetic) {
    Rng rng(1);
    const Tensor x = random_tensor({2, 3}, rng);
    const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    EXPECT_EQ(values(ops::matmul(eye, x)), values(x));
    const Tensor r = ops::matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}));
    EXPECT_EQ(r.item(), 11.0f);
}

TEST(Ops, MatmulShapeErrorNamesBothShapes) {
    try {
        ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[4,5]"), std::string::npos) << msg;
    }
}

TEST(Ops, SoftmaxExamples) {
    const Tensor u = ops::softmax(Tensor::zeros({1, 3}), 1);
    for (float v : u.data()) EXPECT_NEAR(v, 1.0f / 3.0f, 1e-7f);
    const Tensor big = ops::softmax(Tensor::from({1, 3}, {1000, 0, 0}), 1);
    EXPECT_NEAR(big.at(0), 1.0f, 1e-7f);
    EXPECT_EQ(big.at(1), 0.0f);
    for (float v : big.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Ops, SoftmaxRowsSumToOneOnAnyAxis) {
    Rng rng(2);
    const Tensor x = random_tensor({3, 4, 5}, rng, -20, 20);
    for (std::size_t axis = 0; axis < 3; ++axis) {
        const Tensor s = ops::softmax(x, axis);
        const Shape& sh = x.shape();
        std::size_t inner = 1;
        for (std::size_t a = axis + 1; a < 3; ++a) inner *= sh[a];
        const std::size_t n = sh[axis];
        const std::size_t outer = x.size() / (n * inner);
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) {
                double total = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const float v = s.at((o * n + k) * inner + i);
                    EXPECT_GE(v, 0.0f);
                    total += v;
                }
                EXPECT_NEAR(total, 1.0, 1e-6);
            }
        }
    }
    EXPECT_THROW(ops::softmax(x, 3), IndexError);
}

TEST(Ops, LayernormExamples) {
    const Tensor ones = Tensor::full({4}, 1.0f), zeros = Tensor::zeros({4});
    const Tensor c = ops::layernorm(Tensor::full({2, 4}, 3.5f), ones, zeros);
    for (float v : c.data()) EXPECT_EQ(v, 0.0f);
    Rng rng(3);
    const Tensor beta = random_tensor({4}, rng);
    const Tensor g0 = ops::layernorm(random_tensor({3, 4}, rng), zeros, beta);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(g0.at(r * 4 + j), beta.at(j));
    }
    const Tensor y = ops::layernorm(random_tensor({5, 8}, rng, -3, 3), Tensor::full({8}, 1.0f), Tensor::zeros({8}));
    for (std::size_t r = 0; r < 5; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 8; ++j) mean += y.at(r * 8 + j);
        mean /= 8;
        for (std::size_t j = 0; j < 8; ++j) var += (y.at(r * 8 + j) - mean) * (y.at(r * 8 + j) - mean);
        EXPECT_NEAR(mean, 0.0, 1e-6);
        EXPECT_NEAR(var / 8, 1.0, 1e-4);
    }
}

TEST(Ops, ElementwiseBasics) {
    EXPECT_EQ(ops::sigmoid(Tensor::scalar(0.0f)).item(), 0.5f);
    EXPECT_EQ(ops::sigmoid(Tensor::scalar(-200.0f)).item(), 0.0f);
    EXPECT_EQ(ops::sigmoid(Tensor::scalar(200.0f)).item(), 1.0f);
    EXPECT_NEAR(ops::gelu(Tensor::scalar(1.0f)).item(), 0.8413447f, 1e-6f);
    const Tensor a = Tensor::from({2}, {1, 2}), b = Tensor::from({2}, {3, 5});
    EXPECT_EQ(values(ops::add(a, b)), (std::vector<float>{4, 7}));
    EXPECT_EQ(values(ops::sub(a, b)), (std::vector<float>{-2, -3}));
    EXPECT_EQ(values(ops::mul(a, b)), (std::vector<float>{3, 10}));
    EXPECT_THROW(ops::add(a, Tensor::zeros({3})), DimensionError);
    EXPECT_THROW(ops::add_rowvec(Tensor::zeros({2, 3}), Tensor::zeros({2})), DimensionError);
}

TEST(Ops, TransposeReshapePermute) {
    const Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(values(ops::transpose(x)), (std::vector<float>{1, 4, 2, 5, 3, 6}));
    EXPECT_EQ(ops::reshape(x, {3, 2}).shape(), (Shape{3, 2}));
    EXPECT_THROW(ops::reshape(x, {4, 2}), DimensionError);
    const Tensor p = ops::permute(ops::reshape(x, {1, 2, 3}), {2, 0, 1});
    EXPECT_EQ(p.shape(), (Shape{3, 1, 2}));
    EXPECT_EQ(values(p), (std::vector<float>{1, 4, 2, 5, 3, 6}));
}

TEST(Ops, GatherScatterRoundTrip) {
    Rng rng(4);
    const Tensor x = random_tensor({6, 3}, rng);
    std::vector<std::size_t> all(6);
    std::iota(all.begin(), all.end(), std::size_t{0});
    EXPECT_EQ(values(ops::gather_rows(x, all)), values(x));

    const std::vector<std::size_t> idx{4, 1, 3};
    const Tensor back = ops::scatter_rows(ops::gather_rows(x, idx), idx, 6);
    for (std::size_t r = 0; r < 6; ++r) {
        const bool kept = std::find(idx.begin(), idx.end(), r) != idx.end();
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(back.at(r * 3 + c), kept ? x.at(r * 3 + c) : 0.0f);
    }
    // Complementary index sets reconstruct every row.
    const std::vector<std::size_t> rest{0, 2, 5};
    const Tensor whole = ops::add(back, ops::scatter_rows(ops::gather_rows(x, rest), rest, 6));
    EXPECT_EQ(values(whole), values(x));

    const std::vector<std::size_t> bad{6};
    EXPECT_THROW(ops::gather_rows(x, bad), IndexError);
    EXPECT_THROW(ops::scatter_rows(ops::slice_rows(x, 0, 1), bad, 6), IndexError);
}

TEST(Ops, ReductionsAndBlur) {
    const Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
    EXPECT_EQ(ops::sum(x).item(), 10.0f);
    EXPECT_EQ(ops::mean(x).item(), 2.5f);
    const std::vector<float> k{0.25f, 0.5f, 0.25f};
    const Tensor c = ops::blur2d(Tensor::full({1, 4, 5}, 0.7f), k);
    for (float v : c.data()) EXPECT_NEAR(v, 0.7f, 1e-6f);
    const std::vector<float> even{0.5f, 0.5f};
    EXPECT_THROW(ops::blur2d(Tensor::zeros({1, 4, 4}), even), ConfigError);
    const std::vector<float> wide(7, 1.0f / 7);
    EXPECT_THROW(ops::blur2d(Tensor::zeros({1, 4, 4}), wide), ConfigError);
}

TEST(GradTape, RecordsOnlyWhenNeeded) {
    Rng rng(5);
    Tensor a = random_tensor({2, 2}, rng), b = random_tensor({2, 2}, rng);
    {
        GradTape tape;
        ops::add(a, b);
        EXPECT_EQ(tape.size(), 0u);
        a.set_requires_grad(true);
        ops::add(a, b);
        EXPECT_EQ(tape.size(), 1u);
    }
    ops::mul(a, b);  // no tape active: plain forward
}

TEST(GradTape, EachNodeVisitedOnceAndShapesMatch) {
    Rng rng(6);
    Tensor w = random_tensor({3, 4}, rng);
    Tensor bias = random_tensor({4}, rng);
    Tensor gamma = random_tensor({4}, rng);
    Tensor beta = random_tensor({4}, rng);
    for (Tensor* t : {&w, &bias, &gamma, &beta}) t->set_requires_grad(true);
    const Tensor x = random_tensor({5, 3}, rng);
    GradTape tape;
    const Tensor h = ops::gelu(ops::layernorm(ops::linear(x, w, bias), gamma, beta));
    const Tensor loss = ops::sum(ops::softmax(h, 1));
    tape.backward(loss);
    EXPECT_EQ(tape.visited(), tape.size());
    for (const Tensor* t : {&w, &bias, &gamma, &beta}) {
        ASSERT_TRUE(t->has_grad());
        EXPECT_EQ(t->grad().size(), t->size());
        for (float g : t->grad()) EXPECT_TRUE(std::isfinite(g));
    }
    EXPECT_THROW(tape.backward(h), DimensionError);
}
