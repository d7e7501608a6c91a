#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "suites.hpp"
#include "tadc/error.hpp"
#include "tadc/metrics.hpp"

using namespace tadc;
using tadc::testing::pair_count_auc;

namespace {

struct Labeled {
    std::vector<double> scores;
    std::vector<int> labels;
};

Labeled random_case(Rng& rng, std::size_t n, bool coarse) {
    Labeled c;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = rng.uniform();
        c.scores.push_back(coarse ? std::floor(s * 4) / 4 : s);
        c.labels.push_back(i % 3 == 0 ? 1 : 0);
    }
    return c;
}

Image filled(std::size_t h, std::size_t w, std::initializer_list<float> v) {
    Image im(1, h, w);
    std::copy(v.begin(), v.end(), im.data.begin());
    return im;
}

}  // namespace

TEST(Metrics, AucHandExamples) {
    const std::vector<int> l{0, 0, 1, 1};
    EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, l), 1.0);
    EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, l), 0.0);
    EXPECT_EQ(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, l), 0.5);
    EXPECT_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, l), 0.75);
}

TEST(Metrics, AucMatchesPairCounting) {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const Labeled c = random_case(rng, 10 + t, t % 2 == 1);
        EXPECT_NEAR(auc(c.scores, c.labels), pair_count_auc(c.scores, c.labels), 1e-12);
    }
}

TEST(Metrics, AucComplementAndTrapezoid) {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        Labeled c = random_case(rng, 37, t % 2 == 0);
        const double a = auc(c.scores, c.labels);
        std::vector<int> flipped;
        for (int l : c.labels) flipped.push_back(1 - l);
        EXPECT_NEAR(a + auc(c.scores, flipped), 1.0, 1e-12);
        EXPECT_NEAR(trapezoid_area(roc_points(c.scores, c.labels)), a, 1e-9);
    }
}

TEST(Metrics, AucIsInvariantToMonotoneTransformsAndOrder) {
    Rng rng(5);
    Labeled c = random_case(rng, 60, false);
    const double a = auc(c.scores, c.labels);
    std::vector<double> warped;
    for (double s : c.scores) warped.push_back(std::exp(3.0 * s) - 7.0);
    EXPECT_EQ(auc(warped, c.labels), a);
    std::vector<std::size_t> perm(c.scores.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::reverse(perm.begin(), perm.end());
    Labeled p;
    for (std::size_t i : perm) {
        p.scores.push_back(c.scores[i]);
        p.labels.push_back(c.labels[i]);
    }
    EXPECT_EQ(auc(p.scores, p.labels), a);
}

TEST(Metrics, RocEndpoints) {
    const auto pts = roc_points(std::vector<double>{0.3, 0.1, 0.7}, std::vector<int>{1, 0, 1});
    ASSERT_GE(pts.size(), 2u);
    EXPECT_EQ(pts.front().fpr, 0.0);
    EXPECT_EQ(pts.front().tpr, 0.0);
    EXPECT_EQ(pts.back().fpr, 1.0);
    EXPECT_EQ(pts.back().tpr, 1.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        EXPECT_GE(pts[i].fpr, pts[i - 1].fpr);
        EXPECT_GE(pts[i].tpr, pts[i - 1].tpr);
    }
}

TEST(Metrics, AucErrors) {
    EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), MetricError);
    EXPECT_THROW(auc(std::vector<double>{0.1}, std::vector<int>{0, 1}), MetricError);
    EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 2}), MetricError);
    EXPECT_THROW(auc(std::vector<double>{}, std::vector<int>{}), MetricError);
}

TEST(Metrics, EvaluatePoolsPixelsAcrossImages) {
    std::vector<EvalItem> items(3);
    items[0] = {0.1, false, filled(2, 2, {0.1f, 0.2f, 0.1f, 0.0f}), Image{}};
    items[1] = {0.9, true, filled(2, 2, {0.9f, 0.1f, 0.3f, 0.0f}), filled(2, 2, {1, 0, 0, 0})};
    items[2] = {0.5, true, filled(2, 2, {0.4f, 0.8f, 0.0f, 0.0f}), filled(2, 2, {0, 1, 0, 0})};
    const EvalReport r = evaluate("toy", items);
    EXPECT_EQ(r.image_auc, 1.0);
    EXPECT_EQ(r.n_pos, 2u);
    EXPECT_EQ(r.n_neg, 1u);
    EXPECT_EQ(r.pixel_pos, 2u);
    EXPECT_EQ(r.pixel_neg, 10u);
    EXPECT_EQ(r.pixel_auc, 1.0);

    items[2].mask = Image{};
    EXPECT_THROW(evaluate("toy", items), MetricError);
    items[2].mask = Image(1, 3, 3);
    EXPECT_THROW(evaluate("toy", items), MetricError);
}

TEST(Metrics, ReportSerialisation) {
    EvalReport r;
    r.category = "stripes";
    r.image_auc = 0.9375;
    r.pixel_auc = 0.5;
    r.n_pos = 3;
    r.n_neg = 4;
    r.image_roc = {{0, 0}, {1, 1}};
    const std::vector<EvalReport> rs{r};
    EXPECT_EQ(reports_csv(rs), "category,image_auc,pixel_auc,n_pos,n_neg\nstripes,0.937500,0.500000,3,4\n");
    const auto j = nlohmann::json::parse(reports_json(rs));
    ASSERT_EQ(j.size(), 1u);
    EXPECT_EQ(j[0]["category"], "stripes");
    EXPECT_EQ(j[0]["image_auc"].get<double>(), 0.9375);
    EXPECT_EQ(j[0]["image_roc"].size(), 2u);
}
