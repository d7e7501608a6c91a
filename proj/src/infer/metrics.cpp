#include "tadc/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>

#include "json.hpp"

#include "tadc/error.hpp"

namespace tadc {

namespace {

struct TieGroup {
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
};

// Groups of equal scores, highest score first.
template <typename T>
std::vector<TieGroup> tie_groups(std::span<const T> scores, std::span<const int> labels, std::uint64_t& pos,
                                 std::uint64_t& neg) {
    if (scores.size() != labels.size()) throw MetricError("auc: scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<TieGroup> groups;
    pos = neg = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i == 0 || scores[order[i]] != scores[order[i - 1]]) groups.emplace_back();
        const int l = labels[order[i]];
        if (l != 0 && l != 1) throw MetricError("auc: labels must be 0 or 1");
        if (l == 1) {
            ++groups.back().pos;
            ++pos;
        } else {
            ++groups.back().neg;
            ++neg;
        }
    }
    if (pos == 0 || neg == 0) throw MetricError("auc: undefined with a single class present");
    return groups;
}

template <typename T>
double auc_impl(std::span<const T> scores, std::span<const int> labels) {
    std::uint64_t pos = 0, neg = 0;
    const std::vector<TieGroup> groups = tie_groups(scores, labels, pos, neg);
    // Twice the trapezoid area in units of 1/(pos*neg), accumulated exactly.
    unsigned __int128 twice = 0;
    std::uint64_t tp = 0;
    for (const TieGroup& g : groups) {
        twice += static_cast<unsigned __int128>(g.neg) * (2 * tp + g.pos);
        tp += g.pos;
    }
    const auto denom = 2.0L * static_cast<long double>(pos) * static_cast<long double>(neg);
    return static_cast<double>(static_cast<long double>(twice) / denom);
}

}  // namespace

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels) {
    std::uint64_t pos = 0, neg = 0;
    const std::vector<TieGroup> groups = tie_groups(scores, labels, pos, neg);
    std::vector<RocPoint> points{{0.0, 0.0}};
    std::uint64_t tp = 0, fp = 0;
    for (const TieGroup& g : groups) {
        tp += g.pos;
        fp += g.neg;
        points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)});
    }
    return points;
}

double auc(std::span<const double> scores, std::span<const int> labels) { return auc_impl(scores, labels); }
double auc(std::span<const float> scores, std::span<const int> labels) { return auc_impl(scores, labels); }

double trapezoid_area(std::span<const RocPoint> points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
    }
    return area;
}

EvalReport evaluate(const std::string& category, std::span<const EvalItem> items) {
    EvalReport report;
    report.category = category;
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<float> pixel_scores;
    std::vector<int> pixel_labels;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const EvalItem& item = items[i];
        scores.push_back(item.score);
        labels.push_back(item.anomalous ? 1 : 0);
        (item.anomalous ? report.n_pos : report.n_neg) += 1;
        const bool has_mask = !item.mask.data.empty();
        if (item.anomalous && !has_mask) {
            throw MetricError("evaluate: anomalous item " + std::to_string(i) + " of '" + category + "' has no mask");
        }
        if (has_mask && item.mask.data.size() != item.S.data.size()) {
            throw MetricError("evaluate: mask of item " + std::to_string(i) + " does not match its score map");
        }
        for (std::size_t p = 0; p < item.S.data.size(); ++p) {
            const int l = has_mask && item.mask.data[p] >= 0.5f ? 1 : 0;
            pixel_scores.push_back(item.S.data[p]);
            pixel_labels.push_back(l);
            (l ? report.pixel_pos : report.pixel_neg) += 1;
        }
    }
    report.image_auc = auc(scores, labels);
    report.image_roc = roc_points(scores, labels);
    report.pixel_auc = auc(std::span<const float>(pixel_scores), pixel_labels);
    return report;
}

namespace {

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string reports_csv(std::span<const EvalReport> reports) {
    std::string out = "category,image_auc,pixel_auc,n_pos,n_neg\n";
    for (const EvalReport& r : reports) {
        out += r.category + "," + fixed(r.image_auc) + "," + fixed(r.pixel_auc) + "," + std::to_string(r.n_pos) + "," +
               std::to_string(r.n_neg) + "\n";
    }
    return out;
}

std::string reports_json(std::span<const EvalReport> reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const EvalReport& r : reports) {
        nlohmann::json roc = nlohmann::json::array();
        for (const RocPoint& p : r.image_roc) roc.push_back({p.fpr, p.tpr});
        arr.push_back({{"category", r.category},
                       {"image_auc", r.image_auc},
                       {"pixel_auc", r.pixel_auc},
                       {"n_pos", r.n_pos},
                       {"n_neg", r.n_neg},
                       {"pixel_pos", r.pixel_pos},
                       {"pixel_neg", r.pixel_neg},
                       {"image_roc", roc}});
    }
    return arr.dump(2) + "\n";
}

}  // namespace tadc
