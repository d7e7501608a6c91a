#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tadc/image.hpp"

namespace tadc {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

/// ROC curve over the unique score thresholds, from (0,0) to (1,1).
std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels);

/// Area under the ROC curve; ties count one half (Mann-Whitney). Throws
/// MetricError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);
double auc(std::span<const float> scores, std::span<const int> labels);

/// Trapezoidal area under a polyline of ROC points.
double trapezoid_area(std::span<const RocPoint> points);

/// One scored test image.
struct EvalItem {
    double score = 0.0;
    bool anomalous = false;
    Image S;     // [1,H,W] pixel scores
    Image mask;  // [1,H,W] ground truth; may be empty for normal images
};

struct EvalReport {
    std::string category;
    double image_auc = 0.0;
    double pixel_auc = 0.0;
    std::vector<RocPoint> image_roc;
    std::size_t n_pos = 0;  // anomalous images
    std::size_t n_neg = 0;  // normal images
    std::size_t pixel_pos = 0;
    std::size_t pixel_neg = 0;
};

/// Image AUC over item scores; pixel AUC over every pixel of every item
/// pooled into one ranking.
EvalReport evaluate(const std::string& category, std::span<const EvalItem> items);

std::string reports_csv(std::span<const EvalReport> reports);
std::string reports_json(std::span<const EvalReport> reports);

}  // namespace tadc
