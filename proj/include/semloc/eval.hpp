#pragma once

#include <array>
#include <string>
#include <vector>

#include "semloc/filter.hpp"
#include "semloc/models.hpp"
#include "semloc/types.hpp"

namespace semloc {

// Population statistics of a pose-error series (centimeters / degrees).
struct ErrorStats {
    double pos_ave_cm = 0.0, pos_std_cm = 0.0, pos_max_cm = 0.0;
    double ang_ave_deg = 0.0, ang_std_deg = 0.0, ang_max_deg = 0.0;
};

// Accuracy statistics over a per-step series, percent.
struct RecognitionStats {
    double ave = 0.0, std_dev = 0.0, min = 0.0, max = 0.0;
};

// (position error in centimeters, absolute wrapped angle error in degrees)
std::pair<double, double> pose_error(const Pose2D& est, const Pose2D& truth);

ErrorStats aggregate(const std::vector<std::pair<double, double>>& errors);

RecognitionStats aggregate_accuracy(const std::vector<double>& percent_series);

// Per-beam maximum likelihood class at the given pose: each hit endpoint gets
// the argmax over labels of the SLFM-style score (ties to the lowest id).
// Max-range beams get kLabelFree.
std::vector<LabelId> simple_map_recognition(const SemanticGridMap& map, const Pose2D& pose,
                                            const Scan& scan, const Hyperparameters& hyper);

// 100 * matches / total over entries whose truth label is not free.
// Returns -1 when nothing is evaluable.
double recognition_accuracy(const std::vector<LabelId>& predicted,
                            const std::vector<LabelId>& truth);

struct ObjectRenderInfo {
    Point2D p1, p2;  // world frame
    LabelId label = kLabelOthers;
};

std::array<uint8_t, 3> label_color(LabelId id);

// Deterministic PPM (P6) raster: semantic map, truth and estimated
// trajectories, and recognized objects colored by map label.
void render(const SemanticGridMap& map, const std::vector<Pose2D>& truth_poses,
            const std::vector<Pose2D>& est_poses, const std::vector<ObjectRenderInfo>& objects,
            const std::string& path, int pixels_per_cell = 2);

}  // namespace semloc
