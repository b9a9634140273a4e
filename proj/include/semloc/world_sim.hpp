#pragma once

#include <vector>

#include "semloc/types.hpp"

namespace semloc {

// Ground-truth labeled segment for a spatial object (world frame).
struct SpatialTruth {
    Point2D p1, p2;
    LabelId label = kLabelOthers;
};

// Everything a localization run is scored against. poses has one more entry
// than controls; scans[t] is taken at poses[t + 1]. Poses replay exactly from
// the controls under motion_model.
struct ScenarioTruth {
    std::vector<Pose2D> poses;
    std::vector<ControlInput> controls;
    std::vector<Scan> scans;
    std::vector<SpatialTruth> spatial_objects;

    int step_count() const { return static_cast<int>(controls.size()); }
};

// Piecewise turn-in-place / straight-line path through the waypoints.
// Returned poses are integrated with motion_model so a replay is bit-exact.
struct Trajectory {
    std::vector<Pose2D> poses;     // poses.size() == controls.size() + 1
    std::vector<ControlInput> controls;
};

Trajectory generate_trajectory(const SemanticGridMap& map, const std::vector<Point2D>& waypoints,
                               double speed, double dt, double turn_rate = 1.0);

// Each (v, w) perturbed by one draw from N(0, noise); dt untouched.
std::vector<ControlInput> corrupt_odometry(const std::vector<ControlInput>& controls,
                                           const ControlNoise& noise, Rng& rng);

// Grid-traversal ray cast against the physical layer. Ranges clamp to r_max;
// truth labels come from the hit cell's semantic layer. Cells that are only
// semantically labeled never terminate a ray.
Scan raycast_scan(const SemanticGridMap& map, const Pose2D& robot_pose, const ScanParams& params);

// Trajectory plus a scan at every post-step pose.
ScenarioTruth simulate_scenario(const SemanticGridMap& map, const std::vector<Point2D>& waypoints,
                                double speed, double dt, const ScanParams& scan_params,
                                double turn_rate = 1.0);

}  // namespace semloc
