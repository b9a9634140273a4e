#pragma once

#include <random>
#include <stdexcept>
#include <vector>

#include "semloc/pose.hpp"
#include "semloc/semantic_map.hpp"

namespace semloc {

using Rng = std::mt19937_64;

struct ControlInput {
    double v = 0.0;   // m/s
    double w = 0.0;   // rad/s
    double dt = 0.0;  // s
};

// Covariance over (v, w) perturbations.
struct ControlNoise {
    double vv = 0.0;
    double vw = 0.0;
    double ww = 0.0;

    bool is_zero() const { return vv == 0.0 && vw == 0.0 && ww == 0.0; }

    void validate() const {
        if (vv < 0.0 || ww < 0.0 || vw * vw > vv * ww + 1e-15)
            throw std::invalid_argument("control noise covariance is not positive semi-definite");
    }

    // Lower-triangular Cholesky factor (handles semi-definite diagonals).
    void cholesky(double& l11, double& l21, double& l22) const {
        validate();
        l11 = std::sqrt(vv);
        l21 = (l11 > 0.0) ? vw / l11 : 0.0;
        const double rem = ww - l21 * l21;
        l22 = std::sqrt(rem > 0.0 ? rem : 0.0);
    }
};

struct ScanParams {
    int beam_count = 360;
    double angle_min = -3.0 * M_PI / 4.0;  // 270 degree fan
    double angle_increment = (1.5 * M_PI) / 359.0;
    double r_max = 20.0;
    Pose2D sensor_offset;  // sensor pose in the robot frame

    double angle(int beam) const { return angle_min + beam * angle_increment; }
};

// One LiDAR sweep. Beams with no hit carry exactly r_max; truth labels (from
// simulation) are kLabelFree only for such beams.
struct Scan {
    ScanParams params;
    std::vector<double> ranges;
    std::vector<LabelId> truth_labels;  // empty outside simulation

    int beam_count() const { return params.beam_count; }
    bool is_hit(int beam) const { return ranges[beam] < params.r_max; }

    // Beam endpoint in the robot frame.
    Point2D endpoint(int beam) const {
        const double a = params.sensor_offset.theta + params.angle(beam);
        const Point2D in_sensor{ranges[beam] * std::cos(a), ranges[beam] * std::sin(a)};
        return Point2D{params.sensor_offset.x + in_sensor.x, params.sensor_offset.y + in_sensor.y};
    }
};

struct Beam {
    double angle = 0.0;  // rad, in the pose frame handed to the model
    double range = 0.0;  // m
};

}  // namespace semloc
