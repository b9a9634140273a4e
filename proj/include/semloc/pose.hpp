#pragma once

#include <cmath>

namespace semloc {

// Wraps an angle to (-pi, pi].
inline double normalize_angle(double theta) {
    double a = std::remainder(theta, 2.0 * M_PI);
    if (a <= -M_PI)
        a = M_PI;
    return a;
}

struct Point2D {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Point2D& a, const Point2D& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Planar pose; theta is kept in (-pi, pi] by every operation that returns one.
struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Pose2D() = default;
    Pose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}
};

// Rigid composition: pose of `b` expressed in `a`'s parent frame.
inline Pose2D compose(const Pose2D& a, const Pose2D& b) {
    const double c = std::cos(a.theta), s = std::sin(a.theta);
    return Pose2D(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta);
}

inline Point2D transform_point(const Pose2D& frame, const Point2D& p) {
    const double c = std::cos(frame.theta), s = std::sin(frame.theta);
    return Point2D{frame.x + c * p.x - s * p.y, frame.y + s * p.x + c * p.y};
}

inline double angle_difference(double a, double b) {
    return normalize_angle(a - b);
}

}  // namespace semloc
