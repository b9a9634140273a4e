#include "semloc/world_sim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "semloc/models.hpp"

namespace semloc {

Trajectory generate_trajectory(const SemanticGridMap& map, const std::vector<Point2D>& waypoints,
                               double speed, double dt, double turn_rate) {
    if (waypoints.size() < 2)
        throw std::invalid_argument("need at least two waypoints");
    if (speed <= 0.0 || dt <= 0.0 || turn_rate <= 0.0)
        throw std::invalid_argument("speed, dt and turn_rate must be positive");
    for (const auto& wp : waypoints) {
        const auto cell = map.world_to_cell(wp);
        if (!cell)
            throw std::invalid_argument("waypoint outside map bounds");
        if (map.occupied(cell->x, cell->y))
            throw std::invalid_argument("waypoint in occupied cell");
    }

    Trajectory traj;
    const double heading0 =
        std::atan2(waypoints[1].y - waypoints[0].y, waypoints[1].x - waypoints[0].x);
    traj.poses.emplace_back(waypoints[0].x, waypoints[0].y, heading0);

    auto push = [&](const ControlInput& u) {
        traj.controls.push_back(u);
        traj.poses.push_back(motion_model(traj.poses.back(), u));
    };

    for (size_t i = 1; i < waypoints.size(); ++i) {
        const Pose2D& cur = traj.poses.back();
        const double dx = waypoints[i].x - cur.x;
        const double dy = waypoints[i].y - cur.y;
        const double dist = std::hypot(dx, dy);
        if (dist < 1e-9)
            throw std::invalid_argument("zero-length trajectory segment at waypoint " +
                                        std::to_string(i));

        // turn in place toward the waypoint, splitting the turn evenly
        const double dtheta = angle_difference(std::atan2(dy, dx), cur.theta);
        if (std::abs(dtheta) > 1e-12) {
            const int turn_steps =
                std::max(1, static_cast<int>(std::ceil(std::abs(dtheta) / (turn_rate * dt))));
            const double w = dtheta / (turn_steps * dt);
            for (int s = 0; s < turn_steps; ++s)
                push(ControlInput{0.0, w, dt});
        }

        // straight run; equal steps when the distance divides evenly
        const double step_len = speed * dt;
        int steps = static_cast<int>(std::floor(dist / step_len + 1e-9));
        double remainder = dist - steps * step_len;
        if (remainder < 1e-9) {
            const double v = (steps > 0) ? dist / (steps * dt) : 0.0;
            for (int s = 0; s < steps; ++s)
                push(ControlInput{v, 0.0, dt});
        } else {
            for (int s = 0; s < steps; ++s)
                push(ControlInput{speed, 0.0, dt});
            push(ControlInput{remainder / dt, 0.0, dt});
        }
    }
    return traj;
}

std::vector<ControlInput> corrupt_odometry(const std::vector<ControlInput>& controls,
                                           const ControlNoise& noise, Rng& rng) {
    double l11, l21, l22;
    noise.cholesky(l11, l21, l22);
    std::normal_distribution<double> unit;
    std::vector<ControlInput> noisy = controls;
    for (auto& u : noisy) {
        const double n1 = unit(rng);
        const double n2 = unit(rng);
        u.v += l11 * n1;
        u.w += l21 * n1 + l22 * n2;
    }
    return noisy;
}

// Amanatides-Woo traversal in map grid coordinates; the hit range is the
// distance to the boundary crossing into the occupied cell.
Scan raycast_scan(const SemanticGridMap& map, const Pose2D& robot_pose,
                  const ScanParams& params) {
    const Pose2D sensor = compose(robot_pose, params.sensor_offset);
    const auto start_cell = map.world_to_cell(Point2D{sensor.x, sensor.y});
    if (!start_cell)
        throw std::invalid_argument("sensor pose outside map bounds");
    if (map.occupied(start_cell->x, start_cell->y))
        throw std::invalid_argument("sensor pose inside an occupied cell");

    // sensor position and ray directions in grid coordinates
    const Pose2D& o = map.origin();
    const double co = std::cos(o.theta), so = std::sin(o.theta);
    const double res = map.resolution();
    const double gx = (co * (sensor.x - o.x) + so * (sensor.y - o.y)) / res;
    const double gy = (co * (sensor.y - o.y) - so * (sensor.x - o.x)) / res;

    Scan scan;
    scan.params = params;
    scan.ranges.resize(params.beam_count, params.r_max);
    scan.truth_labels.resize(params.beam_count, kLabelFree);

    const double r_max_cells = params.r_max / res;
    for (int k = 0; k < params.beam_count; ++k) {
        const double a = sensor.theta - o.theta + params.angle(k);
        const double dx = std::cos(a), dy = std::sin(a);

        int cx = start_cell->x, cy = start_cell->y;
        const int step_x = dx > 0.0 ? 1 : -1;
        const int step_y = dy > 0.0 ? 1 : -1;
        const double inv_dx = (dx != 0.0) ? 1.0 / dx : 0.0;
        const double inv_dy = (dy != 0.0) ? 1.0 / dy : 0.0;
        double t_max_x = (dx != 0.0)
                             ? ((dx > 0.0 ? cx + 1.0 - gx : gx - cx) * std::abs(inv_dx))
                             : std::numeric_limits<double>::infinity();
        double t_max_y = (dy != 0.0)
                             ? ((dy > 0.0 ? cy + 1.0 - gy : gy - cy) * std::abs(inv_dy))
                             : std::numeric_limits<double>::infinity();
        const double t_delta_x =
            (dx != 0.0) ? std::abs(inv_dx) : std::numeric_limits<double>::infinity();
        const double t_delta_y =
            (dy != 0.0) ? std::abs(inv_dy) : std::numeric_limits<double>::infinity();

        while (true) {
            double t_cross;
            if (t_max_x < t_max_y) {
                t_cross = t_max_x;
                t_max_x += t_delta_x;
                cx += step_x;
            } else {
                t_cross = t_max_y;
                t_max_y += t_delta_y;
                cy += step_y;
            }
            if (t_cross > r_max_cells)
                break;
            if (!map.in_bounds(cx, cy))
                break;
            if (map.occupied(cx, cy)) {
                scan.ranges[k] = std::min(t_cross * res, params.r_max);
                scan.truth_labels[k] = map.semantic(cx, cy);
                break;
            }
        }
    }
    return scan;
}

ScenarioTruth simulate_scenario(const SemanticGridMap& map, const std::vector<Point2D>& waypoints,
                                double speed, double dt, const ScanParams& scan_params,
                                double turn_rate) {
    Trajectory traj = generate_trajectory(map, waypoints, speed, dt, turn_rate);
    ScenarioTruth truth;
    truth.poses = std::move(traj.poses);
    truth.controls = std::move(traj.controls);
    truth.scans.reserve(truth.controls.size());
    for (size_t t = 1; t < truth.poses.size(); ++t)
        truth.scans.push_back(raycast_scan(map, truth.poses[t], scan_params));
    return truth;
}

}  // namespace semloc
