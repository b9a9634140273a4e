#include "semloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace semloc {

std::pair<double, double> pose_error(const Pose2D& est, const Pose2D& truth) {
    const double pos_cm = std::hypot(est.x - truth.x, est.y - truth.y) * 100.0;
    const double ang_deg = std::abs(angle_difference(est.theta, truth.theta)) * 180.0 / M_PI;
    return {pos_cm, ang_deg};
}

namespace {

struct Moments {
    double ave = 0.0, std_dev = 0.0, max = 0.0, min = 0.0;
};

Moments moments(const std::vector<double>& xs) {
    Moments m;
    m.min = xs[0];
    m.max = xs[0];
    for (double x : xs) {
        m.ave += x;
        m.max = std::max(m.max, x);
        m.min = std::min(m.min, x);
    }
    m.ave /= xs.size();
    double var = 0.0;
    for (double x : xs)
        var += (x - m.ave) * (x - m.ave);
    m.std_dev = std::sqrt(var / xs.size());
    return m;
}

}  // namespace

ErrorStats aggregate(const std::vector<std::pair<double, double>>& errors) {
    if (errors.empty())
        throw std::invalid_argument("cannot aggregate an empty error series");
    std::vector<double> pos, ang;
    pos.reserve(errors.size());
    ang.reserve(errors.size());
    for (const auto& [p, a] : errors) {
        pos.push_back(p);
        ang.push_back(a);
    }
    const Moments mp = moments(pos);
    const Moments ma = moments(ang);
    return ErrorStats{mp.ave, mp.std_dev, mp.max, ma.ave, ma.std_dev, ma.max};
}

RecognitionStats aggregate_accuracy(const std::vector<double>& series) {
    if (series.empty())
        throw std::invalid_argument("cannot aggregate an empty accuracy series");
    const Moments m = moments(series);
    return RecognitionStats{m.ave, m.std_dev, m.min, m.max};
}

std::vector<LabelId> simple_map_recognition(const SemanticGridMap& map, const Pose2D& pose,
                                            const Scan& scan, const Hyperparameters& hyper) {
    const int label_count = map.classes().size();
    std::vector<LabelId> labels(scan.beam_count(), kLabelFree);
    const Pose2D sensor = compose(pose, scan.params.sensor_offset);
    for (int k = 0; k < scan.beam_count(); ++k) {
        if (!scan.is_hit(k))
            continue;
        const Beam beam{scan.params.angle(k), scan.ranges[k]};
        int best = 0;
        double best_score = -1.0;
        for (LabelId l = 0; l < label_count; ++l) {
            const double score =
                hyper.is_unknown(l)
                    ? truncated_exponential_pdf(beam.range, hyper.lambda, hyper.r_max)
                    : lfm_point_likelihood_for_label(map, l, sensor, beam, hyper);
            if (score > best_score) {
                best_score = score;
                best = l;
            }
        }
        labels[k] = static_cast<LabelId>(best);
    }
    return labels;
}

double recognition_accuracy(const std::vector<LabelId>& predicted,
                            const std::vector<LabelId>& truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("prediction/truth length mismatch");
    if (truth.empty())
        throw std::invalid_argument("empty recognition series");
    int total = 0, correct = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == kLabelFree)
            continue;  // no object exists at max range
        ++total;
        if (predicted[i] == truth[i])
            ++correct;
    }
    if (total == 0)
        return -1.0;
    return 100.0 * correct / total;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::array<uint8_t, 3> label_color(LabelId id) {
    static const std::array<std::array<uint8_t, 3>, 10> palette = {{
        {255, 255, 255},  // 0 free: white
        {120, 120, 120},  // 1 others: gray
        {0, 170, 0},      // 2: green
        {220, 120, 0},    // 3: orange
        {70, 130, 240},   // 4: blue
        {0, 160, 160},    // 5: teal
        {220, 0, 0},      // 6: red
        {160, 0, 200},    // 7: purple
        {200, 180, 0},    // 8: olive
        {240, 100, 180},  // 9: pink
    }};
    if (id >= 0 && id < static_cast<LabelId>(palette.size()))
        return palette[id];
    return {0, 0, 0};
}

namespace {

class Canvas {
public:
    Canvas(int w, int h) : w_(w), h_(h), rgb_(static_cast<size_t>(w) * h * 3, 255) {}

    void set(int x, int y, const std::array<uint8_t, 3>& c) {
        if (x < 0 || x >= w_ || y < 0 || y >= h_)
            return;
        // flip y so world +y points up in the image
        const size_t i = (static_cast<size_t>(h_ - 1 - y) * w_ + x) * 3;
        rgb_[i] = c[0];
        rgb_[i + 1] = c[1];
        rgb_[i + 2] = c[2];
    }

    void line(int x0, int y0, int x1, int y1, const std::array<uint8_t, 3>& c) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1)
                break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void write_ppm(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write image: " + path);
        out << "P6\n" << w_ << " " << h_ << "\n255\n";
        out.write(reinterpret_cast<const char*>(rgb_.data()),
                  static_cast<std::streamsize>(rgb_.size()));
        if (!out)
            throw std::runtime_error("image write failed: " + path);
    }

private:
    int w_, h_;
    std::vector<uint8_t> rgb_;
};

std::array<uint8_t, 3> darken(std::array<uint8_t, 3> c) {
    for (auto& v : c)
        v = static_cast<uint8_t>(v * 3 / 5);
    return c;
}

}  // namespace

void render(const SemanticGridMap& map, const std::vector<Pose2D>& truth_poses,
            const std::vector<Pose2D>& est_poses, const std::vector<ObjectRenderInfo>& objects,
            const std::string& path, int pixels_per_cell) {
    const int ppc = std::max(1, pixels_per_cell);
    Canvas canvas(map.width() * ppc, map.height() * ppc);

    for (int cy = 0; cy < map.height(); ++cy) {
        for (int cx = 0; cx < map.width(); ++cx) {
            const LabelId sem = map.semantic(cx, cy);
            if (sem == kLabelFree && !map.occupied(cx, cy))
                continue;
            auto color = label_color(sem);
            if (map.occupied(cx, cy))
                color = darken(color);
            for (int py = 0; py < ppc; ++py)
                for (int px = 0; px < ppc; ++px)
                    canvas.set(cx * ppc + px, cy * ppc + py, color);
        }
    }

    auto to_px = [&](const Point2D& p, int& x, int& y) {
        const auto cell = map.world_to_cell(p);
        if (!cell)
            return false;
        x = cell->x * ppc + ppc / 2;
        y = cell->y * ppc + ppc / 2;
        return true;
    };
    auto draw_path = [&](const std::vector<Pose2D>& poses, std::array<uint8_t, 3> color) {
        for (size_t i = 1; i < poses.size(); ++i) {
            int x0, y0, x1, y1;
            if (to_px(Point2D{poses[i - 1].x, poses[i - 1].y}, x0, y0) &&
                to_px(Point2D{poses[i].x, poses[i].y}, x1, y1))
                canvas.line(x0, y0, x1, y1, color);
        }
    };
    draw_path(truth_poses, {0, 0, 0});
    draw_path(est_poses, {230, 40, 40});

    for (const auto& obj : objects) {
        int x0, y0, x1, y1;
        if (to_px(obj.p1, x0, y0) && to_px(obj.p2, x1, y1))
            canvas.line(x0, y0, x1, y1, label_color(obj.label));
    }
    canvas.write_ppm(path);
}

}  // namespace semloc
