#include "semloc/recognition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace semloc {

ClassSimplex ClassSimplex::uniform(int label_count) {
    return ClassSimplex(std::vector<double>(label_count, 1.0 / label_count));
}

ClassSimplex ClassSimplex::one_hot(int label_count, LabelId label) {
    std::vector<double> p(label_count, 0.0);
    p[label] = 1.0;
    return ClassSimplex(std::move(p));
}

bool ClassSimplex::valid(double tol) const {
    if (p.empty())
        return false;
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0 + tol))
            return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
}

LabelId ClassSimplex::argmax() const {
    int best = 0;
    for (int l = 1; l < size(); ++l)
        if (p[l] > p[best])
            best = l;
    return static_cast<LabelId>(best);
}

ClassSimplex ClassSimplex::floored(double eps) const {
    ClassSimplex out(p);
    double sum = 0.0;
    for (double& v : out.p) {
        v = std::max(v, eps);
        sum += v;
    }
    for (double& v : out.p)
        v /= sum;
    return out;
}

const char* object_kind_name(ObjectKind k) {
    return k == ObjectKind::physical_line ? "physical" : "spatial";
}

double ObjectHypothesis::incline() const {
    double a = std::atan2(p2.y - p1.y, p2.x - p1.x);
    while (a < 0.0)
        a += M_PI;
    while (a >= M_PI)
        a -= M_PI;
    return a;
}

// ---------------------------------------------------------------------------
// Physical line detection: randomized Hough voting over the rasterized scan.
// ---------------------------------------------------------------------------

namespace {

struct RasterPoint {
    double x, y;
    bool alive = true;
    bool voted = false;
};

double point_segment_distance(const Point2D& p, const Point2D& a, const Point2D& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0)
        t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Beams the segment span covers, seen from the sensor.
int expected_beam_count(const Scan& scan, const Point2D& p1, const Point2D& p2) {
    const Pose2D& off = scan.params.sensor_offset;
    const double a1 = normalize_angle(std::atan2(p1.y - off.y, p1.x - off.x) - off.theta);
    const double a2 = normalize_angle(std::atan2(p2.y - off.y, p2.x - off.x) - off.theta);
    const double span = std::abs(normalize_angle(a1 - a2));
    return static_cast<int>(std::round(span / scan.params.angle_increment)) + 1;
}

void assign_members_and_rate(const Scan& scan, const DetectorParams& params,
                             ObjectHypothesis& obj) {
    const double dx = obj.p2.x - obj.p1.x, dy = obj.p2.y - obj.p1.y;
    const double len = std::hypot(dx, dy);
    obj.member_beams.clear();
    for (int k = 0; k < scan.beam_count(); ++k) {
        if (!scan.is_hit(k))
            continue;
        const Point2D p = scan.endpoint(k);
        if (point_segment_distance(p, obj.p1, obj.p2) > params.range_gate)
            continue;
        if (len > 0.0) {
            const double t = ((p.x - obj.p1.x) * dx + (p.y - obj.p1.y) * dy) / (len * len);
            if (t < -params.range_gate / len || t > 1.0 + params.range_gate / len)
                continue;
        }
        obj.member_beams.push_back(k);
    }
    const int expected = std::max(1, expected_beam_count(scan, obj.p1, obj.p2));
    obj.point_rate = std::min(1.0, static_cast<double>(obj.member_beams.size()) / expected);
}

// Total-least-squares segment over a point run.
void fit_segment(const std::vector<Point2D>& pts, Point2D& p1, Point2D& p2) {
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p.x;
        my += p.y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& p : pts) {
        const double ux = p.x - mx, uy = p.y - my;
        sxx += ux * ux;
        sxy += ux * uy;
        syy += uy * uy;
    }
    // principal eigenvector of the 2x2 scatter matrix
    const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    const double dx = std::cos(angle), dy = std::sin(angle);
    double tmin = 0.0, tmax = 0.0;
    for (const auto& p : pts) {
        const double t = (p.x - mx) * dx + (p.y - my) * dy;
        tmin = std::min(tmin, t);
        tmax = std::max(tmax, t);
    }
    p1 = Point2D{mx + tmin * dx, my + tmin * dy};
    p2 = Point2D{mx + tmax * dx, my + tmax * dy};
}

}  // namespace

std::vector<ObjectHypothesis> detect_lines(const Scan& scan, const DetectorParams& params,
                                           Rng& rng) {
    std::vector<ObjectHypothesis> lines;

    // Rasterize hit points; one voting point per occupied raster cell.
    const double rr = params.raster_resolution;
    std::map<std::pair<long, long>, std::pair<Point2D, int>> cells;
    for (int k = 0; k < scan.beam_count(); ++k) {
        if (!scan.is_hit(k))
            continue;
        const Point2D p = scan.endpoint(k);
        const auto key = std::make_pair(static_cast<long>(std::floor(p.x / rr)),
                                        static_cast<long>(std::floor(p.y / rr)));
        auto& slot = cells[key];
        slot.first.x += p.x;
        slot.first.y += p.y;
        slot.second += 1;
    }
    std::vector<RasterPoint> pts;
    pts.reserve(cells.size());
    for (const auto& [key, slot] : cells)
        pts.push_back(RasterPoint{slot.first.x / slot.second, slot.first.y / slot.second});
    if (pts.size() < static_cast<size_t>(params.vote_threshold))
        return lines;

    // Hough accumulator over (theta, rho).
    const int n_theta = params.theta_bins;
    const double rho_span = scan.params.r_max + 2.0;
    const int n_rho = static_cast<int>(std::ceil(2.0 * rho_span / rr)) + 1;
    std::vector<int> acc(static_cast<size_t>(n_theta) * n_rho, 0);
    std::vector<double> cos_t(n_theta), sin_t(n_theta);
    for (int t = 0; t < n_theta; ++t) {
        const double theta = (t + 0.5) * M_PI / n_theta;
        cos_t[t] = std::cos(theta);
        sin_t[t] = std::sin(theta);
    }
    auto rho_bin = [&](double rho) {
        return std::clamp(static_cast<int>(std::floor((rho + rho_span) / rr)), 0, n_rho - 1);
    };
    auto vote = [&](const RasterPoint& p, int delta) {
        for (int t = 0; t < n_theta; ++t) {
            const double rho = p.x * cos_t[t] + p.y * sin_t[t];
            acc[static_cast<size_t>(t) * n_rho + rho_bin(rho)] += delta;
        }
    };

    // Extracts the best collinear run on the accumulator cell (t, r); returns
    // true if a segment was produced. Points of the run are retired either way.
    auto extract = [&](int t, int r) {
        const double rho_center = (r + 0.5) * rr - rho_span;
        std::vector<int> candidates;
        for (size_t i = 0; i < pts.size(); ++i) {
            if (!pts[i].alive)
                continue;
            const double rho = pts[i].x * cos_t[t] + pts[i].y * sin_t[t];
            if (std::abs(rho - rho_center) <= params.range_gate)
                candidates.push_back(static_cast<int>(i));
        }
        if (candidates.empty())
            return false;
        // order along the line direction, take the longest gap-free run
        const double dx = -sin_t[t], dy = cos_t[t];
        std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
            return pts[a].x * dx + pts[a].y * dy < pts[b].x * dx + pts[b].y * dy;
        });
        size_t best_begin = 0, best_len = 1, run_begin = 0;
        for (size_t i = 1; i <= candidates.size(); ++i) {
            bool cut = i == candidates.size();
            if (!cut) {
                const double prev = pts[candidates[i - 1]].x * dx + pts[candidates[i - 1]].y * dy;
                const double cur = pts[candidates[i]].x * dx + pts[candidates[i]].y * dy;
                cut = (cur - prev) > params.max_gap;
            }
            if (cut) {
                if (i - run_begin > best_len) {
                    best_len = i - run_begin;
                    best_begin = run_begin;
                }
                run_begin = i;
            }
        }
        std::vector<Point2D> run;
        for (size_t i = best_begin; i < best_begin + best_len; ++i)
            run.push_back(Point2D{pts[candidates[i]].x, pts[candidates[i]].y});
        for (size_t i = best_begin; i < best_begin + best_len; ++i) {
            RasterPoint& p = pts[candidates[i]];
            p.alive = false;
            if (p.voted)
                vote(p, -1);
        }
        if (run.size() < 2)
            return false;
        ObjectHypothesis obj;
        obj.kind = ObjectKind::physical_line;
        fit_segment(run, obj.p1, obj.p2);
        if (obj.length() < params.min_length)
            return false;
        assign_members_and_rate(scan, params, obj);
        lines.push_back(std::move(obj));
        return true;
    };

    std::vector<int> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    for (int idx : order) {
        if (static_cast<int>(lines.size()) >= params.max_lines)
            break;
        if (!pts[idx].alive)
            continue;
        vote(pts[idx], +1);
        pts[idx].voted = true;
        // check the bins this point contributed to
        int best_t = -1, best_r = -1, best_votes = params.vote_threshold - 1;
        for (int t = 0; t < n_theta; ++t) {
            const double rho = pts[idx].x * cos_t[t] + pts[idx].y * sin_t[t];
            const int r = rho_bin(rho);
            const int votes = acc[static_cast<size_t>(t) * n_rho + r];
            if (votes > best_votes) {
                best_votes = votes;
                best_t = t;
                best_r = r;
            }
        }
        if (best_t >= 0)
            extract(best_t, best_r);
    }

    // Sweep up remaining over-threshold bins.
    while (static_cast<int>(lines.size()) < params.max_lines) {
        int best = params.vote_threshold - 1, best_t = -1, best_r = -1;
        for (int t = 0; t < n_theta; ++t)
            for (int r = 0; r < n_rho; ++r)
                if (acc[static_cast<size_t>(t) * n_rho + r] > best) {
                    best = acc[static_cast<size_t>(t) * n_rho + r];
                    best_t = t;
                    best_r = r;
                }
        if (best_t < 0)
            break;
        extract(best_t, best_r);
    }
    return lines;
}

// ---------------------------------------------------------------------------
// Spatial line detection over scan discontinuities and segment extremities.
// ---------------------------------------------------------------------------

namespace {

bool ray_crosses_segment(const Point2D& origin, double dir_x, double dir_y, const Point2D& a,
                         const Point2D& b, double& t_out) {
    const double sx = b.x - a.x, sy = b.y - a.y;
    const double denom = dir_x * sy - dir_y * sx;
    if (std::abs(denom) < 1e-12)
        return false;
    const double qx = a.x - origin.x, qy = a.y - origin.y;
    const double t = (qx * sy - qy * sx) / denom;
    const double s = (qx * dir_y - qy * dir_x) / denom;
    if (t <= 0.0 || s < 0.0 || s > 1.0)
        return false;
    t_out = t;
    return true;
}

}  // namespace

std::vector<ObjectHypothesis> detect_spatial_lines(const Scan& scan,
                                                   const std::vector<ObjectHypothesis>& physical,
                                                   const DetectorParams& params) {
    std::vector<ObjectHypothesis> spatial;
    if (physical.empty())
        return spatial;

    // Incline histogram of the detected physical lines.
    std::vector<int> hist(params.incline_bins, 0);
    auto incline_bin = [&](double incline) {
        int b = static_cast<int>(incline / M_PI * params.incline_bins);
        return std::clamp(b, 0, params.incline_bins - 1);
    };
    for (const auto& line : physical)
        hist[incline_bin(line.incline())] += 1;
    const int max_bin = *std::max_element(hist.begin(), hist.end());
    const double bin_gate = params.incline_threshold * max_bin;

    // Candidate endpoints: segment extremities and scan discontinuities.
    std::vector<Point2D> ends;
    auto add_end = [&](const Point2D& p) {
        for (const auto& q : ends)
            if (std::hypot(p.x - q.x, p.y - q.y) < params.raster_resolution)
                return;
        ends.push_back(p);
    };
    for (const auto& line : physical) {
        add_end(line.p1);
        add_end(line.p2);
    }
    for (int k = 0; k + 1 < scan.beam_count(); ++k) {
        const bool h0 = scan.is_hit(k), h1 = scan.is_hit(k + 1);
        if (h0 && h1) {
            if (std::abs(scan.ranges[k + 1] - scan.ranges[k]) > params.range_jump) {
                add_end(scan.endpoint(k));
                add_end(scan.endpoint(k + 1));
            }
        } else if (h0 != h1) {
            add_end(scan.endpoint(h0 ? k : k + 1));
        }
    }

    const Pose2D& off = scan.params.sensor_offset;
    const Point2D sensor_origin{off.x, off.y};

    auto coincides_with_physical = [&](const ObjectHypothesis& cand) {
        for (const auto& line : physical) {
            const double dir_diff =
                std::abs(normalize_angle(cand.incline() - line.incline()));
            const double folded = std::min(dir_diff, M_PI - dir_diff);
            if (folded > 15.0 * M_PI / 180.0)
                continue;
            if (point_segment_distance(cand.midpoint(), line.p1, line.p2) < params.coincide_gate)
                return true;
        }
        return false;
    };

    auto passed_through = [&](const ObjectHypothesis& cand) {
        for (int k = 0; k < scan.beam_count(); ++k) {
            const double a = off.theta + scan.params.angle(k);
            double t;
            if (ray_crosses_segment(sensor_origin, std::cos(a), std::sin(a), cand.p1, cand.p2,
                                    t) &&
                scan.ranges[k] >= t + params.pass_margin)
                return true;
        }
        return false;
    };

    std::vector<ObjectHypothesis> candidates;
    for (size_t i = 0; i < ends.size(); ++i) {
        for (size_t j = i + 1; j < ends.size(); ++j) {
            ObjectHypothesis cand;
            cand.kind = ObjectKind::spatial_line;
            cand.p1 = ends[i];
            cand.p2 = ends[j];
            const double len = cand.length();
            if (len < params.spatial_min_length || len > params.spatial_max_length)
                continue;
            if (hist[incline_bin(cand.incline())] < bin_gate)
                continue;
            if (coincides_with_physical(cand))
                continue;
            if (!passed_through(cand))
                continue;
            assign_members_and_rate(scan, params, cand);
            candidates.push_back(std::move(cand));
        }
    }

    // Keep the tightest candidate per location.
    std::sort(candidates.begin(), candidates.end(),
              [](const ObjectHypothesis& a, const ObjectHypothesis& b) {
                  return a.length() < b.length();
              });
    for (auto& cand : candidates) {
        bool duplicate = false;
        for (const auto& kept : spatial)
            if (distance(cand.midpoint(), kept.midpoint()) < params.merge_distance) {
                duplicate = true;
                break;
            }
        if (!duplicate)
            spatial.push_back(std::move(cand));
        if (static_cast<int>(spatial.size()) >= params.max_lines)
            break;
    }
    return spatial;
}

// ---------------------------------------------------------------------------
// Rule-based classification and the simulated recognizer.
// ---------------------------------------------------------------------------

void RuleTable::validate(int label_count) const {
    for (ObjectKind kind : {ObjectKind::physical_line, ObjectKind::spatial_line}) {
        std::vector<const ClassificationRule*> of_kind;
        for (const auto& r : rules)
            if (r.kind == kind)
                of_kind.push_back(&r);
        if (of_kind.empty())
            throw std::invalid_argument(std::string("no classification rules for kind ") +
                                        object_kind_name(kind));
        std::sort(of_kind.begin(), of_kind.end(),
                  [](auto* a, auto* b) { return a->rate_min < b->rate_min; });
        double covered = 0.0;
        for (const auto* r : of_kind) {
            if (std::abs(r->rate_min - covered) > 1e-9)
                throw std::invalid_argument(
                    std::string("classification rules for kind ") + object_kind_name(kind) +
                    " do not cover [0,1]: gap at rate " + std::to_string(covered));
            if (r->rate_max <= r->rate_min)
                throw std::invalid_argument("empty classification rule interval");
            if (r->probs.size() != label_count || !r->probs.valid())
                throw std::invalid_argument("classification rule simplex invalid");
            covered = r->rate_max;
        }
        if (std::abs(covered - 1.0) > 1e-9)
            throw std::invalid_argument(std::string("classification rules for kind ") +
                                        object_kind_name(kind) + " stop at rate " +
                                        std::to_string(covered));
    }
}

namespace {

ClassSimplex simplex_from_weights(const ClassTable& classes,
                                  const std::vector<std::pair<std::string, double>>& weights) {
    std::vector<double> p(classes.size(), 0.0);
    for (const auto& [name, w] : weights) {
        auto id = classes.find(name);
        p[id ? *id : kLabelOthers] += w;
    }
    double sum = 0.0;
    for (double v : p)
        sum += v;
    for (double& v : p)
        v /= sum;
    return ClassSimplex(std::move(p));
}

}  // namespace

RuleTable RuleTable::defaults(const ClassTable& classes) {
    RuleTable t;
    t.rules.push_back({ObjectKind::physical_line, 0.0, 0.6,
                       simplex_from_weights(classes, {{"close_glass_door", 0.3},
                                                      {"open_glass_door", 0.25},
                                                      {"others", 0.25},
                                                      {"fence", 0.1},
                                                      {"close_door", 0.1}})});
    t.rules.push_back({ObjectKind::physical_line, 0.6, 1.0,
                       simplex_from_weights(classes, {{"fence", 0.3},
                                                      {"close_door", 0.25},
                                                      {"close_glass_door", 0.15},
                                                      {"others", 0.3}})});
    t.rules.push_back({ObjectKind::spatial_line, 0.0, 0.4,
                       simplex_from_weights(classes, {{"open_door", 0.35},
                                                      {"no_entry_line", 0.3},
                                                      {"free", 0.2},
                                                      {"others", 0.1},
                                                      {"open_glass_door", 0.05}})});
    t.rules.push_back({ObjectKind::spatial_line, 0.4, 1.0,
                       simplex_from_weights(classes, {{"open_glass_door", 0.35},
                                                      {"open_door", 0.2},
                                                      {"others", 0.2},
                                                      {"no_entry_line", 0.15},
                                                      {"free", 0.1}})});
    return t;
}

ClassSimplex classify_by_point_rate(const ObjectHypothesis& obj, const RuleTable& rules) {
    const double rate = std::clamp(obj.point_rate, 0.0, 1.0);
    for (const auto& r : rules.rules) {
        if (r.kind != obj.kind)
            continue;
        const bool upper_ok = (rate < r.rate_max) || (r.rate_max >= 1.0 && rate <= 1.0);
        if (rate >= r.rate_min && upper_ok)
            return r.probs;
    }
    throw std::invalid_argument("classification rule table does not cover rate " +
                                std::to_string(rate));
}

void ConfusionRecognizer::validate() const {
    if (kappa <= 0.0)
        throw std::invalid_argument("recognizer kappa must be positive");
    const size_t n = confusion.size();
    if (n == 0)
        throw std::invalid_argument("empty confusion matrix");
    for (const auto& row : confusion) {
        if (row.size() != n)
            throw std::invalid_argument("confusion matrix must be square");
        double sum = 0.0;
        for (double v : row) {
            if (v < 0.0)
                throw std::invalid_argument("confusion matrix entries must be nonnegative");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("confusion matrix rows must sum to 1");
    }
}

ConfusionRecognizer ConfusionRecognizer::diagonal(int label_count, double diag, double kappa) {
    ConfusionRecognizer r;
    r.kappa = kappa;
    const double off = (label_count > 1) ? (1.0 - diag) / (label_count - 1) : 0.0;
    r.confusion.assign(label_count, std::vector<double>(label_count, off));
    for (int i = 0; i < label_count; ++i)
        r.confusion[i][i] = diag;
    return r;
}

ClassSimplex simulate_recognition(LabelId true_label, const ConfusionRecognizer& recog,
                                  Rng& rng) {
    const auto& row = recog.confusion.at(true_label);
    std::vector<double> draw(row.size());
    double sum = 0.0;
    for (size_t l = 0; l < row.size(); ++l) {
        const double alpha = recog.kappa * row[l] + 0.01;
        std::gamma_distribution<double> gamma(alpha, 1.0);
        draw[l] = gamma(rng);
        sum += draw[l];
    }
    if (sum <= 0.0) {
        // pathological all-zero draw; fall back to the expected row
        double alpha_sum = 0.0;
        for (size_t l = 0; l < row.size(); ++l) {
            draw[l] = recog.kappa * row[l] + 0.01;
            alpha_sum += draw[l];
        }
        sum = alpha_sum;
    }
    for (double& v : draw)
        v /= sum;
    return ClassSimplex(std::move(draw));
}

}  // namespace semloc
