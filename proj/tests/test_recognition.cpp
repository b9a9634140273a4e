#include <doctest.h>

#include <cmath>

#include "semloc/recognition.hpp"

using namespace semloc;

namespace {

using Segment = std::pair<Point2D, Point2D>;

// Analytic scan of a segment scene from a sensor at the robot origin.
Scan scan_from_segments(const std::vector<Segment>& segments, int beams = 360,
                        double fov_deg = 270.0, double r_max = 10.0) {
    Scan scan;
    scan.params.beam_count = beams;
    scan.params.angle_min = -fov_deg * M_PI / 180.0 / 2.0;
    scan.params.angle_increment = fov_deg * M_PI / 180.0 / (beams - 1);
    scan.params.r_max = r_max;
    scan.ranges.assign(beams, r_max);
    scan.truth_labels.assign(beams, kLabelFree);
    for (int k = 0; k < beams; ++k) {
        const double a = scan.params.angle(k);
        const double dx = std::cos(a), dy = std::sin(a);
        double best = r_max;
        for (const auto& [p1, p2] : segments) {
            const double sx = p2.x - p1.x, sy = p2.y - p1.y;
            const double denom = dx * sy - dy * sx;
            if (std::abs(denom) < 1e-12)
                continue;
            const double t = (p1.x * sy - p1.y * sx) / denom;
            const double s = (p1.x * dy - p1.y * dx) / denom;
            if (t > 0.0 && s >= 0.0 && s <= 1.0 && t < best)
                best = t;
        }
        scan.ranges[k] = best;
        if (best < r_max)
            scan.truth_labels[k] = kLabelOthers;
    }
    return scan;
}

ClassTable indoor_classes() {
    return ClassTable::with_labels({"open_door", "close_door", "open_glass_door",
                                    "close_glass_door", "no_entry_line", "fence"});
}

}  // namespace

TEST_SUITE("recognition") {

TEST_CASE("class simplex helpers") {
    const ClassSimplex u = ClassSimplex::uniform(8);
    CHECK(u.valid());
    const ClassSimplex hot = ClassSimplex::one_hot(4, 2);
    CHECK(hot.valid());
    CHECK(hot.argmax() == 2);
    // ties break to the lowest label id
    const ClassSimplex tie({0.4, 0.4, 0.2});
    CHECK(tie.argmax() == 0);
    const ClassSimplex floored = hot.floored(0.01 / 4);
    CHECK(floored.valid(1e-12));
    for (double v : floored.p)
        CHECK(v > 0.0);
}

TEST_CASE("single straight wall yields exactly one line") {
    const Scan scan = scan_from_segments({{Point2D{-1.5, 2.0}, Point2D{1.5, 2.0}}});
    DetectorParams params;
    Rng rng(5);
    const auto lines = detect_lines(scan, params, rng);
    REQUIRE(lines.size() == 1);
    const auto& line = lines[0];
    CHECK(line.point_rate >= 0.95);
    CHECK(line.kind == ObjectKind::physical_line);
    // endpoints within 2 raster cells of the true corners
    const double tol = 2.0 * params.raster_resolution;
    const bool fwd = line.p1.x < line.p2.x;
    const Point2D e1 = fwd ? line.p1 : line.p2;
    const Point2D e2 = fwd ? line.p2 : line.p1;
    CHECK(distance(e1, Point2D{-1.5, 2.0}) < tol);
    CHECK(distance(e2, Point2D{1.5, 2.0}) < tol);
    CHECK(!line.member_beams.empty());
}

TEST_CASE("detection is deterministic given the rng seed") {
    const Scan scan = scan_from_segments({{Point2D{-1.5, 2.0}, Point2D{1.5, 2.0}},
                                          {Point2D{1.8, 0.2}, Point2D{1.8, 1.6}}});
    DetectorParams params;
    Rng rng1(42), rng2(42);
    const auto a = detect_lines(scan, params, rng1);
    const auto b = detect_lines(scan, params, rng2);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].p1.x == b[i].p1.x);
        CHECK(a[i].p2.y == b[i].p2.y);
        CHECK(a[i].member_beams == b[i].member_beams);
    }
}

TEST_CASE("all beams at max range yield no lines") {
    const Scan scan = scan_from_segments({});
    DetectorParams params;
    Rng rng(5);
    CHECK(detect_lines(scan, params, rng).empty());
}

TEST_CASE("L corner yields two roughly perpendicular lines") {
    const Scan scan = scan_from_segments(
        {{Point2D{-2.0, 2.0}, Point2D{1.0, 2.0}}, {Point2D{1.0, 2.0}, Point2D{1.0, 0.3}}});
    DetectorParams params;
    Rng rng(7);
    const auto lines = detect_lines(scan, params, rng);
    REQUIRE(lines.size() == 2);
    double diff = std::abs(lines[0].incline() - lines[1].incline()) * 180.0 / M_PI;
    diff = std::min(diff, 180.0 - diff);
    CHECK(diff == doctest::Approx(90.0).epsilon(5.0 / 90.0));
}

TEST_CASE("rotating the scene rotates the detected line") {
    DetectorParams params;
    auto incline_of_scene = [&](double rot_deg) {
        const double c = std::cos(rot_deg * M_PI / 180.0), s = std::sin(rot_deg * M_PI / 180.0);
        auto rot = [&](const Point2D& p) {
            return Point2D{c * p.x - s * p.y, s * p.x + c * p.y};
        };
        const Scan scan =
            scan_from_segments({{rot(Point2D{-1.5, 2.0}), rot(Point2D{1.5, 2.0})}});
        Rng rng(11);
        const auto lines = detect_lines(scan, params, rng);
        REQUIRE(lines.size() == 1);
        return lines[0].incline() * 180.0 / M_PI;
    };
    const double base = incline_of_scene(0.0);
    const double rotated = incline_of_scene(30.0);
    double shift = rotated - base;
    while (shift < 0)
        shift += 180.0;
    while (shift >= 180.0)
        shift -= 180.0;
    const double bin_width_deg = 180.0 / params.theta_bins;
    CHECK(std::abs(shift - 30.0) <= bin_width_deg + 1.0);
}

TEST_CASE("doorway gap yields exactly one spatial line across it") {
    // two collinear wall pieces with a 0.9 m gap
    const Scan scan = scan_from_segments({{Point2D{-3.0, 2.0}, Point2D{-0.45, 2.0}},
                                          {Point2D{0.45, 2.0}, Point2D{3.0, 2.0}}});
    DetectorParams params;
    Rng rng(3);
    const auto physical = detect_lines(scan, params, rng);
    REQUIRE(physical.size() == 2);
    const auto spatial = detect_spatial_lines(scan, physical, params);
    REQUIRE(spatial.size() == 1);
    const auto& gap = spatial[0];
    CHECK(gap.kind == ObjectKind::spatial_line);

    // collinear with the walls within 5 degrees
    double incline_deg = gap.incline() * 180.0 / M_PI;
    incline_deg = std::min(incline_deg, 180.0 - incline_deg);
    CHECK(incline_deg < 5.0);

    // spans the gap edges within 2 raster cells
    const double tol = 2.0 * params.raster_resolution;
    const bool fwd = gap.p1.x < gap.p2.x;
    const Point2D e1 = fwd ? gap.p1 : gap.p2;
    const Point2D e2 = fwd ? gap.p2 : gap.p1;
    CHECK(distance(e1, Point2D{-0.45, 2.0}) < tol);
    CHECK(distance(e2, Point2D{0.45, 2.0}) < tol);

    // low point rate: almost no returns on the gap line
    CHECK(gap.point_rate < 0.3);

    // invariant: spatial candidates never coincide with a physical span
    for (const auto& sp : spatial)
        for (const auto& ph : physical)
            CHECK(distance(sp.midpoint(), ph.midpoint()) > params.coincide_gate);
}

TEST_CASE("closed wall yields no spatial lines") {
    const Scan scan = scan_from_segments({{Point2D{-3.0, 2.0}, Point2D{3.0, 2.0}}});
    DetectorParams params;
    Rng rng(3);
    const auto physical = detect_lines(scan, params, rng);
    REQUIRE(!physical.empty());
    CHECK(detect_spatial_lines(scan, physical, params).empty());
}

TEST_CASE("gap with a wall immediately behind fails the pass-through test") {
    const Scan scan = scan_from_segments({{Point2D{-3.0, 2.0}, Point2D{-0.45, 2.0}},
                                          {Point2D{0.45, 2.0}, Point2D{3.0, 2.0}},
                                          {Point2D{-3.0, 2.1}, Point2D{3.0, 2.1}}});
    DetectorParams params;
    params.pass_margin = 0.15;  // back wall sits 0.1 m behind the gap
    Rng rng(3);
    const auto physical = detect_lines(scan, params, rng);
    const auto spatial = detect_spatial_lines(scan, physical, params);
    for (const auto& sp : spatial) {
        // nothing may span the doorway gap
        CHECK(std::abs(sp.midpoint().x) > 0.45);
    }
}

TEST_CASE("rule table defaults: readback of the rate extremes") {
    const ClassTable classes = indoor_classes();
    const RuleTable rules = RuleTable::defaults(classes);
    CHECK_NOTHROW(rules.validate(classes.size()));

    ObjectHypothesis solid;
    solid.kind = ObjectKind::physical_line;
    solid.point_rate = 1.0;
    const ClassSimplex sp = classify_by_point_rate(solid, rules);
    CHECK(sp.valid(1e-9));
    const double solid_mass = sp.p[*classes.find("fence")] + sp.p[*classes.find("close_door")] +
                              sp.p[*classes.find("close_glass_door")] +
                              sp.p[*classes.find("others")];
    CHECK(solid_mass == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sp.p[*classes.find("open_door")] == 0.0);
    CHECK(sp.p[*classes.find("no_entry_line")] == 0.0);
    CHECK(sp.p[kLabelFree] == 0.0);

    ObjectHypothesis gap;
    gap.kind = ObjectKind::spatial_line;
    gap.point_rate = 0.0;
    const ClassSimplex gp = classify_by_point_rate(gap, rules);
    CHECK(gp.valid(1e-9));
    const double open_mass = gp.p[*classes.find("open_door")] +
                             gp.p[*classes.find("no_entry_line")] + gp.p[kLabelFree];
    CHECK(open_mass >= 0.8);
}

TEST_CASE("rule tables must cover the whole rate interval") {
    const ClassTable classes = indoor_classes();
    RuleTable broken = RuleTable::defaults(classes);
    broken.rules[0].rate_max = 0.5;  // leaves (0.5, 0.6) uncovered
    CHECK_THROWS_AS(broken.validate(classes.size()), std::invalid_argument);
}

TEST_CASE("confusion recognizer validation") {
    ConfusionRecognizer r = ConfusionRecognizer::diagonal(4, 0.8, 10.0);
    CHECK_NOTHROW(r.validate());
    r.kappa = 0.0;
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
    r = ConfusionRecognizer::diagonal(4, 0.8, 10.0);
    r.confusion[1][1] = 0.5;  // row no longer sums to 1
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("simulated recognition concentrates on the truth for large kappa") {
    const ConfusionRecognizer recog = ConfusionRecognizer::diagonal(6, 1.0, 1e4);
    Rng rng(13);
    int hits = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const ClassSimplex c = simulate_recognition(3, recog, rng);
        CHECK(c.valid(1e-9));
        if (c.argmax() == 3)
            ++hits;
    }
    CHECK(hits >= static_cast<int>(0.99 * n));
}

TEST_CASE("uniform confusion rows give a near-uniform mean simplex") {
    const int L = 5;
    ConfusionRecognizer recog = ConfusionRecognizer::diagonal(L, 1.0 / L, 40.0);
    Rng rng(29);
    std::vector<double> mean(L, 0.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const ClassSimplex c = simulate_recognition(2, recog, rng);
        for (int l = 0; l < L; ++l)
            mean[l] += c.p[l];
    }
    for (int l = 0; l < L; ++l)
        CHECK(std::abs(mean[l] / n - 1.0 / L) < 0.02);
}

TEST_CASE("simulated recognition is seed deterministic") {
    const ConfusionRecognizer recog = ConfusionRecognizer::diagonal(8, 0.8, 50.0);
    Rng rng1(99), rng2(99);
    const ClassSimplex a = simulate_recognition(5, recog, rng1);
    const ClassSimplex b = simulate_recognition(5, recog, rng2);
    CHECK(a.p == b.p);
}

}  // TEST_SUITE
