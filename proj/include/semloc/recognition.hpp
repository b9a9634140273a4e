#pragma once

#include <cstdint>
#include <vector>

#include "semloc/types.hpp"

namespace semloc {

// Probability vector over the class table; entries in [0,1], unit sum.
struct ClassSimplex {
    std::vector<double> p;

    ClassSimplex() = default;
    explicit ClassSimplex(std::vector<double> probs) : p(std::move(probs)) {}
    static ClassSimplex uniform(int label_count);
    static ClassSimplex one_hot(int label_count, LabelId label);

    int size() const { return static_cast<int>(p.size()); }
    bool valid(double tol = 1e-9) const;
    LabelId argmax() const;  // ties break to the lowest label id

    // max(p, eps) renormalized; keeps the Dirichlet density finite for
    // concentrations below one.
    ClassSimplex floored(double eps) const;
};

enum class ObjectKind { physical_line, spatial_line };

const char* object_kind_name(ObjectKind k);

// A detected line object in the robot frame.
struct ObjectHypothesis {
    ObjectKind kind = ObjectKind::physical_line;
    Point2D p1, p2;
    std::vector<int> member_beams;
    double point_rate = 0.0;
    ClassSimplex probs;

    double length() const { return distance(p1, p2); }
    Point2D midpoint() const { return Point2D{(p1.x + p2.x) * 0.5, (p1.y + p2.y) * 0.5}; }
    double incline() const;  // direction folded into [0, pi)
};

struct DetectorParams {
    double raster_resolution = 0.05;  // m, scan raster cell for Hough voting
    int theta_bins = 60;              // accumulator bins over [0, pi)
    int vote_threshold = 6;           // raster points required on a line
    double range_gate = 0.09;         // m, point-to-line membership distance
    double min_length = 0.2;          // m, shortest physical segment kept
    double max_gap = 0.4;             // m, split collinear runs at larger gaps
    int max_lines = 24;

    int incline_bins = 18;             // histogram bins over [0, pi)
    double incline_threshold = 0.3;    // fraction of the max histogram bin
    double spatial_min_length = 0.4;   // m
    double spatial_max_length = 2.5;   // m
    double range_jump = 0.4;           // m, scan discontinuity threshold
    double pass_margin = 0.1;          // m, beams must reach this far beyond
    double coincide_gate = 0.12;       // m, spatial vs physical overlap gate
    double merge_distance = 0.4;       // m, duplicate spatial candidate gate
};

// Physical line objects by randomized Hough voting over the rasterized scan.
std::vector<ObjectHypothesis> detect_lines(const Scan& scan, const DetectorParams& params,
                                           Rng& rng);

// Spatial (non-physical) line candidates between scan discontinuities and
// physical segment extremities; filtered by the incline histogram of the
// physical lines and the pass-through test.
std::vector<ObjectHypothesis> detect_spatial_lines(const Scan& scan,
                                                   const std::vector<ObjectHypothesis>& physical,
                                                   const DetectorParams& params);

// Piecewise rule: point-rate interval -> base simplex, per object kind.
struct ClassificationRule {
    ObjectKind kind = ObjectKind::physical_line;
    double rate_min = 0.0;
    double rate_max = 1.0;
    ClassSimplex probs;
};

struct RuleTable {
    std::vector<ClassificationRule> rules;

    // Throws if intervals do not cover [0,1] per kind or simplices are bad.
    void validate(int label_count) const;
    static RuleTable defaults(const ClassTable& classes);
};

ClassSimplex classify_by_point_rate(const ObjectHypothesis& obj, const RuleTable& rules);

// Simulated recognizer for controlled experiments: draws a class simplex from
// a Dirichlet centered on the confusion-matrix row of the true label.
struct ConfusionRecognizer {
    std::vector<std::vector<double>> confusion;  // row-stochastic, row = truth
    double kappa = 50.0;

    void validate() const;
    static ConfusionRecognizer diagonal(int label_count, double diag, double kappa);
};

ClassSimplex simulate_recognition(LabelId true_label, const ConfusionRecognizer& recog, Rng& rng);

// Per-step recognition products consumed by the filter.
struct RecognitionFrame {
    std::vector<ObjectHypothesis> objects;    // slamer object term
    std::vector<LabelId> beam_labels;         // per-beam argmax, -1 where absent
    std::vector<ClassSimplex> beam_probs;     // per-beam simplices (may be empty)
};

}  // namespace semloc
