#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semloc/models.hpp"
#include "semloc/recognition.hpp"
#include "semloc/world_sim.hpp"

namespace semloc {

// Anything wrong with user-supplied configuration; the CLI maps it to exit 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RecognizerSource { confusion, rules };

struct RecognizerConfig {
    RecognizerSource source = RecognizerSource::confusion;
    double kappa = 2.0;
    double diagonal = 0.8;                        // shorthand for a uniform-off-diagonal matrix
    std::vector<std::vector<double>> confusion;   // optional explicit matrix
    double spatial_match_distance = 0.6;          // m, truth matching gate for spatial objects

    ConfusionRecognizer build(int label_count) const;
};

struct SimConfig {
    std::vector<Point2D> waypoints;
    double speed = 0.5;
    double dt = 0.1;
    double turn_rate = 1.0;
    ControlNoise noise;
    ScanParams scan;
    std::vector<SpatialTruth> spatial_truth;
};

// Rule table entry with labels by name, resolved against the map's class
// table once it is loaded.
struct NamedRule {
    ObjectKind kind = ObjectKind::physical_line;
    double rate_min = 0.0;
    double rate_max = 1.0;
    std::vector<std::pair<std::string, double>> probs;
};

struct ScenarioConfig {
    std::string map_path;
    SimConfig sim;
    Hyperparameters model;
    DetectorParams detector;
    RecognizerConfig recognizer;
    std::vector<NamedRule> named_rules;  // empty -> defaults for the class table
    LikelihoodMode mode = LikelihoodMode::slamer;
    int particles = 200;
    double spread_x = 0.1, spread_y = 0.1, spread_theta = 0.05;
    std::vector<uint64_t> seeds{1};
    std::string out_dir = "out";
    double d_max = 10.0;

    RuleTable rule_table(const ClassTable& classes) const;
};

// Parses the scenario file and resolves the map path relative to it.
// Unknown keys are rejected so typos surface as config errors.
ScenarioConfig load_scenario_config(const std::string& path);

// Declarative map authoring: labeled rectangles and thick segments rasterized
// onto a fresh map. Contradictory physical labels on one cell are an error.
SemanticGridMap build_map_from_spec(const std::string& spec_path);

}  // namespace semloc
