#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semloc/config.hpp"
#include "semloc/eval.hpp"
#include "semloc/filter.hpp"
#include "semloc/world_sim.hpp"

namespace semloc {

struct StepRecord {
    int t = 0;
    Pose2D estimate;
    double ess = 0.0;
    bool resampled = false;
};

struct ObjectRecord {
    int t = 0;
    int k = 0;
    ObjectKind kind = ObjectKind::physical_line;
    LabelId map_label = kLabelFree;
    double p_top = 0.0;
    Point2D p1, p2;               // world frame at the max-likelihood pose
    LabelId truth_label = -1;     // -1 when no ground truth matched
    LabelId raw_label = -1;       // argmax of the recognizer simplex
};

struct AccuracyRecord {
    int t = 0;
    int raw_correct = 0, raw_total = 0;
    int simple_correct = 0, simple_total = 0;
    int object_correct = 0, object_total = 0;
};

struct RunResult {
    LikelihoodMode mode = LikelihoodMode::lfm;
    uint64_t seed = 0;
    std::vector<StepRecord> steps;
    std::vector<ObjectRecord> objects;
    std::vector<AccuracyRecord> accuracy;
    std::vector<std::pair<double, double>> errors;  // (cm, deg) per step

    double mean_position_error_cm() const;
    // Overall percentages across the run; nullopt when nothing was evaluable.
    std::optional<double> raw_accuracy() const;
    std::optional<double> simple_accuracy() const;
    std::optional<double> object_accuracy() const;
    // Per-step accuracy series (steps with no evaluable entries skipped).
    std::vector<double> accuracy_series(int AccuracyRecord::*correct,
                                        int AccuracyRecord::*total) const;
};

// Per-step recognition for one scan: detected objects with class simplices
// plus per-beam recognition, using ground truth through the configured
// confusion recognizer (or the rule table).
RecognitionFrame build_recognition_frame(const Scan& scan,
                                         const std::vector<SpatialTruth>& spatial_truth,
                                         const ScenarioConfig& cfg, const RuleTable& rules,
                                         const ConfusionRecognizer& recog, Rng& rng,
                                         std::vector<LabelId>* object_truth = nullptr);

ScenarioTruth simulate_scenario_from_config(const SemanticGridMap& map,
                                            const ScenarioConfig& cfg);

// One localization run against a simulated truth log. The map must already
// carry distance fields (build_all_distance_fields).
RunResult run_localization(const SemanticGridMap& map, const ScenarioTruth& truth,
                           const ScenarioConfig& cfg, LikelihoodMode mode, uint64_t seed);

// --- file I/O -------------------------------------------------------------

void write_truth(const ScenarioTruth& truth, const std::string& dir);
ScenarioTruth load_truth(const std::string& dir);

void write_run(const RunResult& run, const std::string& dir);

struct LoadedRun {
    std::vector<StepRecord> steps;
    std::vector<ObjectRecord> objects;
    std::vector<AccuracyRecord> accuracy;
};
LoadedRun load_run(const std::string& dir);

// One table row per (method, seed) in the shape of the comparison table.
struct TableRow {
    std::string method;
    ErrorStats err;
    std::optional<RecognitionStats> er;
};

TableRow evaluate_run(const RunResult& run);
TableRow evaluate_loaded_run(const std::string& method, const LoadedRun& run,
                             const ScenarioTruth& truth);
void write_table(const std::vector<TableRow>& rows, const std::string& path);

// Aggregate row (mean of each column) appended per method by cmd_sweep.
TableRow aggregate_rows(const std::string& method, const std::vector<TableRow>& rows);

}  // namespace semloc
