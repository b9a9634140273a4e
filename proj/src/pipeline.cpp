#include "semloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace semloc {

namespace fs = std::filesystem;
using nlohmann::json;

double RunResult::mean_position_error_cm() const {
    double sum = 0.0;
    for (const auto& [pos, ang] : errors)
        sum += pos;
    return errors.empty() ? 0.0 : sum / errors.size();
}

namespace {

std::optional<double> ratio_percent(long correct, long total) {
    if (total == 0)
        return std::nullopt;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

std::optional<double> RunResult::raw_accuracy() const {
    long c = 0, t = 0;
    for (const auto& a : accuracy) {
        c += a.raw_correct;
        t += a.raw_total;
    }
    return ratio_percent(c, t);
}

std::optional<double> RunResult::simple_accuracy() const {
    long c = 0, t = 0;
    for (const auto& a : accuracy) {
        c += a.simple_correct;
        t += a.simple_total;
    }
    return ratio_percent(c, t);
}

std::optional<double> RunResult::object_accuracy() const {
    long c = 0, t = 0;
    for (const auto& a : accuracy) {
        c += a.object_correct;
        t += a.object_total;
    }
    return ratio_percent(c, t);
}

std::vector<double> RunResult::accuracy_series(int AccuracyRecord::*correct,
                                               int AccuracyRecord::*total) const {
    std::vector<double> series;
    for (const auto& a : accuracy)
        if (a.*total > 0)
            series.push_back(100.0 * (a.*correct) / (a.*total));
    return series;
}

// ---------------------------------------------------------------------------
// Recognition frame assembly
// ---------------------------------------------------------------------------

namespace {

LabelId majority_truth(const Scan& scan, const std::vector<int>& beams) {
    std::map<LabelId, int> counts;
    for (int k : beams) {
        const LabelId l = scan.truth_labels.empty() ? kLabelFree : scan.truth_labels[k];
        if (l != kLabelFree)
            counts[l]++;
    }
    LabelId best = -1;
    int best_count = 0;
    for (const auto& [label, count] : counts)
        if (count > best_count) {
            best_count = count;
            best = label;
        }
    return best;
}

LabelId spatial_truth_label(const ObjectHypothesis& obj,
                            const std::vector<SpatialTruth>& spatial_truth, const Pose2D& frame,
                            double gate) {
    // object endpoints live in the robot frame; truth segments in world
    const Point2D mid_world = transform_point(frame, obj.midpoint());
    LabelId best = -1;
    double best_dist = gate;
    for (const auto& truth : spatial_truth) {
        const Point2D truth_mid{(truth.p1.x + truth.p2.x) / 2.0,
                                (truth.p1.y + truth.p2.y) / 2.0};
        const double d = distance(mid_world, truth_mid);
        if (d < best_dist) {
            best_dist = d;
            best = truth.label;
        }
    }
    return best;
}

}  // namespace

RecognitionFrame build_recognition_frame(const Scan& scan,
                                         const std::vector<SpatialTruth>& spatial_truth,
                                         const ScenarioConfig& cfg, const RuleTable& rules,
                                         const ConfusionRecognizer& recog, Rng& rng,
                                         std::vector<LabelId>* object_truth) {
    RecognitionFrame frame;
    const bool use_confusion = cfg.recognizer.source == RecognizerSource::confusion;

    // Truth-pose-independent detection happens in the robot frame. The truth
    // pose only enters through spatial-object truth matching below, mirroring
    // how a real recognizer would be scored offline.
    frame.objects = detect_lines(scan, cfg.detector, rng);
    const auto spatial = detect_spatial_lines(scan, frame.objects, cfg.detector);
    frame.objects.insert(frame.objects.end(), spatial.begin(), spatial.end());

    if (object_truth)
        object_truth->assign(frame.objects.size(), -1);

    for (size_t i = 0; i < frame.objects.size(); ++i) {
        auto& obj = frame.objects[i];
        LabelId truth = -1;
        if (obj.kind == ObjectKind::physical_line) {
            truth = majority_truth(scan, obj.member_beams);
        } else {
            // spatial truth matching needs the true robot pose; the caller
            // passes segments already expressed in the robot frame via
            // spatial_truth when no pose is available.
            truth = spatial_truth_label(obj, spatial_truth, Pose2D(), 1e18);
        }
        if (object_truth)
            (*object_truth)[i] = truth;
        if (use_confusion) {
            const LabelId draw_from = truth >= 0 ? truth : kLabelOthers;
            obj.probs = simulate_recognition(draw_from, recog, rng);
        } else {
            obj.probs = classify_by_point_rate(obj, rules);
        }
    }

    if (use_confusion && !scan.truth_labels.empty()) {
        frame.beam_labels.assign(scan.beam_count(), -1);
        frame.beam_probs.resize(scan.beam_count());
        for (int k = 0; k < scan.beam_count(); ++k) {
            if (!scan.is_hit(k) || scan.truth_labels[k] == kLabelFree)
                continue;
            frame.beam_probs[k] = simulate_recognition(scan.truth_labels[k], recog, rng);
            frame.beam_labels[k] = frame.beam_probs[k].argmax();
        }
    }
    return frame;
}

ScenarioTruth simulate_scenario_from_config(const SemanticGridMap& map,
                                            const ScenarioConfig& cfg) {
    if (cfg.sim.waypoints.size() < 2)
        throw ConfigError("sim.waypoints must contain at least two points");
    ScenarioTruth truth = simulate_scenario(map, cfg.sim.waypoints, cfg.sim.speed, cfg.sim.dt,
                                            cfg.sim.scan, cfg.sim.turn_rate);
    truth.spatial_objects = cfg.sim.spatial_truth;
    return truth;
}

// ---------------------------------------------------------------------------
// Localization run
// ---------------------------------------------------------------------------

namespace {

constexpr uint64_t kOdomStream = 0x9e3779b97f4a7c15ull;
constexpr uint64_t kRecogStream = 0xbf58476d1ce4e5b9ull;

// Spatial truth segments expressed in the robot frame of the given pose.
std::vector<SpatialTruth> spatial_truth_in_frame(const std::vector<SpatialTruth>& world,
                                                 const Pose2D& pose) {
    std::vector<SpatialTruth> local;
    local.reserve(world.size());
    const double c = std::cos(pose.theta), s = std::sin(pose.theta);
    for (const auto& t : world) {
        SpatialTruth out = t;
        const double dx1 = t.p1.x - pose.x, dy1 = t.p1.y - pose.y;
        const double dx2 = t.p2.x - pose.x, dy2 = t.p2.y - pose.y;
        out.p1 = Point2D{c * dx1 + s * dy1, -s * dx1 + c * dy1};
        out.p2 = Point2D{c * dx2 + s * dy2, -s * dx2 + c * dy2};
        local.push_back(out);
    }
    return local;
}

}  // namespace

RunResult run_localization(const SemanticGridMap& map, const ScenarioTruth& truth,
                           const ScenarioConfig& cfg, LikelihoodMode mode, uint64_t seed) {
    if (truth.controls.empty())
        throw ConfigError("scenario truth has no steps");
    if (mode == LikelihoodMode::slfm && cfg.recognizer.source != RecognizerSource::confusion)
        throw ConfigError("slfm mode needs per-beam recognition (recognizer.source=confusion)");

    const ClassTable& classes = map.classes();
    const RuleTable rules = cfg.rule_table(classes);
    const ConfusionRecognizer recog = cfg.recognizer.build(classes.size());

    Rng odom_rng(seed ^ kOdomStream);
    const auto noisy_controls = corrupt_odometry(truth.controls, cfg.sim.noise, odom_rng);

    FilterConfig fc;
    fc.particle_count = cfg.particles;
    fc.hyper = cfg.model;
    fc.mode = mode;
    fc.motion_noise = cfg.sim.noise;
    fc.spread_x = cfg.spread_x;
    fc.spread_y = cfg.spread_y;
    fc.spread_theta = cfg.spread_theta;
    ParticleFilter filter(map, fc, truth.poses[0], seed);

    Rng recog_rng(seed ^ kRecogStream);
    const bool recognition_enabled = mode != LikelihoodMode::lfm;

    RunResult run;
    run.mode = mode;
    run.seed = seed;

    for (int t = 0; t < truth.step_count(); ++t) {
        const Scan& scan = truth.scans[t];
        const Pose2D& true_pose = truth.poses[t + 1];

        RecognitionFrame frame;
        std::vector<LabelId> object_truth;
        if (recognition_enabled) {
            const auto local_truth = spatial_truth_in_frame(truth.spatial_objects, true_pose);
            frame = build_recognition_frame(scan, local_truth, cfg, rules, recog, recog_rng,
                                            &object_truth);
            // accuracy scoring uses the gated spatial match; the recognizer
            // above conditioned on the nearest truth regardless of distance
            for (size_t i = 0; i < frame.objects.size(); ++i) {
                if (frame.objects[i].kind != ObjectKind::spatial_line)
                    continue;
                object_truth[i] =
                    spatial_truth_label(frame.objects[i], local_truth, Pose2D(),
                                        cfg.recognizer.spatial_match_distance);
            }
        }

        const StepResult res = filter.step(noisy_controls[t], scan, frame);

        StepRecord step;
        step.t = t + 1;
        step.estimate = res.estimate;
        step.ess = res.ess;
        step.resampled = res.resampled;
        run.steps.push_back(step);
        run.errors.push_back(pose_error(res.estimate, true_pose));

        AccuracyRecord acc;
        acc.t = t + 1;
        if (recognition_enabled) {
            // raw recognizer accuracy, per beam
            if (!frame.beam_probs.empty()) {
                for (int k = 0; k < scan.beam_count(); ++k) {
                    if (frame.beam_labels.empty() || frame.beam_labels[k] < 0)
                        continue;
                    acc.raw_total++;
                    if (frame.beam_labels[k] == scan.truth_labels[k])
                        acc.raw_correct++;
                }
            }
            // simple map-based accuracy at the estimated pose, per beam
            if (!scan.truth_labels.empty()) {
                const auto simple =
                    simple_map_recognition(map, res.estimate, scan, cfg.model);
                for (int k = 0; k < scan.beam_count(); ++k) {
                    if (scan.truth_labels[k] == kLabelFree)
                        continue;
                    acc.simple_total++;
                    if (simple[k] == scan.truth_labels[k])
                        acc.simple_correct++;
                }
            }
            // fused per-object accuracy
            for (const auto& post : res.posteriors) {
                const LabelId truth_label = object_truth[post.object_index];
                if (truth_label < 0 || truth_label == kLabelFree)
                    continue;
                acc.object_total++;
                if (post.map_label == truth_label)
                    acc.object_correct++;
            }
            // object records at the max-likelihood pose
            const Pose2D ml_pose = filter.particles()[filter.max_likelihood_index()].pose;
            for (const auto& post : res.posteriors) {
                const auto& obj = frame.objects[post.object_index];
                ObjectRecord rec;
                rec.t = t + 1;
                rec.k = post.object_index;
                rec.kind = obj.kind;
                rec.map_label = post.map_label;
                rec.p_top = post.p[post.map_label];
                rec.p1 = transform_point(ml_pose, obj.p1);
                rec.p2 = transform_point(ml_pose, obj.p2);
                rec.truth_label = object_truth[post.object_index];
                rec.raw_label = obj.probs.argmax();
                run.objects.push_back(rec);
            }
        }
        run.accuracy.push_back(acc);
    }
    return run;
}

// ---------------------------------------------------------------------------
// Truth and run files
// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

std::string scan_file(const std::string& dir, int t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%06d.scan", t);
    return (fs::path(dir) / "scans" / buf).string();
}

}  // namespace

void write_truth(const ScenarioTruth& truth, const std::string& dir) {
    ensure_dir(dir);
    ensure_dir((fs::path(dir) / "scans").string());

    {
        std::ofstream out(fs::path(dir) / "truth.csv");
        out << "t,x_true,y_true,theta_true,v,w\n";
        out << "0," << num(truth.poses[0].x) << "," << num(truth.poses[0].y) << ","
            << num(truth.poses[0].theta) << ",0,0\n";
        for (int t = 0; t < truth.step_count(); ++t) {
            const Pose2D& p = truth.poses[t + 1];
            out << (t + 1) << "," << num(p.x) << "," << num(p.y) << "," << num(p.theta) << ","
                << num(truth.controls[t].v) << "," << num(truth.controls[t].w) << "\n";
        }
    }
    for (int t = 0; t < truth.step_count(); ++t) {
        std::ofstream out(scan_file(dir, t + 1));
        const Scan& scan = truth.scans[t];
        for (int k = 0; k < scan.beam_count(); ++k) {
            const LabelId label =
                scan.truth_labels.empty() ? kLabelFree : scan.truth_labels[k];
            out << num(scan.params.angle(k)) << " " << num(scan.ranges[k]) << " " << label
                << "\n";
        }
    }
    {
        std::ofstream out(fs::path(dir) / "spatial_truth.csv");
        out << "x1,y1,x2,y2,label\n";
        for (const auto& s : truth.spatial_objects)
            out << num(s.p1.x) << "," << num(s.p1.y) << "," << num(s.p2.x) << "," << num(s.p2.y)
                << "," << s.label << "\n";
    }
    {
        json meta;
        const ScanParams& sp = truth.scans.empty() ? ScanParams{} : truth.scans[0].params;
        meta["dt"] = truth.controls.empty() ? 0.0 : truth.controls[0].dt;
        meta["scan"] = {{"beams", sp.beam_count},
                        {"angle_min", sp.angle_min},
                        {"angle_increment", sp.angle_increment},
                        {"r_max", sp.r_max},
                        {"offset", {sp.sensor_offset.x, sp.sensor_offset.y,
                                    sp.sensor_offset.theta}}};
        std::ofstream out(fs::path(dir) / "meta.json");
        out << meta.dump(2) << "\n";
    }
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {  // header
            first = false;
            continue;
        }
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

ScenarioTruth load_truth(const std::string& dir) {
    ScenarioTruth truth;

    ScanParams sp;
    double dt = 0.1;
    {
        std::ifstream in(fs::path(dir) / "meta.json");
        if (!in)
            throw std::runtime_error("missing meta.json in " + dir);
        json meta = json::parse(in);
        dt = meta.at("dt").get<double>();
        const json& s = meta.at("scan");
        sp.beam_count = s.at("beams").get<int>();
        sp.angle_min = s.at("angle_min").get<double>();
        sp.angle_increment = s.at("angle_increment").get<double>();
        sp.r_max = s.at("r_max").get<double>();
        sp.sensor_offset = Pose2D(s.at("offset")[0].get<double>(),
                                  s.at("offset")[1].get<double>(),
                                  s.at("offset")[2].get<double>());
    }

    for (const auto& row : read_csv((fs::path(dir) / "truth.csv").string())) {
        const int t = std::stoi(row.at(0));
        const Pose2D pose(std::stod(row.at(1)), std::stod(row.at(2)), std::stod(row.at(3)));
        truth.poses.push_back(pose);
        if (t > 0)
            truth.controls.push_back(
                ControlInput{std::stod(row.at(4)), std::stod(row.at(5)), dt});
    }

    for (int t = 1; t <= static_cast<int>(truth.controls.size()); ++t) {
        std::ifstream in(scan_file(dir, t));
        if (!in)
            throw std::runtime_error("missing scan file for step " + std::to_string(t));
        Scan scan;
        scan.params = sp;
        scan.ranges.reserve(sp.beam_count);
        scan.truth_labels.reserve(sp.beam_count);
        double angle, range;
        int label;
        while (in >> angle >> range >> label) {
            scan.ranges.push_back(range);
            scan.truth_labels.push_back(static_cast<LabelId>(label));
        }
        if (static_cast<int>(scan.ranges.size()) != sp.beam_count)
            throw std::runtime_error("scan file for step " + std::to_string(t) +
                                     " has wrong beam count");
        truth.scans.push_back(std::move(scan));
    }

    for (const auto& row : read_csv((fs::path(dir) / "spatial_truth.csv").string())) {
        SpatialTruth s;
        s.p1 = Point2D{std::stod(row.at(0)), std::stod(row.at(1))};
        s.p2 = Point2D{std::stod(row.at(2)), std::stod(row.at(3))};
        s.label = static_cast<LabelId>(std::stoi(row.at(4)));
        truth.spatial_objects.push_back(s);
    }
    return truth;
}

void write_run(const RunResult& run, const std::string& dir) {
    ensure_dir(dir);
    {
        std::ofstream out(fs::path(dir) / "estimates.csv");
        out << "t,x_est,y_est,theta_est,ess,resampled\n";
        for (const auto& s : run.steps)
            out << s.t << "," << num(s.estimate.x) << "," << num(s.estimate.y) << ","
                << num(s.estimate.theta) << "," << num(s.ess) << "," << (s.resampled ? 1 : 0)
                << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "objects.csv");
        out << "t,k,kind,map_label,p_top,x1,y1,x2,y2\n";
        for (const auto& o : run.objects)
            out << o.t << "," << o.k << "," << object_kind_name(o.kind) << "," << o.map_label
                << "," << num(o.p_top) << "," << num(o.p1.x) << "," << num(o.p1.y) << ","
                << num(o.p2.x) << "," << num(o.p2.y) << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "recognition.csv");
        out << "t,k,truth_label,raw_label,map_label\n";
        for (const auto& o : run.objects)
            out << o.t << "," << o.k << "," << o.truth_label << "," << o.raw_label << ","
                << o.map_label << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "accuracy.csv");
        out << "t,raw_correct,raw_total,simple_correct,simple_total,object_correct,object_total"
            << "\n";
        for (const auto& a : run.accuracy)
            out << a.t << "," << a.raw_correct << "," << a.raw_total << "," << a.simple_correct
                << "," << a.simple_total << "," << a.object_correct << "," << a.object_total
                << "\n";
    }
}

LoadedRun load_run(const std::string& dir) {
    LoadedRun run;
    for (const auto& row : read_csv((fs::path(dir) / "estimates.csv").string())) {
        StepRecord s;
        s.t = std::stoi(row.at(0));
        s.estimate = Pose2D(std::stod(row.at(1)), std::stod(row.at(2)), std::stod(row.at(3)));
        s.ess = std::stod(row.at(4));
        s.resampled = row.at(5) == "1";
        run.steps.push_back(s);
    }
    for (const auto& row : read_csv((fs::path(dir) / "objects.csv").string())) {
        ObjectRecord o;
        o.t = std::stoi(row.at(0));
        o.k = std::stoi(row.at(1));
        o.kind = row.at(2) == "spatial" ? ObjectKind::spatial_line : ObjectKind::physical_line;
        o.map_label = static_cast<LabelId>(std::stoi(row.at(3)));
        o.p_top = std::stod(row.at(4));
        o.p1 = Point2D{std::stod(row.at(5)), std::stod(row.at(6))};
        o.p2 = Point2D{std::stod(row.at(7)), std::stod(row.at(8))};
        run.objects.push_back(o);
    }
    for (const auto& row : read_csv((fs::path(dir) / "accuracy.csv").string())) {
        AccuracyRecord a;
        a.t = std::stoi(row.at(0));
        a.raw_correct = std::stoi(row.at(1));
        a.raw_total = std::stoi(row.at(2));
        a.simple_correct = std::stoi(row.at(3));
        a.simple_total = std::stoi(row.at(4));
        a.object_correct = std::stoi(row.at(5));
        a.object_total = std::stoi(row.at(6));
        run.accuracy.push_back(a);
    }
    return run;
}

// ---------------------------------------------------------------------------
// Evaluation table
// ---------------------------------------------------------------------------

namespace {

std::optional<RecognitionStats> er_stats_for(const RunResult& run) {
    std::vector<double> series;
    switch (run.mode) {
        case LikelihoodMode::lfm:
            return std::nullopt;  // recognition disabled
        case LikelihoodMode::slfm:
            series = run.accuracy_series(&AccuracyRecord::simple_correct,
                                         &AccuracyRecord::simple_total);
            break;
        case LikelihoodMode::slamer:
            series = run.accuracy_series(&AccuracyRecord::object_correct,
                                         &AccuracyRecord::object_total);
            break;
    }
    if (series.empty())
        return std::nullopt;
    return aggregate_accuracy(series);
}

}  // namespace

TableRow evaluate_run(const RunResult& run) {
    TableRow row;
    row.method = mode_name(run.mode);
    row.err = aggregate(run.errors);
    row.er = er_stats_for(run);
    return row;
}

TableRow evaluate_loaded_run(const std::string& method, const LoadedRun& run,
                             const ScenarioTruth& truth) {
    TableRow row;
    row.method = method;
    std::vector<std::pair<double, double>> errors;
    for (const auto& s : run.steps) {
        if (s.t < 1 || s.t > truth.step_count())
            throw std::runtime_error("run step " + std::to_string(s.t) +
                                     " outside the truth log");
        errors.push_back(pose_error(s.estimate, truth.poses[s.t]));
    }
    row.err = aggregate(errors);

    RunResult shim;
    shim.mode = method == "slamer"  ? LikelihoodMode::slamer
                : method == "slfm" ? LikelihoodMode::slfm
                                   : LikelihoodMode::lfm;
    shim.accuracy = run.accuracy;
    row.er = er_stats_for(shim);
    return row;
}

void write_table(const std::vector<TableRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write table: " + path);
    out << "method,pos_ave_cm,pos_std_cm,pos_max_cm,ang_ave_deg,ang_std_deg,ang_max_deg,"
        << "er_ave_pct,er_std_pct,er_min_pct,er_max_pct\n";
    for (const auto& r : rows) {
        out << r.method << "," << num(r.err.pos_ave_cm) << "," << num(r.err.pos_std_cm) << ","
            << num(r.err.pos_max_cm) << "," << num(r.err.ang_ave_deg) << ","
            << num(r.err.ang_std_deg) << "," << num(r.err.ang_max_deg);
        if (r.er)
            out << "," << num(r.er->ave) << "," << num(r.er->std_dev) << "," << num(r.er->min)
                << "," << num(r.er->max);
        else
            out << ",nan,nan,nan,nan";
        out << "\n";
    }
}

TableRow aggregate_rows(const std::string& method, const std::vector<TableRow>& rows) {
    TableRow agg;
    agg.method = method + "/mean";
    RecognitionStats er{};
    int er_count = 0;
    for (const auto& r : rows) {
        agg.err.pos_ave_cm += r.err.pos_ave_cm;
        agg.err.pos_std_cm += r.err.pos_std_cm;
        agg.err.pos_max_cm += r.err.pos_max_cm;
        agg.err.ang_ave_deg += r.err.ang_ave_deg;
        agg.err.ang_std_deg += r.err.ang_std_deg;
        agg.err.ang_max_deg += r.err.ang_max_deg;
        if (r.er) {
            er.ave += r.er->ave;
            er.std_dev += r.er->std_dev;
            er.min += r.er->min;
            er.max += r.er->max;
            er_count++;
        }
    }
    const double n = static_cast<double>(rows.size());
    agg.err.pos_ave_cm /= n;
    agg.err.pos_std_cm /= n;
    agg.err.pos_max_cm /= n;
    agg.err.ang_ave_deg /= n;
    agg.err.ang_std_deg /= n;
    agg.err.ang_max_deg /= n;
    if (er_count > 0) {
        er.ave /= er_count;
        er.std_dev /= er_count;
        er.min /= er_count;
        er.max /= er_count;
        agg.er = er;
    }
    return agg;
}

}  // namespace semloc
