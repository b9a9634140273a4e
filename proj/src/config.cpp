#include "semloc/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace semloc {

using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open file: " + path);
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key))
            throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key))
        return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

Point2D parse_point(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError(where + " must be [x, y]");
    return Point2D{j[0].get<double>(), j[1].get<double>()};
}

Pose2D parse_pose(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(where + " must be [x, y, theta]");
    return Pose2D(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

ConfusionRecognizer RecognizerConfig::build(int label_count) const {
    ConfusionRecognizer r;
    r.kappa = kappa;
    if (!confusion.empty()) {
        if (static_cast<int>(confusion.size()) != label_count)
            throw ConfigError("recognizer.confusion must be " + std::to_string(label_count) +
                              "x" + std::to_string(label_count) + " for this map");
        r.confusion = confusion;
    } else {
        r = ConfusionRecognizer::diagonal(label_count, diagonal, kappa);
    }
    try {
        r.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return r;
}

RuleTable ScenarioConfig::rule_table(const ClassTable& classes) const {
    RuleTable t;
    if (named_rules.empty()) {
        t = RuleTable::defaults(classes);
    } else {
        for (const auto& named : named_rules) {
            ClassificationRule r;
            r.kind = named.kind;
            r.rate_min = named.rate_min;
            r.rate_max = named.rate_max;
            std::vector<double> p(classes.size(), 0.0);
            for (const auto& [name, prob] : named.probs) {
                const auto id = classes.find(name);
                if (!id)
                    throw ConfigError("rule label '" + name + "' not in the map's class table");
                p[*id] += prob;
            }
            r.probs = ClassSimplex(std::move(p));
            t.rules.push_back(std::move(r));
        }
    }
    try {
        t.validate(classes.size());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return t;
}

namespace {

void parse_rule_list(const json& arr, ObjectKind kind, const std::string& where,
                     std::vector<NamedRule>& out) {
    if (!arr.is_array())
        throw ConfigError(where + " must be an array");
    for (const auto& entry : arr) {
        if (!entry.is_array() || entry.size() != 3 || !entry[2].is_object())
            throw ConfigError(where + " entries must be [rate_min, rate_max, {label: prob}]");
        NamedRule r;
        r.kind = kind;
        r.rate_min = entry[0].get<double>();
        r.rate_max = entry[1].get<double>();
        for (const auto& [name, prob] : entry[2].items())
            r.probs.emplace_back(name, prob.get<double>());
        out.push_back(std::move(r));
    }
}

}  // namespace

ScenarioConfig load_scenario_config(const std::string& path) {
    const json root = load_json(path);
    if (!root.is_object())
        throw ConfigError(path + ": top level must be an object");
    check_keys(root, "scenario", {"map", "sim", "model", "detector", "recognizer", "rules",
                                  "mode", "particles", "init_spread", "seeds", "out_dir",
                                  "d_max"});

    ScenarioConfig cfg;
    if (!root.contains("map"))
        throw ConfigError(path + ": missing 'map'");
    const auto dir = std::filesystem::path(path).parent_path();
    cfg.map_path = (dir / root.at("map").get<std::string>()).string();
    if (!std::filesystem::exists(cfg.map_path))
        throw ConfigError("map file does not exist: " + cfg.map_path);

    if (root.contains("sim")) {
        const json& sim = root.at("sim");
        check_keys(sim, "sim",
                   {"waypoints", "speed", "dt", "turn_rate", "noise", "scan", "spatial_truth"});
        if (sim.contains("waypoints"))
            for (const auto& wp : sim.at("waypoints"))
                cfg.sim.waypoints.push_back(parse_point(wp, "sim.waypoints entry"));
        cfg.sim.speed = get_or(sim, "speed", cfg.sim.speed);
        cfg.sim.dt = get_or(sim, "dt", cfg.sim.dt);
        cfg.sim.turn_rate = get_or(sim, "turn_rate", cfg.sim.turn_rate);
        if (sim.contains("noise")) {
            const json& n = sim.at("noise");
            check_keys(n, "sim.noise", {"vv", "vw", "ww"});
            cfg.sim.noise.vv = get_or(n, "vv", 0.0);
            cfg.sim.noise.vw = get_or(n, "vw", 0.0);
            cfg.sim.noise.ww = get_or(n, "ww", 0.0);
        }
        if (sim.contains("scan")) {
            const json& s = sim.at("scan");
            check_keys(s, "sim.scan", {"beams", "fov_deg", "r_max", "offset"});
            cfg.sim.scan.beam_count = get_or(s, "beams", cfg.sim.scan.beam_count);
            const double fov = get_or(s, "fov_deg", 270.0) * M_PI / 180.0;
            cfg.sim.scan.angle_min = -fov / 2.0;
            cfg.sim.scan.angle_increment =
                (cfg.sim.scan.beam_count > 1) ? fov / (cfg.sim.scan.beam_count - 1) : 0.0;
            cfg.sim.scan.r_max = get_or(s, "r_max", cfg.sim.scan.r_max);
            if (s.contains("offset"))
                cfg.sim.scan.sensor_offset = parse_pose(s.at("offset"), "sim.scan.offset");
        }
        if (sim.contains("spatial_truth")) {
            for (const auto& st : sim.at("spatial_truth")) {
                if (!st.is_array() || st.size() != 5)
                    throw ConfigError("sim.spatial_truth entries must be [x1,y1,x2,y2,label]");
                SpatialTruth truth;
                truth.p1 = Point2D{st[0].get<double>(), st[1].get<double>()};
                truth.p2 = Point2D{st[2].get<double>(), st[3].get<double>()};
                truth.label = static_cast<LabelId>(st[4].get<int>());
                cfg.sim.spatial_truth.push_back(truth);
            }
        }
    }

    if (root.contains("model")) {
        const json& m = root.at("model");
        check_keys(m, "model", {"a1", "a2", "sigma_d", "z_hit", "z_max", "z_rand", "sigma",
                                "lambda", "r_max", "beam_stride", "unknown_labels"});
        cfg.model.a1 = get_or(m, "a1", cfg.model.a1);
        cfg.model.a2 = get_or(m, "a2", cfg.model.a2);
        cfg.model.sigma_d = get_or(m, "sigma_d", cfg.model.sigma_d);
        cfg.model.z_hit = get_or(m, "z_hit", cfg.model.z_hit);
        cfg.model.z_max = get_or(m, "z_max", cfg.model.z_max);
        cfg.model.z_rand = get_or(m, "z_rand", cfg.model.z_rand);
        cfg.model.sigma = get_or(m, "sigma", cfg.model.sigma);
        cfg.model.lambda = get_or(m, "lambda", cfg.model.lambda);
        cfg.model.r_max = get_or(m, "r_max", cfg.model.r_max);
        cfg.model.beam_stride = get_or(m, "beam_stride", cfg.model.beam_stride);
        if (m.contains("unknown_labels")) {
            cfg.model.unknown_labels.clear();
            for (const auto& v : m.at("unknown_labels"))
                cfg.model.unknown_labels.push_back(static_cast<LabelId>(v.get<int>()));
        }
    } else {
        cfg.model.r_max = cfg.sim.scan.r_max;
    }

    if (root.contains("detector")) {
        const json& d = root.at("detector");
        check_keys(d, "detector",
                   {"raster_resolution", "theta_bins", "vote_threshold", "range_gate",
                    "min_length", "max_gap", "max_lines", "incline_bins", "incline_threshold",
                    "spatial_min_length", "spatial_max_length", "range_jump", "pass_margin",
                    "coincide_gate", "merge_distance"});
        auto& p = cfg.detector;
        p.raster_resolution = get_or(d, "raster_resolution", p.raster_resolution);
        p.theta_bins = get_or(d, "theta_bins", p.theta_bins);
        p.vote_threshold = get_or(d, "vote_threshold", p.vote_threshold);
        p.range_gate = get_or(d, "range_gate", p.range_gate);
        p.min_length = get_or(d, "min_length", p.min_length);
        p.max_gap = get_or(d, "max_gap", p.max_gap);
        p.max_lines = get_or(d, "max_lines", p.max_lines);
        p.incline_bins = get_or(d, "incline_bins", p.incline_bins);
        p.incline_threshold = get_or(d, "incline_threshold", p.incline_threshold);
        p.spatial_min_length = get_or(d, "spatial_min_length", p.spatial_min_length);
        p.spatial_max_length = get_or(d, "spatial_max_length", p.spatial_max_length);
        p.range_jump = get_or(d, "range_jump", p.range_jump);
        p.pass_margin = get_or(d, "pass_margin", p.pass_margin);
        p.coincide_gate = get_or(d, "coincide_gate", p.coincide_gate);
        p.merge_distance = get_or(d, "merge_distance", p.merge_distance);
    }

    if (root.contains("recognizer")) {
        const json& r = root.at("recognizer");
        check_keys(r, "recognizer",
                   {"source", "kappa", "confusion", "spatial_match_distance"});
        const std::string source = get_or<std::string>(r, "source", "confusion");
        if (source == "confusion")
            cfg.recognizer.source = RecognizerSource::confusion;
        else if (source == "rules")
            cfg.recognizer.source = RecognizerSource::rules;
        else
            throw ConfigError("recognizer.source must be 'confusion' or 'rules'");
        cfg.recognizer.kappa = get_or(r, "kappa", cfg.recognizer.kappa);
        cfg.recognizer.spatial_match_distance =
            get_or(r, "spatial_match_distance", cfg.recognizer.spatial_match_distance);
        if (r.contains("confusion")) {
            const json& c = r.at("confusion");
            if (c.is_number()) {
                cfg.recognizer.diagonal = c.get<double>();
            } else if (c.is_array()) {
                for (const auto& row : c)
                    cfg.recognizer.confusion.push_back(row.get<std::vector<double>>());
            } else {
                throw ConfigError("recognizer.confusion must be a number or a matrix");
            }
        }
    }

    if (root.contains("rules")) {
        const json& r = root.at("rules");
        check_keys(r, "rules", {"physical", "spatial"});
        if (r.contains("physical"))
            parse_rule_list(r.at("physical"), ObjectKind::physical_line, "rules.physical",
                            cfg.named_rules);
        if (r.contains("spatial"))
            parse_rule_list(r.at("spatial"), ObjectKind::spatial_line, "rules.spatial",
                            cfg.named_rules);
    }

    cfg.mode = mode_from_name(get_or<std::string>(root, "mode", "slamer"));
    cfg.particles = get_or(root, "particles", cfg.particles);
    if (root.contains("init_spread")) {
        const json& s = root.at("init_spread");
        if (!s.is_array() || s.size() != 3)
            throw ConfigError("init_spread must be [sx, sy, stheta]");
        cfg.spread_x = s[0].get<double>();
        cfg.spread_y = s[1].get<double>();
        cfg.spread_theta = s[2].get<double>();
    }
    if (root.contains("seeds")) {
        cfg.seeds.clear();
        for (const auto& s : root.at("seeds"))
            cfg.seeds.push_back(s.get<uint64_t>());
        if (cfg.seeds.empty())
            throw ConfigError("seeds must not be empty");
    }
    cfg.out_dir = get_or<std::string>(root, "out_dir", cfg.out_dir);
    cfg.d_max = get_or(root, "d_max", cfg.d_max);

    try {
        cfg.model.validate();
        cfg.sim.noise.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Map authoring
// ---------------------------------------------------------------------------

SemanticGridMap build_map_from_spec(const std::string& spec_path) {
    const json root = load_json(spec_path);
    check_keys(root, "map spec",
               {"width", "height", "resolution", "origin", "classes", "shapes"});
    for (const char* key : {"width", "height", "resolution"})
        if (!root.contains(key))
            throw ConfigError(spec_path + ": missing '" + std::string(key) + "'");

    const int width = root.at("width").get<int>();
    const int height = root.at("height").get<int>();
    const double resolution = root.at("resolution").get<double>();
    Pose2D origin;
    if (root.contains("origin"))
        origin = parse_pose(root.at("origin"), "origin");

    std::vector<std::string> extra;
    if (root.contains("classes"))
        for (const auto& c : root.at("classes"))
            extra.push_back(c.get<std::string>());
    ClassTable classes = ClassTable::with_labels(extra);

    SemanticGridMap map(width, height, resolution, origin, classes);
    if (!root.contains("shapes"))
        return map;

    auto label_of = [&](const json& shape) {
        const std::string name = shape.at("label").get<std::string>();
        const auto id = classes.find(name);
        if (!id)
            throw ConfigError("shape label '" + name + "' not in class table");
        return *id;
    };

    for (const auto& shape : root.at("shapes")) {
        check_keys(shape, "shape", {"type", "label", "physical", "min", "max", "from", "to",
                                    "width"});
        const std::string type = shape.at("type").get<std::string>();
        const LabelId label = label_of(shape);
        const bool physical = get_or(shape, "physical", true);
        if (physical && label == kLabelFree)
            throw ConfigError("physical shapes cannot carry the free label");

        auto paint = [&](int cx, int cy) {
            if (!map.in_bounds(cx, cy))
                return;
            if (physical) {
                const LabelId existing = map.physical(cx, cy);
                if (existing != kCellFree && existing != label)
                    throw ConfigError("contradictory physical labels '" +
                                      classes.name(existing) + "' and '" + classes.name(label) +
                                      "' on cell (" + std::to_string(cx) + "," +
                                      std::to_string(cy) + ")");
                map.set_cell(cx, cy, label, label);
            } else if (!map.occupied(cx, cy)) {
                map.set_cell(cx, cy, kCellFree, label);
            }
        };

        if (type == "rect") {
            const Point2D lo = parse_point(shape.at("min"), "rect.min");
            const Point2D hi = parse_point(shape.at("max"), "rect.max");
            for (int cy = 0; cy < height; ++cy)
                for (int cx = 0; cx < width; ++cx) {
                    const Point2D c = map.cell_to_world(CellIndex{cx, cy});
                    if (c.x >= lo.x && c.x <= hi.x && c.y >= lo.y && c.y <= hi.y)
                        paint(cx, cy);
                }
        } else if (type == "segment") {
            const Point2D a = parse_point(shape.at("from"), "segment.from");
            const Point2D b = parse_point(shape.at("to"), "segment.to");
            const double half_width = get_or(shape, "width", resolution) / 2.0;
            const double dx = b.x - a.x, dy = b.y - a.y;
            const double len2 = dx * dx + dy * dy;
            for (int cy = 0; cy < height; ++cy)
                for (int cx = 0; cx < width; ++cx) {
                    const Point2D c = map.cell_to_world(CellIndex{cx, cy});
                    double t = 0.0;
                    if (len2 > 0.0)
                        t = std::clamp(((c.x - a.x) * dx + (c.y - a.y) * dy) / len2, 0.0, 1.0);
                    const double dist = std::hypot(c.x - (a.x + t * dx), c.y - (a.y + t * dy));
                    if (dist <= half_width)
                        paint(cx, cy);
                }
        } else {
            throw ConfigError("unknown shape type '" + type + "' (rect|segment)");
        }
    }
    return map;
}

}  // namespace semloc
