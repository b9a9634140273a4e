#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "semloc/config.hpp"
#include "semloc/pipeline.hpp"

using namespace semloc;
namespace fs = std::filesystem;

namespace {

std::string write_file(const std::string& name, const std::string& body) {
    const std::string path = (fs::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << body;
    return path;
}

const char* kMapSpec = R"({
  "width": 160, "height": 80, "resolution": 0.05,
  "classes": ["open_door", "close_door", "open_glass_door", "close_glass_door",
              "no_entry_line", "fence"],
  "shapes": [
    {"type": "rect", "min": [0.0, 0.0], "max": [7.85, 0.1], "label": "others"},
    {"type": "rect", "min": [0.0, 3.9], "max": [7.85, 4.0], "label": "others"},
    {"type": "rect", "min": [0.0, 0.0], "max": [0.1, 4.0], "label": "others"},
    {"type": "rect", "min": [7.9, 0.0], "max": [8.0, 4.0], "label": "fence"},
    {"type": "segment", "from": [3.0, 0.2], "to": [3.0, 3.8], "width": 0.1,
     "label": "no_entry_line", "physical": false}
  ]
})";

std::string scenario_body(const std::string& map_name) {
    return std::string(R"({
  "map": ")") + map_name + R"(",
  "sim": {
    "waypoints": [[1.0, 2.0], [6.5, 2.0]],
    "speed": 0.5, "dt": 0.1,
    "noise": {"vv": 0.0025, "ww": 0.0004},
    "scan": {"beams": 180, "fov_deg": 270, "r_max": 8.0}
  },
  "model": {"a1": 1.2, "a2": 1.0, "r_max": 8.0, "beam_stride": 5,
            "unknown_labels": []},
  "recognizer": {"source": "confusion", "kappa": 2.0, "confusion": 0.8},
  "mode": "slamer",
  "particles": 60,
  "init_spread": [0.05, 0.05, 0.02],
  "seeds": [3],
  "d_max": 6.0
})";
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("map authoring: walls, semantic-only shapes, conflicts") {
    const std::string spec = write_file("semloc_mapspec.json", kMapSpec);
    const SemanticGridMap map = build_map_from_spec(spec);
    CHECK(map.width() == 160);
    CHECK(map.classes().find("no_entry_line").value() == 6);

    // wall band occupied with matching semantics
    const auto wall_cell = map.world_to_cell(Point2D{4.0, 0.05});
    REQUIRE(wall_cell.has_value());
    CHECK(map.occupied(wall_cell->x, wall_cell->y));
    CHECK(map.semantic(wall_cell->x, wall_cell->y) == kLabelOthers);

    // the no-entry line lives only in the semantic layer
    const auto line_cell = map.world_to_cell(Point2D{3.0, 2.0});
    REQUIRE(line_cell.has_value());
    CHECK(!map.occupied(line_cell->x, line_cell->y));
    CHECK(map.semantic(line_cell->x, line_cell->y) == 6);

    // idempotent regeneration is byte identical after save
    const std::string m1 = (fs::temp_directory_path() / "semloc_m1.map").string();
    const std::string m2 = (fs::temp_directory_path() / "semloc_m2.map").string();
    build_map_from_spec(spec).save(m1);
    build_map_from_spec(spec).save(m2);
    std::ifstream a(m1, std::ios::binary), b(m2, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    // contradictory physical labels are rejected
    const std::string bad = write_file("semloc_badspec.json", R"({
      "width": 20, "height": 20, "resolution": 0.1, "classes": ["fence"],
      "shapes": [
        {"type": "rect", "min": [0,0], "max": [1,1], "label": "others"},
        {"type": "rect", "min": [0.5,0.5], "max": [1.5,1.5], "label": "fence"}
      ]
    })");
    CHECK_THROWS_AS(build_map_from_spec(bad), ConfigError);
}

TEST_CASE("scenario config parsing and validation") {
    const std::string spec = write_file("semloc_mapspec.json", kMapSpec);
    const std::string map_path = (fs::temp_directory_path() / "semloc_scn.map").string();
    build_map_from_spec(spec).save(map_path);

    const std::string cfg_path =
        write_file("semloc_scn.json", scenario_body("semloc_scn.map"));
    const ScenarioConfig cfg = load_scenario_config(cfg_path);
    CHECK(cfg.model.a1 == 1.2);
    CHECK(cfg.particles == 60);
    CHECK(cfg.sim.scan.beam_count == 180);
    CHECK(cfg.seeds == std::vector<uint64_t>{3});

    // unknown keys are rejected
    const std::string bad = write_file("semloc_badscn.json",
                                       R"({"map": "semloc_scn.map", "wrong_key": 1})");
    CHECK_THROWS_AS(load_scenario_config(bad), ConfigError);

    // missing map file is a config error
    const std::string missing =
        write_file("semloc_missing.json", R"({"map": "no_such.map"})");
    CHECK_THROWS_AS(load_scenario_config(missing), ConfigError);
}

TEST_CASE("truth log round trips through the file format") {
    const std::string spec = write_file("semloc_mapspec.json", kMapSpec);
    const SemanticGridMap map = build_map_from_spec(spec);
    const std::string cfg_path =
        write_file("semloc_scn2.json", scenario_body("semloc_scn.map"));
    map.save((fs::temp_directory_path() / "semloc_scn.map").string());
    const ScenarioConfig cfg = load_scenario_config(cfg_path);

    const ScenarioTruth truth = simulate_scenario_from_config(map, cfg);
    const std::string dir = (fs::temp_directory_path() / "semloc_truth").string();
    write_truth(truth, dir);
    const ScenarioTruth loaded = load_truth(dir);

    REQUIRE(loaded.step_count() == truth.step_count());
    for (size_t i = 0; i < truth.poses.size(); ++i) {
        CHECK(loaded.poses[i].x == doctest::Approx(truth.poses[i].x).epsilon(1e-9));
        CHECK(loaded.poses[i].theta == doctest::Approx(truth.poses[i].theta).epsilon(1e-9));
    }
    for (int t = 0; t < truth.step_count(); ++t) {
        CHECK(loaded.scans[t].truth_labels == truth.scans[t].truth_labels);
        for (int k = 0; k < truth.scans[t].beam_count(); ++k)
            CHECK(loaded.scans[t].ranges[k] ==
                  doctest::Approx(truth.scans[t].ranges[k]).epsilon(1e-9));
    }
}

TEST_CASE("localization runs are deterministic and land near the truth") {
    const std::string spec = write_file("semloc_mapspec.json", kMapSpec);
    SemanticGridMap map = build_map_from_spec(spec);
    const std::string cfg_path =
        write_file("semloc_scn3.json", scenario_body("semloc_scn.map"));
    map.save((fs::temp_directory_path() / "semloc_scn.map").string());
    const ScenarioConfig cfg = load_scenario_config(cfg_path);
    map.build_all_distance_fields(cfg.d_max);

    const ScenarioTruth truth = simulate_scenario_from_config(map, cfg);

    const RunResult a = run_localization(map, truth, cfg, LikelihoodMode::slamer, 3);
    const RunResult b = run_localization(map, truth, cfg, LikelihoodMode::slamer, 3);
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].estimate.x == b.steps[i].estimate.x);
        CHECK(a.steps[i].ess == b.steps[i].ess);
    }
    CHECK(a.mean_position_error_cm() == b.mean_position_error_cm());
    CHECK(a.mean_position_error_cm() < 30.0);

    // run outputs round trip
    const std::string dir = (fs::temp_directory_path() / "semloc_run").string();
    write_run(a, dir);
    const LoadedRun loaded = load_run(dir);
    CHECK(loaded.steps.size() == a.steps.size());
    CHECK(loaded.accuracy.size() == a.accuracy.size());
    const TableRow row = evaluate_loaded_run("slamer", loaded, truth);
    CHECK(row.err.pos_ave_cm == doctest::Approx(a.mean_position_error_cm()).epsilon(1e-6));

    // lfm mode runs with recognition disabled: no objects, no er stats
    const RunResult lfm = run_localization(map, truth, cfg, LikelihoodMode::lfm, 3);
    CHECK(lfm.objects.empty());
    CHECK(!lfm.raw_accuracy().has_value());
    const TableRow lfm_row = evaluate_run(lfm);
    CHECK(!lfm_row.er.has_value());

    // table writing includes one row per run plus the aggregate
    std::vector<TableRow> rows{evaluate_run(a), evaluate_run(lfm)};
    rows.push_back(aggregate_rows("all", rows));
    const std::string table = (fs::temp_directory_path() / "semloc_table.csv").string();
    write_table(rows, table);
    std::ifstream in(table);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "method,pos_ave_cm,pos_std_cm,pos_max_cm,ang_ave_deg,ang_std_deg,ang_max_deg,"
          "er_ave_pct,er_std_pct,er_min_pct,er_max_pct");
    int data_rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty())
            ++data_rows;
    CHECK(data_rows == 3);
}

}  // TEST_SUITE
