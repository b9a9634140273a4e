// semloc command line: map authoring, simulation, localization runs,
// evaluation, rendering, and mode/seed sweeps.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "semloc/config.hpp"
#include "semloc/eval.hpp"
#include "semloc/kernels.hpp"
#include "semloc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace semloc;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string backend = "auto";
    int particles = -1;
    long seed = -1;
};

ScenarioConfig load_cfg(const CommonOpts& opts) {
    ScenarioConfig cfg = load_scenario_config(opts.config_path);
    if (!opts.out_dir.empty())
        cfg.out_dir = opts.out_dir;
    if (opts.particles > 0)
        cfg.particles = opts.particles;
    if (opts.seed >= 0)
        cfg.seeds = {static_cast<uint64_t>(opts.seed)};
    return cfg;
}

SemanticGridMap load_map_with_fields(const ScenarioConfig& cfg) {
    SemanticGridMap map = SemanticGridMap::load(cfg.map_path);
    map.build_all_distance_fields(cfg.d_max);
    return map;
}

std::string run_dir(const ScenarioConfig& cfg, LikelihoodMode mode, uint64_t seed) {
    return (fs::path(cfg.out_dir) / (std::string(mode_name(mode)) + "_seed" +
                                     std::to_string(seed)))
        .string();
}

std::string truth_dir(const ScenarioConfig& cfg) {
    return (fs::path(cfg.out_dir) / "truth").string();
}

int cmd_make_map(const std::string& spec_path, const std::string& out_path) {
    const SemanticGridMap map = build_map_from_spec(spec_path);
    map.save(out_path);
    std::cout << "wrote " << out_path << " (" << map.width() << "x" << map.height() << ", "
              << map.classes().size() << " classes)\n";
    return 0;
}

int cmd_simulate(const CommonOpts& opts) {
    const ScenarioConfig cfg = load_cfg(opts);
    const SemanticGridMap map = SemanticGridMap::load(cfg.map_path);
    const ScenarioTruth truth = simulate_scenario_from_config(map, cfg);
    write_truth(truth, truth_dir(cfg));
    std::cout << "simulated " << truth.step_count() << " steps -> " << truth_dir(cfg) << "\n";
    return 0;
}

int cmd_localize(const CommonOpts& opts, const std::string& mode_str) {
    const ScenarioConfig cfg = load_cfg(opts);
    const LikelihoodMode mode = mode_str.empty() ? cfg.mode : mode_from_name(mode_str);
    const SemanticGridMap map = load_map_with_fields(cfg);
    const ScenarioTruth truth = load_truth(truth_dir(cfg));
    for (uint64_t seed : cfg.seeds) {
        const RunResult run = run_localization(map, truth, cfg, mode, seed);
        const std::string dir = run_dir(cfg, mode, seed);
        write_run(run, dir);
        std::cout << mode_name(mode) << " seed " << seed << ": mean position error "
                  << run.mean_position_error_cm() << " cm -> " << dir << "\n";
    }
    return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& mode_str) {
    const ScenarioConfig cfg = load_cfg(opts);
    const LikelihoodMode mode = mode_str.empty() ? cfg.mode : mode_from_name(mode_str);
    const ScenarioTruth truth = load_truth(truth_dir(cfg));
    std::vector<TableRow> rows;
    for (uint64_t seed : cfg.seeds) {
        const LoadedRun run = load_run(run_dir(cfg, mode, seed));
        rows.push_back(evaluate_loaded_run(mode_name(mode), run, truth));
    }
    rows.push_back(aggregate_rows(mode_name(mode), rows));
    const std::string table_path = (fs::path(cfg.out_dir) / "table.csv").string();
    write_table(rows, table_path);
    std::cout << "wrote " << table_path << "\n";
    return 0;
}

int cmd_render(const CommonOpts& opts, const std::string& mode_str,
               const std::string& image_path) {
    const ScenarioConfig cfg = load_cfg(opts);
    const LikelihoodMode mode = mode_str.empty() ? cfg.mode : mode_from_name(mode_str);
    const SemanticGridMap map = SemanticGridMap::load(cfg.map_path);
    const ScenarioTruth truth = load_truth(truth_dir(cfg));
    const LoadedRun run = load_run(run_dir(cfg, mode, cfg.seeds.front()));

    std::vector<Pose2D> est;
    for (const auto& s : run.steps)
        est.push_back(s.estimate);
    std::vector<ObjectRenderInfo> objects;
    for (const auto& o : run.objects)
        objects.push_back(ObjectRenderInfo{o.p1, o.p2, o.map_label});

    const std::string path = image_path.empty()
                                 ? (fs::path(cfg.out_dir) / "render.ppm").string()
                                 : image_path;
    render(map, truth.poses, est, objects, path);
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& modes_csv) {
    const ScenarioConfig cfg = load_cfg(opts);
    const SemanticGridMap map = load_map_with_fields(cfg);
    const ScenarioTruth truth = simulate_scenario_from_config(map, cfg);
    write_truth(truth, truth_dir(cfg));

    std::vector<LikelihoodMode> modes;
    std::stringstream ss(modes_csv);
    std::string token;
    while (std::getline(ss, token, ','))
        modes.push_back(mode_from_name(token));
    if (modes.empty())
        throw ConfigError("sweep needs at least one mode");

    std::vector<TableRow> rows;
    for (LikelihoodMode mode : modes) {
        std::vector<TableRow> mode_rows;
        for (uint64_t seed : cfg.seeds) {
            const RunResult run = run_localization(map, truth, cfg, mode, seed);
            write_run(run, run_dir(cfg, mode, seed));
            mode_rows.push_back(evaluate_run(run));
            std::cout << mode_name(mode) << " seed " << seed << ": "
                      << run.mean_position_error_cm() << " cm\n";
        }
        rows.insert(rows.end(), mode_rows.begin(), mode_rows.end());
        rows.push_back(aggregate_rows(mode_name(mode), mode_rows));
    }
    const std::string table_path = (fs::path(cfg.out_dir) / "table.csv").string();
    write_table(rows, table_path);
    std::cout << "wrote " << table_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semantic localization toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string mode_str, modes_csv = "lfm,slfm,slamer";
    std::string spec_path, map_out, image_path;

    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        auto* c = cmd->add_option("--config", opts.config_path, "scenario config file");
        if (needs_config)
            c->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
        cmd->add_option("--particles", opts.particles, "particle count (overrides config)");
        cmd->add_option("--seed", opts.seed, "single seed (overrides config seed list)");
        cmd->add_option("--backend", opts.backend, "kernel backend: auto|scalar|avx2");
    };

    auto* make_map = app.add_subcommand("make-map", "rasterize a declarative map spec");
    make_map->add_option("spec", spec_path, "map spec (json)")->required()->check(
        CLI::ExistingFile);
    make_map->add_option("-o,--output", map_out, "output map file")->required();

    auto* simulate = app.add_subcommand("simulate", "generate a scenario truth log");
    add_common(simulate);

    auto* localize = app.add_subcommand("localize", "run the particle filter on a truth log");
    add_common(localize);
    localize->add_option("--mode", mode_str, "lfm|slfm|slamer (overrides config)");

    auto* evaluate = app.add_subcommand("evaluate", "score run outputs against the truth log");
    add_common(evaluate);
    evaluate->add_option("--mode", mode_str, "lfm|slfm|slamer (overrides config)");

    auto* render_cmd = app.add_subcommand("render", "draw map, trajectories and objects");
    add_common(render_cmd);
    render_cmd->add_option("--mode", mode_str, "which run to draw");
    render_cmd->add_option("-o,--output", image_path, "output image (ppm)");

    auto* sweep = app.add_subcommand("sweep", "simulate once, localize for modes x seeds");
    add_common(sweep);
    sweep->add_option("--modes", modes_csv, "comma separated mode list");

    CLI11_PARSE(app, argc, argv);

    try {
        kernels::set_active(kernels::backend_from_name(opts.backend));

        if (make_map->parsed())
            return cmd_make_map(spec_path, map_out);
        if (simulate->parsed())
            return cmd_simulate(opts);
        if (localize->parsed())
            return cmd_localize(opts, mode_str);
        if (evaluate->parsed())
            return cmd_evaluate(opts, mode_str);
        if (render_cmd->parsed())
            return cmd_render(opts, mode_str, image_path);
        if (sweep->parsed())
            return cmd_sweep(opts, modes_csv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
