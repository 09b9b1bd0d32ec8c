#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "plumescout/errors.hpp"
#include "plumescout/pipeline.hpp"
#include "plumescout/synth.hpp"

namespace ps = plumescout;

namespace {

struct CliArgs {
    std::string scene;
    std::string spec;
    std::string manifest;
    std::string date = "1970-01-01";
    std::string gas = "CH4";
    std::string variant = "wmf";
    std::string range = "wide";
    std::string strategy = "dnorm_asc";
    ps::RunConfig rc;
    std::vector<std::string> exclude;
};

ps::BandWindow parse_window_arg(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos)
        throw ps::ConfigError("window '" + s + "' must be lo:hi");
    try {
        return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ps::ConfigError("window '" + s + "' is not numeric");
    }
}

ps::RunConfig finalize(CliArgs& args) {
    ps::RunConfig rc = args.rc;
    rc.gas = ps::parse_gas(args.gas);
    rc.variant = ps::parse_variant(args.variant);
    if (args.range == "wide") rc.range = ps::MfRange::Wide;
    else if (args.range == "narrow") rc.range = ps::MfRange::Narrow;
    else throw ps::ConfigError("--range must be wide or narrow");
    rc.strategy = ps::parse_strategy(args.strategy);
    for (const auto& w : args.exclude) rc.exclude.push_back(parse_window_arg(w));
    if (rc.config_path.empty()) {
        if (const char* env = std::getenv("PLUME_SCOUT_CONFIG"); env && *env)
            rc.config_path = env;
    }
    return rc;
}

void add_common(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--gas", args.gas, "Target gas: CH4, NH3, NO2 or CO");
    cmd->add_option("--variant", args.variant, "Matched-filter variant: cmf or wmf");
    cmd->add_option("--range", args.range, "Spectral range: wide or narrow");
    cmd->add_option("--target", args.rc.target_path, "Target spectrum file (default: builtin)");
    cmd->add_option("--config", args.rc.config_path,
                    "Gas config overrides (env PLUME_SCOUT_CONFIG as fallback)");
    cmd->add_option("--exclude", args.exclude, "Band windows lo:hi to exclude from the MF");
    cmd->add_option("--out", args.rc.out_dir, "Output directory");
}

int dispatch(CLI::App& app, CliArgs& args) {
    if (auto* cmd = app.get_subcommand("synth"); cmd && cmd->parsed()) {
        ps::synth::SceneSpec spec = ps::synth::load_scene_spec(args.spec);
        std::map<ps::GasId, ps::GasTarget> targets;
        auto grid = spec.make_grid();
        for (const auto& p : spec.plumes)
            if (!targets.count(p.gas)) targets[p.gas] = ps::builtin_target(p.gas, grid);
        ps::synth::SceneData scene = ps::synth::generate(spec, targets);
        ps::synth::write_scene(scene, args.rc.out_dir);
        nlohmann::json summary{{"command", "synth"},
                               {"scene", args.rc.out_dir + "/scene.hdr"},
                               {"rows", scene.cube.rows},
                               {"cols", scene.cube.cols},
                               {"bands", scene.cube.bands}};
        std::cout << summary.dump() << "\n";
        return 0;
    }
    if (auto* cmd = app.get_subcommand("mf"); cmd && cmd->parsed()) {
        ps::RunConfig rc = finalize(args);
        ps::GasConfig cfg = rc.gas_config();
        std::string out_path = ps::run_mf(args.scene, rc, cfg);
        nlohmann::json summary{{"command", "mf"},
                               {"scene_id", ps::scene_id_from_path(args.scene)},
                               {"gas", args.gas},
                               {"variant", args.variant},
                               {"output", out_path}};
        std::cout << summary.dump() << "\n";
        return 0;
    }
    if (auto* cmd = app.get_subcommand("detect"); cmd && cmd->parsed()) {
        ps::RunConfig rc = finalize(args);
        ps::GasConfig cfg = rc.gas_config();
        ps::SceneOutcome outcome = ps::process_scene(args.scene, rc, cfg);
        int high = 0, low = 0;
        for (const auto& e : outcome.entries) {
            if (e.bin == ps::TriageBin::HIGH) ++high;
            if (e.bin == ps::TriageBin::LOW) ++low;
        }
        nlohmann::json summary{{"command", "detect"},
                               {"scene_id", outcome.scene_id},
                               {"candidates", outcome.entries.size()},
                               {"high", high},
                               {"low", low},
                               {"output", ps::scene_out_dir(rc, cfg, outcome.scene_id)}};
        std::cout << summary.dump() << "\n";
        return 0;
    }
    if (auto* cmd = app.get_subcommand("digest"); cmd && cmd->parsed()) {
        ps::RunConfig rc = finalize(args);
        ps::Digest digest = ps::run_digest(args.manifest, rc, args.date);
        nlohmann::json summary{{"command", "digest"},
                               {"date", digest.date},
                               {"scenes_processed", digest.scenes_processed},
                               {"detections", digest.detections.size()},
                               {"failures", digest.failures.size()},
                               {"output", rc.out_dir + "/digest_" + args.date + ".json"}};
        std::cout << summary.dump() << "\n";
        return 0;
    }
    std::cerr << app.help() << "\n";
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plumescout: trace-gas point-source detection and vetting pipeline"};
    app.require_subcommand(0, 1);
    CliArgs args;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
    synth->add_option("--spec", args.spec, "Scene spec file")->required();
    synth->add_option("--out", args.rc.out_dir, "Output directory");

    auto* mf = app.add_subcommand("mf", "Compute the matched-filter enhancement raster");
    mf->add_option("scene", args.scene, "Scene cube (.hdr)")->required();
    add_common(mf, args);

    auto* detect = app.add_subcommand("detect", "Run detection and spectral vetting on one scene");
    detect->add_option("scene", args.scene, "Scene cube (.hdr)")->required();
    add_common(detect, args);
    detect->add_option("--proposer", args.rc.proposer,
                       "'builtin' or a path to an external score raster");
    detect->add_option("--min-size", args.rc.min_size, "Minimum candidate size (strictly larger)");
    detect->add_option("--wind", args.rc.wind_10m, "10 m wind speed (m/s) for emission estimates");
    detect->add_option("--pixel-area", args.rc.pixel_area_m2, "Pixel area in m^2");

    auto* digest = app.add_subcommand("digest", "Process a scene manifest and emit a ranked digest");
    digest->add_option("--scenes", args.manifest, "Manifest: one scene path per line")->required();
    digest->add_option("--date", args.date, "Digest date (YYYY-MM-DD)")->required();
    add_common(digest, args);
    digest->add_option("--proposer", args.rc.proposer,
                       "'builtin' or a path to an external score raster");
    digest->add_option("--min-size", args.rc.min_size, "Minimum candidate size (strictly larger)");
    digest->add_option("--jobs", args.rc.jobs, "Parallel scene workers");
    digest->add_option("--strategy", args.strategy,
                       "Ranking: ml_confidence, dnorm_asc, alpha_desc, dnorm_product_asc");
    digest->add_flag("--high-only", args.rc.high_only, "Keep only HIGH-bin detections");
    digest->add_option("--wind", args.rc.wind_10m, "10 m wind speed (m/s) for emission estimates");
    digest->add_option("--pixel-area", args.rc.pixel_area_m2, "Pixel area in m^2");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    try {
        return dispatch(app, args);
    } catch (const ps::IoError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const ps::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const ps::NumericError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "NUMERIC: " << e.what() << "\n";
        return 4;
    }
}
