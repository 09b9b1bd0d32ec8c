#include "plumescout/pipeline.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "plumescout/errors.hpp"

namespace plumescout {

namespace {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string canonical_settings(const RunConfig& rc, const GasConfig& cfg) {
    std::ostringstream oss;
    oss.precision(17);
    oss << "version=" << kVersion << ";gas=" << gas_name(rc.gas) << ";variant="
        << variant_name(rc.variant) << ";range=" << (rc.range == MfRange::Wide ? "wide" : "narrow")
        << ";proposer=" << rc.proposer << ";target=" << rc.target_path << ";min_size="
        << rc.min_size << ";wind=" << rc.wind_10m << ";area=" << rc.pixel_area_m2 << ";strategy="
        << strategy_name(rc.strategy) << ";high_only=" << rc.high_only << ";exclude=";
    for (const auto& w : rc.exclude) oss << w.lo << ":" << w.hi << ",";
    oss << ";in=";
    for (const auto& w : cfg.in_band) oss << w.lo << ":" << w.hi << ",";
    oss << ";out=";
    for (const auto& w : cfg.out_band) oss << w.lo << ":" << w.hi << ",";
    oss << ";wide=" << cfg.wide_window.lo << ":" << cfg.wide_window.hi << ";thr="
        << cfg.mf_background_threshold << ";minpx=" << cfg.min_candidate_pixels << ";dn="
        << cfg.dnorm_high << "/" << cfg.dnorm_low << ";deg=" << cfg.continuum_degree << ";floor="
        << cfg.depth_floor << ";amax=" << cfg.alpha_max << ";atol=" << cfg.alpha_tol << ";sim="
        << cfg.pair_min_similarity << ";rad=" << cfg.pair_search_radius << ";pts="
        << cfg.pair_points << ";minpairs=" << cfg.min_pairs << ";buf=" << cfg.exclusion_buffer
        << ";shrink=" << cfg.shrinkage << ";dfloor=" << cfg.diag_floor_rel << ";pc="
        << cfg.proposer_center << ";ps=" << cfg.proposer_scale;
    return oss.str();
}

ErrorCategory categorize(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) return ErrorCategory::Io;
    if (dynamic_cast<const ConfigError*>(&e)) return ErrorCategory::Config;
    if (dynamic_cast<const NumericError*>(&e)) return ErrorCategory::Numeric;
    return ErrorCategory::Numeric;
}

std::vector<int> mf_band_set(const SpectralCube& cube, const RunConfig& rc, const GasConfig& cfg) {
    std::vector<int> band_set = rc.range == MfRange::Wide
                                    ? wide_window_band_set(cfg, cube)
                                    : select_bands(cube, cfg.in_band, 3);
    return apply_band_exclusions(band_set, cube.grid, rc.exclude);
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace

GasConfig RunConfig::gas_config() const {
    if (!config_path.empty()) {
        GasConfig cfg = load_gas_config(config_path);
        if (cfg.gas != gas)
            throw ConfigError("config file is for " + std::string(gas_name(cfg.gas)) +
                              " but the run targets " + gas_name(gas));
        return cfg;
    }
    return default_config(gas);
}

std::string config_hash(const RunConfig& rc, const GasConfig& cfg) {
    std::uint64_t h = fnv1a64(canonical_settings(rc, cfg));
    std::ostringstream oss;
    oss << std::hex;
    for (int i = 15; i >= 0; --i) oss << ((h >> (4 * i)) & 0xf);
    return oss.str();
}

std::string scene_id_from_path(const std::string& path) {
    fs::path p(path);
    std::string stem = p.stem().string();
    return stem.empty() ? path : stem;
}

std::string scene_out_dir(const RunConfig& rc, const GasConfig& cfg, const std::string& scene_id) {
    return rc.out_dir + "/" + scene_id + "/" + gas_name(rc.gas) + "/" + config_hash(rc, cfg);
}

std::string run_mf(const std::string& scene_path, const RunConfig& rc, const GasConfig& cfg) {
    SpectralCube cube = read_cube(scene_path);
    GasTarget target = rc.target_path.empty() ? builtin_target(rc.gas, cube.grid)
                                              : load_target(rc.target_path, cube.grid);
    target.gas = rc.gas;
    auto band_set = mf_band_set(cube, rc, cfg);
    ColumnStatsOptions opts;
    opts.diag_floor_rel = cfg.diag_floor_rel;
    ColumnStats stats = column_stats(cube, band_set, rc.variant, cfg.shrinkage, opts);
    EnhancementMap emap = apply_mf(cube, target, stats, band_set);

    std::string scene_id = scene_id_from_path(scene_path);
    std::string dir = scene_out_dir(rc, cfg, scene_id);
    fs::create_directories(dir);
    std::string out_path = dir + "/enhancement";
    write_cube(emap.to_cube(), out_path);
    return out_path + ".hdr";
}

SceneOutcome process_scene(const std::string& scene_path, const RunConfig& rc,
                           const GasConfig& cfg) {
    SceneOutcome outcome;
    outcome.scene_id = scene_id_from_path(scene_path);

    SpectralCube cube = read_cube(scene_path);
    GasTarget target = rc.target_path.empty() ? builtin_target(rc.gas, cube.grid)
                                              : load_target(rc.target_path, cube.grid);
    target.gas = rc.gas;

    auto band_set = mf_band_set(cube, rc, cfg);
    ColumnStatsOptions stat_opts;
    stat_opts.diag_floor_rel = cfg.diag_floor_rel;
    ColumnStats stats = column_stats(cube, band_set, rc.variant, cfg.shrinkage, stat_opts);
    EnhancementMap emap = apply_mf(cube, target, stats, band_set);

    ProposerParams pp = ProposerParams::defaults_for(cfg);
    ScoreMap score = rc.proposer == "builtin" ? builtin_proposer(emap, pp)
                                              : import_mask(rc.proposer, cube.rows, cube.cols);
    score.gas = rc.gas;

    auto cands = extract_candidates(score, pp);
    int min_size = rc.min_size >= 0 ? rc.min_size : cfg.min_candidate_pixels;
    cands = filter_by_size(std::move(cands), min_size);
    for (auto& c : cands) c.scene_id = outcome.scene_id;

    std::string dir = scene_out_dir(rc, cfg, outcome.scene_id);
    fs::create_directories(dir + "/curves");
    write_cube(emap.to_cube(), dir + "/enhancement");
    write_cube(score_map_to_cube(score), dir + "/score");
    write_json_file(candidates_geojson(cands), dir + "/candidates.geojson");

    nlohmann::json reports = nlohmann::json::array();
    nlohmann::json detections = nlohmann::json::array();
    for (std::size_t i = 0; i < cands.size(); ++i) {
        RankedDetection det;
        det.candidate = cands[i];
        det.report = score_candidate(cands[i], cube, emap, target, cfg);
        det.bin = triage(det.report, cfg);
        if (rc.wind_10m >= 0.0)
            det.emission = estimate_emission(cands[i], emap, rc.wind_10m, rc.pixel_area_m2, rc.gas);

        for (std::size_t w = 0; w < det.report.curves.size(); ++w) {
            const auto& curve = det.report.curves[w];
            std::string stem = dir + "/curves/cand" + std::to_string(i) + "_win" + std::to_string(w);
            write_curve(stem + "_transmittance.txt", curve.wavelengths, curve.values);
            write_curve(stem + "_model.txt", curve.wavelengths, det.report.per_window[w].model_curve);
        }

        nlohmann::json rep = fit_report_json(det.report);
        rep["candidate"] = i;
        rep["scene_id"] = outcome.scene_id;
        reports.push_back(std::move(rep));

        DigestEntry entry(det);
        detections.push_back(entry.to_json());
        outcome.entries.push_back(std::move(entry));
    }
    write_json_file(reports, dir + "/reports.json");
    write_json_file(detections, dir + "/detections.json");
    return outcome;
}

Digest run_digest(const std::string& manifest_path, const RunConfig& rc, const std::string& date) {
    GasConfig cfg = rc.gas_config();

    std::ifstream manifest(manifest_path);
    if (!manifest) throw IoError("cannot open scene manifest " + manifest_path);
    std::vector<std::string> scene_paths;
    std::string line;
    while (std::getline(manifest, line)) {
        auto b = line.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r\n");
        std::string trimmed = line.substr(b, e - b + 1);
        if (!trimmed.empty() && trimmed[0] != '#') scene_paths.push_back(trimmed);
    }

    std::vector<SceneOutcome> outcomes(scene_paths.size());
    std::atomic<std::size_t> next{0};
    int jobs = std::max(1, rc.jobs);

    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= scene_paths.size()) break;
            const std::string& path = scene_paths[i];
            std::string scene_id = scene_id_from_path(path);
            try {
                std::string existing = scene_out_dir(rc, cfg, scene_id) + "/detections.json";
                if (fs::exists(existing)) {
                    std::ifstream in(existing);
                    nlohmann::json j = nlohmann::json::parse(in);
                    SceneOutcome out;
                    out.scene_id = scene_id;
                    for (const auto& je : j) out.entries.push_back(DigestEntry::from_json(je));
                    outcomes[i] = std::move(out);
                } else {
                    outcomes[i] = process_scene(path, rc, cfg);
                }
            } catch (const std::exception& e) {
                SceneOutcome out;
                out.scene_id = scene_id;
                out.failed = true;
                out.failure = {scene_id, category_name(categorize(e)), e.what()};
                outcomes[i] = std::move(out);
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Aggregate in manifest order so parallelism never reorders anything.
    std::vector<DigestEntry> entries;
    std::vector<SceneFailure> failures;
    int processed = 0;
    for (auto& out : outcomes) {
        if (out.failed) {
            failures.push_back(out.failure);
            continue;
        }
        ++processed;
        for (auto& e : out.entries) entries.push_back(std::move(e));
    }

    DigestMeta meta;
    meta.date = date;
    meta.version = kVersion;
    meta.config_hash = config_hash(rc, cfg);
    meta.strategy = rc.strategy;
    meta.high_only = rc.high_only;
    Digest digest = make_digest(std::move(entries), meta, processed, std::move(failures));
    write_digest(digest, rc.out_dir + "/digest_" + date + ".json");
    return digest;
}

}  // namespace plumescout
