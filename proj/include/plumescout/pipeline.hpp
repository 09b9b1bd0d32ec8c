#pragma once

#include <string>
#include <vector>

#include "plumescout/triage.hpp"

namespace plumescout {

inline constexpr const char* kVersion = "0.1.0";

enum class MfRange { Narrow, Wide };

struct RunConfig {
    GasId gas = GasId::CH4;
    MfVariant variant = MfVariant::WMF;
    MfRange range = MfRange::Wide;
    std::string proposer = "builtin";  // "builtin" or a score-raster path
    std::string target_path;           // empty -> builtin analytic target
    std::string config_path;           // gas config overrides
    std::vector<BandWindow> exclude;   // bands knocked out of the MF band set
    std::string out_dir = "out";
    int jobs = 1;
    int min_size = -1;        // -1 -> gas default
    double wind_10m = -1.0;   // < 0 -> no emission estimates
    double pixel_area_m2 = 3600.0;
    RankStrategy strategy = RankStrategy::DnormAsc;
    bool high_only = false;

    GasConfig gas_config() const;  // defaults + config_path overrides
};

// Stable hash of every setting that shapes the outputs; part of the versioned
// output path so reprocessing with changed parameters never collides.
std::string config_hash(const RunConfig& rc, const GasConfig& cfg);

struct SceneOutcome {
    std::string scene_id;
    bool failed = false;
    SceneFailure failure;
    std::vector<DigestEntry> entries;
};

// Output directory for one scene: <out>/<scene_id>/<gas>/<config_hash>.
std::string scene_out_dir(const RunConfig& rc, const GasConfig& cfg, const std::string& scene_id);

// Full per-scene chain: read -> matched filter -> proposer -> candidates ->
// spectral vetting -> triage (+ optional emission). Writes enhancement and
// score rasters, candidates.geojson, reports.json, detections.json and fit
// curves under the versioned scene directory. Does not catch errors.
SceneOutcome process_scene(const std::string& scene_path, const RunConfig& rc,
                           const GasConfig& cfg);

// Computes and writes just the enhancement raster; returns its path.
std::string run_mf(const std::string& scene_path, const RunConfig& rc, const GasConfig& cfg);

// Processes every scene in the manifest (one path per line, '#' comments),
// in parallel up to rc.jobs, reusing scenes whose versioned detections.json
// already exists. Per-scene failures are recorded in the digest, not fatal.
Digest run_digest(const std::string& manifest_path, const RunConfig& rc, const std::string& date);

std::string scene_id_from_path(const std::string& path);

}  // namespace plumescout
