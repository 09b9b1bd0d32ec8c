#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "plumescout/plume_fit.hpp"

namespace plumescout {

enum class TriageBin { HIGH, LOW, IGNORE };

const char* bin_name(TriageBin bin);
TriageBin parse_bin(const std::string& name);

// HIGH: dnorm < dnorm_high; LOW: dnorm_high <= dnorm <= dnorm_low;
// IGNORE otherwise (including unfittable reports).
TriageBin triage(const FitReport& report, const GasConfig& cfg);

enum class RankStrategy { MlConfidence, DnormAsc, AlphaDesc, DnormProductAsc };

RankStrategy parse_strategy(const std::string& name);
const char* strategy_name(RankStrategy s);

struct EmissionEstimate {
    double rate_kg_h = 0.0;
    double ime_kg = 0.0;
    double ueff_m_s = 0.0;
    double plume_length_m = 0.0;
    double wind_10m = 0.0;
};

// Effective wind U_eff = a * wind_10m + b. Placeholder coefficients; operators
// calibrate these for their sensor and wind product.
struct WindCalibration {
    double a = 0.34;
    double b = 0.54;  // m/s
};

// Mass from the enhancement sum (ppm·m -> kg at standard molar volume), plume
// length sqrt(area); rate = U_eff * mass / length, reported per hour.
EmissionEstimate estimate_emission(const PlumeCandidate& cand, const EnhancementMap& emap,
                                   double wind_10m, double pixel_area_m2, GasId gas,
                                   const WindCalibration& calib = {});

struct RankedDetection {
    PlumeCandidate candidate;
    FitReport report;
    TriageBin bin = TriageBin::IGNORE;
    std::optional<EmissionEstimate> emission;
};

// Total order per strategy, ties broken by (scene_id, centroid row, centroid
// col); unfittable reports sort last within any strategy.
std::vector<RankedDetection> rank(std::vector<RankedDetection> dets, RankStrategy strategy);

// Serialized projection of a ranked detection. Numeric fields are rounded to
// 6 significant digits at construction so digest ordering and bytes are
// identical whether a scene was freshly processed or reloaded from disk.
struct DigestEntry {
    std::string scene_id;
    GasId gas = GasId::CH4;
    TriageBin bin = TriageBin::IGNORE;
    bool fittable = false;
    double confidence = 0.0;
    int size_px = 0;
    std::pair<double, double> centroid{0.0, 0.0};
    double dnorm_combined = 0.0;
    double alpha_combined = 0.0;
    std::vector<double> per_window_dnorm;
    std::optional<EmissionEstimate> emission;

    DigestEntry() = default;
    explicit DigestEntry(const RankedDetection& det);
    nlohmann::json to_json() const;
    static DigestEntry from_json(const nlohmann::json& j);
};

std::vector<DigestEntry> rank_entries(std::vector<DigestEntry> entries, RankStrategy strategy);

struct SceneFailure {
    std::string scene_id;
    std::string category;  // IO | CONFIG | NUMERIC
    std::string message;
};

struct DigestMeta {
    std::string date;  // UTC, YYYY-MM-DD
    std::string version;
    std::string config_hash;
    RankStrategy strategy = RankStrategy::DnormAsc;
    bool high_only = false;
};

struct Digest {
    std::string date;
    int scenes_processed = 0;
    std::vector<DigestEntry> detections;
    std::vector<SceneFailure> failures;
    std::string config_hash;
    std::string version;
};

Digest make_digest(std::vector<DigestEntry> entries, const DigestMeta& meta,
                   int scenes_processed, std::vector<SceneFailure> failures);

// Sorted keys, floats at 6 significant digits: byte-identical for identical
// inputs.
nlohmann::json digest_json(const Digest& digest);
void write_digest(const Digest& digest, const std::string& path);

}  // namespace plumescout
