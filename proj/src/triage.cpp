#include "plumescout/triage.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "plumescout/errors.hpp"
#include "plumescout/jsonfmt.hpp"

namespace plumescout {

namespace {

constexpr double kMolarVolumeStpL = 22.414;  // L/mol at 0°C, 1 atm

// Common ordering view over full detections and serialized entries.
struct RankView {
    bool fittable;
    double confidence;
    double dnorm;
    double alpha;
    const std::string* scene_id;
    std::pair<double, double> centroid;
};

RankView view_of(const RankedDetection& d) {
    return {d.report.fittable, d.candidate.confidence, d.report.dnorm_combined,
            d.report.alpha_combined, &d.candidate.scene_id, d.candidate.centroid};
}

RankView view_of(const DigestEntry& e) {
    return {e.fittable, e.confidence, e.dnorm_combined, e.alpha_combined, &e.scene_id, e.centroid};
}

double strategy_key(const RankView& v, RankStrategy strategy) {
    switch (strategy) {
        case RankStrategy::MlConfidence:
            return -v.confidence;
        case RankStrategy::AlphaDesc:
            return v.fittable ? -v.alpha : std::numeric_limits<double>::infinity();
        case RankStrategy::DnormAsc:
        case RankStrategy::DnormProductAsc:
            return v.fittable && std::isfinite(v.dnorm) ? v.dnorm
                                                        : std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

bool view_less(const RankView& a, const RankView& b, RankStrategy strategy) {
    double ka = strategy_key(a, strategy), kb = strategy_key(b, strategy);
    if (ka != kb) return ka < kb;
    if (*a.scene_id != *b.scene_id) return *a.scene_id < *b.scene_id;
    return a.centroid < b.centroid;
}

}  // namespace

const char* bin_name(TriageBin bin) {
    switch (bin) {
        case TriageBin::HIGH: return "HIGH";
        case TriageBin::LOW: return "LOW";
        case TriageBin::IGNORE: return "IGNORE";
    }
    return "?";
}

TriageBin parse_bin(const std::string& name) {
    if (name == "HIGH") return TriageBin::HIGH;
    if (name == "LOW") return TriageBin::LOW;
    if (name == "IGNORE") return TriageBin::IGNORE;
    throw ConfigError("unknown triage bin '" + name + "'");
}

TriageBin triage(const FitReport& report, const GasConfig& cfg) {
    if (!report.fittable) return TriageBin::IGNORE;
    double d = report.dnorm_combined;
    if (!std::isfinite(d)) return TriageBin::IGNORE;
    if (d < cfg.dnorm_high) return TriageBin::HIGH;
    if (d <= cfg.dnorm_low) return TriageBin::LOW;
    return TriageBin::IGNORE;
}

RankStrategy parse_strategy(const std::string& name) {
    if (name == "ml_confidence") return RankStrategy::MlConfidence;
    if (name == "dnorm_asc") return RankStrategy::DnormAsc;
    if (name == "alpha_desc") return RankStrategy::AlphaDesc;
    if (name == "dnorm_product_asc") return RankStrategy::DnormProductAsc;
    throw ConfigError("unknown ranking strategy '" + name + "'");
}

const char* strategy_name(RankStrategy s) {
    switch (s) {
        case RankStrategy::MlConfidence: return "ml_confidence";
        case RankStrategy::DnormAsc: return "dnorm_asc";
        case RankStrategy::AlphaDesc: return "alpha_desc";
        case RankStrategy::DnormProductAsc: return "dnorm_product_asc";
    }
    return "?";
}

EmissionEstimate estimate_emission(const PlumeCandidate& cand, const EnhancementMap& emap,
                                   double wind_10m, double pixel_area_m2, GasId gas,
                                   const WindCalibration& calib) {
    if (pixel_area_m2 <= 0.0) throw ConfigError("pixel area must be positive");
    if (wind_10m < 0.0) throw ConfigError("wind speed must be >= 0");
    if (cand.pixels.empty()) throw ConfigError("candidate has no pixels");

    // ppm·m * m² = 1e-6 m³ of gas at STP; density M/22.414 kg/m³.
    const double density_kg_m3 = molar_mass_g_mol(gas) / kMolarVolumeStpL;
    double alpha_area = 0.0;  // ppm·m · m²
    for (const auto& [r, c] : cand.pixels) {
        double a = emap.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        if (std::isfinite(a)) alpha_area += a * pixel_area_m2;
    }

    EmissionEstimate e;
    e.wind_10m = wind_10m;
    e.ime_kg = alpha_area * 1e-6 * density_kg_m3;
    e.plume_length_m = std::sqrt(static_cast<double>(cand.size_px) * pixel_area_m2);
    e.ueff_m_s = calib.a * wind_10m + calib.b;
    e.rate_kg_h = e.ueff_m_s * e.ime_kg / e.plume_length_m * 3600.0;
    return e;
}

std::vector<RankedDetection> rank(std::vector<RankedDetection> dets, RankStrategy strategy) {
    std::stable_sort(dets.begin(), dets.end(),
                     [strategy](const RankedDetection& a, const RankedDetection& b) {
                         return view_less(view_of(a), view_of(b), strategy);
                     });
    return dets;
}

std::vector<DigestEntry> rank_entries(std::vector<DigestEntry> entries, RankStrategy strategy) {
    std::stable_sort(entries.begin(), entries.end(),
                     [strategy](const DigestEntry& a, const DigestEntry& b) {
                         return view_less(view_of(a), view_of(b), strategy);
                     });
    return entries;
}

DigestEntry::DigestEntry(const RankedDetection& det) {
    scene_id = det.candidate.scene_id;
    gas = det.candidate.gas;
    bin = det.bin;
    fittable = det.report.fittable;
    confidence = round_sig(det.candidate.confidence);
    size_px = det.candidate.size_px;
    centroid = {round_sig(det.candidate.centroid.first), round_sig(det.candidate.centroid.second)};
    dnorm_combined = round_sig(det.report.dnorm_combined);
    alpha_combined = round_sig(det.report.alpha_combined);
    for (const auto& w : det.report.per_window) per_window_dnorm.push_back(round_sig(w.dnorm));
    if (det.emission) {
        EmissionEstimate e = *det.emission;
        e.rate_kg_h = round_sig(e.rate_kg_h);
        e.ime_kg = round_sig(e.ime_kg);
        e.ueff_m_s = round_sig(e.ueff_m_s);
        e.plume_length_m = round_sig(e.plume_length_m);
        e.wind_10m = round_sig(e.wind_10m);
        emission = e;
    }
}

nlohmann::json DigestEntry::to_json() const {
    nlohmann::json per_window = nlohmann::json::array();
    for (double d : per_window_dnorm) per_window.push_back(json_num(d));
    nlohmann::json j{{"scene_id", scene_id},
                     {"gas", gas_name(gas)},
                     {"bin", bin_name(bin)},
                     {"fittable", fittable},
                     {"confidence", json_num(confidence)},
                     {"size_px", size_px},
                     {"centroid", {json_num(centroid.first), json_num(centroid.second)}},
                     {"dnorm_combined", json_num(dnorm_combined)},
                     {"alpha_combined", json_num(alpha_combined)},
                     {"per_window_dnorm", std::move(per_window)}};
    if (emission) {
        j["emission"] = {{"rate_kg_h", json_num(emission->rate_kg_h)},
                         {"ime_kg", json_num(emission->ime_kg)},
                         {"ueff_m_s", json_num(emission->ueff_m_s)},
                         {"plume_length_m", json_num(emission->plume_length_m)},
                         {"wind_10m", json_num(emission->wind_10m)}};
    } else {
        j["emission"] = nullptr;
    }
    return j;
}

DigestEntry DigestEntry::from_json(const nlohmann::json& j) {
    DigestEntry e;
    e.scene_id = j.at("scene_id").get<std::string>();
    e.gas = parse_gas(j.at("gas").get<std::string>());
    e.bin = parse_bin(j.at("bin").get<std::string>());
    e.fittable = j.at("fittable").get<bool>();
    e.confidence = j.at("confidence").get<double>();
    e.size_px = j.at("size_px").get<int>();
    e.centroid = {j.at("centroid").at(0).get<double>(), j.at("centroid").at(1).get<double>()};
    e.dnorm_combined = j.at("dnorm_combined").is_null()
                           ? std::numeric_limits<double>::infinity()
                           : j.at("dnorm_combined").get<double>();
    e.alpha_combined = j.at("alpha_combined").is_null() ? 0.0 : j.at("alpha_combined").get<double>();
    for (const auto& d : j.at("per_window_dnorm")) e.per_window_dnorm.push_back(d.get<double>());
    if (!j.at("emission").is_null()) {
        EmissionEstimate em;
        const auto& je = j.at("emission");
        em.rate_kg_h = je.at("rate_kg_h").get<double>();
        em.ime_kg = je.at("ime_kg").get<double>();
        em.ueff_m_s = je.at("ueff_m_s").get<double>();
        em.plume_length_m = je.at("plume_length_m").get<double>();
        em.wind_10m = je.at("wind_10m").get<double>();
        e.emission = em;
    }
    return e;
}

Digest make_digest(std::vector<DigestEntry> entries, const DigestMeta& meta,
                   int scenes_processed, std::vector<SceneFailure> failures) {
    if (meta.high_only) {
        std::vector<DigestEntry> kept;
        for (auto& e : entries)
            if (e.bin == TriageBin::HIGH) kept.push_back(std::move(e));
        entries = std::move(kept);
    }
    Digest digest;
    digest.date = meta.date;
    digest.version = meta.version;
    digest.config_hash = meta.config_hash;
    digest.scenes_processed = scenes_processed;
    digest.detections = rank_entries(std::move(entries), meta.strategy);
    digest.failures = std::move(failures);
    std::sort(digest.failures.begin(), digest.failures.end(),
              [](const SceneFailure& a, const SceneFailure& b) { return a.scene_id < b.scene_id; });
    return digest;
}

nlohmann::json digest_json(const Digest& digest) {
    nlohmann::json dets = nlohmann::json::array();
    int rank_idx = 1;
    for (const auto& e : digest.detections) {
        nlohmann::json entry = e.to_json();
        entry["rank"] = rank_idx++;
        dets.push_back(std::move(entry));
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : digest.failures)
        failures.push_back({{"scene_id", f.scene_id}, {"category", f.category}, {"message", f.message}});
    return {{"schema_version", 1},
            {"date", digest.date},
            {"version", digest.version},
            {"config_hash", digest.config_hash},
            {"scenes_processed", digest.scenes_processed},
            {"detections", std::move(dets)},
            {"failures", std::move(failures)}};
}

void write_digest(const Digest& digest, const std::string& path) {
    std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write digest " + path);
    out << digest_json(digest).dump(2) << "\n";
    if (!out) throw IoError("failed writing digest " + path);
}

}  // namespace plumescout
