#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "plumescout/matched_filter.hpp"

namespace plumescout {

struct ScoreMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major, in [0, 1]
    std::string source = "builtin";  // builtin | external
    GasId gas = GasId::CH4;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    void validate() const;
};

struct ProposerParams {
    double base_threshold = 0.5;
    int min_component_px = 5;       // k for the confidence statistic
    double logistic_center = 500.0; // ppm·m (builtin proposer)
    double logistic_scale = 200.0;  // ppm·m

    static ProposerParams defaults_for(const GasConfig& cfg);
};

// Closed vertex ring in (col, row) pixel-corner coordinates; exterior rings
// have positive shoelace area, holes negative.
using Ring = std::vector<std::pair<double, double>>;

struct PlumeCandidate {
    std::vector<std::pair<int, int>> pixels;  // (row, col), raster order
    double confidence = 0.0;
    std::vector<Ring> outline;  // [0] exterior, rest holes
    int size_px = 0;
    std::pair<double, double> centroid{0.0, 0.0};  // (row, col)
    std::string scene_id;
    GasId gas = GasId::CH4;
};

// 8-connected components of {value >= base_threshold}. Confidence is the
// k-th highest value inside the component (k = min_component_px; the whole
// component's minimum when it is smaller) — the tightest threshold that
// still keeps k of its pixels. Output ordered by (confidence desc,
// centroid row, centroid col).
std::vector<PlumeCandidate> extract_candidates(const ScoreMap& map, const ProposerParams& params);

// logistic((alpha - center)/scale); invalid pixels score 0.
ScoreMap builtin_proposer(const EnhancementMap& map, const ProposerParams& params);

// Keeps candidates strictly larger than min_px; order preserved.
std::vector<PlumeCandidate> filter_by_size(std::vector<PlumeCandidate> cands, int min_px);

// Single-band raster in [0, 1] (nodata reads as 0) with matching dimensions.
ScoreMap import_mask(const std::string& path, std::size_t rows, std::size_t cols);

SpectralCube score_map_to_cube(const ScoreMap& map);

// Pixel-boundary outline of an 8-connected pixel set: exterior ring first
// (positive area), then holes. Corner-touching lobes share a pinch vertex in
// one self-touching exterior ring.
std::vector<Ring> trace_outline(const std::vector<std::pair<int, int>>& pixels);

double ring_signed_area(const Ring& ring);

nlohmann::json candidates_geojson(const std::vector<PlumeCandidate>& cands);

}  // namespace plumescout
