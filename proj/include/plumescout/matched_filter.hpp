#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "plumescout/cube.hpp"
#include "plumescout/signatures.hpp"

namespace plumescout {

enum class MfVariant { CMF, WMF };

MfVariant parse_variant(const std::string& name);
const char* variant_name(MfVariant v);

// Background statistics per column group. CMF uses one group per detector
// column; WMF a single scene-wide group. Groups with fewer than `min_pixels`
// valid samples fall back to the scene-wide statistics.
struct ColumnStats {
    MfVariant variant = MfVariant::WMF;
    std::size_t group_width = 0;  // columns per group; cols for WMF
    double shrinkage = 0.0;
    std::vector<Eigen::VectorXd> mean;      // per group
    std::vector<Eigen::MatrixXd> cov;       // per group, after shrinkage
    std::vector<int> pixel_count;           // per group
    std::vector<std::uint8_t> fallback;     // 1 = group used scene-wide stats

    std::size_t group_of(std::size_t col) const { return col / group_width; }
};

struct ColumnStatsOptions {
    int min_pixels = 10;
    double diag_floor_rel = 0.0;  // floor on diagonal, relative to mean diagonal
    std::optional<std::size_t> group_width;  // override (1 = per column)
};

// Sample mean and covariance (1/N normalization) over valid pixels,
// shrunk toward the diagonal: cov = (1-s)*S + s*diag(S). Deterministic
// two-pass accumulation in raster order. Throws NumericError when a usable
// group is non-positive-definite or the scene has too few valid pixels.
ColumnStats column_stats(const SpectralCube& cube, const std::vector<int>& band_set,
                         MfVariant variant, double shrinkage = 0.02,
                         const ColumnStatsOptions& opts = {});

// Per-pixel mixing-ratio length estimate (ppm·m). NaN marks nodata pixels.
struct EnhancementMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> alpha;  // row-major
    MfVariant variant = MfVariant::WMF;
    GasId gas = GasId::CH4;
    std::vector<int> band_set;

    double at(std::size_t r, std::size_t c) const { return alpha[r * cols + c]; }
    bool valid(std::size_t r, std::size_t c) const { return std::isfinite(at(r, c)); }

    // Single-band raster (product = enhancement) carrying variant/gas/band-set
    // header metadata; NaN becomes the nodata sentinel.
    SpectralCube to_cube() const;
};

EnhancementMap enhancement_from_cube(const SpectralCube& raster);

// alpha(x) = t'S^-1(x-mu) / (t'S^-1 t) per pixel, with t the unit-absorption
// spectrum scaled by the group's mean radiance (so alpha is a mixing-ratio
// length, invariant to global gain).
EnhancementMap apply_mf(const SpectralCube& cube, const GasTarget& target,
                        const ColumnStats& stats, const std::vector<int>& band_set);

// Bands of the configured wide spectral range minus bad bands; errors when
// the grid leaves it empty.
std::vector<int> wide_window_band_set(const GasConfig& cfg, const SpectralCube& cube);

// Removes bands falling in any exclusion window (used to test confounder
// overlap by knocking out shared spectral regions).
std::vector<int> apply_band_exclusions(const std::vector<int>& band_set,
                                       const WavelengthGrid& grid,
                                       const std::vector<BandWindow>& exclude);

}  // namespace plumescout
