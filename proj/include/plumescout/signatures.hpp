#pragma once

#include <map>
#include <string>
#include <vector>

#include "plumescout/cube.hpp"

namespace plumescout {

enum class GasId { CH4, NH3, NO2, CO };

GasId parse_gas(const std::string& name);  // throws ConfigError on unknown gas
const char* gas_name(GasId gas);
double molar_mass_g_mol(GasId gas);

// Per-gas spectra resampled onto a wavelength grid.
//   unit_absorption: relative radiance change per ppm·m (thin-plume slope,
//                    equals -k for a pure Beer-Lambert absorber)
//   k_coeffs:        optical depth per ppm·m, >= 0
struct GasTarget {
    GasId gas = GasId::CH4;
    std::vector<double> unit_absorption;
    std::vector<double> k_coeffs;
};

// Scoring configuration. Window defaults follow the per-gas vetting table;
// dnorm thresholds, pairing and fit parameters are calibration-dependent and
// overridable through the text config.
struct GasConfig {
    GasId gas = GasId::CH4;
    std::vector<BandWindow> in_band;
    std::vector<BandWindow> out_band;
    BandWindow wide_window;
    double mf_background_threshold = 30.0;  // ppm·m
    int min_candidate_pixels = 25;          // size filter, strict ">"
    double dnorm_high = 0.3;
    double dnorm_low = 0.5;

    // Spectral fit.
    int continuum_degree = 2;
    double depth_floor = 0.01;
    double alpha_max = 50000.0;  // ppm·m
    double alpha_tol = 1e-5;     // ppm·m, outer search bracket tolerance
    int max_fit_iters = 200;

    // Background pairing.
    double pair_min_similarity = 0.995;
    int pair_search_radius = 150;  // px, Chebyshev
    int pair_points = 40;
    int min_pairs = 5;
    int exclusion_buffer = 2;  // px around the candidate

    // Matched filter.
    double shrinkage = 0.02;
    double diag_floor_rel = 0.0;

    // Builtin proposer logistic.
    double proposer_center = 500.0;  // ppm·m
    double proposer_scale = 200.0;   // ppm·m

    void validate() const;
};

GasConfig default_config(GasId gas);

// Applies "key = value" overrides from a text file onto the gas's defaults.
// Recognized keys match the field names; windows are "lo:hi" lists, e.g.
//   in_band = 2100:2440
//   out_band = 381:1633, 1692:2094, 2441:2493
GasConfig load_gas_config(const std::string& path);

// Loads target spectra from a two-column text file (wavelength_nm value per
// line) and resamples them linearly onto `grid`; bands outside the sampled
// range are set to 0. Sections "[unit_absorption]" and "[k]" separate the two
// spectra; a headerless table is taken as k with unit_absorption = -k.
// Throws ConfigError when fewer than 3 samples overlap the grid range.
GasTarget load_target(const std::string& path, const WavelengthGrid& grid);

// Synthetic smooth line-shape targets used when no measured spectrum is
// supplied; placeholders with plausible band positions and magnitudes.
GasTarget builtin_target(GasId gas, const WavelengthGrid& grid);

// Linear resampling helper shared by load_target/builtin_target.
std::vector<double> resample_linear(const std::vector<double>& wl,
                                    const std::vector<double>& values,
                                    const WavelengthGrid& grid);

// Window sets resolved to band indices on a concrete grid. In-band sets take
// priority: a band landing in both an in and an out window resolves in-band
// only, keeping the sets disjoint.
struct FitWindowSet {
    std::vector<std::vector<int>> in_sets;  // one per in_band window, each >= 3 bands
    std::vector<int> out_set;               // union over out_band windows, nonempty
};

FitWindowSet resolve_windows(const GasConfig& cfg, const WavelengthGrid& grid,
                             const std::vector<std::uint8_t>& bad_bands);

}  // namespace plumescout
