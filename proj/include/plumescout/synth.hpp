#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "plumescout/cube.hpp"
#include "plumescout/signatures.hpp"

namespace plumescout {
namespace synth {

// Deterministic normal source: mt19937_64 engine, uniforms u = (x >> 11) * 2^-53,
// Box-Muller pairs (r cos θ, r sin θ) with r = sqrt(-2 ln(1-u1)), θ = 2π u2.
// The second value of each pair is cached, so normals are consumed in strict
// generation order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform();  // [0, 1)
    double normal();

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct PlumeSpec {
    double row = 0.0;
    double col = 0.0;
    double wind_dir = 0.0;     // radians, plume elongation direction
    double stretch = 6.0;      // along-wind sigma, px (across-wind = stretch/3, >= 1 px)
    double peak_alpha = 0.0;   // ppm·m
    GasId gas = GasId::CH4;
};

// Flat multiplicative albedo perturbation (1 + amplitude) over a disk.
struct ClutterSpec {
    double row = 0.0;
    double col = 0.0;
    double radius = 4.0;    // px, Euclidean
    double amplitude = 0.0; // relative; negative darkens
};

struct BackgroundSpec {
    std::vector<double> albedos = {1.0};  // one entry per class
    std::string class_layout = "single";  // single | halves | blocks:<k>
    double cov_amp = 0.02;                // relative band-noise amplitude
    double cov_rho = 0.9;                 // AR(1) band-to-band correlation
    double stripe_amp = 0.0;              // per-column gain stddev
};

struct SceneSpec {
    std::size_t rows = 64;
    std::size_t cols = 64;
    std::size_t bands = 50;
    double wl_min = 381.0;
    double wl_max = 2493.0;
    std::vector<double> wavelengths;      // explicit grid; overrides wl_min/max when set
    BackgroundSpec background;
    std::vector<ClutterSpec> clutter;
    std::vector<PlumeSpec> plumes;
    double noise_sigma = 0.0;             // additive radiance noise stddev
    std::uint64_t seed = 0;
    double alpha_cutoff = 1.0;            // ppm·m; field below this is zeroed
    std::vector<int> bad_bands;

    WavelengthGrid make_grid() const;
    void validate() const;
};

// Everything the generator knows, kept for oracle checks.
struct SceneTruth {
    std::size_t rows = 0, cols = 0;
    std::map<GasId, std::vector<double>> alpha_fields;    // row-major, ppm·m
    std::vector<std::vector<std::uint8_t>> plume_masks;   // one per plume
    std::vector<std::uint8_t> clutter_mask;
    std::vector<int> class_map;
    std::vector<double> stripe;                           // per column gain factor s_c
    std::vector<Eigen::VectorXd> class_means;             // per class, per band
    std::vector<Eigen::MatrixXd> class_cov_factors;       // F_c: bands x bands
    double noise_sigma = 0.0;

    const std::vector<double>& alpha_field(GasId gas) const;
    std::vector<std::uint8_t> plume_mask_union(GasId gas) const;  // alpha > 0
};

struct SceneData {
    SpectralCube cube;
    SceneTruth truth;
};

// Forward model, fully determined by the spec:
//   background = m_class ⊙ (1 + s_col) + F_class · z
//   radiance   = background · (1 + clutter) · Π_gas exp(-alpha_gas · k_gas)
//   cube       = radiance + noise_sigma · n        (skipped when sigma = 0)
// Draw order: one stripe normal per column, then per pixel in raster order a
// bands-length z vector, then (when sigma > 0) a second raster pass of
// per-band noise normals.
SceneData generate(const SceneSpec& spec, const std::map<GasId, GasTarget>& targets);

// Reference per-pixel mixing-ratio length from generalized least squares with
// the generator's true statistics (mean with stripe, covariance F·Fᵀ + σ²I).
// NaN on invalid pixels.
std::vector<double> oracle_mf(const SpectralCube& cube, const SceneTruth& truth,
                              const GasTarget& target, const std::vector<int>& band_set);

// Smooth positive continuum used for all class means (scaled by albedo).
double base_continuum(double wl_nm);

// "key = value" scene description; `plume` and `clutter` lines repeat:
//   plume = row col wind_dir stretch peak_alpha gas
//   clutter = row col radius amplitude
SceneSpec load_scene_spec(const std::string& path);

// Writes scene.hdr/.dat plus truth rasters (alpha_<gas>, class_map,
// plume_mask, clutter_mask) under `out_dir`.
void write_scene(const SceneData& scene, const std::string& out_dir);

}  // namespace synth
}  // namespace plumescout
