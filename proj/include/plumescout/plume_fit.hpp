#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "plumescout/candidates.hpp"

namespace plumescout {

struct SpectrumPair {
    std::pair<int, int> in_pixel;
    std::pair<int, int> bg_pixel;
    double similarity = 0.0;  // cosine over out-band bands
    double in_alpha = 0.0;
    double bg_alpha = 0.0;
};

struct TransmittanceCurve {
    std::vector<double> wavelengths;
    std::vector<double> values;
    std::vector<int> band_indices;  // bands retained after drops
    int n_pairs = 0;
};

struct WindowFit {
    BandWindow window;
    double dnorm = 0.0;
    double alpha_fit = 0.0;           // ppm·m
    std::vector<double> continuum_coeffs;  // in normalized wavelength
    std::vector<double> residual_curve;
    std::vector<double> model_curve;
    double depth = 0.0;               // modeled absorption amplitude before flooring
    int n_bands = 0;
};

struct PairingDiagnostics {
    int n_in = 0;
    int n_pairs = 0;
    int n_eligible_bg = 0;
    double mean_similarity = 0.0;
};

struct FitReport {
    GasId gas = GasId::CH4;
    bool fittable = false;
    std::string failure_reason;
    std::vector<WindowFit> per_window;
    std::vector<TransmittanceCurve> curves;  // parallel to per_window
    double dnorm_combined = 0.0;  // product over windows
    double alpha_combined = 0.0;  // depth-weighted mean of per-window alpha
    PairingDiagnostics pairing;
};

// Highest-alpha seed pixels inside the candidate, each grown by its
// in-candidate 8-neighborhood, until n points are covered; the union is
// truncated to the n highest-alpha members (raster-order tie-break).
std::vector<std::pair<int, int>> select_in_plume(const PlumeCandidate& cand,
                                                 const EnhancementMap& emap, int n = 40);

// For each in-plume pixel, the most spectrally similar background pixel
// within the search radius: outside the candidate plus an exclusion buffer,
// enhancement strictly below the background threshold, cosine similarity on
// the out-band bands at or above the pairing threshold. A background pixel
// may serve several in-plume pixels.
std::vector<SpectrumPair> pair_background(const std::vector<std::pair<int, int>>& in_pixels,
                                          const PlumeCandidate& cand, const SpectralCube& cube,
                                          const EnhancementMap& emap, const GasConfig& cfg,
                                          const std::vector<int>& out_band_indices);

// Mean in-plume over mean background radiance per band, restricted to the
// window; bands whose means are non-positive are dropped. Throws
// NumericError with < min_pairs pairs or when every band drops.
TransmittanceCurve transmittance(const std::vector<SpectrumPair>& pairs, const SpectralCube& cube,
                                 const std::vector<int>& window_indices, int min_pairs = 5);

struct FitOptions {
    int degree = 2;
    double alpha_max = 50000.0;
    double alpha_tol = 1e-5;
    int max_iters = 200;
    double depth_floor = 0.01;
};

// Fits T(wl) = P(wl) * exp(-a k(wl)): golden-section search on a with the
// continuum solved in closed form at each step (L2 objective); dnorm is the
// mean absolute residual over the modeled absorption depth (floored).
WindowFit fit_window(const TransmittanceCurve& curve, const std::vector<double>& k_full,
                     const FitOptions& opts);

// Full vetting chain for one candidate; pairing failures yield an unfittable
// report (fittable = false, reason set) rather than an exception.
FitReport score_candidate(const PlumeCandidate& cand, const SpectralCube& cube,
                          const EnhancementMap& emap, const GasTarget& target,
                          const GasConfig& cfg);

nlohmann::json fit_report_json(const FitReport& report);

// Two-column text (wavelength value) for plotting.
void write_curve(const std::string& path, const std::vector<double>& wavelengths,
                 const std::vector<double>& values);

}  // namespace plumescout
