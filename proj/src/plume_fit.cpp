#include "plumescout/plume_fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_set>

#include "plumescout/errors.hpp"
#include "plumescout/jsonfmt.hpp"

namespace plumescout {

namespace {

std::int64_t pix_key(int r, int c) {
    return (static_cast<std::int64_t>(r) << 32) | static_cast<std::uint32_t>(c);
}

// Least-squares continuum given the absorption scale; returns the L2 cost.
struct ContinuumSolve {
    Eigen::VectorXd coeffs;
    Eigen::VectorXd model;
    double cost = 0.0;
};

ContinuumSolve solve_continuum(const Eigen::VectorXd& t, const Eigen::MatrixXd& poly_basis,
                               const Eigen::VectorXd& attenuation) {
    Eigen::MatrixXd design = attenuation.asDiagonal() * poly_basis;
    ContinuumSolve s;
    s.coeffs = design.colPivHouseholderQr().solve(t);
    s.model = design * s.coeffs;
    s.cost = (t - s.model).squaredNorm();
    return s;
}

}  // namespace

std::vector<std::pair<int, int>> select_in_plume(const PlumeCandidate& cand,
                                                 const EnhancementMap& emap, int n) {
    if (cand.pixels.empty()) return {};
    if (n < 1) throw ConfigError("in-plume point count must be >= 1");

    auto alpha_of = [&emap](const std::pair<int, int>& p) {
        double a = emap.at(static_cast<std::size_t>(p.first), static_cast<std::size_t>(p.second));
        return std::isfinite(a) ? a : -std::numeric_limits<double>::infinity();
    };

    // Candidate pixels by descending alpha, raster-order tie-break.
    std::vector<std::pair<int, int>> ordered = cand.pixels;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [&](const auto& a, const auto& b) { return alpha_of(a) > alpha_of(b); });

    std::unordered_set<std::int64_t> in_cand;
    for (const auto& [r, c] : cand.pixels) in_cand.insert(pix_key(r, c));

    std::unordered_set<std::int64_t> selected;
    std::vector<std::pair<int, int>> selected_px;
    for (const auto& seed : ordered) {
        if (static_cast<int>(selected.size()) >= n) break;
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                int r = seed.first + dr, c = seed.second + dc;
                if (!in_cand.count(pix_key(r, c))) continue;
                if (selected.insert(pix_key(r, c)).second) selected_px.emplace_back(r, c);
            }
        }
    }

    std::stable_sort(selected_px.begin(), selected_px.end(), [&](const auto& a, const auto& b) {
        double aa = alpha_of(a), ab = alpha_of(b);
        if (aa != ab) return aa > ab;
        return a < b;
    });
    if (static_cast<int>(selected_px.size()) > n) selected_px.resize(static_cast<std::size_t>(n));
    return selected_px;
}

std::vector<SpectrumPair> pair_background(const std::vector<std::pair<int, int>>& in_pixels,
                                          const PlumeCandidate& cand, const SpectralCube& cube,
                                          const EnhancementMap& emap, const GasConfig& cfg,
                                          const std::vector<int>& out_band_indices) {
    if (out_band_indices.empty()) throw ConfigError("out-band index set is empty");
    const int rows = static_cast<int>(cube.rows), cols = static_cast<int>(cube.cols);

    // Exclusion zone: candidate pixels dilated by the buffer (Chebyshev).
    std::vector<std::uint8_t> excluded(cube.rows * cube.cols, 0);
    const int buf = cfg.exclusion_buffer;
    for (const auto& [pr, pc] : cand.pixels) {
        for (int r = std::max(0, pr - buf); r <= std::min(rows - 1, pr + buf); ++r)
            for (int c = std::max(0, pc - buf); c <= std::min(cols - 1, pc + buf); ++c)
                excluded[static_cast<std::size_t>(r) * cube.cols + static_cast<std::size_t>(c)] = 1;
    }

    // Eligible background pixels with unit-normalized out-band spectra.
    std::vector<std::uint8_t> eligible(cube.rows * cube.cols, 0);
    std::vector<double> norm_spectra(cube.rows * cube.cols * out_band_indices.size());
    int n_eligible = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            std::size_t idx = static_cast<std::size_t>(r) * cube.cols + static_cast<std::size_t>(c);
            if (excluded[idx]) continue;
            double a = emap.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
            if (!std::isfinite(a) || !(a < cfg.mf_background_threshold)) continue;
            double norm2 = 0.0;
            bool ok = true;
            for (std::size_t i = 0; i < out_band_indices.size(); ++i) {
                double v = cube.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c),
                                   static_cast<std::size_t>(out_band_indices[i]));
                if (!std::isfinite(v) || v == cube.nodata) {
                    ok = false;
                    break;
                }
                norm_spectra[idx * out_band_indices.size() + i] = v;
                norm2 += v * v;
            }
            if (!ok || norm2 <= 0.0) continue;
            double inv = 1.0 / std::sqrt(norm2);
            for (std::size_t i = 0; i < out_band_indices.size(); ++i)
                norm_spectra[idx * out_band_indices.size() + i] *= inv;
            eligible[idx] = 1;
            ++n_eligible;
        }
    }

    std::vector<SpectrumPair> pairs;
    if (n_eligible == 0) return pairs;

    std::vector<double> probe(out_band_indices.size());
    for (const auto& [pr, pc] : in_pixels) {
        double norm2 = 0.0;
        bool ok = true;
        for (std::size_t i = 0; i < out_band_indices.size(); ++i) {
            double v = cube.at(static_cast<std::size_t>(pr), static_cast<std::size_t>(pc),
                               static_cast<std::size_t>(out_band_indices[i]));
            if (!std::isfinite(v) || v == cube.nodata) {
                ok = false;
                break;
            }
            probe[i] = v;
            norm2 += v * v;
        }
        if (!ok || norm2 <= 0.0) continue;
        double inv = 1.0 / std::sqrt(norm2);
        for (double& v : probe) v *= inv;

        double best_sim = -2.0;
        int best_r = -1, best_c = -1;
        const int rad = cfg.pair_search_radius;
        for (int r = std::max(0, pr - rad); r <= std::min(rows - 1, pr + rad); ++r) {
            for (int c = std::max(0, pc - rad); c <= std::min(cols - 1, pc + rad); ++c) {
                std::size_t idx = static_cast<std::size_t>(r) * cube.cols + static_cast<std::size_t>(c);
                if (!eligible[idx]) continue;
                const double* bg = &norm_spectra[idx * out_band_indices.size()];
                double sim = 0.0;
                for (std::size_t i = 0; i < out_band_indices.size(); ++i) sim += probe[i] * bg[i];
                if (sim > best_sim) {
                    best_sim = sim;
                    best_r = r;
                    best_c = c;
                }
            }
        }
        if (best_r < 0 || best_sim < cfg.pair_min_similarity) continue;
        SpectrumPair pair;
        pair.in_pixel = {pr, pc};
        pair.bg_pixel = {best_r, best_c};
        pair.similarity = best_sim;
        pair.in_alpha = emap.at(static_cast<std::size_t>(pr), static_cast<std::size_t>(pc));
        pair.bg_alpha = emap.at(static_cast<std::size_t>(best_r), static_cast<std::size_t>(best_c));
        pairs.push_back(pair);
    }
    return pairs;
}

TransmittanceCurve transmittance(const std::vector<SpectrumPair>& pairs, const SpectralCube& cube,
                                 const std::vector<int>& window_indices, int min_pairs) {
    if (static_cast<int>(pairs.size()) < min_pairs)
        throw NumericError("only " + std::to_string(pairs.size()) + " spectrum pairs; need >= " +
                           std::to_string(min_pairs));
    if (window_indices.empty()) throw ConfigError("window index set is empty");

    TransmittanceCurve curve;
    curve.n_pairs = static_cast<int>(pairs.size());
    for (int b : window_indices) {
        double in_sum = 0.0, bg_sum = 0.0;
        for (const auto& p : pairs) {
            in_sum += cube.at(static_cast<std::size_t>(p.in_pixel.first),
                              static_cast<std::size_t>(p.in_pixel.second), static_cast<std::size_t>(b));
            bg_sum += cube.at(static_cast<std::size_t>(p.bg_pixel.first),
                              static_cast<std::size_t>(p.bg_pixel.second), static_cast<std::size_t>(b));
        }
        if (!(bg_sum > 0.0) || !(in_sum > 0.0)) continue;  // drop degenerate bands
        curve.band_indices.push_back(b);
        curve.wavelengths.push_back(cube.grid.centers[static_cast<std::size_t>(b)]);
        curve.values.push_back(in_sum / bg_sum);
    }
    if (curve.values.empty()) throw NumericError("every window band dropped (non-positive means)");
    return curve;
}

WindowFit fit_window(const TransmittanceCurve& curve, const std::vector<double>& k_full,
                     const FitOptions& opts) {
    const int nb = static_cast<int>(curve.values.size());
    if (nb < opts.degree + 3)
        throw NumericError("window has " + std::to_string(nb) + " bands; need >= " +
                           std::to_string(opts.degree + 3));
    if (opts.alpha_max <= 0 || opts.alpha_tol <= 0) throw ConfigError("bad alpha search bounds");

    Eigen::VectorXd t(nb), k(nb);
    for (int i = 0; i < nb; ++i) {
        t[i] = curve.values[static_cast<std::size_t>(i)];
        k[i] = k_full[static_cast<std::size_t>(curve.band_indices[static_cast<std::size_t>(i)])];
    }

    // Polynomial basis in wavelength normalized to [-1, 1].
    const double wl_lo = curve.wavelengths.front(), wl_hi = curve.wavelengths.back();
    const double span = std::max(wl_hi - wl_lo, 1e-9);
    Eigen::MatrixXd basis(nb, opts.degree + 1);
    for (int i = 0; i < nb; ++i) {
        double u = 2.0 * (curve.wavelengths[static_cast<std::size_t>(i)] - wl_lo) / span - 1.0;
        double p = 1.0;
        for (int j = 0; j <= opts.degree; ++j) {
            basis(i, j) = p;
            p *= u;
        }
    }

    auto cost_at = [&](double a) {
        Eigen::VectorXd att = (-a * k.array()).exp();
        return solve_continuum(t, basis, att).cost;
    };

    // Golden-section on [0, alpha_max]; the continuum is re-solved per probe.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = opts.alpha_max;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = cost_at(x1), f2 = cost_at(x2);
    int iters = 0;
    while (hi - lo > opts.alpha_tol && iters < opts.max_iters) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = cost_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = cost_at(x2);
        }
        ++iters;
    }
    if (hi - lo > opts.alpha_tol)
        throw NumericError("absorption search did not converge within iteration budget");
    double a = 0.5 * (lo + hi);
    // Snap to the boundary when the bracket pins it.
    if (lo == 0.0 && f1 >= cost_at(0.0)) a = 0.0;

    Eigen::VectorXd att = (-a * k.array()).exp();
    ContinuumSolve fit = solve_continuum(t, basis, att);

    WindowFit w;
    w.window = {wl_lo, wl_hi};
    w.alpha_fit = a;
    w.n_bands = nb;
    w.continuum_coeffs.assign(fit.coeffs.data(), fit.coeffs.data() + fit.coeffs.size());
    w.model_curve.assign(fit.model.data(), fit.model.data() + fit.model.size());
    Eigen::VectorXd resid = t - fit.model;
    w.residual_curve.assign(resid.data(), resid.data() + resid.size());

    double mae = resid.cwiseAbs().mean();
    Eigen::VectorXd continuum = basis * fit.coeffs;
    double depth = std::abs(continuum.mean()) * (1.0 - (-a * k.array()).exp()).maxCoeff();
    w.depth = depth;
    w.dnorm = mae / std::max(depth, opts.depth_floor);
    return w;
}

FitReport score_candidate(const PlumeCandidate& cand, const SpectralCube& cube,
                          const EnhancementMap& emap, const GasTarget& target,
                          const GasConfig& cfg) {
    if (cube.rows != emap.rows || cube.cols != emap.cols)
        throw ConfigError("cube and enhancement map dimensions differ");
    if (target.gas != cfg.gas) throw ConfigError("target gas does not match config gas");

    FitReport report;
    report.gas = cfg.gas;

    FitWindowSet windows = resolve_windows(cfg, cube.grid, cube.bad_bands);

    auto in_pixels = select_in_plume(cand, emap, cfg.pair_points);
    report.pairing.n_in = static_cast<int>(in_pixels.size());
    auto pairs = pair_background(in_pixels, cand, cube, emap, cfg, windows.out_set);
    report.pairing.n_pairs = static_cast<int>(pairs.size());
    if (!pairs.empty()) {
        double s = 0.0;
        for (const auto& p : pairs) s += p.similarity;
        report.pairing.mean_similarity = s / static_cast<double>(pairs.size());
    }
    if (static_cast<int>(pairs.size()) < cfg.min_pairs) {
        report.fittable = false;
        report.failure_reason = pairs.empty() ? "insufficient eligible background"
                                              : "too few spectrum pairs";
        report.dnorm_combined = std::numeric_limits<double>::infinity();
        return report;
    }

    FitOptions opts;
    opts.degree = cfg.continuum_degree;
    opts.alpha_max = cfg.alpha_max;
    opts.alpha_tol = cfg.alpha_tol;
    opts.max_iters = cfg.max_fit_iters;
    opts.depth_floor = cfg.depth_floor;

    double dnorm_product = 1.0;
    double alpha_wsum = 0.0, weight_sum = 0.0, alpha_plain = 0.0;
    for (const auto& in_set : windows.in_sets) {
        TransmittanceCurve curve = transmittance(pairs, cube, in_set, cfg.min_pairs);
        WindowFit w = fit_window(curve, target.k_coeffs, opts);
        dnorm_product *= w.dnorm;
        alpha_wsum += w.depth * w.alpha_fit;
        weight_sum += w.depth;
        alpha_plain += w.alpha_fit;
        report.per_window.push_back(std::move(w));
        report.curves.push_back(std::move(curve));
    }
    report.fittable = true;
    report.dnorm_combined = dnorm_product;
    report.alpha_combined = weight_sum > 0.0
                                ? alpha_wsum / weight_sum
                                : alpha_plain / static_cast<double>(report.per_window.size());
    return report;
}

nlohmann::json fit_report_json(const FitReport& report) {
    nlohmann::json per_window = nlohmann::json::array();
    for (const auto& w : report.per_window) {
        nlohmann::json coeffs = nlohmann::json::array();
        for (double c : w.continuum_coeffs) coeffs.push_back(json_num(c));
        per_window.push_back({{"window", {json_num(w.window.lo), json_num(w.window.hi)}},
                              {"dnorm", json_num(w.dnorm)},
                              {"alpha_fit", json_num(w.alpha_fit)},
                              {"continuum_coeffs", std::move(coeffs)},
                              {"depth", json_num(w.depth)},
                              {"n_bands", w.n_bands}});
    }
    return {{"schema_version", 1},
            {"gas", gas_name(report.gas)},
            {"fittable", report.fittable},
            {"failure_reason", report.failure_reason},
            {"per_window", std::move(per_window)},
            {"dnorm_combined", json_num(report.dnorm_combined)},
            {"alpha_combined", json_num(report.alpha_combined)},
            {"pairing",
             {{"n_in", report.pairing.n_in},
              {"n_pairs", report.pairing.n_pairs},
              {"mean_similarity", json_num(report.pairing.mean_similarity)}}}};
}

void write_curve(const std::string& path, const std::vector<double>& wavelengths,
                 const std::vector<double>& values) {
    if (wavelengths.size() != values.size()) throw ConfigError("curve length mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write curve " + path);
    out.precision(10);
    for (std::size_t i = 0; i < wavelengths.size(); ++i)
        out << wavelengths[i] << " " << values[i] << "\n";
    if (!out) throw IoError("failed writing curve " + path);
}

}  // namespace plumescout
