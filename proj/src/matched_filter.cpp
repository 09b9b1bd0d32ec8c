#include "plumescout/matched_filter.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "plumescout/errors.hpp"

namespace plumescout {

namespace {

bool pixel_valid_on(const SpectralCube& cube, std::size_t r, std::size_t c,
                    const std::vector<int>& band_set) {
    for (int b : band_set) {
        double v = cube.at(r, c, static_cast<std::size_t>(b));
        if (!std::isfinite(v) || v == cube.nodata) return false;
    }
    return true;
}

void check_band_set(const SpectralCube& cube, const std::vector<int>& band_set) {
    if (band_set.empty()) throw ConfigError("band set is empty");
    for (int b : band_set)
        if (b < 0 || b >= static_cast<int>(cube.bands))
            throw ConfigError("band index " + std::to_string(b) + " out of range");
}

struct GroupAccum {
    Eigen::VectorXd sum;
    Eigen::MatrixXd sq;
    int count = 0;
};

Eigen::MatrixXd shrink(const Eigen::MatrixXd& sample, double s, double diag_floor_rel) {
    Eigen::MatrixXd cov = (1.0 - s) * sample;
    cov.diagonal() += s * sample.diagonal();
    if (diag_floor_rel > 0.0) {
        double mean_diag = sample.diagonal().mean();
        double floor = diag_floor_rel * mean_diag;
        for (Eigen::Index i = 0; i < cov.rows(); ++i)
            cov(i, i) = std::max(cov(i, i), floor);
    }
    return cov;
}

void require_pd(const Eigen::MatrixXd& cov, const std::string& what) {
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        if (!(cov(i, i) > 0.0))
            throw NumericError(what + " covariance has a non-positive diagonal (constant band?)");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericError(what + " covariance is not positive definite after shrinkage");
}

}  // namespace

MfVariant parse_variant(const std::string& name) {
    std::string lo;
    for (char c : name) lo.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lo == "cmf") return MfVariant::CMF;
    if (lo == "wmf") return MfVariant::WMF;
    throw ConfigError("unknown matched-filter variant '" + name + "' (cmf or wmf)");
}

const char* variant_name(MfVariant v) { return v == MfVariant::CMF ? "cmf" : "wmf"; }

ColumnStats column_stats(const SpectralCube& cube, const std::vector<int>& band_set,
                         MfVariant variant, double shrinkage, const ColumnStatsOptions& opts) {
    cube.validate();
    check_band_set(cube, band_set);
    if (shrinkage < 0.0 || shrinkage > 1.0) throw ConfigError("shrinkage must be in [0, 1]");

    const std::size_t nb = band_set.size();
    std::size_t group_width = opts.group_width.value_or(variant == MfVariant::CMF ? 1 : cube.cols);
    if (group_width == 0 || group_width > cube.cols) group_width = cube.cols;
    const std::size_t ngroups = (cube.cols + group_width - 1) / group_width;

    std::vector<GroupAccum> acc(ngroups);
    for (auto& a : acc) {
        a.sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
        a.sq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));
    }
    GroupAccum global;
    global.sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
    global.sq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));

    // Pass 1: means, fixed raster order.
    Eigen::VectorXd x(static_cast<Eigen::Index>(nb));
    for (std::size_t r = 0; r < cube.rows; ++r) {
        for (std::size_t c = 0; c < cube.cols; ++c) {
            if (!pixel_valid_on(cube, r, c, band_set)) continue;
            for (std::size_t i = 0; i < nb; ++i)
                x[static_cast<Eigen::Index>(i)] = cube.at(r, c, static_cast<std::size_t>(band_set[i]));
            auto& a = acc[c / group_width];
            a.sum += x;
            a.count += 1;
            global.sum += x;
            global.count += 1;
        }
    }
    if (global.count < opts.min_pixels)
        throw NumericError("scene has only " + std::to_string(global.count) +
                           " valid pixels; need >= " + std::to_string(opts.min_pixels));

    Eigen::VectorXd global_mean = global.sum / global.count;
    std::vector<Eigen::VectorXd> group_mean(ngroups);
    for (std::size_t g = 0; g < ngroups; ++g)
        group_mean[g] = acc[g].count >= opts.min_pixels ? (acc[g].sum / acc[g].count).eval()
                                                        : global_mean;

    // Pass 2: scatter about the applicable mean.
    for (std::size_t r = 0; r < cube.rows; ++r) {
        for (std::size_t c = 0; c < cube.cols; ++c) {
            if (!pixel_valid_on(cube, r, c, band_set)) continue;
            for (std::size_t i = 0; i < nb; ++i)
                x[static_cast<Eigen::Index>(i)] = cube.at(r, c, static_cast<std::size_t>(band_set[i]));
            std::size_t g = c / group_width;
            Eigen::VectorXd dg = x - group_mean[g];
            acc[g].sq.selfadjointView<Eigen::Lower>().rankUpdate(dg);
            Eigen::VectorXd dglob = x - global_mean;
            global.sq.selfadjointView<Eigen::Lower>().rankUpdate(dglob);
        }
    }

    Eigen::MatrixXd global_cov =
        shrink(Eigen::MatrixXd(global.sq.selfadjointView<Eigen::Lower>()) / global.count,
               shrinkage, opts.diag_floor_rel);
    require_pd(global_cov, "scene");

    ColumnStats stats;
    stats.variant = variant;
    stats.group_width = group_width;
    stats.shrinkage = shrinkage;
    stats.mean.resize(ngroups);
    stats.cov.resize(ngroups);
    stats.pixel_count.resize(ngroups);
    stats.fallback.resize(ngroups, 0);
    for (std::size_t g = 0; g < ngroups; ++g) {
        if (acc[g].count >= opts.min_pixels) {
            stats.mean[g] = group_mean[g];
            stats.cov[g] = shrink(
                Eigen::MatrixXd(acc[g].sq.selfadjointView<Eigen::Lower>()) / acc[g].count,
                shrinkage, opts.diag_floor_rel);
            stats.pixel_count[g] = acc[g].count;
            std::ostringstream what;
            what << "column group " << g;
            require_pd(stats.cov[g], what.str());
        } else {
            stats.mean[g] = global_mean;
            stats.cov[g] = global_cov;
            stats.pixel_count[g] = global.count;
            stats.fallback[g] = 1;
        }
    }
    return stats;
}

EnhancementMap apply_mf(const SpectralCube& cube, const GasTarget& target,
                        const ColumnStats& stats, const std::vector<int>& band_set) {
    check_band_set(cube, band_set);
    if (target.unit_absorption.size() != cube.bands)
        throw ConfigError("target spectrum length does not match cube bands");
    if (stats.mean.empty() || stats.mean[0].size() != static_cast<Eigen::Index>(band_set.size()))
        throw ConfigError("statistics were computed on a different band set");

    const std::size_t nb = band_set.size();
    const std::size_t ngroups = stats.mean.size();

    // One factorization per group, reused across its pixels.
    std::vector<Eigen::VectorXd> weight(ngroups);
    std::vector<double> denom(ngroups);
    Eigen::VectorXd u(static_cast<Eigen::Index>(nb));
    for (std::size_t i = 0; i < nb; ++i)
        u[static_cast<Eigen::Index>(i)] = target.unit_absorption[static_cast<std::size_t>(band_set[i])];
    for (std::size_t g = 0; g < ngroups; ++g) {
        Eigen::LLT<Eigen::MatrixXd> llt(stats.cov[g]);
        if (llt.info() != Eigen::Success)
            throw NumericError("group covariance not positive definite");
        Eigen::VectorXd t = stats.mean[g].cwiseProduct(u);
        weight[g] = llt.solve(t);
        denom[g] = t.dot(weight[g]);
        if (!(denom[g] > 0.0) || !std::isfinite(denom[g]))
            throw NumericError("target has no energy on the selected bands (t'S^-1 t <= 0)");
    }

    EnhancementMap map;
    map.rows = cube.rows;
    map.cols = cube.cols;
    map.variant = stats.variant;
    map.gas = target.gas;
    map.band_set = band_set;
    map.alpha.assign(cube.rows * cube.cols, std::numeric_limits<double>::quiet_NaN());

    Eigen::VectorXd x(static_cast<Eigen::Index>(nb));
    for (std::size_t r = 0; r < cube.rows; ++r) {
        for (std::size_t c = 0; c < cube.cols; ++c) {
            if (!pixel_valid_on(cube, r, c, band_set)) continue;
            for (std::size_t i = 0; i < nb; ++i)
                x[static_cast<Eigen::Index>(i)] = cube.at(r, c, static_cast<std::size_t>(band_set[i]));
            std::size_t g = stats.group_of(c);
            map.alpha[r * cube.cols + c] = weight[g].dot(x - stats.mean[g]) / denom[g];
        }
    }
    return map;
}

SpectralCube EnhancementMap::to_cube() const {
    SpectralCube out;
    out.rows = rows;
    out.cols = cols;
    out.bands = 1;
    out.grid.centers = {1000.0};
    out.bad_bands = {0};
    out.product = "enhancement";
    out.meta["variant"] = variant_name(variant);
    out.meta["gas"] = gas_name(gas);
    {
        std::ostringstream oss;
        oss << "{";
        for (std::size_t i = 0; i < band_set.size(); ++i) oss << (i ? ", " : "") << band_set[i];
        oss << "}";
        out.meta["band set"] = oss.str();
    }
    out.data.resize(rows * cols);
    for (std::size_t i = 0; i < alpha.size(); ++i)
        out.data[i] = std::isfinite(alpha[i]) ? alpha[i] : out.nodata;
    return out;
}

EnhancementMap enhancement_from_cube(const SpectralCube& raster) {
    if (raster.bands != 1) throw ConfigError("enhancement raster must be single-band");
    EnhancementMap map;
    map.rows = raster.rows;
    map.cols = raster.cols;
    map.alpha.resize(raster.data.size());
    for (std::size_t i = 0; i < raster.data.size(); ++i)
        map.alpha[i] = raster.data[i] == raster.nodata ? std::numeric_limits<double>::quiet_NaN()
                                                       : raster.data[i];
    if (auto it = raster.meta.find("variant"); it != raster.meta.end())
        map.variant = parse_variant(it->second);
    if (auto it = raster.meta.find("gas"); it != raster.meta.end())
        map.gas = parse_gas(it->second);
    return map;
}

std::vector<int> wide_window_band_set(const GasConfig& cfg, const SpectralCube& cube) {
    try {
        return select_bands(cube, {cfg.wide_window}, 1);
    } catch (const ConfigError&) {
        throw ConfigError(std::string("wide window for ") + gas_name(cfg.gas) +
                          " resolves to no bands on this grid");
    }
}

std::vector<int> apply_band_exclusions(const std::vector<int>& band_set,
                                       const WavelengthGrid& grid,
                                       const std::vector<BandWindow>& exclude) {
    if (exclude.empty()) return band_set;
    for (const auto& w : exclude) w.validate();
    std::vector<int> out;
    for (int b : band_set) {
        double wl = grid.centers[static_cast<std::size_t>(b)];
        bool drop = std::any_of(exclude.begin(), exclude.end(),
                                [wl](const BandWindow& w) { return w.contains(wl); });
        if (!drop) out.push_back(b);
    }
    if (out.empty()) throw ConfigError("band exclusions removed every band");
    return out;
}

}  // namespace plumescout
