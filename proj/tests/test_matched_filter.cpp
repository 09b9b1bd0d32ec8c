#include "plumescout/matched_filter.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "plumescout/errors.hpp"
#include "plumescout/synth.hpp"

using namespace plumescout;

TEST_SUITE_BEGIN("matched_filter");

namespace {

std::vector<int> all_bands(const SpectralCube& cube) {
    std::vector<int> out(cube.bands);
    std::iota(out.begin(), out.end(), 0);
    return out;
}

ColumnStats identity_stats(const Eigen::VectorXd& mu, std::size_t cols) {
    ColumnStats stats;
    stats.variant = MfVariant::WMF;
    stats.group_width = cols;
    stats.shrinkage = 0.0;
    stats.mean = {mu};
    stats.cov = {Eigen::MatrixXd::Identity(mu.size(), mu.size())};
    stats.pixel_count = {1000};
    stats.fallback = {0};
    return stats;
}

GasTarget toy_target(std::size_t bands) {
    GasTarget t;
    t.gas = GasId::CH4;
    t.k_coeffs.resize(bands);
    t.unit_absorption.resize(bands);
    for (std::size_t b = 0; b < bands; ++b) {
        t.k_coeffs[b] = 1e-5 * (1.0 + std::sin(0.7 * static_cast<double>(b) + 0.3));
        t.unit_absorption[b] = -t.k_coeffs[b];
    }
    return t;
}

synth::SceneSpec plume_scene_spec(std::uint64_t seed, double peak, std::size_t n = 64,
                                  std::size_t bands = 50) {
    synth::SceneSpec spec;
    spec.rows = spec.cols = n;
    spec.bands = bands;
    spec.seed = seed;
    spec.noise_sigma = 0.003;
    spec.background.cov_amp = 0.02;
    spec.background.cov_rho = 0.9;
    spec.alpha_cutoff = 100.0;
    if (peak > 0.0) spec.plumes.push_back({32, 30, 0.5, 6.0, peak, GasId::CH4});
    return spec;
}

}  // namespace

TEST_CASE("hand-computable mean and covariance") {
    SpectralCube cube;
    cube.rows = 2;
    cube.cols = 2;
    cube.bands = 2;
    cube.grid.centers = {500.0, 600.0};
    cube.bad_bands = {0, 0};
    cube.product = "truth";  // allows signed fixture values
    // Pixels (r,c): (0,0)=(1,0) (0,1)=(0,1) (1,0)=(-1,0) (1,1)=(0,-1), band-sequential.
    cube.data = {1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0};

    ColumnStats stats = column_stats(cube, {0, 1}, MfVariant::WMF, /*shrinkage=*/0.0);
    CHECK(stats.mean[0][0] == doctest::Approx(0.0));
    CHECK(stats.mean[0][1] == doctest::Approx(0.0));
    CHECK(stats.cov[0](0, 0) == doctest::Approx(0.5));
    CHECK(stats.cov[0](1, 1) == doctest::Approx(0.5));
    CHECK(stats.cov[0](0, 1) == doctest::Approx(0.0));
    CHECK(stats.pixel_count[0] == 4);
}

TEST_CASE("constant cube has zero covariance and errors without a floor") {
    SpectralCube cube = testutil::random_cube(4, 4, 3, 1);
    for (auto& v : cube.data) v = 2.5;
    CHECK_THROWS_AS(column_stats(cube, all_bands(cube), MfVariant::WMF, 0.02), NumericError);
    ColumnStatsOptions opts;
    opts.diag_floor_rel = 1e-6;
    // Relative floor scales with the (zero) diagonal, so it cannot rescue this.
    CHECK_THROWS_AS(column_stats(cube, all_bands(cube), MfVariant::WMF, 0.02, opts), NumericError);
}

TEST_CASE("too few valid pixels is an error") {
    SpectralCube cube = testutil::random_cube(2, 2, 3, 2);
    CHECK_THROWS_AS(column_stats(cube, all_bands(cube), MfVariant::WMF, 0.02), NumericError);
}

TEST_CASE("identity-stats algebra: x = mu is 0, x = mu + c t recovers c") {
    const std::size_t bands = 12, n = 4;
    GasTarget target = toy_target(bands);
    Eigen::VectorXd mu(bands);
    for (std::size_t b = 0; b < bands; ++b) mu[static_cast<Eigen::Index>(b)] = 3.0 + 0.1 * b;

    SpectralCube cube;
    cube.rows = cube.cols = n;
    cube.bands = bands;
    cube.grid = testutil::linear_grid(bands, 2000.0, 2400.0);
    cube.bad_bands.assign(bands, 0);
    cube.product = "truth";
    cube.data.assign(n * n * bands, 0.0);
    const double cvals[4] = {0.0, 1.0, -250.0, 4000.0};
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            double scale = cvals[r];
            for (std::size_t b = 0; b < bands; ++b) {
                double t_b = mu[static_cast<Eigen::Index>(b)] * target.unit_absorption[b];
                cube.at(r, c, b) = mu[static_cast<Eigen::Index>(b)] + scale * t_b;
            }
        }
    }

    auto emap = apply_mf(cube, target, identity_stats(mu, n), all_bands(cube));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (cvals[r] == 0.0) {
                CHECK(emap.at(r, c) == 0.0);  // mean subtraction annihilates exactly
            } else {
                CHECK(emap.at(r, c) == doctest::Approx(cvals[r]).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("linearity: adding delta times the target shifts alpha by delta") {
    const std::size_t bands = 10, n = 6;
    GasTarget target = toy_target(bands);
    SpectralCube cube = testutil::random_cube(n, n, bands, 5);
    Eigen::VectorXd mu(bands);
    for (std::size_t b = 0; b < bands; ++b) mu[static_cast<Eigen::Index>(b)] = 5.0;

    auto stats = identity_stats(mu, n);
    auto base = apply_mf(cube, target, stats, all_bands(cube));

    const double delta = 123.0;
    SpectralCube shifted = cube;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            for (std::size_t b = 0; b < bands; ++b)
                shifted.at(r, c, b) += delta * mu[static_cast<Eigen::Index>(b)] * target.unit_absorption[b];
    shifted.product = "truth";
    auto moved = apply_mf(shifted, target, stats, all_bands(cube));
    for (std::size_t i = 0; i < base.alpha.size(); ++i)
        CHECK(moved.alpha[i] - base.alpha[i] == doctest::Approx(delta).epsilon(1e-10));
}

TEST_CASE("global gain leaves alpha unchanged") {
    auto spec = plume_scene_spec(21, 2000.0, 48, 40);
    auto targets = std::map<GasId, GasTarget>{{GasId::CH4, builtin_target(GasId::CH4, spec.make_grid())}};
    auto scene = synth::generate(spec, targets);
    GasConfig cfg = default_config(GasId::CH4);
    auto band_set = wide_window_band_set(cfg, scene.cube);

    auto stats1 = column_stats(scene.cube, band_set, MfVariant::WMF, cfg.shrinkage);
    auto map1 = apply_mf(scene.cube, targets.at(GasId::CH4), stats1, band_set);

    SpectralCube scaled = scene.cube;
    for (auto& v : scaled.data) v *= 3.7;
    auto stats2 = column_stats(scaled, band_set, MfVariant::WMF, cfg.shrinkage);
    auto map2 = apply_mf(scaled, targets.at(GasId::CH4), stats2, band_set);

    for (std::size_t i = 0; i < map1.alpha.size(); ++i) {
        double a = map1.alpha[i], b = map2.alpha[i];
        CHECK(std::abs(b - a) <= 1e-6 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("background alpha is unbiased with variance near the whitened prediction") {
    synth::SceneSpec spec;
    spec.rows = spec.cols = 64;
    spec.bands = 30;
    spec.seed = 77;
    spec.noise_sigma = 0.003;
    spec.background.cov_amp = 0.0;  // pure sensor noise
    auto targets = std::map<GasId, GasTarget>{{GasId::CH4, builtin_target(GasId::CH4, spec.make_grid())}};
    auto scene = synth::generate(spec, targets);

    GasConfig cfg = default_config(GasId::CH4);
    auto band_set = wide_window_band_set(cfg, scene.cube);
    auto stats = column_stats(scene.cube, band_set, MfVariant::WMF, 0.0);
    auto emap = apply_mf(scene.cube, targets.at(GasId::CH4), stats, band_set);

    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (double a : emap.alpha) {
        sum += a;
        sq += a * a;
        ++count;
    }
    double mean = sum / static_cast<double>(count);
    double var = sq / static_cast<double>(count) - mean * mean;

    // Prediction with the true statistics: sigma^2 / ||t||^2 on identity-correlated noise.
    const auto& m = scene.truth.class_means[0];
    double t2 = 0.0;
    for (std::size_t i = 0; i < band_set.size(); ++i) {
        double t_b = m[band_set[i]] * targets.at(GasId::CH4).unit_absorption[static_cast<std::size_t>(band_set[i])];
        t2 += t_b * t_b;
    }
    double predicted_var = spec.noise_sigma * spec.noise_sigma / t2;

    double sem = std::sqrt(var / static_cast<double>(count));
    CHECK(std::abs(mean) < 3.0 * sem);
    CHECK(var == doctest::Approx(predicted_var).epsilon(0.20));
}

TEST_CASE("CMF with one column group equals WMF exactly") {
    auto spec = plume_scene_spec(33, 1500.0, 32, 24);
    spec.background.stripe_amp = 0.005;
    auto targets = std::map<GasId, GasTarget>{{GasId::CH4, builtin_target(GasId::CH4, spec.make_grid())}};
    auto scene = synth::generate(spec, targets);
    GasConfig cfg = default_config(GasId::CH4);
    auto band_set = wide_window_band_set(cfg, scene.cube);

    ColumnStatsOptions one_group;
    one_group.group_width = scene.cube.cols;
    auto stats_cmf = column_stats(scene.cube, band_set, MfVariant::CMF, cfg.shrinkage, one_group);
    auto stats_wmf = column_stats(scene.cube, band_set, MfVariant::WMF, cfg.shrinkage);
    CHECK(stats_cmf.mean[0] == stats_wmf.mean[0]);
    CHECK(stats_cmf.cov[0] == stats_wmf.cov[0]);

    auto a = apply_mf(scene.cube, targets.at(GasId::CH4), stats_cmf, band_set);
    auto b = apply_mf(scene.cube, targets.at(GasId::CH4), stats_wmf, band_set);
    CHECK(a.alpha == b.alpha);
}

TEST_CASE("columns with too few pixels fall back to scene statistics") {
    auto spec = plume_scene_spec(8, 0.0, 0, 0);
    spec.rows = 6;  // < 10 per column
    spec.cols = 40;
    spec.bands = 12;
    auto targets = std::map<GasId, GasTarget>{{GasId::CH4, builtin_target(GasId::CH4, spec.make_grid())}};
    auto scene = synth::generate(spec, targets);
    auto band_set = all_bands(scene.cube);
    auto stats = column_stats(scene.cube, band_set, MfVariant::CMF, 0.02);
    for (auto f : stats.fallback) CHECK(f == 1);
    auto wmf = column_stats(scene.cube, band_set, MfVariant::WMF, 0.02);
    CHECK(stats.cov[0] == wmf.cov[0]);
}

TEST_CASE("plume recovery within the linearization budget") {
    auto spec = plume_scene_spec(101, 2000.0);
    auto targets = std::map<GasId, GasTarget>{{GasId::CH4, builtin_target(GasId::CH4, spec.make_grid())}};
    auto scene = synth::generate(spec, targets);
    GasConfig cfg = default_config(GasId::CH4);
    auto band_set = wide_window_band_set(cfg, scene.cube);
    auto stats = column_stats(scene.cube, band_set, MfVariant::CMF, cfg.shrinkage);
    auto emap = apply_mf(scene.cube, targets.at(GasId::CH4), stats, band_set);

    const auto& alpha_true = scene.truth.alpha_field(GasId::CH4);
    double est = 0.0, truth = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < alpha_true.size(); ++i) {
        if (alpha_true[i] <= 0.0) continue;
        est += emap.alpha[i];
        truth += alpha_true[i];
        ++n;
    }
    REQUIRE(n > 25);
    CHECK(est / truth == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("wide window is a superset of in-band and raises plume SNR") {
    auto spec = plume_scene_spec(55, 2000.0);
    auto targets = std::map<GasId, GasTarget>{{GasId::CH4, builtin_target(GasId::CH4, spec.make_grid())}};
    auto scene = synth::generate(spec, targets);
    GasConfig cfg = default_config(GasId::CH4);

    auto wide = wide_window_band_set(cfg, scene.cube);
    auto narrow = select_bands(scene.cube, cfg.in_band, 3);
    std::set<int> wide_set(wide.begin(), wide.end());
    for (int b : narrow) CHECK(wide_set.count(b));
    CHECK(wide.size() > narrow.size());

    auto snr_of = [&](const std::vector<int>& band_set) {
        auto stats = column_stats(scene.cube, band_set, MfVariant::WMF, cfg.shrinkage);
        auto emap = apply_mf(scene.cube, targets.at(GasId::CH4), stats, band_set);
        const auto& alpha_true = scene.truth.alpha_field(GasId::CH4);
        double in_sum = 0.0, bg_sum = 0.0, bg_sq = 0.0;
        int n_in = 0, n_bg = 0;
        for (std::size_t i = 0; i < alpha_true.size(); ++i) {
            if (alpha_true[i] > 0.0) {
                in_sum += emap.alpha[i];
                ++n_in;
            } else {
                bg_sum += emap.alpha[i];
                bg_sq += emap.alpha[i] * emap.alpha[i];
                ++n_bg;
            }
        }
        double bg_mean = bg_sum / n_bg;
        double bg_std = std::sqrt(bg_sq / n_bg - bg_mean * bg_mean);
        return (in_sum / n_in) / bg_std;
    };
    CHECK(snr_of(wide) > snr_of(narrow));
}

TEST_CASE("wide window errors when the grid misses it entirely") {
    SpectralCube cube = testutil::random_cube(4, 4, 10, 3);
    cube.grid = testutil::linear_grid(10, 400.0, 900.0);  // no SWIR
    GasConfig cfg = default_config(GasId::CH4);
    CHECK_THROWS_AS(wide_window_band_set(cfg, cube), ConfigError);
}

TEST_CASE("band exclusions drop the requested range") {
    SpectralCube cube = testutil::random_cube(2, 2, 20, 4);
    GasConfig cfg = default_config(GasId::CH4);
    auto band_set = wide_window_band_set(cfg, cube);
    auto pruned = apply_band_exclusions(band_set, cube.grid, {{2100.0, 2500.0}});
    CHECK(pruned.size() < band_set.size());
    for (int b : pruned) CHECK(cube.grid.centers[static_cast<std::size_t>(b)] < 2100.0);
    CHECK_THROWS_AS(apply_band_exclusions(band_set, cube.grid, {{300.1, 2999.9}}), ConfigError);
}

TEST_CASE("enhancement raster round trip preserves values and nodata") {
    testutil::TempDir dir("mf_raster");
    EnhancementMap emap;
    emap.rows = 2;
    emap.cols = 3;
    emap.variant = MfVariant::CMF;
    emap.gas = GasId::NH3;
    emap.band_set = {1, 2, 3};
    emap.alpha = {1.5, -2.25, 0.0, std::numeric_limits<double>::quiet_NaN(), 7.0, -0.5};
    write_cube(emap.to_cube(), dir.str() + "/e");
    auto back = enhancement_from_cube(read_cube(dir.str() + "/e"));
    CHECK(back.variant == MfVariant::CMF);
    CHECK(back.gas == GasId::NH3);
    CHECK(back.alpha[0] == 1.5);
    CHECK(back.alpha[1] == -2.25);
    CHECK(std::isnan(back.alpha[3]));
    CHECK(back.alpha[4] == 7.0);
}

TEST_SUITE_END();
