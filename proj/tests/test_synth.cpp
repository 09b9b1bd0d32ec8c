#include "plumescout/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "plumescout/errors.hpp"

using namespace plumescout;
using plumescout::synth::SceneSpec;

TEST_SUITE_BEGIN("synth");

namespace {

SceneSpec small_spec(std::uint64_t seed) {
    SceneSpec spec;
    spec.rows = 32;
    spec.cols = 32;
    spec.bands = 30;
    spec.seed = seed;
    spec.noise_sigma = 0.003;
    spec.background.cov_amp = 0.02;
    spec.background.cov_rho = 0.9;
    return spec;
}

std::map<GasId, GasTarget> targets_for(const SceneSpec& spec) {
    std::map<GasId, GasTarget> t;
    t[GasId::CH4] = builtin_target(GasId::CH4, spec.make_grid());
    return t;
}

}  // namespace

TEST_CASE("rng follows the documented engine and transform") {
    synth::Rng rng(42);
    std::mt19937_64 eng(42);
    auto uni = [&eng]() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
    for (int i = 0; i < 8; i += 2) {
        double u1 = 1.0 - uni();
        double u2 = uni();
        double r = std::sqrt(-2.0 * std::log(u1));
        double expect1 = r * std::cos(2.0 * M_PI * u2);
        double expect2 = r * std::sin(2.0 * M_PI * u2);
        CHECK(rng.normal() == expect1);
        CHECK(rng.normal() == expect2);
    }
}

TEST_CASE("generation is deterministic in the seed") {
    SceneSpec spec = small_spec(99);
    spec.plumes.push_back({16, 16, 0.4, 5.0, 1500.0, GasId::CH4});
    auto targets = targets_for(spec);
    auto a = synth::generate(spec, targets);
    auto b = synth::generate(spec, targets);
    CHECK(a.cube.data == b.cube.data);
    CHECK(a.truth.alpha_field(GasId::CH4) == b.truth.alpha_field(GasId::CH4));
}

TEST_CASE("zero peak alpha is bit-identical to a plume-free scene") {
    SceneSpec with = small_spec(7);
    with.plumes.push_back({16, 16, 0.0, 5.0, 0.0, GasId::CH4});
    SceneSpec without = small_spec(7);
    auto targets = targets_for(with);
    auto a = synth::generate(with, targets);
    auto b = synth::generate(without, targets);
    CHECK(a.cube.data == b.cube.data);
}

TEST_CASE("noiseless single-class plume pixels are class mean times exp(-alpha k)") {
    SceneSpec spec = small_spec(3);
    spec.noise_sigma = 0.0;
    spec.background.cov_amp = 0.0;
    spec.background.stripe_amp = 0.0;
    spec.plumes.push_back({16, 16, 0.0, 4.0, 2000.0, GasId::CH4});
    auto targets = targets_for(spec);
    auto scene = synth::generate(spec, targets);
    const auto& alpha = scene.truth.alpha_field(GasId::CH4);
    const auto& k = targets.at(GasId::CH4).k_coeffs;
    const auto& mean = scene.truth.class_means[0];
    int checked = 0;
    for (std::size_t r = 0; r < spec.rows; ++r) {
        for (std::size_t c = 0; c < spec.cols; ++c) {
            double a = alpha[r * spec.cols + c];
            if (a <= 0.0) continue;
            for (std::size_t b = 0; b < spec.bands; ++b) {
                double expect = mean[static_cast<Eigen::Index>(b)] * std::exp(-a * k[b]);
                CHECK(scene.cube.at(r, c, b) == doctest::Approx(expect).epsilon(1e-14));
            }
            ++checked;
        }
    }
    CHECK(checked > 10);
}

TEST_CASE("log-ratio of with/without plume equals -alpha k per band") {
    SceneSpec with = small_spec(4);
    with.noise_sigma = 0.0;
    with.plumes.push_back({10, 12, 0.7, 4.0, 1200.0, GasId::CH4});
    SceneSpec without = small_spec(4);
    without.noise_sigma = 0.0;
    auto targets = targets_for(with);
    auto a = synth::generate(with, targets);
    auto b = synth::generate(without, targets);
    const auto& alpha = a.truth.alpha_field(GasId::CH4);
    const auto& k = targets.at(GasId::CH4).k_coeffs;
    for (std::size_t r = 0; r < with.rows; ++r) {
        for (std::size_t c = 0; c < with.cols; ++c) {
            double al = alpha[r * with.cols + c];
            if (al <= 0.0) continue;
            for (std::size_t band = 0; band < with.bands; band += 7) {
                double ratio = a.cube.at(r, c, band) / b.cube.at(r, c, band);
                CHECK(std::log(ratio) == doctest::Approx(-al * k[band]).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("truth masks match the positive alpha field and classes partition the scene") {
    SceneSpec spec = small_spec(11);
    spec.background.albedos = {1.0, 0.6};
    spec.background.class_layout = "halves";
    spec.plumes.push_back({16, 16, 1.1, 5.0, 1800.0, GasId::CH4});
    auto scene = synth::generate(spec, targets_for(spec));
    const auto& alpha = scene.truth.alpha_field(GasId::CH4);
    auto mask = scene.truth.plume_mask_union(GasId::CH4);
    for (std::size_t i = 0; i < alpha.size(); ++i) CHECK((alpha[i] > 0.0) == (mask[i] != 0));
    for (int cls : scene.truth.class_map) {
        CHECK(cls >= 0);
        CHECK(cls < 2);
    }
}

TEST_CASE("oracle recovers an exact target injection under identity covariance") {
    const std::size_t bands = 6;
    synth::SceneTruth truth;
    truth.rows = 1;
    truth.cols = 1;
    truth.noise_sigma = 0.0;
    Eigen::VectorXd mean(bands);
    mean << 4.0, 5.0, 6.0, 5.5, 4.5, 4.2;
    truth.class_means = {mean};
    truth.class_cov_factors = {Eigen::MatrixXd::Identity(bands, bands)};
    truth.class_map = {0};
    truth.stripe = {0.0};

    GasTarget target;
    target.unit_absorption = {-2e-5, -4e-5, -9e-5, -6e-5, -1e-5, -0.5e-5};
    target.k_coeffs = {2e-5, 4e-5, 9e-5, 6e-5, 1e-5, 0.5e-5};

    SpectralCube cube;
    cube.rows = cube.cols = 1;
    cube.bands = bands;
    cube.grid = testutil::linear_grid(bands, 2100.0, 2400.0);
    cube.bad_bands.assign(bands, 0);
    cube.product = "truth";
    const double c0 = 1234.5;
    cube.data.resize(bands);
    for (std::size_t b = 0; b < bands; ++b) {
        double t_b = mean[static_cast<Eigen::Index>(b)] * target.unit_absorption[b];
        cube.data[b] = mean[static_cast<Eigen::Index>(b)] + c0 * t_b;
    }

    std::vector<int> all_bands{0, 1, 2, 3, 4, 5};
    auto ref = synth::oracle_mf(cube, truth, target, all_bands);
    CHECK(ref[0] == doctest::Approx(c0).epsilon(1e-10));

    // Perturbation orthogonal to the target yields zero.
    Eigen::VectorXd t(bands);
    for (std::size_t b = 0; b < bands; ++b)
        t[static_cast<Eigen::Index>(b)] = mean[static_cast<Eigen::Index>(b)] * target.unit_absorption[b];
    Eigen::VectorXd p = Eigen::VectorXd::Ones(bands);
    p -= t * (t.dot(p) / t.squaredNorm());
    for (std::size_t b = 0; b < bands; ++b)
        cube.data[b] = mean[static_cast<Eigen::Index>(b)] + p[static_cast<Eigen::Index>(b)];
    ref = synth::oracle_mf(cube, truth, target, all_bands);
    CHECK(std::abs(ref[0]) < 1e-9);
}

TEST_CASE("spec validation rejects degenerate covariance and oversized noise") {
    SceneSpec spec = small_spec(1);
    spec.background.cov_rho = 1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = small_spec(1);
    spec.noise_sigma = 100.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("scene spec file round trip") {
    testutil::TempDir dir("synth_spec");
    {
        std::ofstream out(dir.str() + "/scene.spec");
        out << "# fixture scene\nrows = 24\ncols = 20\nbands = 18\nseed = 1234\n"
            << "albedos = {1.0, 0.7}\nclass_layout = halves\ncov_amp = 0.015\ncov_rho = 0.8\n"
            << "stripe_amp = 0.004\nnoise_sigma = 0.002\n"
            << "plume = 12 10 0.5 4 1500 CH4\nclutter = 6 6 3 -0.05\n";
    }
    SceneSpec spec = synth::load_scene_spec(dir.str() + "/scene.spec");
    CHECK(spec.rows == 24);
    CHECK(spec.cols == 20);
    CHECK(spec.bands == 18);
    CHECK(spec.seed == 1234);
    REQUIRE(spec.plumes.size() == 1);
    CHECK(spec.plumes[0].peak_alpha == 1500.0);
    CHECK(spec.plumes[0].gas == GasId::CH4);
    REQUIRE(spec.clutter.size() == 1);
    CHECK(spec.clutter[0].amplitude == -0.05);

    auto scene = synth::generate(spec, targets_for(spec));
    synth::write_scene(scene, dir.str() + "/out");
    SpectralCube back = read_cube(dir.str() + "/out/scene");
    CHECK(back.rows == 24);
    CHECK(back.cols == 20);
    CHECK(back.bands == 18);
    SpectralCube alpha = read_cube(dir.str() + "/out/alpha_CH4");
    CHECK(alpha.bands == 1);

    {
        std::ofstream out(dir.str() + "/bad.spec");
        out << "rows = 8\ncols = 8\nbands = 4\nwhatever = 3\n";
    }
    CHECK_THROWS_AS(synth::load_scene_spec(dir.str() + "/bad.spec"), ConfigError);
}

TEST_SUITE_END();
