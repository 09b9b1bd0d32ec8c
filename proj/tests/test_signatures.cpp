#include "plumescout/signatures.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "plumescout/errors.hpp"

using namespace plumescout;

TEST_SUITE_BEGIN("signatures");

TEST_CASE("default config values per gas") {
    GasConfig ch4 = default_config(GasId::CH4);
    REQUIRE(ch4.in_band.size() == 1);
    CHECK(ch4.in_band[0].lo == 2100.0);
    CHECK(ch4.in_band[0].hi == 2440.0);
    REQUIRE(ch4.out_band.size() == 3);
    CHECK(ch4.out_band[0].lo == 381.0);
    CHECK(ch4.out_band[0].hi == 1633.0);
    CHECK(ch4.out_band[1].lo == 1692.0);
    CHECK(ch4.out_band[1].hi == 2094.0);
    CHECK(ch4.out_band[2].lo == 2441.0);
    CHECK(ch4.out_band[2].hi == 2493.0);
    CHECK(ch4.mf_background_threshold == 30.0);
    CHECK(ch4.dnorm_high == 0.3);
    CHECK(ch4.dnorm_low == 0.5);
    CHECK(ch4.min_candidate_pixels == 25);

    GasConfig nh3 = default_config(GasId::NH3);
    REQUIRE(nh3.in_band.size() == 3);
    CHECK(nh3.in_band[0].lo == 1498.0);
    CHECK(nh3.in_band[0].hi == 1603.0);
    CHECK(nh3.in_band[1].lo == 1952.0);
    CHECK(nh3.in_band[1].hi == 2130.0);
    CHECK(nh3.in_band[2].lo == 2123.0);
    CHECK(nh3.in_band[2].hi == 2326.0);
    CHECK(nh3.mf_background_threshold == 300.0);
    CHECK(nh3.min_candidate_pixels == 100);

    GasConfig no2 = default_config(GasId::NO2);
    REQUIRE(no2.in_band.size() == 1);
    CHECK(no2.in_band[0].lo == 381.0);
    CHECK(no2.in_band[0].hi == 753.0);
    CHECK(no2.mf_background_threshold == 1200.0);

    GasConfig co = default_config(GasId::CO);
    CHECK(co.in_band[0].lo == 2278.0);
    CHECK(co.in_band[0].hi == 2441.0);
    CHECK(co.mf_background_threshold == 300.0);
}

TEST_CASE("unknown gas rejected") {
    CHECK_THROWS_AS(parse_gas("XE"), ConfigError);
    CHECK(parse_gas("ch4") == GasId::CH4);
}

TEST_CASE("resampling passes through exact grid samples") {
    WavelengthGrid grid = testutil::linear_grid(5, 2000.0, 2400.0);
    std::vector<double> values = {0.1, 0.2, 0.3, 0.2, 0.1};
    auto out = resample_linear(grid.centers, values, grid);
    CHECK(out == values);
}

TEST_CASE("resampling interpolates the midpoint") {
    WavelengthGrid grid;
    grid.centers = {2050.0, 2100.0, 2150.0};
    auto out = resample_linear({2000.0, 2200.0, 2300.0}, {0.0, 1.0, 1.0}, grid);
    CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("resampled values are bounded by neighboring samples") {
    WavelengthGrid grid = testutil::linear_grid(41, 1900.0, 2300.0);
    std::vector<double> wl, vals;
    for (int i = 0; i <= 30; ++i) {
        wl.push_back(1900.0 + 13.0 * i);
        vals.push_back(static_cast<double>(i * i));  // monotone
    }
    auto out = resample_linear(wl, vals, grid);
    for (std::size_t b = 1; b + 1 < grid.size(); ++b) {
        if (grid.centers[b] < wl.front() || grid.centers[b] > wl.back()) continue;
        CHECK(out[b] >= vals.front());
        CHECK(out[b] <= vals.back());
    }
}

TEST_CASE("gaussian line resampled from a dense table matches the analytic shape") {
    WavelengthGrid grid = testutil::linear_grid(60, 2100.0, 2440.0);
    auto analytic = [](double wl) {
        double u = (wl - 2310.0) / 55.0;
        return 4.2e-5 * std::exp(-u * u);
    };
    std::vector<double> wl, vals;
    for (double x = 2050.0; x <= 2480.0; x += 1.0) {
        wl.push_back(x);
        vals.push_back(analytic(x));
    }
    auto out = resample_linear(wl, vals, grid);
    for (std::size_t b = 0; b < grid.size(); ++b)
        CHECK(std::abs(out[b] - analytic(grid.centers[b])) < 1e-6);
}

TEST_CASE("load_target: sectioned file, headerless file, and sparse-overlap error") {
    testutil::TempDir dir("sig_target");
    WavelengthGrid grid = testutil::linear_grid(10, 2000.0, 2400.0);

    {
        std::ofstream out(dir.str() + "/both.txt");
        out << "# fixture\n[unit_absorption]\n";
        for (double x = 1900; x <= 2500; x += 50) out << x << " " << -1e-5 << "\n";
        out << "[k]\n";
        for (double x = 1900; x <= 2500; x += 50) out << x << " " << 2e-5 << "\n";
    }
    GasTarget both = load_target(dir.str() + "/both.txt", grid);
    CHECK(both.unit_absorption[0] == doctest::Approx(-1e-5));
    CHECK(both.k_coeffs[0] == doctest::Approx(2e-5));

    {
        std::ofstream out(dir.str() + "/konly.txt");
        for (double x = 1900; x <= 2500; x += 50) out << x << " " << 3e-5 << "\n";
    }
    GasTarget konly = load_target(dir.str() + "/konly.txt", grid);
    for (std::size_t b = 0; b < grid.size(); ++b)
        CHECK(konly.unit_absorption[b] == doctest::Approx(-konly.k_coeffs[b]));

    {
        std::ofstream out(dir.str() + "/sparse.txt");
        out << "100 1\n200 2\n2100 3\n";  // only one sample overlaps the grid
    }
    CHECK_THROWS_AS(load_target(dir.str() + "/sparse.txt", grid), ConfigError);
}

TEST_CASE("builtin targets are nonnegative with signal inside each in-band window") {
    WavelengthGrid grid = testutil::emit_like_grid();
    for (GasId gas : {GasId::CH4, GasId::NH3, GasId::NO2, GasId::CO}) {
        GasTarget t = builtin_target(gas, grid);
        GasConfig cfg = default_config(gas);
        for (double k : t.k_coeffs) CHECK(k >= 0.0);
        for (const auto& w : cfg.in_band) {
            double peak = 0.0;
            for (std::size_t b = 0; b < grid.size(); ++b)
                if (w.contains(grid.centers[b])) peak = std::max(peak, t.k_coeffs[b]);
            CHECK(peak > 0.0);
        }
    }
}

TEST_CASE("resolved in and out index sets are disjoint for every gas") {
    WavelengthGrid grid = testutil::emit_like_grid();
    std::vector<std::uint8_t> bad(grid.size(), 0);
    for (GasId gas : {GasId::CH4, GasId::NH3, GasId::NO2, GasId::CO}) {
        FitWindowSet ws = resolve_windows(default_config(gas), grid, bad);
        std::set<int> in_union;
        for (const auto& s : ws.in_sets) {
            CHECK(s.size() >= 3);
            in_union.insert(s.begin(), s.end());
        }
        CHECK(!ws.out_set.empty());
        for (int b : ws.out_set) CHECK(!in_union.count(b));
    }
}

TEST_CASE("config file overrides defaults and rejects nonsense") {
    testutil::TempDir dir("sig_cfg");
    {
        std::ofstream out(dir.str() + "/ch4.cfg");
        out << "gas = CH4\nmf_background_threshold = 55\nin_band = 2150:2400\n";
    }
    GasConfig cfg = load_gas_config(dir.str() + "/ch4.cfg");
    CHECK(cfg.mf_background_threshold == 55.0);
    CHECK(cfg.in_band.size() == 1);
    CHECK(cfg.in_band[0].lo == 2150.0);

    {
        std::ofstream out(dir.str() + "/bad.cfg");
        out << "gas = CH4\ndnorm_high = 0.9\n";  // high >= low
    }
    CHECK_THROWS_AS(load_gas_config(dir.str() + "/bad.cfg"), ConfigError);
    {
        std::ofstream out(dir.str() + "/unknown.cfg");
        out << "gas = CH4\nnot_a_key = 1\n";
    }
    CHECK_THROWS_AS(load_gas_config(dir.str() + "/unknown.cfg"), ConfigError);
}

TEST_CASE("in/out windows overlapping interiors are rejected") {
    GasConfig cfg = default_config(GasId::CH4);
    cfg.out_band.push_back({2200.0, 2300.0});  // inside the in-band window
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_SUITE_END();
