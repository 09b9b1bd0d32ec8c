#include "plumescout/signatures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "plumescout/errors.hpp"

namespace plumescout {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double gaussian(double wl, double center, double width) {
    double u = (wl - center) / width;
    return std::exp(-u * u);
}

struct Line {
    double strength;  // peak k, per ppm·m
    double center;    // nm
    double width;     // nm
};

// Placeholder line shapes per gas; real deployments load measured spectra.
std::vector<Line> builtin_lines(GasId gas) {
    switch (gas) {
        case GasId::CH4:
            return {{4.2e-5, 2310.0, 55.0},
                    {2.6e-5, 2370.0, 40.0},
                    {1.6e-5, 2230.0, 45.0},
                    {5.0e-6, 1670.0, 18.0}};
        case GasId::NH3:
            return {{2.0e-5, 1550.0, 25.0},
                    {2.4e-5, 2005.0, 35.0},
                    {2.8e-5, 2200.0, 45.0}};
        case GasId::NO2:
            return {{1.2e-6, 450.0, 60.0}, {8.0e-7, 560.0, 70.0}};
        case GasId::CO:
            return {{2.2e-5, 2330.0, 25.0}};
    }
    throw ConfigError("unknown gas id");
}

void validate_windows(const std::vector<BandWindow>& ws, const std::string& what) {
    if (ws.empty()) throw ConfigError(what + " window list is empty");
    for (const auto& w : ws) w.validate();
}

bool interiors_overlap(const BandWindow& a, const BandWindow& b) {
    return a.lo < b.hi && b.lo < a.hi;
}

std::vector<BandWindow> parse_window_list(const std::string& value, const std::string& key) {
    std::vector<BandWindow> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        auto colon = item.find(':');
        if (colon == std::string::npos)
            throw ConfigError("window '" + item + "' in " + key + " must be lo:hi");
        try {
            BandWindow w{std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))};
            w.validate();
            out.push_back(w);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("window '" + item + "' in " + key + " is not numeric");
        }
    }
    if (out.empty()) throw ConfigError(key + " resolved to an empty window list");
    return out;
}

}  // namespace

GasId parse_gas(const std::string& name) {
    std::string up;
    for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (up == "CH4") return GasId::CH4;
    if (up == "NH3") return GasId::NH3;
    if (up == "NO2") return GasId::NO2;
    if (up == "CO") return GasId::CO;
    throw ConfigError("unknown gas '" + name + "' (expected CH4, NH3, NO2 or CO)");
}

const char* gas_name(GasId gas) {
    switch (gas) {
        case GasId::CH4: return "CH4";
        case GasId::NH3: return "NH3";
        case GasId::NO2: return "NO2";
        case GasId::CO: return "CO";
    }
    return "?";
}

double molar_mass_g_mol(GasId gas) {
    switch (gas) {
        case GasId::CH4: return 16.04;
        case GasId::NH3: return 17.031;
        case GasId::NO2: return 46.006;
        case GasId::CO: return 28.010;
    }
    throw ConfigError("unknown gas id");
}

void GasConfig::validate() const {
    validate_windows(in_band, "in-band");
    validate_windows(out_band, "out-band");
    wide_window.validate();
    for (const auto& a : in_band)
        for (const auto& b : out_band)
            if (interiors_overlap(a, b))
                throw ConfigError("in-band and out-band windows overlap");
    if (mf_background_threshold <= 0) throw ConfigError("mf_background_threshold must be positive");
    if (min_candidate_pixels < 0) throw ConfigError("min_candidate_pixels must be >= 0");
    if (!(dnorm_high < dnorm_low)) throw ConfigError("dnorm_high must be < dnorm_low");
    if (dnorm_high <= 0) throw ConfigError("dnorm thresholds must be positive");
    if (continuum_degree < 0 || continuum_degree > 6)
        throw ConfigError("continuum_degree out of range [0, 6]");
    if (depth_floor <= 0) throw ConfigError("depth_floor must be positive");
    if (alpha_max <= 0 || alpha_tol <= 0) throw ConfigError("alpha search bounds must be positive");
    if (max_fit_iters < 10) throw ConfigError("max_fit_iters too small");
    if (pair_min_similarity <= 0 || pair_min_similarity > 1)
        throw ConfigError("pair_min_similarity must be in (0, 1]");
    if (pair_search_radius < 1) throw ConfigError("pair_search_radius must be >= 1");
    if (pair_points < 1 || min_pairs < 1) throw ConfigError("pair counts must be >= 1");
    if (exclusion_buffer < 0) throw ConfigError("exclusion_buffer must be >= 0");
    if (shrinkage < 0 || shrinkage > 1) throw ConfigError("shrinkage must be in [0, 1]");
    if (diag_floor_rel < 0) throw ConfigError("diag_floor_rel must be >= 0");
    if (proposer_scale <= 0) throw ConfigError("proposer_scale must be positive");
}

GasConfig default_config(GasId gas) {
    GasConfig cfg;
    cfg.gas = gas;
    switch (gas) {
        case GasId::CH4:
            cfg.in_band = {{2100.0, 2440.0}};
            cfg.out_band = {{381.0, 1633.0}, {1692.0, 2094.0}, {2441.0, 2493.0}};
            cfg.wide_window = {1560.0, 2500.0};
            cfg.mf_background_threshold = 30.0;
            cfg.min_candidate_pixels = 25;
            break;
        case GasId::NH3:
            cfg.in_band = {{1498.0, 1603.0}, {1952.0, 2130.0}, {2123.0, 2326.0}};
            cfg.out_band = {{381.0, 1498.0}, {1603.0, 1922.0}, {2441.0, 2493.0}};
            cfg.wide_window = {1450.0, 2400.0};
            cfg.mf_background_threshold = 300.0;
            cfg.min_candidate_pixels = 100;
            break;
        case GasId::NO2:
            cfg.in_band = {{381.0, 753.0}};
            cfg.out_band = {{753.0, 1633.0}, {1692.0, 2094.0}, {2441.0, 2493.0}};
            cfg.wide_window = {381.0, 900.0};
            cfg.mf_background_threshold = 1200.0;
            cfg.min_candidate_pixels = 100;
            break;
        case GasId::CO:
            cfg.in_band = {{2278.0, 2441.0}};
            cfg.out_band = {{381.0, 1633.0}, {1692.0, 2094.0}, {2441.0, 2493.0}};
            cfg.wide_window = {2100.0, 2500.0};
            cfg.mf_background_threshold = 300.0;
            cfg.min_candidate_pixels = 100;
            break;
    }
    cfg.proposer_center = cfg.mf_background_threshold * (500.0 / 30.0);
    cfg.proposer_scale = 0.4 * cfg.proposer_center;
    cfg.validate();
    return cfg;
}

GasConfig load_gas_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open gas config " + path);

    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("malformed config line '" + line + "' in " + path);
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    auto it = kv.find("gas");
    if (it == kv.end()) throw ConfigError("gas config " + path + " missing 'gas'");
    GasConfig cfg = default_config(parse_gas(it->second));
    kv.erase(it);

    auto num = [&path](const std::string& key, const std::string& v) {
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "' in " + path + " is not numeric");
        }
    };
    for (const auto& [key, value] : kv) {
        if (key == "in_band") cfg.in_band = parse_window_list(value, key);
        else if (key == "out_band") cfg.out_band = parse_window_list(value, key);
        else if (key == "wide_window") cfg.wide_window = parse_window_list(value, key).at(0);
        else if (key == "mf_background_threshold") cfg.mf_background_threshold = num(key, value);
        else if (key == "min_candidate_pixels") cfg.min_candidate_pixels = static_cast<int>(num(key, value));
        else if (key == "dnorm_high") cfg.dnorm_high = num(key, value);
        else if (key == "dnorm_low") cfg.dnorm_low = num(key, value);
        else if (key == "continuum_degree") cfg.continuum_degree = static_cast<int>(num(key, value));
        else if (key == "depth_floor") cfg.depth_floor = num(key, value);
        else if (key == "alpha_max") cfg.alpha_max = num(key, value);
        else if (key == "alpha_tol") cfg.alpha_tol = num(key, value);
        else if (key == "max_fit_iters") cfg.max_fit_iters = static_cast<int>(num(key, value));
        else if (key == "pair_min_similarity") cfg.pair_min_similarity = num(key, value);
        else if (key == "pair_search_radius") cfg.pair_search_radius = static_cast<int>(num(key, value));
        else if (key == "pair_points") cfg.pair_points = static_cast<int>(num(key, value));
        else if (key == "min_pairs") cfg.min_pairs = static_cast<int>(num(key, value));
        else if (key == "exclusion_buffer") cfg.exclusion_buffer = static_cast<int>(num(key, value));
        else if (key == "shrinkage") cfg.shrinkage = num(key, value);
        else if (key == "diag_floor_rel") cfg.diag_floor_rel = num(key, value);
        else if (key == "proposer_center") cfg.proposer_center = num(key, value);
        else if (key == "proposer_scale") cfg.proposer_scale = num(key, value);
        else throw ConfigError("unknown config key '" + key + "' in " + path);
    }
    cfg.validate();
    return cfg;
}

std::vector<double> resample_linear(const std::vector<double>& wl,
                                    const std::vector<double>& values,
                                    const WavelengthGrid& grid) {
    if (wl.size() != values.size()) throw ConfigError("spectrum wavelength/value length mismatch");
    if (wl.size() < 2) throw ConfigError("spectrum needs at least 2 samples");
    for (std::size_t i = 1; i < wl.size(); ++i)
        if (!(wl[i] > wl[i - 1])) throw ConfigError("spectrum wavelengths not strictly increasing");

    int overlapping = 0;
    double glo = grid.centers.front(), ghi = grid.centers.back();
    for (double w : wl)
        if (w >= glo && w <= ghi) ++overlapping;
    if (overlapping < 3)
        throw ConfigError("spectrum has only " + std::to_string(overlapping) +
                          " samples overlapping the grid range; need >= 3");

    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t b = 0; b < grid.size(); ++b) {
        double x = grid.centers[b];
        if (x < wl.front() || x > wl.back()) continue;  // out of range -> 0
        auto hi = std::lower_bound(wl.begin(), wl.end(), x);
        if (hi == wl.begin()) {
            out[b] = values.front();
            continue;
        }
        std::size_t j = static_cast<std::size_t>(hi - wl.begin());
        if (j == wl.size()) {
            out[b] = values.back();
            continue;
        }
        double x0 = wl[j - 1], x1 = wl[j];
        double t = (x - x0) / (x1 - x0);
        out[b] = (1.0 - t) * values[j - 1] + t * values[j];
    }
    return out;
}

GasTarget load_target(const std::string& path, const WavelengthGrid& grid) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open target spectrum " + path);
    grid.validate();

    std::vector<double> wl_u, val_u, wl_k, val_k;
    std::vector<double>*cur_wl = nullptr, *cur_val = nullptr;
    bool saw_section = false;

    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            std::string sec = trim(line.substr(1, line.size() - 2));
            saw_section = true;
            if (sec == "unit_absorption") {
                cur_wl = &wl_u;
                cur_val = &val_u;
            } else if (sec == "k") {
                cur_wl = &wl_k;
                cur_val = &val_k;
            } else {
                throw ConfigError("unknown section [" + sec + "] in " + path);
            }
            continue;
        }
        std::istringstream ss(line);
        double w, v;
        if (!(ss >> w >> v))
            throw ConfigError("malformed spectrum line '" + line + "' in " + path);
        if (!saw_section) {  // headerless table is k(wavelength)
            cur_wl = &wl_k;
            cur_val = &val_k;
            saw_section = true;
        }
        cur_wl->push_back(w);
        cur_val->push_back(v);
    }

    if (wl_k.empty()) throw ConfigError("target file " + path + " has no [k] spectrum");

    GasTarget t;
    t.k_coeffs = resample_linear(wl_k, val_k, grid);
    if (!wl_u.empty()) {
        t.unit_absorption = resample_linear(wl_u, val_u, grid);
    } else {
        t.unit_absorption.resize(t.k_coeffs.size());
        for (std::size_t i = 0; i < t.k_coeffs.size(); ++i)
            t.unit_absorption[i] = -t.k_coeffs[i];
    }
    for (double k : t.k_coeffs)
        if (k < 0) throw ConfigError("negative absorption coefficient in " + path);
    return t;
}

GasTarget builtin_target(GasId gas, const WavelengthGrid& grid) {
    grid.validate();
    GasTarget t;
    t.gas = gas;
    t.k_coeffs.resize(grid.size(), 0.0);
    auto lines = builtin_lines(gas);
    for (std::size_t b = 0; b < grid.size(); ++b) {
        double k = 0.0;
        for (const auto& ln : lines) k += ln.strength * gaussian(grid.centers[b], ln.center, ln.width);
        t.k_coeffs[b] = k;
    }
    t.unit_absorption.resize(grid.size());
    for (std::size_t b = 0; b < grid.size(); ++b) t.unit_absorption[b] = -t.k_coeffs[b];
    return t;
}

FitWindowSet resolve_windows(const GasConfig& cfg, const WavelengthGrid& grid,
                             const std::vector<std::uint8_t>& bad_bands) {
    cfg.validate();
    grid.validate();
    FitWindowSet ws;
    std::set<int> in_union;
    for (const auto& w : cfg.in_band) {
        auto idx = select_bands(grid, bad_bands, {w}, 3);
        in_union.insert(idx.begin(), idx.end());
        ws.in_sets.push_back(std::move(idx));
    }
    auto out_all = select_bands(grid, bad_bands, cfg.out_band, 1);
    for (int b : out_all)
        if (!in_union.count(b)) ws.out_set.push_back(b);
    if (ws.out_set.empty())
        throw ConfigError("out-band windows resolve to no usable bands on this grid");
    return ws;
}

}  // namespace plumescout
