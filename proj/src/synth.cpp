#include "plumescout/synth.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "plumescout/errors.hpp"

namespace plumescout {
namespace synth {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_braced_list(const std::string& value, const std::string& key) {
    std::string body = trim(value);
    if (body.size() >= 2 && body.front() == '{' && body.back() == '}')
        body = body.substr(1, body.size() - 2);
    std::vector<double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("non-numeric entry '" + item + "' in " + key);
        }
    }
    return out;
}

int class_of(const BackgroundSpec& bg, std::size_t r, std::size_t c, std::size_t cols) {
    const int n = static_cast<int>(bg.albedos.size());
    if (bg.class_layout == "single" || n == 1) return 0;
    if (bg.class_layout == "halves") return c < cols / 2 ? 0 : 1 % n;
    if (bg.class_layout.rfind("blocks:", 0) == 0) {
        int k = std::stoi(bg.class_layout.substr(7));
        return static_cast<int>((r / k + c / k) % static_cast<std::size_t>(n));
    }
    throw ConfigError("unknown class_layout '" + bg.class_layout + "'");
}

}  // namespace

double Rng::uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double base_continuum(double wl_nm) {
    auto bump = [](double wl, double c, double w) {
        double u = (wl - c) / w;
        return std::exp(-u * u);
    };
    return 8.0 * bump(wl_nm, 900.0, 700.0) + 1.5 * bump(wl_nm, 2100.0, 600.0) + 0.4;
}

WavelengthGrid SceneSpec::make_grid() const {
    WavelengthGrid g;
    if (!wavelengths.empty()) {
        g.centers = wavelengths;
    } else {
        g.centers.resize(bands);
        for (std::size_t b = 0; b < bands; ++b)
            g.centers[b] = wl_min + (wl_max - wl_min) * static_cast<double>(b) /
                                        static_cast<double>(bands > 1 ? bands - 1 : 1);
    }
    g.validate();
    return g;
}

void SceneSpec::validate() const {
    if (rows == 0 || cols == 0 || bands == 0) throw ConfigError("scene dimensions must be positive");
    if (!wavelengths.empty() && wavelengths.size() != bands)
        throw ConfigError("explicit wavelength list length does not match bands");
    make_grid();
    if (background.albedos.empty()) throw ConfigError("need at least one albedo class");
    for (double a : background.albedos)
        if (a <= 0) throw ConfigError("albedos must be positive");
    if (background.class_layout == "halves" && background.albedos.size() < 2)
        throw ConfigError("halves layout needs 2 albedo classes");
    if (background.class_layout.rfind("blocks:", 0) == 0) {
        int k = 0;
        try {
            k = std::stoi(background.class_layout.substr(7));
        } catch (const std::exception&) {
        }
        if (k < 1) throw ConfigError("blocks layout needs a positive block size");
    } else if (background.class_layout != "single" && background.class_layout != "halves") {
        throw ConfigError("unknown class_layout '" + background.class_layout + "'");
    }
    if (background.cov_amp < 0 || background.cov_amp > 0.2)
        throw ConfigError("cov_amp out of range [0, 0.2]");
    if (!(std::abs(background.cov_rho) < 1.0))
        throw ConfigError("cov_rho must satisfy |rho| < 1 for a positive-definite covariance");
    if (background.stripe_amp < 0 || background.stripe_amp > 0.2)
        throw ConfigError("stripe_amp out of range [0, 0.2]");
    if (noise_sigma < 0) throw ConfigError("noise_sigma must be >= 0");
    // Keep additive noise far from the non-negativity boundary.
    double min_mean = 1e300;
    auto grid = make_grid();
    double min_albedo = *std::min_element(background.albedos.begin(), background.albedos.end());
    for (double wl : grid.centers) min_mean = std::min(min_mean, min_albedo * base_continuum(wl));
    if (noise_sigma > min_mean / 10.0)
        throw ConfigError("noise_sigma too large for the radiance floor (max " +
                          std::to_string(min_mean / 10.0) + ")");
    if (alpha_cutoff <= 0) throw ConfigError("alpha_cutoff must be positive");
    for (const auto& p : plumes) {
        if (p.stretch <= 0) throw ConfigError("plume stretch must be positive");
        if (p.peak_alpha < 0) throw ConfigError("plume peak_alpha must be >= 0");
    }
    for (const auto& c : clutter) {
        if (c.radius <= 0) throw ConfigError("clutter radius must be positive");
        if (c.amplitude <= -1.0) throw ConfigError("clutter amplitude must exceed -1");
    }
    for (int b : bad_bands)
        if (b < 0 || b >= static_cast<int>(bands)) throw ConfigError("bad band index out of range");
}

const std::vector<double>& SceneTruth::alpha_field(GasId gas) const {
    auto it = alpha_fields.find(gas);
    if (it == alpha_fields.end())
        throw ConfigError(std::string("no truth alpha field for gas ") + gas_name(gas));
    return it->second;
}

std::vector<std::uint8_t> SceneTruth::plume_mask_union(GasId gas) const {
    const auto& field = alpha_field(gas);
    std::vector<std::uint8_t> mask(field.size(), 0);
    for (std::size_t i = 0; i < field.size(); ++i) mask[i] = field[i] > 0.0 ? 1 : 0;
    return mask;
}

SceneData generate(const SceneSpec& spec, const std::map<GasId, GasTarget>& targets) {
    spec.validate();
    const std::size_t rows = spec.rows, cols = spec.cols, bands = spec.bands;
    WavelengthGrid grid = spec.make_grid();

    // Gases present in the scene must have targets with k on this grid.
    for (const auto& p : spec.plumes) {
        auto it = targets.find(p.gas);
        if (it == targets.end())
            throw ConfigError(std::string("no target supplied for gas ") + gas_name(p.gas));
        if (it->second.k_coeffs.size() != bands)
            throw ConfigError("target k_coeffs length does not match scene bands");
    }

    SceneTruth truth;
    truth.rows = rows;
    truth.cols = cols;
    truth.noise_sigma = spec.noise_sigma;

    const std::size_t nclasses = spec.background.albedos.size();
    truth.class_means.resize(nclasses);
    for (std::size_t k = 0; k < nclasses; ++k) {
        Eigen::VectorXd m(bands);
        for (std::size_t b = 0; b < bands; ++b)
            m[static_cast<Eigen::Index>(b)] =
                spec.background.albedos[k] * base_continuum(grid.centers[b]);
        truth.class_means[k] = m;
    }

    // AR(1) band correlation Cholesky factor, shared across classes.
    Eigen::MatrixXd corr(bands, bands);
    for (std::size_t i = 0; i < bands; ++i)
        for (std::size_t j = 0; j < bands; ++j)
            corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::pow(spec.background.cov_rho,
                         std::abs(static_cast<double>(i) - static_cast<double>(j)));
    Eigen::LLT<Eigen::MatrixXd> corr_llt(corr);
    if (corr_llt.info() != Eigen::Success)
        throw ConfigError("background correlation matrix is not positive definite");
    Eigen::MatrixXd corr_chol = corr_llt.matrixL();

    truth.class_cov_factors.resize(nclasses);
    for (std::size_t k = 0; k < nclasses; ++k)
        truth.class_cov_factors[k] =
            spec.background.cov_amp * truth.class_means[k].asDiagonal() * corr_chol;

    truth.class_map.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            truth.class_map[r * cols + c] = class_of(spec.background, r, c, cols);

    Rng rng(spec.seed);

    truth.stripe.resize(cols);
    for (std::size_t c = 0; c < cols; ++c)
        truth.stripe[c] = spec.background.stripe_amp * rng.normal();

    // Background radiance, raster order.
    SpectralCube cube;
    cube.rows = rows;
    cube.cols = cols;
    cube.bands = bands;
    cube.grid = grid;
    cube.bad_bands.assign(bands, 0);
    for (int b : spec.bad_bands) cube.bad_bands[static_cast<std::size_t>(b)] = 1;
    cube.data.assign(rows * cols * bands, 0.0);

    Eigen::VectorXd z(bands);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            for (std::size_t b = 0; b < bands; ++b) z[static_cast<Eigen::Index>(b)] = rng.normal();
            int cls = truth.class_map[r * cols + c];
            Eigen::VectorXd px = truth.class_means[static_cast<std::size_t>(cls)] *
                                     (1.0 + truth.stripe[c]) +
                                 truth.class_cov_factors[static_cast<std::size_t>(cls)] * z;
            for (std::size_t b = 0; b < bands; ++b) cube.at(r, c, b) = px[static_cast<Eigen::Index>(b)];
        }
    }

    // Injected concentration fields, zeroed below the cutoff per plume.
    truth.plume_masks.resize(spec.plumes.size());
    for (std::size_t pi = 0; pi < spec.plumes.size(); ++pi) {
        const auto& p = spec.plumes[pi];
        auto& field = truth.alpha_fields[p.gas];
        if (field.empty()) field.assign(rows * cols, 0.0);
        auto& mask = truth.plume_masks[pi];
        mask.assign(rows * cols, 0);
        const double su = p.stretch;
        const double sv = std::max(1.0, p.stretch / 3.0);
        const double ct = std::cos(p.wind_dir), st = std::sin(p.wind_dir);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                double dx = static_cast<double>(c) - p.col;
                double dy = static_cast<double>(r) - p.row;
                double u = dx * ct + dy * st;
                double v = -dx * st + dy * ct;
                double a = p.peak_alpha * std::exp(-0.5 * (u * u / (su * su) + v * v / (sv * sv)));
                if (a >= spec.alpha_cutoff) {
                    field[r * cols + c] += a;
                    mask[r * cols + c] = 1;
                }
            }
        }
    }

    // Clutter: flat multiplicative factor, union of disks.
    truth.clutter_mask.assign(rows * cols, 0);
    std::vector<double> clutter_factor(rows * cols, 1.0);
    for (const auto& cl : spec.clutter) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                double dx = static_cast<double>(c) - cl.col;
                double dy = static_cast<double>(r) - cl.row;
                if (dx * dx + dy * dy <= cl.radius * cl.radius) {
                    clutter_factor[r * cols + c] *= 1.0 + cl.amplitude;
                    truth.clutter_mask[r * cols + c] = 1;
                }
            }
        }
    }

    // Apply clutter and Beer-Lambert transmission.
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double cf = clutter_factor[r * cols + c];
            if (cf != 1.0)
                for (std::size_t b = 0; b < bands; ++b) cube.at(r, c, b) *= cf;
            for (const auto& [gas, field] : truth.alpha_fields) {
                double a = field[r * cols + c];
                if (a <= 0.0) continue;
                const auto& k = targets.at(gas).k_coeffs;
                for (std::size_t b = 0; b < bands; ++b)
                    cube.at(r, c, b) *= std::exp(-a * k[b]);
            }
        }
    }

    if (spec.noise_sigma > 0.0) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                for (std::size_t b = 0; b < bands; ++b)
                    cube.at(r, c, b) += spec.noise_sigma * rng.normal();
    }

    cube.product = "radiance";
    cube.meta["scene seed"] = std::to_string(spec.seed);
    cube.validate();
    return SceneData{std::move(cube), std::move(truth)};
}

std::vector<double> oracle_mf(const SpectralCube& cube, const SceneTruth& truth,
                              const GasTarget& target, const std::vector<int>& band_set) {
    if (band_set.empty()) throw ConfigError("oracle band set is empty");
    if (truth.class_means.empty()) throw ConfigError("truth has no class means");
    const std::size_t rows = cube.rows, cols = cube.cols;
    const Eigen::Index nb = static_cast<Eigen::Index>(band_set.size());

    // True covariance per class on the selected bands.
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
    std::vector<Eigen::VectorXd> means_sel;
    for (std::size_t k = 0; k < truth.class_means.size(); ++k) {
        Eigen::MatrixXd f_sel(nb, truth.class_cov_factors[k].cols());
        Eigen::VectorXd m_sel(nb);
        for (Eigen::Index i = 0; i < nb; ++i) {
            f_sel.row(i) = truth.class_cov_factors[k].row(band_set[static_cast<std::size_t>(i)]);
            m_sel[i] = truth.class_means[k][band_set[static_cast<std::size_t>(i)]];
        }
        Eigen::MatrixXd sigma = f_sel * f_sel.transpose();
        sigma.diagonal().array() += truth.noise_sigma * truth.noise_sigma;
        Eigen::LLT<Eigen::MatrixXd> llt(sigma);
        if (llt.info() != Eigen::Success)
            throw NumericError("true covariance is singular; oracle needs noise or band structure");
        llts.push_back(std::move(llt));
        means_sel.push_back(std::move(m_sel));
    }

    Eigen::VectorXd u_sel(nb);
    for (Eigen::Index i = 0; i < nb; ++i)
        u_sel[i] = target.unit_absorption[static_cast<std::size_t>(band_set[static_cast<std::size_t>(i)])];

    std::vector<double> out(rows * cols, std::numeric_limits<double>::quiet_NaN());
    Eigen::VectorXd x(nb);
    for (std::size_t c = 0; c < cols; ++c) {
        double gain = 1.0 + (c < truth.stripe.size() ? truth.stripe[c] : 0.0);
        std::vector<Eigen::VectorXd> w_per_class(llts.size());
        std::vector<double> denom_per_class(llts.size());
        std::vector<Eigen::VectorXd> mu_per_class(llts.size());
        for (std::size_t k = 0; k < llts.size(); ++k) {
            Eigen::VectorXd mu = means_sel[k] * gain;
            Eigen::VectorXd t = mu.cwiseProduct(u_sel);
            Eigen::VectorXd w = llts[k].solve(t);
            double denom = t.dot(w);
            if (!(denom > 0.0) || !std::isfinite(denom))
                throw NumericError("oracle target has no energy under the true covariance");
            mu_per_class[k] = std::move(mu);
            w_per_class[k] = std::move(w);
            denom_per_class[k] = denom;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            if (!cube.pixel_valid(r, c)) continue;
            int cls = truth.class_map[r * cols + c];
            for (Eigen::Index i = 0; i < nb; ++i)
                x[i] = cube.at(r, c, static_cast<std::size_t>(band_set[static_cast<std::size_t>(i)]));
            out[r * cols + c] =
                w_per_class[static_cast<std::size_t>(cls)].dot(x - mu_per_class[static_cast<std::size_t>(cls)]) /
                denom_per_class[static_cast<std::size_t>(cls)];
        }
    }
    return out;
}

SceneSpec load_scene_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scene spec " + path);
    SceneSpec spec;
    spec.background.albedos = {1.0};

    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("malformed scene spec line '" + line + "' in " + path);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto num = [&key, &value]() {
            try {
                return std::stod(value);
            } catch (const std::exception&) {
                throw ConfigError("scene spec key '" + key + "' is not numeric");
            }
        };
        if (key == "rows") spec.rows = static_cast<std::size_t>(num());
        else if (key == "cols") spec.cols = static_cast<std::size_t>(num());
        else if (key == "bands") spec.bands = static_cast<std::size_t>(num());
        else if (key == "wl_min") spec.wl_min = num();
        else if (key == "wl_max") spec.wl_max = num();
        else if (key == "wavelengths") spec.wavelengths = parse_braced_list(value, key);
        else if (key == "seed") spec.seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "albedos") spec.background.albedos = parse_braced_list(value, key);
        else if (key == "class_layout") spec.background.class_layout = value;
        else if (key == "cov_amp") spec.background.cov_amp = num();
        else if (key == "cov_rho") spec.background.cov_rho = num();
        else if (key == "stripe_amp") spec.background.stripe_amp = num();
        else if (key == "noise_sigma") spec.noise_sigma = num();
        else if (key == "alpha_cutoff") spec.alpha_cutoff = num();
        else if (key == "bad_bands") {
            for (double b : parse_braced_list(value, key)) spec.bad_bands.push_back(static_cast<int>(b));
        } else if (key == "plume") {
            std::istringstream ss(value);
            PlumeSpec p;
            std::string gas;
            if (!(ss >> p.row >> p.col >> p.wind_dir >> p.stretch >> p.peak_alpha >> gas))
                throw ConfigError("plume line needs: row col wind_dir stretch peak_alpha gas");
            p.gas = parse_gas(gas);
            spec.plumes.push_back(p);
        } else if (key == "clutter") {
            std::istringstream ss(value);
            ClutterSpec c;
            if (!(ss >> c.row >> c.col >> c.radius >> c.amplitude))
                throw ConfigError("clutter line needs: row col radius amplitude");
            spec.clutter.push_back(c);
        } else {
            throw ConfigError("unknown scene spec key '" + key + "' in " + path);
        }
    }
    spec.validate();
    return spec;
}

void write_scene(const SceneData& scene, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_cube(scene.cube, out_dir + "/scene");

    auto write_band = [&](const std::string& name, const std::vector<double>& values) {
        SpectralCube raster;
        raster.rows = scene.cube.rows;
        raster.cols = scene.cube.cols;
        raster.bands = 1;
        raster.grid.centers = {1000.0};
        raster.bad_bands = {0};
        raster.product = "truth";
        raster.data = values;
        write_cube(raster, out_dir + "/" + name);
    };

    for (const auto& [gas, field] : scene.truth.alpha_fields) {
        write_band(std::string("alpha_") + gas_name(gas), field);
        auto mask = scene.truth.plume_mask_union(gas);
        std::vector<double> maskd(mask.begin(), mask.end());
        write_band(std::string("plume_mask_") + gas_name(gas), maskd);
    }
    std::vector<double> classd(scene.truth.class_map.begin(), scene.truth.class_map.end());
    write_band("class_map", classd);
    std::vector<double> clutterd(scene.truth.clutter_mask.begin(), scene.truth.clutter_mask.end());
    write_band("clutter_mask", clutterd);
}

}  // namespace synth
}  // namespace plumescout
