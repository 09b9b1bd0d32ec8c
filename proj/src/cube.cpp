#include "plumescout/cube.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plumescout/errors.hpp"

namespace plumescout {

namespace {

constexpr double kWavelengthMin = 300.0;
constexpr double kWavelengthMax = 3000.0;

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericError("failed to format value");
    return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& braced) {
    std::string body = trim(braced);
    if (body.size() >= 2 && body.front() == '{' && body.back() == '}')
        body = body.substr(1, body.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_number(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("header field '" + key + "' is not numeric: '" + s + "'");
    }
}

std::vector<double> parse_number_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(parse_number(item, key));
    return out;
}

// Little-endian float32 payload codec; independent of host byte order.
void encode_f32(float v, unsigned char* out) {
    auto u = std::bit_cast<std::uint32_t>(v);
    out[0] = static_cast<unsigned char>(u & 0xff);
    out[1] = static_cast<unsigned char>((u >> 8) & 0xff);
    out[2] = static_cast<unsigned char>((u >> 16) & 0xff);
    out[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

float decode_f32(const unsigned char* in) {
    std::uint32_t u = static_cast<std::uint32_t>(in[0]) |
                      (static_cast<std::uint32_t>(in[1]) << 8) |
                      (static_cast<std::uint32_t>(in[2]) << 16) |
                      (static_cast<std::uint32_t>(in[3]) << 24);
    return std::bit_cast<float>(u);
}

std::pair<std::string, std::string> paths_for(const std::string& path) {
    std::string base = path;
    if (base.size() > 4 && base.substr(base.size() - 4) == ".hdr")
        base = base.substr(0, base.size() - 4);
    return {base + ".hdr", base + ".dat"};
}

}  // namespace

void WavelengthGrid::validate() const {
    if (centers.empty()) throw ConfigError("wavelength grid is empty");
    for (std::size_t i = 0; i < centers.size(); ++i) {
        if (!(centers[i] > kWavelengthMin && centers[i] < kWavelengthMax))
            throw ConfigError("wavelength " + format_double(centers[i]) +
                              " outside (300, 3000) nm");
        if (i > 0 && !(centers[i] > centers[i - 1]))
            throw ConfigError("wavelengths not strictly increasing at index " +
                              std::to_string(i));
    }
    if (!fwhm.empty() && fwhm.size() != centers.size())
        throw ConfigError("fwhm length does not match band count");
}

void BandWindow::validate() const {
    if (!(lo < hi))
        throw ConfigError("band window [" + format_double(lo) + ", " +
                          format_double(hi) + "] requires lo < hi");
}

bool SpectralCube::pixel_valid(std::size_t r, std::size_t c) const {
    for (std::size_t b = 0; b < bands; ++b) {
        double v = at(r, c, b);
        if (!std::isfinite(v) || v == nodata) return false;
    }
    return true;
}

void SpectralCube::validate() const {
    if (rows == 0 || cols == 0 || bands == 0)
        throw ConfigError("cube dimensions must be positive");
    if (data.size() != rows * cols * bands)
        throw ConfigError("cube data length does not match rows*cols*bands");
    grid.validate();
    if (grid.size() != bands)
        throw ConfigError("wavelength grid length " + std::to_string(grid.size()) +
                          " does not match band count " + std::to_string(bands));
    if (bad_bands.size() != bands)
        throw ConfigError("bad-band mask length does not match band count");
    if (product == "radiance") {
        for (double v : data) {
            if (!std::isfinite(v))
                throw ConfigError("radiance cube contains non-finite values");
            if (v < 0.0 && v != nodata)
                throw ConfigError("radiance cube contains negative non-nodata value " +
                                  format_double(v));
        }
    }
}

SpectralCube read_cube(const std::string& path) {
    auto [hdr_path, dat_path] = paths_for(path);
    std::ifstream hdr(hdr_path);
    if (!hdr) throw IoError("cannot open header " + hdr_path);

    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(hdr, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError("malformed header line in " + hdr_path + ": '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        // Lists may wrap across lines until the closing brace.
        if (!val.empty() && val[0] == '{' && val.find('}') == std::string::npos) {
            std::string cont;
            while (std::getline(hdr, cont)) {
                val += " " + trim(cont);
                if (cont.find('}') != std::string::npos) break;
            }
        }
        kv[key] = val;
    }

    auto take = [&kv](const std::string& key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) throw IoError("header missing required field '" + key + "'");
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto take_optional = [&kv](const std::string& key, std::string* out) {
        auto it = kv.find(key);
        if (it == kv.end()) return false;
        *out = it->second;
        kv.erase(it);
        return true;
    };

    SpectralCube cube;
    double samples = parse_number(take("samples"), "samples");
    double lines_n = parse_number(take("lines"), "lines");
    double bands_n = parse_number(take("bands"), "bands");
    if (samples <= 0 || lines_n <= 0 || bands_n <= 0 ||
        samples != std::floor(samples) || lines_n != std::floor(lines_n) ||
        bands_n != std::floor(bands_n))
        throw IoError("samples/lines/bands must be positive integers");
    cube.cols = static_cast<std::size_t>(samples);
    cube.rows = static_cast<std::size_t>(lines_n);
    cube.bands = static_cast<std::size_t>(bands_n);

    std::string s;
    if (take_optional("data type", &s) && parse_number(s, "data type") != 4)
        throw IoError("unsupported data type (only 4 = float32)");
    if (take_optional("interleave", &s) && s != "bsq")
        throw IoError("unsupported interleave '" + s + "' (only bsq)");
    if (take_optional("byte order", &s) && parse_number(s, "byte order") != 0)
        throw IoError("unsupported byte order (only 0 = little-endian)");
    if (take_optional("nodata", &s)) cube.nodata = parse_number(s, "nodata");
    if (take_optional("product", &s)) cube.product = s;

    cube.grid.centers = parse_number_list(take("wavelength"), "wavelength");
    if (cube.grid.centers.size() != cube.bands)
        throw IoError("wavelength list length " + std::to_string(cube.grid.centers.size()) +
                      " does not match bands " + std::to_string(cube.bands));
    if (take_optional("fwhm", &s)) {
        cube.grid.fwhm = parse_number_list(s, "fwhm");
        if (cube.grid.fwhm.size() != cube.bands)
            throw IoError("fwhm list length does not match bands");
    }

    cube.bad_bands.assign(cube.bands, 0);
    if (take_optional("bad bands", &s)) {
        auto flags = parse_number_list(s, "bad bands");
        if (flags.size() != cube.bands)
            throw IoError("bad-band list length does not match bands");
        for (std::size_t i = 0; i < flags.size(); ++i)
            cube.bad_bands[i] = flags[i] != 0.0 ? 1 : 0;
    }
    cube.meta = std::move(kv);

    std::ifstream dat(dat_path, std::ios::binary);
    if (!dat) throw IoError("cannot open payload " + dat_path);
    dat.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(dat.tellg());
    const std::uint64_t expected = 4ull * cube.rows * cube.cols * cube.bands;
    if (file_size != expected)
        throw IoError("payload size " + std::to_string(file_size) + " does not match header (" +
                      std::to_string(expected) + " bytes expected) in " + dat_path);
    dat.seekg(0, std::ios::beg);

    std::vector<unsigned char> raw(expected);
    dat.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
    if (!dat) throw IoError("short read from " + dat_path);

    cube.data.resize(cube.rows * cube.cols * cube.bands);
    for (std::size_t i = 0; i < cube.data.size(); ++i)
        cube.data[i] = static_cast<double>(decode_f32(raw.data() + 4 * i));

    try {
        cube.validate();
    } catch (const ConfigError& e) {
        throw IoError(std::string("invalid cube in ") + hdr_path + ": " + e.what());
    }
    return cube;
}

void write_cube(const SpectralCube& cube, const std::string& path) {
    cube.validate();
    auto [hdr_path, dat_path] = paths_for(path);

    std::filesystem::path parent = std::filesystem::path(hdr_path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }

    std::ofstream hdr(hdr_path);
    if (!hdr) throw IoError("cannot write header " + hdr_path);
    hdr << "samples = " << cube.cols << "\n";
    hdr << "lines = " << cube.rows << "\n";
    hdr << "bands = " << cube.bands << "\n";
    hdr << "data type = 4\n";
    hdr << "interleave = bsq\n";
    hdr << "byte order = 0\n";
    hdr << "nodata = " << format_double(cube.nodata) << "\n";
    hdr << "product = " << cube.product << "\n";
    auto write_list = [&hdr](const std::string& key, const std::vector<double>& vals) {
        hdr << key << " = {";
        for (std::size_t i = 0; i < vals.size(); ++i)
            hdr << (i ? ", " : "") << format_double(vals[i]);
        hdr << "}\n";
    };
    write_list("wavelength", cube.grid.centers);
    if (!cube.grid.fwhm.empty()) write_list("fwhm", cube.grid.fwhm);
    bool any_bad = std::any_of(cube.bad_bands.begin(), cube.bad_bands.end(),
                               [](std::uint8_t b) { return b != 0; });
    if (any_bad) {
        hdr << "bad bands = {";
        for (std::size_t i = 0; i < cube.bad_bands.size(); ++i)
            hdr << (i ? ", " : "") << int(cube.bad_bands[i]);
        hdr << "}\n";
    }
    for (const auto& [k, v] : cube.meta) hdr << k << " = " << v << "\n";
    if (!hdr) throw IoError("failed writing header " + hdr_path);
    hdr.close();

    std::ofstream dat(dat_path, std::ios::binary);
    if (!dat) throw IoError("cannot write payload " + dat_path);
    std::vector<unsigned char> raw(4 * cube.data.size());
    for (std::size_t i = 0; i < cube.data.size(); ++i)
        encode_f32(static_cast<float>(cube.data[i]), raw.data() + 4 * i);
    dat.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!dat) throw IoError("failed writing payload " + dat_path);
}

std::vector<int> select_bands(const WavelengthGrid& grid,
                              const std::vector<std::uint8_t>& bad_bands,
                              const std::vector<BandWindow>& windows,
                              int min_bands) {
    if (windows.empty()) throw ConfigError("no band windows given");
    for (const auto& w : windows) w.validate();
    std::vector<int> out;
    for (std::size_t b = 0; b < grid.size(); ++b) {
        if (b < bad_bands.size() && bad_bands[b]) continue;
        double wl = grid.centers[b];
        for (const auto& w : windows) {
            if (w.contains(wl)) {
                out.push_back(static_cast<int>(b));
                break;
            }
        }
    }
    if (static_cast<int>(out.size()) < min_bands) {
        std::ostringstream oss;
        oss << "band windows resolve to " << out.size() << " band(s), need >= " << min_bands;
        throw ConfigError(oss.str());
    }
    return out;
}

std::vector<int> select_bands(const SpectralCube& cube,
                              const std::vector<BandWindow>& windows,
                              int min_bands) {
    return select_bands(cube.grid, cube.bad_bands, windows, min_bands);
}

}  // namespace plumescout
