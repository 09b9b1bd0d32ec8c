#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace plumescout {

// Band-center wavelengths in nm, strictly increasing, all within (300, 3000).
struct WavelengthGrid {
    std::vector<double> centers;
    std::vector<double> fwhm;  // optional; empty or one entry per band

    std::size_t size() const { return centers.size(); }
    void validate() const;  // throws ConfigError on violation
};

// Closed wavelength interval [lo, hi] in nm.
struct BandWindow {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double wl) const { return wl >= lo && wl <= hi; }
    void validate() const;
};

// Hyperspectral raster, band-sequential storage:
//   data[(band * rows + row) * cols + col]
//
// On disk this is a pair of files, "<name>.hdr" + "<name>.dat":
//   - the header is UTF-8 "key = value" lines; lists use "{a, b, c}".
//     Required keys: samples, lines, bands, data type (4 = float32),
//     interleave (bsq), wavelength. Optional: byte order (0), nodata,
//     product, fwhm, bad bands (1 = bad). Unknown keys are preserved
//     in `meta` and written back verbatim.
//   - the payload is raw little-endian float32, band-sequential.
//     Values are rounded to float32 on write; a cube read from disk
//     round-trips bit-exactly.
//
// `product` distinguishes what the raster holds; radiance cubes must be
// non-negative (or nodata) everywhere, derived products (enhancement,
// score, truth) may be signed.
struct SpectralCube {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t bands = 0;
    std::vector<double> data;
    WavelengthGrid grid;
    std::vector<std::uint8_t> bad_bands;  // 1 = bad; sized `bands`
    double nodata = -9999.0;
    std::string product = "radiance";
    std::map<std::string, std::string> meta;

    double at(std::size_t r, std::size_t c, std::size_t b) const {
        return data[(b * rows + r) * cols + c];
    }
    double& at(std::size_t r, std::size_t c, std::size_t b) {
        return data[(b * rows + r) * cols + c];
    }

    // A pixel is usable when every band holds a finite non-sentinel value.
    bool pixel_valid(std::size_t r, std::size_t c) const;

    void validate() const;  // throws ConfigError
};

// Reads "<path>.hdr" + "<path>.dat"; `path` may include the .hdr suffix.
// Throws IoError on missing/inconsistent header fields, payload size
// mismatch, or non-monotonic wavelengths.
SpectralCube read_cube(const std::string& path);

// Writes the header/payload pair so that read_cube reproduces the cube.
void write_cube(const SpectralCube& cube, const std::string& path);

// Sorted, duplicate-free indices of non-bad bands whose centers fall in any
// window (inclusive bounds). Throws ConfigError when fewer than `min_bands`
// bands resolve in total.
std::vector<int> select_bands(const SpectralCube& cube,
                              const std::vector<BandWindow>& windows,
                              int min_bands = 1);

std::vector<int> select_bands(const WavelengthGrid& grid,
                              const std::vector<std::uint8_t>& bad_bands,
                              const std::vector<BandWindow>& windows,
                              int min_bands = 1);

}  // namespace plumescout
