#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "plumescout/cube.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("plumescout_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    std::filesystem::path path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline plumescout::WavelengthGrid linear_grid(std::size_t bands, double lo = 381.0,
                                              double hi = 2493.0) {
    plumescout::WavelengthGrid g;
    g.centers.resize(bands);
    for (std::size_t b = 0; b < bands; ++b)
        g.centers[b] = lo + (hi - lo) * static_cast<double>(b) /
                                static_cast<double>(bands > 1 ? bands - 1 : 1);
    return g;
}

// EMIT-like: 285 bands over the full VSWIR range.
inline plumescout::WavelengthGrid emit_like_grid() { return linear_grid(285); }

// Random positive cube whose values are exactly float32-representable.
inline plumescout::SpectralCube random_cube(std::size_t rows, std::size_t cols, std::size_t bands,
                                            std::uint64_t seed) {
    plumescout::SpectralCube cube;
    cube.rows = rows;
    cube.cols = cols;
    cube.bands = bands;
    cube.grid = linear_grid(bands);
    cube.bad_bands.assign(bands, 0);
    cube.data.resize(rows * cols * bands);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 20.0f);
    for (auto& v : cube.data) v = static_cast<double>(dist(rng));
    return cube;
}

}  // namespace testutil
