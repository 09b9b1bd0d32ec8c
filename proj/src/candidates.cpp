#include "plumescout/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "plumescout/errors.hpp"
#include "plumescout/jsonfmt.hpp"

namespace plumescout {

namespace {

std::int64_t pix_key(int r, int c) {
    return (static_cast<std::int64_t>(r) << 32) | static_cast<std::uint32_t>(c);
}

struct Vertex {
    int x, y;
    bool operator==(const Vertex&) const = default;
};
struct VertexHash {
    std::size_t operator()(const Vertex& v) const {
        return std::hash<std::int64_t>()((static_cast<std::int64_t>(v.y) << 32) |
                                         static_cast<std::uint32_t>(v.x));
    }
};

// Axis directions: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
struct Edge {
    Vertex from, to;
    int dir;
    bool used = false;
};

Vertex step(Vertex v, int dir) {
    switch (dir) {
        case 0: return {v.x + 1, v.y};
        case 1: return {v.x, v.y + 1};
        case 2: return {v.x - 1, v.y};
        default: return {v.x, v.y - 1};
    }
}

}  // namespace

void ScoreMap::validate() const {
    if (rows == 0 || cols == 0) throw ConfigError("score map dimensions must be positive");
    if (values.size() != rows * cols) throw ConfigError("score map size mismatch");
    for (double v : values)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ConfigError("score map value " + std::to_string(v) + " outside [0, 1]");
}

ProposerParams ProposerParams::defaults_for(const GasConfig& cfg) {
    ProposerParams p;
    p.logistic_center = cfg.proposer_center;
    p.logistic_scale = cfg.proposer_scale;
    return p;
}

double ring_signed_area(const Ring& ring) {
    double twice = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const auto& [x0, y0] = ring[i];
        const auto& [x1, y1] = ring[i + 1];
        twice += x0 * y1 - x1 * y0;
    }
    return 0.5 * twice;
}

std::vector<Ring> trace_outline(const std::vector<std::pair<int, int>>& pixels) {
    if (pixels.empty()) return {};
    std::unordered_set<std::int64_t> in_set;
    in_set.reserve(pixels.size() * 2);
    for (const auto& [r, c] : pixels) in_set.insert(pix_key(r, c));
    auto contains = [&in_set](int r, int c) { return in_set.count(pix_key(r, c)) != 0; };

    // Boundary edges, directed with the pixel set on the left.
    std::vector<Edge> edges;
    for (const auto& [r, c] : pixels) {
        if (!contains(r - 1, c)) edges.push_back({{c, r}, {c + 1, r}, 0});
        if (!contains(r, c + 1)) edges.push_back({{c + 1, r}, {c + 1, r + 1}, 1});
        if (!contains(r + 1, c)) edges.push_back({{c + 1, r + 1}, {c, r + 1}, 2});
        if (!contains(r, c - 1)) edges.push_back({{c, r + 1}, {c, r}, 3});
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.from.y, a.from.x, a.dir) < std::tie(b.from.y, b.from.x, b.dir);
    });

    std::unordered_map<Vertex, std::vector<std::size_t>, VertexHash> outgoing;
    for (std::size_t i = 0; i < edges.size(); ++i) outgoing[edges[i].from].push_back(i);

    std::vector<Ring> rings;
    for (std::size_t start = 0; start < edges.size(); ++start) {
        if (edges[start].used) continue;
        Ring ring;
        std::size_t cur = start;
        while (!edges[cur].used) {
            edges[cur].used = true;
            ring.emplace_back(edges[cur].from.x, edges[cur].from.y);
            Vertex at = edges[cur].to;
            const int din = edges[cur].dir;
            // Rightmost-first turn keeps corner-touching lobes on one ring.
            std::size_t next = edges.size();
            for (int turn : {(din + 3) % 4, din, (din + 1) % 4}) {
                auto it = outgoing.find(at);
                if (it == outgoing.end()) break;
                for (std::size_t ei : it->second) {
                    if (!edges[ei].used && edges[ei].dir == turn) {
                        next = ei;
                        break;
                    }
                }
                if (next != edges.size()) break;
            }
            if (next == edges.size()) break;  // ring closed
            cur = next;
        }
        // Canonical start: lexicographically smallest (y, x) vertex.
        std::size_t best = 0;
        for (std::size_t i = 1; i < ring.size(); ++i) {
            if (std::tie(ring[i].second, ring[i].first) < std::tie(ring[best].second, ring[best].first))
                best = i;
        }
        std::rotate(ring.begin(), ring.begin() + static_cast<std::ptrdiff_t>(best), ring.end());
        ring.push_back(ring.front());
        rings.push_back(std::move(ring));
    }

    // Exterior (positive area, largest first), then holes.
    std::stable_sort(rings.begin(), rings.end(), [](const Ring& a, const Ring& b) {
        return ring_signed_area(a) > ring_signed_area(b);
    });
    return rings;
}

std::vector<PlumeCandidate> extract_candidates(const ScoreMap& map, const ProposerParams& params) {
    map.validate();
    if (params.base_threshold <= 0.0 || params.base_threshold >= 1.0)
        throw ConfigError("base_threshold must be in (0, 1)");
    if (params.min_component_px < 1) throw ConfigError("min_component_px must be >= 1");

    const int rows = static_cast<int>(map.rows), cols = static_cast<int>(map.cols);
    std::vector<std::uint8_t> seen(map.values.size(), 0);
    std::vector<PlumeCandidate> out;

    for (int r0 = 0; r0 < rows; ++r0) {
        for (int c0 = 0; c0 < cols; ++c0) {
            std::size_t idx0 = static_cast<std::size_t>(r0) * map.cols + static_cast<std::size_t>(c0);
            if (seen[idx0] || map.values[idx0] < params.base_threshold) continue;

            PlumeCandidate cand;
            cand.gas = map.gas;
            std::deque<std::pair<int, int>> queue{{r0, c0}};
            seen[idx0] = 1;
            while (!queue.empty()) {
                auto [r, c] = queue.front();
                queue.pop_front();
                cand.pixels.emplace_back(r, c);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        int nr = r + dr, nc = c + dc;
                        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                        std::size_t nidx = static_cast<std::size_t>(nr) * map.cols +
                                           static_cast<std::size_t>(nc);
                        if (seen[nidx] || map.values[nidx] < params.base_threshold) continue;
                        seen[nidx] = 1;
                        queue.emplace_back(nr, nc);
                    }
                }
            }
            std::sort(cand.pixels.begin(), cand.pixels.end());
            cand.size_px = static_cast<int>(cand.pixels.size());

            std::vector<double> vals;
            vals.reserve(cand.pixels.size());
            double rsum = 0.0, csum = 0.0;
            for (const auto& [r, c] : cand.pixels) {
                vals.push_back(map.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)));
                rsum += r;
                csum += c;
            }
            cand.centroid = {rsum / cand.size_px, csum / cand.size_px};
            std::sort(vals.begin(), vals.end(), std::greater<>());
            std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(params.min_component_px),
                                                  vals.size());
            cand.confidence = vals[k - 1];
            cand.outline = trace_outline(cand.pixels);
            out.push_back(std::move(cand));
        }
    }

    std::stable_sort(out.begin(), out.end(), [](const PlumeCandidate& a, const PlumeCandidate& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.centroid < b.centroid;
    });
    return out;
}

ScoreMap builtin_proposer(const EnhancementMap& map, const ProposerParams& params) {
    if (params.logistic_scale <= 0.0) throw ConfigError("logistic_scale must be positive");
    ScoreMap score;
    score.rows = map.rows;
    score.cols = map.cols;
    score.source = "builtin";
    score.gas = map.gas;
    score.values.resize(map.alpha.size());
    for (std::size_t i = 0; i < map.alpha.size(); ++i) {
        double a = map.alpha[i];
        score.values[i] = std::isfinite(a)
                              ? 1.0 / (1.0 + std::exp(-(a - params.logistic_center) /
                                                      params.logistic_scale))
                              : 0.0;
    }
    return score;
}

std::vector<PlumeCandidate> filter_by_size(std::vector<PlumeCandidate> cands, int min_px) {
    std::vector<PlumeCandidate> out;
    out.reserve(cands.size());
    for (auto& c : cands)
        if (c.size_px > min_px) out.push_back(std::move(c));
    return out;
}

ScoreMap import_mask(const std::string& path, std::size_t rows, std::size_t cols) {
    SpectralCube raster = read_cube(path);
    if (raster.bands != 1) throw ConfigError("score raster must be single-band");
    if (raster.rows != rows || raster.cols != cols)
        throw ConfigError("score raster is " + std::to_string(raster.rows) + "x" +
                          std::to_string(raster.cols) + ", scene is " + std::to_string(rows) +
                          "x" + std::to_string(cols));
    ScoreMap map;
    map.rows = rows;
    map.cols = cols;
    map.source = "external";
    if (auto it = raster.meta.find("gas"); it != raster.meta.end()) map.gas = parse_gas(it->second);
    map.values.resize(raster.data.size());
    for (std::size_t i = 0; i < raster.data.size(); ++i)
        map.values[i] = raster.data[i] == raster.nodata ? 0.0 : raster.data[i];
    map.validate();
    return map;
}

SpectralCube score_map_to_cube(const ScoreMap& map) {
    SpectralCube out;
    out.rows = map.rows;
    out.cols = map.cols;
    out.bands = 1;
    out.grid.centers = {1000.0};
    out.bad_bands = {0};
    out.product = "score";
    out.meta["gas"] = gas_name(map.gas);
    out.meta["source"] = map.source;
    out.data = map.values;
    return out;
}

nlohmann::json candidates_geojson(const std::vector<PlumeCandidate>& cands) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& cand : cands) {
        nlohmann::json rings = nlohmann::json::array();
        for (const auto& ring : cand.outline) {
            nlohmann::json verts = nlohmann::json::array();
            for (const auto& [x, y] : ring)
                verts.push_back({static_cast<long long>(std::llround(x)),
                                 static_cast<long long>(std::llround(y))});
            rings.push_back(std::move(verts));
        }
        nlohmann::json props{{"confidence", json_num(cand.confidence)},
                             {"size_px", cand.size_px},
                             {"gas", gas_name(cand.gas)},
                             {"scene_id", cand.scene_id}};
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", std::move(rings)}}},
                            {"properties", std::move(props)}});
    }
    return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace plumescout
