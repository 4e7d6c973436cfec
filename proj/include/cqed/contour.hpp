#pragma once

// Iso-lines of a sampled 2-D field by marching squares. Crossing points are
// linearly interpolated along cell edges; segments are chained into
// polylines through their shared edges, so output order is deterministic.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "cqed/errors.hpp"

namespace cqed::contour {

struct Point {
    double x = 0.0, y = 0.0;
};

using Polyline = std::vector<Point>;

/// z is row-major with z[j * xs.size() + i] sampled at (xs[i], ys[j]).
inline std::vector<Polyline> iso_lines(const std::vector<double>& xs, const std::vector<double>& ys,
                                       const std::vector<double>& z, double level) {
    const std::size_t nx = xs.size(), ny = ys.size();
    if (z.size() != nx * ny) throw DomainError("iso_lines: grid size mismatch");
    if (nx < 2 || ny < 2) return {};
    auto at = [&](std::size_t i, std::size_t j) { return z[j * nx + i]; };

    // edge ids: horizontal edge (i,j)-(i+1,j) -> 2*(j*nx+i), vertical (i,j)-(i,j+1) -> 2*(j*nx+i)+1
    auto h_edge = [&](std::size_t i, std::size_t j) { return std::uint64_t(2 * (j * nx + i)); };
    auto v_edge = [&](std::size_t i, std::size_t j) { return std::uint64_t(2 * (j * nx + i) + 1); };
    auto crossing = [&](std::uint64_t e) {
        const std::size_t cell = static_cast<std::size_t>(e / 2);
        const std::size_t i = cell % nx, j = cell / nx;
        const bool vertical = e % 2 == 1;
        const std::size_t i2 = vertical ? i : i + 1, j2 = vertical ? j + 1 : j;
        const double a = at(i, j), b = at(i2, j2);
        const double t = (a == b) ? 0.5 : (level - a) / (b - a);
        return Point{xs[i] + t * (xs[i2] - xs[i]), ys[j] + t * (ys[j2] - ys[j])};
    };

    std::vector<std::pair<std::uint64_t, std::uint64_t>> segments;
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const std::array<double, 4> c{at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
            int mask = 0;
            for (int k = 0; k < 4; ++k)
                if (c[k] >= level) mask |= 1 << k;
            if (mask == 0 || mask == 15) continue;
            // edges: 0 bottom, 1 right, 2 top, 3 left
            const std::array<std::uint64_t, 4> e{h_edge(i, j), v_edge(i + 1, j), h_edge(i, j + 1), v_edge(i, j)};
            auto add = [&](int a, int b) { segments.emplace_back(e[a], e[b]); };
            const double centre = 0.25 * (c[0] + c[1] + c[2] + c[3]);
            switch (mask) {
                case 1: case 14: add(3, 0); break;
                case 2: case 13: add(0, 1); break;
                case 3: case 12: add(3, 1); break;
                case 4: case 11: add(1, 2); break;
                case 6: case 9: add(0, 2); break;
                case 7: case 8: add(3, 2); break;
                case 5:
                    if (centre >= level) { add(3, 2); add(0, 1); } else { add(3, 0); add(1, 2); }
                    break;
                case 10:
                    if (centre >= level) { add(3, 0); add(1, 2); } else { add(3, 2); add(0, 1); }
                    break;
                default: break;
            }
        }
    }

    std::map<std::uint64_t, std::vector<std::size_t>> by_edge;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        by_edge[segments[s].first].push_back(s);
        by_edge[segments[s].second].push_back(s);
    }
    std::vector<bool> used(segments.size(), false);
    auto next_from = [&](std::uint64_t edge) -> long {
        for (auto s : by_edge[edge])
            if (!used[s]) return static_cast<long>(s);
        return -1;
    };

    std::vector<Polyline> lines;
    // open lines start at edges touched by a single segment (grid boundary)
    std::vector<std::uint64_t> starts;
    for (const auto& [edge, segs] : by_edge)
        if (segs.size() == 1) starts.push_back(edge);
    auto trace = [&](std::uint64_t edge, long s) {
        std::vector<std::uint64_t> chain{edge};
        while (s >= 0) {
            used[static_cast<std::size_t>(s)] = true;
            const auto& seg = segments[static_cast<std::size_t>(s)];
            edge = seg.first == edge ? seg.second : seg.first;
            chain.push_back(edge);
            s = next_from(edge);
        }
        Polyline line;
        for (auto e : chain) line.push_back(crossing(e));
        lines.push_back(std::move(line));
    };
    for (auto edge : starts) {
        const long s = next_from(edge);
        if (s >= 0) trace(edge, s);
    }
    for (std::size_t s = 0; s < segments.size(); ++s)
        if (!used[s]) trace(segments[s].first, static_cast<long>(s));
    return lines;
}

}  // namespace cqed::contour
