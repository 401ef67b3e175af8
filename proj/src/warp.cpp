#include "tabgraph/errors.hpp"
#include "tabgraph/synth.hpp"

#include <algorithm>
#include <cmath>

namespace tabgraph {

namespace {

using Mat3 = std::array<double, 9>;

Point apply(const Mat3& h, double x, double y) {
    const double w = h[6] * x + h[7] * y + h[8];
    return {(h[0] * x + h[1] * y + h[2]) / w, (h[3] * x + h[4] * y + h[5]) / w};
}

Mat3 inverse(const Mat3& m) {
    const double a = m[0], b = m[1], c = m[2], d = m[3], e = m[4], f = m[5], g = m[6], h = m[7], i = m[8];
    const double A = e * i - f * h, B = -(d * i - f * g), C = d * h - e * g;
    const double det = a * A + b * B + c * C;
    if (std::abs(det) < 1e-12) throw DegenerateQuad("homography is singular");
    const double inv = 1.0 / det;
    return {A * inv, -(b * i - c * h) * inv, (b * f - c * e) * inv,
            B * inv, (a * i - c * g) * inv,  -(a * f - c * d) * inv,
            C * inv, -(a * h - b * g) * inv, (a * e - b * d) * inv};
}

bool convex(const std::array<Point, 4>& q) {
    int sign = 0;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& p0 = q[k];
        const auto& p1 = q[(k + 1) % 4];
        const auto& p2 = q[(k + 2) % 4];
        const double cross = (p1.x - p0.x) * (p2.y - p1.y) - (p1.y - p0.y) * (p2.x - p1.x);
        if (std::abs(cross) < 1e-9) return false;
        const int s = cross > 0 ? 1 : -1;
        if (sign != 0 && s != sign) return false;
        sign = s;
    }
    return true;
}

} // namespace

std::array<double, 9> homography_from_points(const std::array<Point, 4>& src, const std::array<Point, 4>& dst) {
    // Solve the 8×8 DLT system with h33 = 1 by Gaussian elimination.
    double a[8][9] = {};
    for (std::size_t k = 0; k < 4; ++k) {
        const double x = src[k].x, y = src[k].y, u = dst[k].x, v = dst[k].y;
        double* r0 = a[2 * k];
        double* r1 = a[2 * k + 1];
        r0[0] = x; r0[1] = y; r0[2] = 1; r0[6] = -u * x; r0[7] = -u * y; r0[8] = u;
        r1[3] = x; r1[4] = y; r1[5] = 1; r1[6] = -v * x; r1[7] = -v * y; r1[8] = v;
    }
    for (int col = 0; col < 8; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 8; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-12) throw DegenerateQuad("corner correspondences are degenerate");
        std::swap(a[col], a[pivot]);
        for (int r = 0; r < 8; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
        }
    }
    Mat3 h{};
    for (int k = 0; k < 8; ++k) h[static_cast<std::size_t>(k)] = a[k][8] / a[k][k];
    h[8] = 1.0;
    return h;
}

TableSample apply_homography(const TableSample& sample, const std::array<Point, 4>& corner_offsets) {
    const double w = static_cast<double>(sample.image.width);
    const double h = static_cast<double>(sample.image.height);
    const std::array<Point, 4> src{{{0, 0}, {w, 0}, {w, h}, {0, h}}};
    std::array<Point, 4> dst;
    for (std::size_t k = 0; k < 4; ++k) dst[k] = {src[k].x + corner_offsets[k].x, src[k].y + corner_offsets[k].y};
    if (!convex(dst)) throw DegenerateQuad("displaced corners do not form a convex quadrilateral");
    const double limit = 0.2 * std::min(w, h);
    for (const auto& o : corner_offsets)
        if (!(std::abs(o.x) <= limit && std::abs(o.y) <= limit))
            throw ConfigError("corner offset exceeds jitter bound of " + std::to_string(limit) + " px");

    if (std::all_of(corner_offsets.begin(), corner_offsets.end(), [](const Point& p) { return p.x == 0 && p.y == 0; }))
        return sample;

    const auto forward = homography_from_points(src, dst);
    const auto backward = inverse(forward);

    TableSample out = sample;
    const auto& in = sample.image;
    auto pixel = [&](long y, long x) -> double {
        if (y < 0 || x < 0 || y >= static_cast<long>(in.height) || x >= static_cast<long>(in.width)) return 255.0;
        return in.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    };
    for (std::size_t y = 0; y < in.height; ++y) {
        for (std::size_t x = 0; x < in.width; ++x) {
            // pixel centres at +0.5
            const auto p = apply(backward, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
            const double sx = p.x - 0.5, sy = p.y - 0.5;
            const double fx = std::floor(sx), fy = std::floor(sy);
            const double ax = sx - fx, ay = sy - fy;
            const long ix = static_cast<long>(fx), iy = static_cast<long>(fy);
            const double v = (1 - ay) * ((1 - ax) * pixel(iy, ix) + ax * pixel(iy, ix + 1)) +
                             ay * ((1 - ax) * pixel(iy + 1, ix) + ax * pixel(iy + 1, ix + 1));
            out.image.at(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }

    const int W = static_cast<int>(in.width), H = static_cast<int>(in.height);
    for (auto& v : out.vertices) {
        const auto& b = v.bbox;
        double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
        for (const auto& [cx, cy] : {std::pair{b.x0, b.y0}, {b.x1, b.y0}, {b.x1, b.y1}, {b.x0, b.y1}}) {
            const auto p = apply(forward, cx, cy);
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        // The epsilon absorbs round-off so exact integer corners stay put.
        v.bbox.x0 = std::clamp(static_cast<int>(std::floor(min_x + 1e-6)), 0, W - 1);
        v.bbox.y0 = std::clamp(static_cast<int>(std::floor(min_y + 1e-6)), 0, H - 1);
        v.bbox.x1 = std::clamp(static_cast<int>(std::ceil(max_x - 1e-6)), v.bbox.x0 + 1, W);
        v.bbox.y1 = std::clamp(static_cast<int>(std::ceil(max_y - 1e-6)), v.bbox.y0 + 1, H);
    }
    return out;
}

} // namespace tabgraph
