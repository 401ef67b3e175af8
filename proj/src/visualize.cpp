#include "tabgraph/visualize.hpp"

#include "tabgraph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace tabgraph {

std::array<std::uint8_t, 3> clique_color(std::size_t index) {
    const double h = std::fmod(0.11 + 0.618033988749895 * static_cast<double>(index), 1.0) * 6.0;
    const double s = 0.75, v = 0.92;
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r = v, g = t, b = p;
    switch (sector) {
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    case 5: r = v, g = p, b = q; break;
    default: break;
    }
    auto byte = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
    return {byte(r), byte(g), byte(b)};
}

std::vector<std::vector<std::size_t>> clique_membership(const CliqueSet& cliques, std::size_t v) {
    std::vector<std::vector<std::size_t>> out(v);
    for (std::size_t c = 0; c < cliques.cliques.size(); ++c)
        for (int x : cliques.cliques[c]) {
            if (x < 0 || static_cast<std::size_t>(x) >= v)
                throw IndexOutOfRange("clique member " + std::to_string(x) + " outside " + std::to_string(v) + " vertices");
            out[static_cast<std::size_t>(x)].push_back(c);
        }
    return out;
}

RgbImage clique_overlay(const TableSample& sample, const CliqueSet& cliques, int stripe) {
    if (stripe < 1) throw ConfigError("stripe width must be positive");
    const auto& img = sample.image;
    RgbImage out(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            const auto g = static_cast<std::uint8_t>(128 + img.at(y, x) / 2);
            out.put(y, x, {g, g, g});
        }
    const auto member = clique_membership(cliques, sample.vertices.size());
    const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
    for (std::size_t i = 0; i < sample.vertices.size(); ++i) {
        const auto& m = member[i];
        if (m.empty()) continue;
        const Box& b = sample.vertices[i].bbox;
        for (int y = std::max(b.y0, 0); y < std::min(b.y1, h); ++y)
            for (int x = std::max(b.x0, 0); x < std::min(b.x1, w); ++x) {
                const auto uy = static_cast<std::size_t>(y), ux = static_cast<std::size_t>(x);
                if (img.at(uy, ux) < 128) {
                    out.put(uy, ux, {0, 0, 0});
                    continue;
                }
                const auto band = static_cast<std::size_t>((x - b.x0 + y - b.y0) / stripe);
                out.put(uy, ux, clique_color(m[band % m.size()]));
            }
    }
    return out;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace tabgraph
