#pragma once

#include "tabgraph/synth.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace tabgraph {

struct RgbImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> rgb; // interleaved, row-major

    RgbImage() = default;
    RgbImage(std::size_t h, std::size_t w) : height(h), width(w), rgb(h * w * 3, 0) {}

    std::array<std::uint8_t, 3> at(std::size_t y, std::size_t x) const {
        const std::size_t o = 3 * (y * width + x);
        return {rgb[o], rgb[o + 1], rgb[o + 2]};
    }
    void put(std::size_t y, std::size_t x, std::array<std::uint8_t, 3> c) {
        const std::size_t o = 3 * (y * width + x);
        rgb[o] = c[0];
        rgb[o + 1] = c[1];
        rgb[o + 2] = c[2];
    }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Saturated colour for clique `index`; never gray.
std::array<std::uint8_t, 3> clique_color(std::size_t index);

/// For each vertex, the indices of the cliques containing it (ascending).
std::vector<std::vector<std::size_t>> clique_membership(const CliqueSet& cliques, std::size_t v);

/// The sample image in gray with every word box tinted by its clique's
/// colour. Words in several cliques get diagonal stripes of each colour.
/// Ink stays black.
RgbImage clique_overlay(const TableSample& sample, const CliqueSet& cliques, int stripe = 3);

/// Binary PPM (P6).
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

} // namespace tabgraph
