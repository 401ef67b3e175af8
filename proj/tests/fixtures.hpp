#pragma once

// Small models and hand-made samples shared by the model tests and the
// acceptance run.

#include "tabgraph/model.hpp"
#include "tabgraph/rng.hpp"

namespace testing_fixtures {

using namespace tabgraph;

inline ModelConfig tiny_config(InteractionKind kind) {
    ModelConfig cfg;
    cfg.cnn_widths = {3, 3, 4};
    cfg.q = 4;
    cfg.interaction.kind = kind;
    cfg.interaction.layers = 2;
    cfg.interaction.width = 6;
    cfg.interaction.output_width = 5;
    cfg.interaction.k = 3;
    cfg.interaction.propagate_width = 3;
    cfg.head_hidden = {6, 4};
    return cfg;
}

/// Hand-made 32×32 table with `v` words and random ink.
inline TableSample toy_sample(std::size_t v, std::uint64_t seed) {
    Rng rng(seed);
    TableSample s;
    s.image = GrayImage(32, 32);
    for (auto& p : s.image.pixels) p = bernoulli(rng, 0.3) ? static_cast<std::uint8_t>(uniform_int(rng, 0, 200)) : 255;
    for (std::size_t i = 0; i < v; ++i) {
        WordVertex w;
        const int row = static_cast<int>(i / 2), col = static_cast<int>(i % 2);
        const int x0 = 2 + col * 15 + static_cast<int>(uniform_int(rng, 0, 3));
        const int y0 = 2 + row * 9 + static_cast<int>(uniform_int(rng, 0, 2));
        w.bbox = {x0, y0, x0 + 4 + static_cast<int>(uniform_int(rng, 1, 6)), y0 + 5};
        w.text_len = static_cast<int>(uniform_int(rng, 1, 7));
        w.cell_id = static_cast<int>(i);
        w.row_ids = {row};
        w.col_ids = {col};
        s.vertices.push_back(w);
    }
    // One merged cell across the first two rows of column 0.
    if (v >= 3) {
        s.vertices[0].row_ids = {0, 1};
        s.vertices[2].cell_id = 0;
        s.vertices[2].row_ids = {0, 1};
    }
    s.gt = derive_ground_truth(s.vertices);
    return s;
}

inline void randomize(nn::ParamStore& params, std::uint64_t seed, double scale) {
    Rng rng(seed);
    for (auto& p : params.all())
        for (auto& x : p.value.data()) x = scale * normal01(rng);
}

} // namespace testing_fixtures
