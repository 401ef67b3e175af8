#include "tabgraph/synth.hpp"

#include "tabgraph/errors.hpp"
#include "tabgraph/rng.hpp"

#include "font5x7.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabgraph {

namespace {

bool intersects(const std::vector<int>& a, const std::vector<int>& b) {
    // both sorted
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j) return true;
        if (*i < *j) ++i;
        else ++j;
    }
    return false;
}

constexpr const char* border_style_names[border_style_count] = {"full",   "outer", "horizontal", "vertical",
                                                                "header", "none",  "random"};

} // namespace

AdjacencyTriple derive_ground_truth(std::span<const WordVertex> vertices) {
    const std::size_t v = vertices.size();
    AdjacencyTriple gt{AdjacencyMatrix(v), AdjacencyMatrix(v), AdjacencyMatrix(v)};
    for (std::size_t i = 0; i < v; ++i) {
        for (std::size_t j = i; j < v; ++j) {
            gt.cells.set_symmetric(i, j, vertices[i].cell_id == vertices[j].cell_id);
            gt.rows.set_symmetric(i, j, intersects(vertices[i].row_ids, vertices[j].row_ids));
            gt.cols.set_symmetric(i, j, intersects(vertices[i].col_ids, vertices[j].col_ids));
        }
    }
    return gt;
}

void check_config(const GenConfig& cfg) {
    auto range = [](const IntRange& r, const char* name, int min_lo) {
        if (r.lo < min_lo || r.hi < r.lo)
            throw ConfigError(std::string(name) + " range [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) +
                              "] is empty or below " + std::to_string(min_lo));
    };
    range(cfg.rows, "rows", 1);
    range(cfg.cols, "cols", 1);
    range(cfg.words_per_cell, "words_per_cell", 1);
    range(cfg.word_length, "word_length", 1);
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
    };
    prob(cfg.row_span_prob, "row_span_prob");
    prob(cfg.col_span_prob, "col_span_prob");
    prob(cfg.digit_fraction, "digit_fraction");
    if (cfg.max_span < 2) throw ConfigError("max_span must be >= 2");
    if (cfg.height < 16 || cfg.width < 16) throw ConfigError("image must be at least 16x16");
    if (cfg.font_scale < 1) throw ConfigError("font_scale must be >= 1");
    const double jitter_limit = 0.2 * std::min(cfg.height, cfg.width);
    if (!(cfg.perspective_jitter >= 0.0 && cfg.perspective_jitter <= jitter_limit))
        throw ConfigError("perspective_jitter must lie in [0, " + std::to_string(jitter_limit) + "]");
    double total = 0.0;
    for (double w : cfg.border_weights) {
        if (!(w >= 0.0)) throw ConfigError("border_weights must be non-negative");
        total += w;
    }
    if (total <= 0.0) throw ConfigError("border_weights must not all be zero");
}

nlohmann::json to_json(const GenConfig& cfg) {
    nlohmann::json weights = nlohmann::json::object();
    for (std::size_t i = 0; i < border_style_count; ++i) weights[border_style_names[i]] = cfg.border_weights[i];
    return {
        {"rows", {cfg.rows.lo, cfg.rows.hi}},
        {"cols", {cfg.cols.lo, cfg.cols.hi}},
        {"words_per_cell", {cfg.words_per_cell.lo, cfg.words_per_cell.hi}},
        {"word_length", {cfg.word_length.lo, cfg.word_length.hi}},
        {"row_span_prob", cfg.row_span_prob},
        {"col_span_prob", cfg.col_span_prob},
        {"max_span", cfg.max_span},
        {"border_weights", weights},
        {"perspective_jitter", cfg.perspective_jitter},
        {"height", cfg.height},
        {"width", cfg.width},
        {"font_scale", cfg.font_scale},
        {"digit_fraction", cfg.digit_fraction},
        {"seed", cfg.seed},
    };
}

GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig cfg) {
    if (!j.is_object()) throw ConfigError("generator config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            auto range = [&](IntRange& r) {
                if (!value.is_array() || value.size() != 2) throw ConfigError(key + " must be [lo, hi]");
                r = {value[0].get<int>(), value[1].get<int>()};
            };
            if (key == "rows") range(cfg.rows);
            else if (key == "cols") range(cfg.cols);
            else if (key == "words_per_cell") range(cfg.words_per_cell);
            else if (key == "word_length") range(cfg.word_length);
            else if (key == "row_span_prob") cfg.row_span_prob = value.get<double>();
            else if (key == "col_span_prob") cfg.col_span_prob = value.get<double>();
            else if (key == "max_span") cfg.max_span = value.get<int>();
            else if (key == "perspective_jitter") cfg.perspective_jitter = value.get<double>();
            else if (key == "height") cfg.height = value.get<int>();
            else if (key == "width") cfg.width = value.get<int>();
            else if (key == "font_scale") cfg.font_scale = value.get<int>();
            else if (key == "digit_fraction") cfg.digit_fraction = value.get<double>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "border_weights") {
                if (!value.is_object()) throw ConfigError("border_weights must be an object keyed by style");
                for (const auto& [style, w] : value.items()) {
                    auto it = std::find(std::begin(border_style_names), std::end(border_style_names), style);
                    if (it == std::end(border_style_names)) throw ConfigError("unknown border style: " + style);
                    cfg.border_weights[static_cast<std::size_t>(it - std::begin(border_style_names))] =
                        w.get<double>();
                }
            } else
                throw ConfigError("unknown generator config key: " + key);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("generator config: ") + e.what());
    }
    check_config(cfg);
    return cfg;
}

int base_category_for(std::uint64_t seed) {
    return 1 + static_cast<int>(splitmix64(seed ^ 0x6a09e667f3bcc909ULL) % 3);
}

namespace {

BorderStyle pick_style(const GenConfig& cfg, int category, Rng& rng) {
    if (category == 1) return BorderStyle::full;
    const double total = std::accumulate(cfg.border_weights.begin(), cfg.border_weights.end(), 0.0);
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < border_style_count; ++i) {
        if (u < cfg.border_weights[i]) return static_cast<BorderStyle>(i);
        u -= cfg.border_weights[i];
    }
    return BorderStyle::full;
}

struct Rect {
    int row, col, row_span, col_span;
};

} // namespace

TableLayout make_layout(const GenConfig& cfg, int category, std::uint64_t seed) {
    Rng rng(splitmix64(seed));
    const int s = cfg.font_scale;
    const int glyph_h = detail::glyph_height * s;
    const int advance = detail::glyph_advance * s;
    const int word_gap = 4 * s;
    const int pad_x = 6 * s;
    const int pad_y = 4 * s;
    const int margin = 4;

    TableLayout layout;
    layout.font_scale = s;
    const int n_rows = static_cast<int>(uniform_int(rng, cfg.rows.lo, cfg.rows.hi));
    const int n_cols = static_cast<int>(uniform_int(rng, cfg.cols.lo, cfg.cols.hi));
    layout.n_rows = n_rows;
    layout.n_cols = n_cols;

    // Cell grid. Category 3 spans cells over rows/columns and guarantees at
    // least one merge.
    std::vector<int> owner(static_cast<std::size_t>(n_rows * n_cols), -1);
    std::vector<Rect> rects;
    auto free_rect = [&](const Rect& r) {
        for (int y = r.row; y < r.row + r.row_span; ++y)
            for (int x = r.col; x < r.col + r.col_span; ++x)
                if (owner[static_cast<std::size_t>(y * n_cols + x)] != -1) return false;
        return true;
    };
    auto claim = [&](const Rect& r) {
        for (int y = r.row; y < r.row + r.row_span; ++y)
            for (int x = r.col; x < r.col + r.col_span; ++x)
                owner[static_cast<std::size_t>(y * n_cols + x)] = static_cast<int>(rects.size());
        rects.push_back(r);
    };
    const bool merges = category == 3;
    if (merges && (n_rows > 1 || n_cols > 1)) {
        const bool vertical = n_cols == 1 || (n_rows > 1 && bernoulli(rng, 0.5));
        Rect r{0, 0, 1, 1};
        if (vertical) {
            r.row = static_cast<int>(uniform_int(rng, 0, n_rows - 2));
            r.col = static_cast<int>(uniform_int(rng, 0, n_cols - 1));
            r.row_span = 2;
        } else {
            r.row = static_cast<int>(uniform_int(rng, 0, n_rows - 1));
            r.col = static_cast<int>(uniform_int(rng, 0, n_cols - 2));
            r.col_span = 2;
        }
        claim(r);
    }
    for (int y = 0; y < n_rows; ++y) {
        for (int x = 0; x < n_cols; ++x) {
            if (owner[static_cast<std::size_t>(y * n_cols + x)] != -1) continue;
            Rect r{y, x, 1, 1};
            if (merges) {
                if (n_rows - y >= 2 && bernoulli(rng, cfg.row_span_prob))
                    r.row_span = static_cast<int>(uniform_int(rng, 2, std::min(cfg.max_span, n_rows - y)));
                if (n_cols - x >= 2 && bernoulli(rng, cfg.col_span_prob))
                    r.col_span = static_cast<int>(uniform_int(rng, 2, std::min(cfg.max_span, n_cols - x)));
                while (!free_rect(r)) {
                    if (r.col_span > 1) --r.col_span;
                    else --r.row_span;
                }
            }
            claim(r);
        }
    }
    std::sort(rects.begin(), rects.end(),
              [](const Rect& a, const Rect& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });

    // Words, sized to the per-column width budget.
    const int avail_w = cfg.width - 2 * margin;
    const int avail_h = cfg.height - 2 * margin;
    const int col_budget = avail_w / n_cols - 2 * pad_x;
    const int row_h = glyph_h + 2 * pad_y;
    if (n_rows * row_h > avail_h)
        throw GenOverflow(std::to_string(n_rows) + " rows of height " + std::to_string(row_h) + " exceed " +
                          std::to_string(avail_h) + " px");
    auto word_width = [&](int len) { return len * advance - s; };

    struct CellText {
        std::vector<std::string> words;
        int width = 0;
    };
    std::vector<CellText> texts(rects.size());
    for (std::size_t c = 0; c < rects.size(); ++c) {
        const auto& r = rects[c];
        const int budget = r.col_span * col_budget + (r.col_span - 1) * 2 * pad_x;
        int k = static_cast<int>(uniform_int(rng, cfg.words_per_cell.lo, cfg.words_per_cell.hi));
        int max_len = 0;
        for (; k >= 1; --k) {
            max_len = (budget - (k - 1) * word_gap + k * s) / (k * advance);
            if (max_len >= cfg.word_length.lo) break;
        }
        if (k < 1)
            throw GenOverflow("column budget of " + std::to_string(budget) + " px cannot hold a word of length " +
                              std::to_string(cfg.word_length.lo));
        auto& t = texts[c];
        for (int w = 0; w < k; ++w) {
            const int len = static_cast<int>(uniform_int(rng, cfg.word_length.lo, std::min(cfg.word_length.hi, max_len)));
            std::string word;
            for (int ch = 0; ch < len; ++ch) {
                if (bernoulli(rng, cfg.digit_fraction)) word += static_cast<char>('0' + uniform_int(rng, 0, 9));
                else word += static_cast<char>('A' + uniform_int(rng, 0, 25));
            }
            t.width += word_width(len) + (w > 0 ? word_gap : 0);
            t.words.push_back(std::move(word));
        }
    }

    // Column widths: single-column cells first, spanning cells widen their
    // last column when needed.
    std::vector<int> col_w(static_cast<std::size_t>(n_cols), 2 * pad_x + advance);
    for (std::size_t c = 0; c < rects.size(); ++c)
        if (rects[c].col_span == 1)
            col_w[static_cast<std::size_t>(rects[c].col)] =
                std::max(col_w[static_cast<std::size_t>(rects[c].col)], texts[c].width + 2 * pad_x);
    for (std::size_t c = 0; c < rects.size(); ++c) {
        const auto& r = rects[c];
        if (r.col_span == 1) continue;
        int have = 0;
        for (int x = r.col; x < r.col + r.col_span; ++x) have += col_w[static_cast<std::size_t>(x)];
        const int need = texts[c].width + 2 * pad_x;
        if (need > have) col_w[static_cast<std::size_t>(r.col + r.col_span - 1)] += need - have;
    }
    const int total_w = std::accumulate(col_w.begin(), col_w.end(), 0);
    const int total_h = n_rows * row_h;
    if (total_w > avail_w)
        throw GenOverflow("table width " + std::to_string(total_w) + " px exceeds " + std::to_string(avail_w) + " px");

    const int origin_x = margin + static_cast<int>(uniform_int(rng, 0, avail_w - total_w));
    const int origin_y = margin + static_cast<int>(uniform_int(rng, 0, avail_h - total_h));
    layout.col_edges.push_back(origin_x);
    for (int w : col_w) layout.col_edges.push_back(layout.col_edges.back() + w);
    for (int y = 0; y <= n_rows; ++y) layout.row_edges.push_back(origin_y + y * row_h);

    // Ruling lines.
    const BorderStyle style = pick_style(cfg, category, rng);
    std::vector<bool> h_lines(static_cast<std::size_t>(n_rows + 1)), v_lines(static_cast<std::size_t>(n_cols + 1));
    for (int y = 0; y <= n_rows; ++y) {
        const bool outer = y == 0 || y == n_rows;
        bool on = false;
        switch (style) {
        case BorderStyle::full:
        case BorderStyle::horizontal: on = true; break;
        case BorderStyle::outer: on = outer; break;
        case BorderStyle::header: on = outer || y == 1; break;
        case BorderStyle::vertical:
        case BorderStyle::none: on = false; break;
        case BorderStyle::random: on = bernoulli(rng, 0.5); break;
        }
        h_lines[static_cast<std::size_t>(y)] = on;
    }
    for (int x = 0; x <= n_cols; ++x) {
        const bool outer = x == 0 || x == n_cols;
        bool on = false;
        switch (style) {
        case BorderStyle::full:
        case BorderStyle::vertical: on = true; break;
        case BorderStyle::outer:
        case BorderStyle::header: on = outer; break;
        case BorderStyle::horizontal:
        case BorderStyle::none: on = false; break;
        case BorderStyle::random: on = bernoulli(rng, 0.5); break;
        }
        v_lines[static_cast<std::size_t>(x)] = on;
    }
    if (category == 1) {
        layout.ink = 0;
        layout.rule_ink = 0;
        layout.rule_width = 1;
    } else {
        layout.ink = static_cast<std::uint8_t>(uniform_int(rng, 0, 60));
        layout.rule_ink = static_cast<std::uint8_t>(uniform_int(rng, 0, 140));
        layout.rule_width = static_cast<int>(uniform_int(rng, 1, 2));
    }

    // Alignment per column: 0 left, 1 centre, 2 right.
    std::vector<int> align(static_cast<std::size_t>(n_cols));
    for (auto& a : align) a = static_cast<int>(uniform_int(rng, 0, 2));

    for (std::size_t c = 0; c < rects.size(); ++c) {
        const auto& r = rects[c];
        TableLayout::Cell cell;
        cell.row = r.row;
        cell.col = r.col;
        cell.row_span = r.row_span;
        cell.col_span = r.col_span;
        cell.borders = {h_lines[static_cast<std::size_t>(r.row)], v_lines[static_cast<std::size_t>(r.col + r.col_span)],
                        h_lines[static_cast<std::size_t>(r.row + r.row_span)], v_lines[static_cast<std::size_t>(r.col)]};
        layout.cells.push_back(cell);

        const int left = layout.col_edges[static_cast<std::size_t>(r.col)];
        const int right = layout.col_edges[static_cast<std::size_t>(r.col + r.col_span)];
        const int top = layout.row_edges[static_cast<std::size_t>(r.row)];
        const int bottom = layout.row_edges[static_cast<std::size_t>(r.row + r.row_span)];
        const int cw = texts[c].width;
        int x = left + pad_x;
        switch (align[static_cast<std::size_t>(r.col)]) {
        case 1: x = left + (right - left - cw) / 2; break;
        case 2: x = right - pad_x - cw; break;
        default: break;
        }
        const int y = top + (bottom - top - glyph_h) / 2;
        for (const auto& w : texts[c].words) {
            layout.words.push_back({w, x, y, static_cast<int>(c)});
            x += word_width(static_cast<int>(w.size())) + word_gap;
        }
    }
    return layout;
}

GrayImage render(const TableLayout& layout, int height, int width, bool with_rules) {
    GrayImage img(static_cast<std::size_t>(height), static_cast<std::size_t>(width));
    auto plot = [&](int x, int y, std::uint8_t value) {
        if (x >= 0 && y >= 0 && x < width && y < height) img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = value;
    };
    if (with_rules) {
        for (const auto& cell : layout.cells) {
            const int x0 = layout.col_edges[static_cast<std::size_t>(cell.col)];
            const int x1 = layout.col_edges[static_cast<std::size_t>(cell.col + cell.col_span)];
            const int y0 = layout.row_edges[static_cast<std::size_t>(cell.row)];
            const int y1 = layout.row_edges[static_cast<std::size_t>(cell.row + cell.row_span)];
            for (int t = 0; t < layout.rule_width; ++t) {
                if (cell.borders[0])
                    for (int x = x0; x <= x1; ++x) plot(x, y0 + t, layout.rule_ink);
                if (cell.borders[2])
                    for (int x = x0; x <= x1; ++x) plot(x, y1 + t, layout.rule_ink);
                if (cell.borders[3])
                    for (int y = y0; y <= y1; ++y) plot(x0 + t, y, layout.rule_ink);
                if (cell.borders[1])
                    for (int y = y0; y <= y1; ++y) plot(x1 + t, y, layout.rule_ink);
            }
        }
    }
    const int s = layout.font_scale;
    for (const auto& word : layout.words) {
        for (std::size_t k = 0; k < word.text.size(); ++k) {
            const auto& g = detail::glyph_for(word.text[k]);
            const int gx = word.x + static_cast<int>(k) * detail::glyph_advance * s;
            for (int row = 0; row < detail::glyph_height; ++row)
                for (int col = 0; col < detail::glyph_width; ++col) {
                    if (!((g[static_cast<std::size_t>(row)] >> (detail::glyph_width - 1 - col)) & 1U)) continue;
                    for (int dy = 0; dy < s; ++dy)
                        for (int dx = 0; dx < s; ++dx) plot(gx + col * s + dx, word.y + row * s + dy, layout.ink);
                }
        }
    }
    return img;
}

std::vector<WordVertex> layout_vertices(const TableLayout& layout) {
    const int s = layout.font_scale;
    std::vector<WordVertex> out;
    out.reserve(layout.words.size());
    for (const auto& w : layout.words) {
        const auto& cell = layout.cells[static_cast<std::size_t>(w.cell)];
        WordVertex v;
        const int len = static_cast<int>(w.text.size());
        v.bbox = {w.x, w.y, w.x + len * detail::glyph_advance * s - s, w.y + detail::glyph_height * s};
        v.text_len = len;
        v.cell_id = w.cell;
        for (int r = cell.row; r < cell.row + cell.row_span; ++r) v.row_ids.push_back(r);
        for (int c = cell.col; c < cell.col + cell.col_span; ++c) v.col_ids.push_back(c);
        out.push_back(std::move(v));
    }
    return out;
}

TableSample generate(const GenConfig& cfg, int category) {
    check_config(cfg);
    if (category < 1 || category > 4) throw ConfigError("category must be 1-4, got " + std::to_string(category));
    if (category == 4) {
        auto sample = generate(cfg, base_category_for(cfg.seed));
        Rng rng(splitmix64(cfg.seed ^ 0x3c6ef372fe94f82bULL));
        // Inward displacements keep the quad convex and the table on canvas.
        const double j = cfg.perspective_jitter;
        std::array<Point, 4> offsets;
        const std::array<Point, 4> inward{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
        for (std::size_t k = 0; k < 4; ++k)
            offsets[k] = {inward[k].x * uniform01(rng) * j, inward[k].y * uniform01(rng) * j};
        sample = apply_homography(sample, offsets);
        sample.category = 4;
        return sample;
    }
    // Retry a few derived seeds before giving up on an unlucky layout.
    constexpr int attempts = 8;
    for (int attempt = 0;; ++attempt) {
        try {
            const std::uint64_t layout_seed = attempt == 0 ? cfg.seed : splitmix64(cfg.seed + static_cast<std::uint64_t>(attempt));
            const auto layout = make_layout(cfg, category, layout_seed);
            TableSample sample;
            sample.image = render(layout, cfg.height, cfg.width);
            sample.vertices = layout_vertices(layout);
            sample.category = category;
            sample.seed = cfg.seed;
            sample.gt = derive_ground_truth(sample.vertices);
            return sample;
        } catch (const GenOverflow&) {
            if (attempt + 1 == attempts) throw;
        }
    }
}

} // namespace tabgraph
