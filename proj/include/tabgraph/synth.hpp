#pragma once

#include "tabgraph/graph.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tabgraph {

/// 8-bit grayscale raster, row-major. 255 is paper white.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(std::size_t h, std::size_t w, std::uint8_t fill = 255) : height(h), width(w), pixels(h * w, fill) {}

    std::uint8_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
    std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Pixel rectangle [x0, x1) × [y0, y1).
struct Box {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    double center_x() const { return 0.5 * (x0 + x1); }
    double center_y() const { return 0.5 * (y0 + y1); }

    friend bool operator==(const Box&, const Box&) = default;
};

/// One word of a table.
struct WordVertex {
    Box bbox;
    int text_len = 1;
    int cell_id = 0;
    std::vector<int> row_ids; // sorted; more than one for row-spanning cells
    std::vector<int> col_ids; // sorted; more than one for column-spanning cells

    friend bool operator==(const WordVertex&, const WordVertex&) = default;
};

struct TableSample {
    GrayImage image;
    std::vector<WordVertex> vertices;
    int category = 1;
    std::uint64_t seed = 0;
    AdjacencyTriple gt;

    friend bool operator==(const TableSample&, const TableSample&) = default;
};

/// Cells share iff equal cell_id; rows/cols share iff the id sets intersect.
AdjacencyTriple derive_ground_truth(std::span<const WordVertex> vertices);

struct IntRange {
    int lo = 0;
    int hi = 0;

    friend bool operator==(const IntRange&, const IntRange&) = default;
};

enum class BorderStyle { full, outer, horizontal, vertical, header, none, random };

inline constexpr std::size_t border_style_count = 7;

/// Knobs of the table generator. None of the defaults come from measured
/// data; they are chosen so a 256×256 canvas holds the table comfortably.
struct GenConfig {
    IntRange rows{3, 7};
    IntRange cols{3, 5};
    IntRange words_per_cell{1, 2};
    IntRange word_length{1, 7};
    /// Probability that a cell spans several rows / several columns
    /// (category 3 only).
    double row_span_prob = 0.12;
    double col_span_prob = 0.12;
    int max_span = 3;
    /// Relative weights of BorderStyle values (indexed by enum) for
    /// categories 2 and 3. Category 1 always uses full ruling.
    std::array<double, border_style_count> border_weights{2, 1, 1, 1, 1, 1, 2};
    /// Largest corner displacement in pixels for category 4.
    double perspective_jitter = 16.0;
    int height = 256;
    int width = 256;
    int font_scale = 1;
    /// Fraction of characters drawn from digits instead of letters.
    double digit_fraction = 0.3;
    std::uint64_t seed = 0;
};

/// Throws ConfigError describing the first invalid field.
void check_config(const GenConfig& cfg);

nlohmann::json to_json(const GenConfig& cfg);
/// Unknown keys are rejected with ConfigError; missing keys keep defaults.
GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig base = {});

/// Category used underneath the perspective warp of a category-4 sample.
int base_category_for(std::uint64_t seed);

/// Generates one table for `category` (1-4) from cfg.seed. Deterministic.
/// Throws GenOverflow when the sampled layout cannot fit the canvas.
TableSample generate(const GenConfig& cfg, int category);

/// Intermediate, pre-raster description of a table.
struct TableLayout {
    int n_rows = 0;
    int n_cols = 0;
    std::vector<int> col_edges; // n_cols + 1 x positions
    std::vector<int> row_edges; // n_rows + 1 y positions
    struct Cell {
        int row = 0, col = 0, row_span = 1, col_span = 1;
        std::array<bool, 4> borders{}; // top, right, bottom, left
    };
    std::vector<Cell> cells;
    struct Word {
        std::string text;
        int x = 0, y = 0; // top-left of the first glyph
        int cell = 0;
    };
    std::vector<Word> words;
    int font_scale = 1;
    std::uint8_t ink = 0;
    std::uint8_t rule_ink = 0;
    int rule_width = 1;
};

TableLayout make_layout(const GenConfig& cfg, int category, std::uint64_t seed);
/// Rasterizes a layout; `with_rules = false` draws only the words.
GrayImage render(const TableLayout& layout, int height, int width, bool with_rules = true);
std::vector<WordVertex> layout_vertices(const TableLayout& layout);

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Warps image and boxes by the homography taking the image corners
/// (top-left, top-right, bottom-right, bottom-left) to corners + offsets.
/// Structure labels and ground truth are unchanged. Throws DegenerateQuad
/// if the displaced corners do not form a convex quadrilateral.
TableSample apply_homography(const TableSample& sample, const std::array<Point, 4>& corner_offsets);

/// 3×3 homography (row-major) mapping four source points onto four targets.
std::array<double, 9> homography_from_points(const std::array<Point, 4>& src, const std::array<Point, 4>& dst);

// Files: <stem>.pgm (binary P5) and <stem>.json (metadata, version 1).
inline constexpr int sample_format_version = 1;

void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

nlohmann::json sample_metadata(const TableSample& sample);
void write_sample(const TableSample& sample, const std::filesystem::path& stem);
/// Reads `<stem>.json` and `<stem>.pgm`; ground truth is re-derived.
TableSample read_sample(const std::filesystem::path& stem);

} // namespace tabgraph
