#include "tabgraph/errors.hpp"
#include "tabgraph/synth.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

namespace tabgraph {

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

} // namespace

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
    std::string bytes = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    bytes.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    spit(path, bytes);
}

GrayImage read_pgm(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&](const char* what) {
        skip_space();
        const std::size_t start = pos;
        std::size_t value = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])) && pos - start < 9)
            value = value * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
        if (pos == start) throw FormatError(std::string("PGM: expected ") + what, pos);
        return value;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("PGM: missing P5 magic", 0);
    pos = 2;
    const auto width = number("width");
    const auto height = number("height");
    const auto maxval = number("maxval");
    if (maxval != 255) throw FormatError("PGM: only maxval 255 is supported, got " + std::to_string(maxval), pos);
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw FormatError("PGM: header not terminated", pos);
    ++pos;
    if (bytes.size() - pos < width * height)
        throw FormatError("PGM: truncated pixel data, expected " + std::to_string(width * height) + " bytes",
                          bytes.size());
    if (bytes.size() - pos > width * height) throw FormatError("PGM: trailing bytes after pixel data", pos + width * height);
    GrayImage img(height, width);
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.pixels.begin());
    return img;
}

nlohmann::json sample_metadata(const TableSample& sample) {
    nlohmann::json vertices = nlohmann::json::array();
    for (const auto& v : sample.vertices) {
        vertices.push_back({
            {"bbox", {v.bbox.x0, v.bbox.y0, v.bbox.x1, v.bbox.y1}},
            {"text_len", v.text_len},
            {"cell_id", v.cell_id},
            {"row_ids", v.row_ids},
            {"col_ids", v.col_ids},
        });
    }
    return {
        {"version", sample_format_version},
        {"category", sample.category},
        {"seed", sample.seed},
        {"image", {{"h", sample.image.height}, {"w", sample.image.width}}},
        {"vertices", std::move(vertices)},
    };
}

void write_sample(const TableSample& sample, const std::filesystem::path& stem) {
    write_pgm(sample.image, with_suffix(stem, ".pgm"));
    spit(with_suffix(stem, ".json"), sample_metadata(sample).dump() + "\n");
}

TableSample read_sample(const std::filesystem::path& stem) {
    const auto meta_path = with_suffix(stem, ".json");
    const std::string text = slurp(meta_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(meta_path.string() + ": " + e.what(), e.byte);
    }

    TableSample s;
    try {
        const int version = j.at("version").get<int>();
        if (version != sample_format_version)
            throw FormatError(meta_path.string() + ": metadata version " + std::to_string(version) +
                                  ", reader supports version " + std::to_string(sample_format_version),
                              0);
        s.category = j.at("category").get<int>();
        s.seed = j.at("seed").get<std::uint64_t>();
        const auto h = j.at("image").at("h").get<std::size_t>();
        const auto w = j.at("image").at("w").get<std::size_t>();
        if (s.category < 1 || s.category > 4)
            throw FormatError(meta_path.string() + ": category " + std::to_string(s.category) + " outside 1-4", 0);
        for (const auto& jv : j.at("vertices")) {
            WordVertex v;
            const auto bbox = jv.at("bbox").get<std::vector<int>>();
            if (bbox.size() != 4) throw FormatError(meta_path.string() + ": bbox needs 4 values", 0);
            v.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
            v.text_len = jv.at("text_len").get<int>();
            v.cell_id = jv.at("cell_id").get<int>();
            v.row_ids = jv.at("row_ids").get<std::vector<int>>();
            v.col_ids = jv.at("col_ids").get<std::vector<int>>();
            const bool box_ok = v.bbox.x0 >= 0 && v.bbox.y0 >= 0 && v.bbox.x0 < v.bbox.x1 && v.bbox.y0 < v.bbox.y1 &&
                                static_cast<std::size_t>(v.bbox.x1) <= w && static_cast<std::size_t>(v.bbox.y1) <= h;
            if (!box_ok || v.text_len < 1 || v.row_ids.empty() || v.col_ids.empty() ||
                !std::is_sorted(v.row_ids.begin(), v.row_ids.end()) ||
                !std::is_sorted(v.col_ids.begin(), v.col_ids.end()))
                throw FormatError(meta_path.string() + ": invalid vertex " + std::to_string(s.vertices.size()), 0);
            s.vertices.push_back(std::move(v));
        }
        s.image = read_pgm(with_suffix(stem, ".pgm"));
        if (s.image.height != h || s.image.width != w)
            throw FormatError(meta_path.string() + ": image is " + std::to_string(s.image.width) + "x" +
                                  std::to_string(s.image.height) + ", metadata says " + std::to_string(w) + "x" +
                                  std::to_string(h),
                              0);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(meta_path.string() + ": " + e.what(), 0);
    }
    s.gt = derive_ground_truth(s.vertices);
    return s;
}

} // namespace tabgraph
