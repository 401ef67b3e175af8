#include "tabgraph/dataset.hpp"

#include "tabgraph/errors.hpp"
#include "tabgraph/rng.hpp"

#include <cstdio>
#include <fstream>

namespace tabgraph {

std::uint64_t sample_seed(std::uint64_t base, std::size_t index) {
    return splitmix64(base + splitmix64(static_cast<std::uint64_t>(index)));
}

std::vector<ManifestRecord> generate_dataset(const std::filesystem::path& dir, std::size_t count, int category,
                                             std::uint64_t base_seed, const GenConfig& cfg) {
    if (category != mixed_category && (category < 1 || category > 4))
        throw ConfigError("category must be 1-4 or mixed, got " + std::to_string(category));
    check_config(cfg);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    std::vector<ManifestRecord> records;
    records.reserve(count);
    std::string manifest;
    for (std::size_t i = 0; i < count; ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "%06zu", i);
        ManifestRecord rec{stem, category == mixed_category ? static_cast<int>(i % 4) + 1 : category,
                           sample_seed(base_seed, i)};
        GenConfig c = cfg;
        c.seed = rec.seed;
        write_sample(generate(c, rec.category), dir / rec.stem);
        manifest += nlohmann::json{{"stem", rec.stem}, {"category", rec.category}, {"seed", rec.seed}}.dump() + "\n";
        records.push_back(std::move(rec));
    }
    std::ofstream out(dir / manifest_name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / manifest_name).string());
    out << manifest;
    if (!out) throw IoError("failed writing " + (dir / manifest_name).string());
    return records;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / manifest_name;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::vector<ManifestRecord> records;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        const std::uint64_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ManifestRecord rec{j.at("stem").get<std::string>(), j.at("category").get<int>(),
                               j.at("seed").get<std::uint64_t>()};
            if (rec.stem.empty() || rec.category < 1 || rec.category > 4)
                throw FormatError(path.string() + ": invalid record", line_start);
            records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ": " + e.what(), line_start);
        }
    }
    return records;
}

std::vector<TableSample> load_dataset(const std::filesystem::path& dir) {
    std::vector<TableSample> out;
    for (const auto& rec : read_manifest(dir)) out.push_back(read_sample(dir / rec.stem));
    return out;
}

} // namespace tabgraph
