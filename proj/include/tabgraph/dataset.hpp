#pragma once

#include "tabgraph/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tabgraph {

/// One line of `manifest.jsonl`.
struct ManifestRecord {
    std::string stem; // relative to the dataset directory
    int category = 1;
    std::uint64_t seed = 0;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

inline constexpr const char* manifest_name = "manifest.jsonl";

/// Category 0 means mixed: sample i gets category i % 4 + 1.
inline constexpr int mixed_category = 0;

/// Seed of sample `index` in a dataset generated from `base`.
std::uint64_t sample_seed(std::uint64_t base, std::size_t index);

/// Writes `count` samples plus the manifest into `dir` (created if needed).
std::vector<ManifestRecord> generate_dataset(const std::filesystem::path& dir, std::size_t count, int category,
                                             std::uint64_t base_seed, const GenConfig& cfg = {});

/// Throws IoError if the manifest is missing, FormatError if a line is bad.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& dir);

/// Loads every sample listed in the manifest, in manifest order.
std::vector<TableSample> load_dataset(const std::filesystem::path& dir);

} // namespace tabgraph
