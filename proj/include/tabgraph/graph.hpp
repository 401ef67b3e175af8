#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace tabgraph {

/// Dense v×v binary matrix over word vertices, row-major.
///
/// Used for the cell-, row- and column-sharing graphs. Well-formed matrices
/// are symmetric and reflexive; `validate` reports when they are not.
class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;
    explicit AdjacencyMatrix(std::size_t v) : v_(v), bits_(v * v, 0) {}

    static AdjacencyMatrix identity(std::size_t v);

    std::size_t size() const noexcept { return v_; }

    bool operator()(std::size_t i, std::size_t j) const { return bits_[i * v_ + j] != 0; }
    void set(std::size_t i, std::size_t j, bool value) { bits_[i * v_ + j] = value ? 1 : 0; }
    /// Sets (i, j) and (j, i).
    void set_symmetric(std::size_t i, std::size_t j, bool value) {
        set(i, j, value);
        set(j, i, value);
    }

    /// Number of unordered pairs i < j with an edge.
    std::size_t edge_count() const;

    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    friend bool operator==(const AdjacencyMatrix&, const AdjacencyMatrix&) = default;

private:
    std::size_t v_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct AdjacencyTriple {
    AdjacencyMatrix cells;
    AdjacencyMatrix rows;
    AdjacencyMatrix cols;

    std::size_t size() const noexcept { return cells.size(); }

    friend bool operator==(const AdjacencyTriple&, const AdjacencyTriple&) = default;
};

enum class CliqueKind { cell, row, column };

const char* to_string(CliqueKind kind);

/// Reconstructed cells, rows or columns. Each clique is a sorted list of
/// vertex ids; cliques are ordered lexicographically.
struct CliqueSet {
    std::vector<std::vector<int>> cliques;
    CliqueKind kind = CliqueKind::cell;

    friend bool operator==(const CliqueSet&, const CliqueSet&) = default;
};

struct Violation {
    std::string matrix; // "cells", "rows", "cols" or "triple"
    std::size_t i = 0;
    std::size_t j = 0;
    std::string rule;   // "size", "symmetry", "reflexive", "cells-in-rows", "cells-in-cols"
};

/// Checks symmetry and reflexivity of each matrix and that cell sharing
/// implies row and column sharing. An empty result means the triple is valid.
/// Symmetry violations are reported once per unordered pair.
std::vector<Violation> validate(const AdjacencyTriple& adj);

/// Partition into connected components, ordered by smallest member.
CliqueSet connected_components(const AdjacencyMatrix& adj);

inline constexpr std::size_t max_clique_vertices = 4096;

/// All maximal cliques (Bron-Kerbosch with pivoting). The diagonal is
/// ignored. Throws CliqueExplosion once more than `max_cliques` cliques are
/// found; 0 selects the default guard of 10·v.
CliqueSet maximal_cliques(const AdjacencyMatrix& adj,
                          CliqueKind kind = CliqueKind::row,
                          std::size_t max_cliques = 0);

/// bits[i][j] = 1 iff i and j co-occur in a clique, or i == j.
/// Throws IndexOutOfRange for member ids >= v.
AdjacencyMatrix adjacency_from_cliques(const CliqueSet& cliques, std::size_t v);

} // namespace tabgraph
