#include "tabgraph/graph.hpp"

#include "tabgraph/errors.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace tabgraph {

AdjacencyMatrix AdjacencyMatrix::identity(std::size_t v) {
    AdjacencyMatrix m(v);
    for (std::size_t i = 0; i < v; ++i) m.set(i, i, true);
    return m;
}

std::size_t AdjacencyMatrix::edge_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < v_; ++i)
        for (std::size_t j = i + 1; j < v_; ++j)
            if ((*this)(i, j)) ++n;
    return n;
}

const char* to_string(CliqueKind kind) {
    switch (kind) {
    case CliqueKind::cell: return "cell";
    case CliqueKind::row: return "row";
    case CliqueKind::column: return "column";
    }
    return "?";
}

namespace {

void check_matrix(const AdjacencyMatrix& m, const std::string& name, std::vector<Violation>& out) {
    const std::size_t v = m.size();
    for (std::size_t i = 0; i < v; ++i) {
        if (!m(i, i)) out.push_back({name, i, i, "reflexive"});
        for (std::size_t j = i + 1; j < v; ++j)
            if (m(i, j) != m(j, i)) out.push_back({name, i, j, "symmetry"});
    }
}

} // namespace

std::vector<Violation> validate(const AdjacencyTriple& adj) {
    std::vector<Violation> out;
    const std::size_t v = adj.cells.size();
    if (adj.rows.size() != v || adj.cols.size() != v) {
        out.push_back({"triple", adj.rows.size(), adj.cols.size(), "size"});
        return out;
    }
    check_matrix(adj.cells, "cells", out);
    check_matrix(adj.rows, "rows", out);
    check_matrix(adj.cols, "cols", out);
    for (std::size_t i = 0; i < v; ++i) {
        for (std::size_t j = 0; j < v; ++j) {
            if (!adj.cells(i, j)) continue;
            if (!adj.rows(i, j)) out.push_back({"rows", i, j, "cells-in-rows"});
            if (!adj.cols(i, j)) out.push_back({"cols", i, j, "cells-in-cols"});
        }
    }
    return out;
}

CliqueSet connected_components(const AdjacencyMatrix& adj) {
    const std::size_t v = adj.size();
    std::vector<std::size_t> parent(v);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t i = 0; i < v; ++i) {
        for (std::size_t j = i + 1; j < v; ++j) {
            if (!adj(i, j) && !adj(j, i)) continue;
            const auto a = find(i);
            const auto b = find(j);
            // Root at the smaller id so iteration order below yields sorted output.
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    CliqueSet out{{}, CliqueKind::cell};
    std::vector<std::ptrdiff_t> slot(v, -1);
    for (std::size_t i = 0; i < v; ++i) {
        const auto root = find(i);
        if (slot[root] < 0) {
            slot[root] = static_cast<std::ptrdiff_t>(out.cliques.size());
            out.cliques.emplace_back();
        }
        out.cliques[static_cast<std::size_t>(slot[root])].push_back(static_cast<int>(i));
    }
    return out;
}

namespace {

// Fixed-width bitset sized at run time; v <= 4096 keeps it at <= 64 words.
class VertexSet {
public:
    explicit VertexSet(std::size_t v) : words_((v + 63) / 64, 0) {}

    void insert(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
    void erase(std::size_t i) { words_[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }
    bool contains(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }

    bool empty() const {
        return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
    }

    std::size_t count_and(const VertexSet& other) const {
        std::size_t n = 0;
        for (std::size_t k = 0; k < words_.size(); ++k) n += std::popcount(words_[k] & other.words_[k]);
        return n;
    }

    VertexSet intersect(const VertexSet& other) const {
        VertexSet r = *this;
        for (std::size_t k = 0; k < words_.size(); ++k) r.words_[k] &= other.words_[k];
        return r;
    }

    template <typename F>
    void for_each(F&& f) const {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            std::uint64_t w = words_[k];
            while (w != 0) {
                const int b = std::countr_zero(w);
                f(k * 64 + static_cast<std::size_t>(b));
                w &= w - 1;
            }
        }
    }

private:
    std::vector<std::uint64_t> words_;
};

class BronKerbosch {
public:
    BronKerbosch(const AdjacencyMatrix& adj, std::size_t guard) : guard_(guard) {
        const std::size_t v = adj.size();
        neighbours_.assign(v, VertexSet(v));
        for (std::size_t i = 0; i < v; ++i)
            for (std::size_t j = 0; j < v; ++j)
                if (i != j && adj(i, j)) neighbours_[i].insert(j);
    }

    std::vector<std::vector<int>> run(std::size_t v) {
        VertexSet candidates(v);
        for (std::size_t i = 0; i < v; ++i) candidates.insert(i);
        std::vector<int> current;
        expand(current, candidates, VertexSet(v));
        return std::move(found_);
    }

private:
    void expand(std::vector<int>& current, VertexSet candidates, VertexSet excluded) {
        if (candidates.empty()) {
            if (excluded.empty()) {
                if (found_.size() >= guard_)
                    throw CliqueExplosion("maximal clique count exceeds guard of " + std::to_string(guard_));
                auto clique = current;
                std::sort(clique.begin(), clique.end());
                found_.push_back(std::move(clique));
            }
            return;
        }
        // Tomita pivot: vertex of P ∪ X with most neighbours in P.
        std::size_t pivot = 0;
        std::size_t best = 0;
        bool have_pivot = false;
        auto consider = [&](std::size_t u) {
            const auto n = neighbours_[u].count_and(candidates);
            if (!have_pivot || n > best) {
                pivot = u;
                best = n;
                have_pivot = true;
            }
        };
        candidates.for_each(consider);
        excluded.for_each(consider);

        std::vector<std::size_t> branch;
        candidates.for_each([&](std::size_t u) {
            if (!neighbours_[pivot].contains(u)) branch.push_back(u);
        });
        for (const auto u : branch) {
            current.push_back(static_cast<int>(u));
            expand(current, candidates.intersect(neighbours_[u]), excluded.intersect(neighbours_[u]));
            current.pop_back();
            candidates.erase(u);
            excluded.insert(u);
        }
    }

    std::vector<VertexSet> neighbours_;
    std::vector<std::vector<int>> found_;
    std::size_t guard_;
};

} // namespace

CliqueSet maximal_cliques(const AdjacencyMatrix& adj, CliqueKind kind, std::size_t max_cliques) {
    const std::size_t v = adj.size();
    if (v > max_clique_vertices)
        throw CliqueExplosion("maximal_cliques: " + std::to_string(v) + " vertices exceeds limit of " +
                              std::to_string(max_clique_vertices));
    const std::size_t guard = max_cliques == 0 ? std::max<std::size_t>(10 * v, 1) : max_cliques;
    CliqueSet out{{}, kind};
    if (v == 0) return out;
    out.cliques = BronKerbosch(adj, guard).run(v);
    std::sort(out.cliques.begin(), out.cliques.end());
    return out;
}

AdjacencyMatrix adjacency_from_cliques(const CliqueSet& cliques, std::size_t v) {
    auto m = AdjacencyMatrix::identity(v);
    for (const auto& clique : cliques.cliques) {
        for (const int a : clique) {
            if (a < 0 || static_cast<std::size_t>(a) >= v)
                throw IndexOutOfRange("adjacency_from_cliques: vertex " + std::to_string(a) +
                                      " out of range for v=" + std::to_string(v));
            for (const int b : clique) m.set(static_cast<std::size_t>(a), static_cast<std::size_t>(b), true);
        }
    }
    return m;
}

} // namespace tabgraph
