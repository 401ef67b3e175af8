#pragma once

#include "tabgraph/graph.hpp"
#include "tabgraph/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace tabgraph {

enum class Symmetrize { either, both };

/// Argmax of full-pair logits [v, v, 2], made symmetric (OR by default,
/// AND with Symmetrize::both) with a unit diagonal.
AdjacencyMatrix decode_adjacency(const nn::Tensor& logits, Symmetrize rule = Symmetrize::either);

/// Percentage of ground-truth cliques with an identical predicted clique.
double clique_tpr(const CliqueSet& gt, const CliqueSet& pred);
/// Percentage of predicted cliques with no identical ground-truth clique.
/// An empty prediction scores 0.
double clique_fpr(const CliqueSet& gt, const CliqueSet& pred);

/// All three matrices equal.
bool perfect_match(const AdjacencyTriple& gt, const AdjacencyTriple& pred);

/// Cells by connected components, rows and columns by maximal cliques.
/// Returns nullopt for a kind whose clique count exceeds the guard.
struct Reconstruction {
    std::array<std::optional<CliqueSet>, 3> sets;
};
Reconstruction reconstruct(const AdjacencyTriple& adj, std::size_t max_cliques = 0);

struct SampleScore {
    int category = 1;
    std::array<double, 3> tpr{};
    std::array<double, 3> fpr{};
    // Counts behind the percentages, for micro averaging.
    std::array<std::size_t, 3> gt_cliques{};
    std::array<std::size_t, 3> gt_matched{};
    std::array<std::size_t, 3> pred_cliques{};
    std::array<std::size_t, 3> pred_unmatched{};
    bool perfect = false;
    /// Kinds whose reconstruction hit the clique guard (scored tpr 0, fpr 100).
    std::array<bool, 3> clique_explosion{};
};

SampleScore score_sample(const AdjacencyTriple& gt, const AdjacencyTriple& pred, int category,
                         std::size_t max_cliques = 0);

struct CategoryReport {
    std::size_t samples = 0;
    std::array<double, 3> tpr{};
    std::array<double, 3> fpr{};
    double perfect = 0.0;
    std::size_t clique_explosions = 0;
};

struct EvalReport {
    /// Keys 1-4; categories without samples are absent.
    std::map<int, CategoryReport> categories;
    CategoryReport overall;
    bool micro = false;
};

/// Averages per-sample scores (macro) or pools clique counts (micro).
EvalReport aggregate(std::span<const SampleScore> scores, bool micro = false);

struct EvalOptions {
    Symmetrize rule = Symmetrize::either;
    bool micro = false;
    /// Clique guard for reconstruction; 0 selects 10·v.
    std::size_t max_cliques = 0;
};

/// Full-pair inference and decoding of all three matrices.
AdjacencyTriple predict(Model& model, const TableSample& sample, Symmetrize rule = Symmetrize::either);

/// Scores `model` on `samples`; a null model decodes the ground truth
/// itself (oracle mode).
EvalReport evaluate(Model* model, std::span<const TableSample> samples, const EvalOptions& options = {});

nlohmann::json to_json(const EvalReport& report);
std::string to_csv(const EvalReport& report);
/// Condensed TPR / FPR / perfect-matching tables.
std::string format_table(const EvalReport& report);

} // namespace tabgraph
