#include "tabgraph/eval.hpp"

#include "tabgraph/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace tabgraph {

namespace {

constexpr std::array<const char*, 3> kind_names{"cells", "rows", "cols"};

std::size_t matched(const CliqueSet& from, const CliqueSet& in) {
    const std::set<std::vector<int>> lookup(in.cliques.begin(), in.cliques.end());
    std::size_t n = 0;
    for (const auto& c : from.cliques) n += lookup.count(c);
    return n;
}

double percent(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

nn::Tensor oracle_logits(const AdjacencyMatrix& a) {
    const std::size_t v = a.size();
    nn::Tensor z({v, v, 2});
    for (std::size_t i = 0; i < v; ++i)
        for (std::size_t j = 0; j < v; ++j) {
            z[2 * (i * v + j)] = a(i, j) ? -1.0 : 1.0;
            z[2 * (i * v + j) + 1] = a(i, j) ? 1.0 : -1.0;
        }
    return z;
}

} // namespace

AdjacencyMatrix decode_adjacency(const nn::Tensor& logits, Symmetrize rule) {
    if (logits.rank() != 3 || logits.dim(0) != logits.dim(1) || logits.dim(2) != 2)
        throw ShapeMismatch("decode_adjacency: expected [v, v, 2], got " + nn::shape_string(logits.shape()));
    const std::size_t v = logits.dim(0);
    auto raw = [&](std::size_t i, std::size_t j) {
        const std::size_t r = 2 * (i * v + j);
        return logits[r + 1] > logits[r];
    };
    AdjacencyMatrix a(v);
    for (std::size_t i = 0; i < v; ++i)
        for (std::size_t j = 0; j < v; ++j)
            a.set(i, j, i == j || (rule == Symmetrize::either ? raw(i, j) || raw(j, i) : raw(i, j) && raw(j, i)));
    return a;
}

double clique_tpr(const CliqueSet& gt, const CliqueSet& pred) {
    return percent(matched(gt, pred), gt.cliques.size());
}

double clique_fpr(const CliqueSet& gt, const CliqueSet& pred) {
    return percent(pred.cliques.size() - matched(pred, gt), pred.cliques.size());
}

bool perfect_match(const AdjacencyTriple& gt, const AdjacencyTriple& pred) { return gt == pred; }

Reconstruction reconstruct(const AdjacencyTriple& adj, std::size_t max_cliques) {
    Reconstruction r;
    r.sets[0] = connected_components(adj.cells);
    for (std::size_t k = 1; k < 3; ++k) {
        const auto& m = k == 1 ? adj.rows : adj.cols;
        try {
            r.sets[k] = maximal_cliques(m, k == 1 ? CliqueKind::row : CliqueKind::column, max_cliques);
        } catch (const CliqueExplosion&) {
            r.sets[k] = std::nullopt;
        }
    }
    return r;
}

SampleScore score_sample(const AdjacencyTriple& gt, const AdjacencyTriple& pred, int category,
                         std::size_t max_cliques) {
    if (gt.size() != pred.size())
        throw ShapeMismatch("score_sample: " + std::to_string(gt.size()) + " vs " + std::to_string(pred.size()) +
                            " vertices");
    SampleScore s;
    s.category = category;
    s.perfect = perfect_match(gt, pred);
    const auto g = reconstruct(gt, max_cliques);
    const auto p = reconstruct(pred, max_cliques);
    for (std::size_t k = 0; k < 3; ++k) {
        if (!g.sets[k]) throw CliqueExplosion(std::string("ground-truth ") + kind_names[k] + " exceed clique guard");
        const auto& gs = *g.sets[k];
        s.gt_cliques[k] = gs.cliques.size();
        if (!p.sets[k]) {
            s.clique_explosion[k] = true;
            s.tpr[k] = 0.0;
            s.fpr[k] = 100.0;
            // Counted as one unmatched prediction so micro averages also see it.
            s.pred_cliques[k] = 1;
            s.pred_unmatched[k] = 1;
            continue;
        }
        const auto& ps = *p.sets[k];
        s.gt_matched[k] = matched(gs, ps);
        s.pred_cliques[k] = ps.cliques.size();
        s.pred_unmatched[k] = ps.cliques.size() - matched(ps, gs);
        s.tpr[k] = percent(s.gt_matched[k], s.gt_cliques[k]);
        s.fpr[k] = percent(s.pred_unmatched[k], s.pred_cliques[k]);
    }
    return s;
}

EvalReport aggregate(std::span<const SampleScore> scores, bool micro) {
    EvalReport report;
    report.micro = micro;
    auto summarize = [micro](std::span<const SampleScore* const> group) {
        CategoryReport r;
        r.samples = group.size();
        if (group.empty()) return r;
        std::array<std::size_t, 3> gt{}, hit{}, pred{}, miss{};
        std::size_t perfect = 0;
        for (const auto* s : group) {
            for (std::size_t k = 0; k < 3; ++k) {
                r.tpr[k] += s->tpr[k];
                r.fpr[k] += s->fpr[k];
                gt[k] += s->gt_cliques[k];
                hit[k] += s->gt_matched[k];
                pred[k] += s->pred_cliques[k];
                miss[k] += s->pred_unmatched[k];
            }
            perfect += s->perfect ? 1 : 0;
            r.clique_explosions += std::count(s->clique_explosion.begin(), s->clique_explosion.end(), true) > 0;
        }
        for (std::size_t k = 0; k < 3; ++k) {
            if (micro) {
                r.tpr[k] = percent(hit[k], gt[k]);
                r.fpr[k] = percent(miss[k], pred[k]);
            } else {
                r.tpr[k] /= static_cast<double>(group.size());
                r.fpr[k] /= static_cast<double>(group.size());
            }
        }
        r.perfect = percent(perfect, group.size());
        return r;
    };
    std::vector<const SampleScore*> all;
    std::map<int, std::vector<const SampleScore*>> by_category;
    for (const auto& s : scores) {
        all.push_back(&s);
        by_category[s.category].push_back(&s);
    }
    for (const auto& [category, group] : by_category) report.categories[category] = summarize(group);
    report.overall = summarize(all);
    return report;
}

AdjacencyTriple predict(Model& model, const TableSample& sample, Symmetrize rule) {
    nn::Tape tape;
    Rng unused(0);
    const auto fwd = model.forward(tape, sample, Mode::infer, 0, unused);
    return {decode_adjacency(fwd.logits[Head::cells].value(), rule), decode_adjacency(fwd.logits[Head::rows].value(), rule),
            decode_adjacency(fwd.logits[Head::cols].value(), rule)};
}

EvalReport evaluate(Model* model, std::span<const TableSample> samples, const EvalOptions& options) {
    std::vector<SampleScore> scores;
    scores.reserve(samples.size());
    for (const auto& s : samples) {
        AdjacencyTriple pred;
        if (model) {
            pred = predict(*model, s, options.rule);
        } else {
            pred = {decode_adjacency(oracle_logits(s.gt.cells), options.rule),
                    decode_adjacency(oracle_logits(s.gt.rows), options.rule),
                    decode_adjacency(oracle_logits(s.gt.cols), options.rule)};
        }
        scores.push_back(score_sample(s.gt, pred, s.category, options.max_cliques));
    }
    return aggregate(scores, options.micro);
}

nlohmann::json to_json(const EvalReport& report) {
    auto one = [](const CategoryReport& r) {
        nlohmann::json j{{"samples", r.samples}, {"perfect_matching", r.perfect}, {"clique_explosions", r.clique_explosions}};
        for (std::size_t k = 0; k < 3; ++k) j[kind_names[k]] = {{"tpr", r.tpr[k]}, {"fpr", r.fpr[k]}};
        return j;
    };
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [c, r] : report.categories) cats[std::to_string(c)] = one(r);
    return {{"version", 1}, {"averaging", report.micro ? "micro" : "macro"}, {"categories", cats}, {"overall", one(report.overall)}};
}

std::string to_csv(const EvalReport& report) {
    std::string out = "category,samples,cells_tpr,rows_tpr,cols_tpr,cells_fpr,rows_fpr,cols_fpr,perfect_matching\n";
    auto line = [&](const std::string& name, const CategoryReport& r) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n", name.c_str(), r.samples,
                      r.tpr[0], r.tpr[1], r.tpr[2], r.fpr[0], r.fpr[1], r.fpr[2], r.perfect);
        out += buf;
    };
    for (const auto& [c, r] : report.categories) line(std::to_string(c), r);
    line("all", report.overall);
    return out;
}

std::string format_table(const EvalReport& report) {
    std::string out;
    char buf[160];
    auto section = [&](const char* title, auto value) {
        out += title;
        out += "\n";
        std::snprintf(buf, sizeof buf, "  %-10s %8s %8s %8s\n", "category", "cells", "rows", "cols");
        out += buf;
        auto row = [&](const std::string& name, const CategoryReport& r) {
            std::snprintf(buf, sizeof buf, "  %-10s %8.2f %8.2f %8.2f\n", name.c_str(), value(r, 0), value(r, 1),
                          value(r, 2));
            out += buf;
        };
        for (const auto& [c, r] : report.categories) row(std::to_string(c), r);
        row("all", report.overall);
    };
    section("Clique TPR (%)", [](const CategoryReport& r, std::size_t k) { return r.tpr[k]; });
    section("Clique FPR (%)", [](const CategoryReport& r, std::size_t k) { return r.fpr[k]; });
    out += "Perfect matching (%)\n";
    for (const auto& [c, r] : report.categories) {
        std::snprintf(buf, sizeof buf, "  %-10s %8.2f  (%zu samples)\n", std::to_string(c).c_str(), r.perfect, r.samples);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "  %-10s %8.2f  (%zu samples)\n", "all", report.overall.perfect, report.overall.samples);
    out += buf;
    return out;
}

} // namespace tabgraph
