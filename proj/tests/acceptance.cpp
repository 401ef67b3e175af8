// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include "tabgraph/dataset.hpp"
#include "tabgraph/eval.hpp"
#include "tabgraph/nn/ops.hpp"
#include "tabgraph/trainer.hpp"

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <nlohmann/json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>
#include <sstream>

using namespace tabgraph;
using namespace tabgraph::nn;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double grad_eps = 1e-5;
constexpr double grad_tol = 1e-4;
constexpr double grad_seconds = 60;
constexpr std::size_t clique_graphs = 300;
constexpr std::size_t clique_max_v = 12;
constexpr double clique_seconds = 60;
constexpr std::size_t sampler_rows = 24;
constexpr std::size_t sampler_draws = 100000;
constexpr double sampler_mass_tol = 0.01;
constexpr double sampler_p_min = 0.01;
constexpr double sampler_seconds = 60;
constexpr std::size_t validity_samples = 1000;
constexpr double validity_seconds = 300;
constexpr std::size_t overfit_tables = 32;
constexpr std::size_t overfit_steps = 3000;
constexpr std::size_t overfit_eval_every = 250;
constexpr double overfit_perfect = 90.0;
constexpr double overfit_loss_drop = 10.0;
constexpr std::size_t general_train = 256;
constexpr std::size_t general_held = 64;
constexpr std::size_t general_steps = 7000;
constexpr double general_cell_tpr = 90.0;
constexpr double general_seconds = 1800;
constexpr std::size_t oracle_samples = 40;

const fs::path work = fs::temp_directory_path() / ("tabgraph_acceptance_" + std::to_string(::getpid()));

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TABGRAPH_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = scale * (2.0 * uniform01(rng) - 1.0);
    return t;
}

Var project(Tape& tape, Var y, std::uint64_t seed) {
    Rng rng(seed);
    return sum(mul(y, tape.constant(random_tensor(y.shape(), rng))));
}

std::vector<TableSample> tables(std::size_t n, int category, std::uint64_t base) {
    std::vector<TableSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        GenConfig g;
        g.seed = sample_seed(base, i);
        out.push_back(generate(g, category == mixed_category ? static_cast<int>(i % 4) + 1 : category));
    }
    return out;
}

// 1 ---------------------------------------------------------------------------

Outcome gradients() {
    Stopwatch clock;
    double worst = 0.0;
    std::string where;
    std::size_t checked = 0;
    auto check = [&](const std::string& name, ParamStore& ps, const std::function<Var(Tape&)>& build) {
        const auto r = testing_oracles::gradient_check(ps, build, grad_eps);
        checked += r.checked;
        if (r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            where = name + " " + r.worst;
        }
    };

    Rng rng(2024);
    {
        ParamStore ps;
        auto& x = ps.add("x", random_tensor({4, 3}, rng));
        auto& w = ps.add("w", random_tensor({3, 5}, rng));
        auto& b = ps.add("b", random_tensor({5}, rng));
        check("dense", ps, [&](Tape& t) { return project(t, dense(t.param(x), t.param(w), t.param(b)), 1); });
        check("relu", ps, [&](Tape& t) { return project(t, relu(t.param(x)), 2); });
        check("exp/scale", ps, [&](Tape& t) { return project(t, scale(exp(t.param(x)), 0.7), 3); });
    }
    {
        ParamStore ps;
        auto& a = ps.add("a", random_tensor({3, 4}, rng));
        auto& b = ps.add("b", random_tensor({3, 4}, rng));
        auto& w = ps.add("w", random_tensor({3, 1}, rng));
        check("add/sub/mul/mul_rows/row_sum", ps, [&](Tape& t) {
            auto y = add(mul(t.param(a), t.param(b)), sub(t.param(a), t.param(b)));
            return project(t, concat(std::vector<Var>{mul_rows(y, t.param(w)), row_sum(y)}), 4);
        });
    }
    {
        ParamStore ps;
        auto& x = ps.add("x", random_tensor({7, 6, 2}, rng));
        auto& k = ps.add("k", random_tensor({3, 3, 2, 4}, rng));
        auto& b = ps.add("b", random_tensor({4}, rng));
        check("conv2d/s2", ps, [&](Tape& t) { return project(t, conv2d(t.param(x), t.param(k), t.param(b), 2, 1), 5); });
        check("conv2d/s1", ps, [&](Tape& t) { return project(t, conv2d(t.param(x), t.param(k), t.param(b), 1, 1), 6); });
        check("max_pool", ps, [&](Tape& t) { return project(t, max_pool(t.param(x), 2, 2), 7); });
    }
    {
        ParamStore ps;
        auto& x = ps.add("x", random_tensor({6, 3}, rng));
        auto& y = ps.add("y", random_tensor({4, 3}, rng));
        const std::vector<std::size_t> idx{5, 0, 0, 2};
        check("gather/concat/reshape", ps, [&](Tape& t) {
            auto c = concat(std::vector<Var>{gather_rows(t.param(x), idx), t.param(y)});
            return project(t, reshape(c, {4, 6}), 8);
        });
        check("reduce_max/reduce_mean/mean", ps, [&](Tape& t) {
            auto xv = t.param(x);
            return add(project(t, reduce_max(xv, 3), 9), add(project(t, reduce_mean(xv, 2), 10), mean(xv)));
        });
    }
    {
        ParamStore ps;
        auto& z = ps.add("z", random_tensor({5, 2}, rng, 3.0));
        const std::vector<int> labels{0, 1, 1, 0, 1};
        check("softmax_xent", ps, [&](Tape& t) { return softmax_xent(t.param(z), labels); });
    }
    for (auto kind : {InteractionKind::fcnn, InteractionKind::dgcnn_star, InteractionKind::gravnet_star}) {
        Model m(testing_fixtures::tiny_config(kind), 14);
        testing_fixtures::randomize(m.params(), 15, 0.4);
        const auto s = testing_fixtures::toy_sample(6, 16);
        check(std::string("model/") + to_string(kind), m.params(), [&](Tape& tape) {
            Rng r(17);
            const auto fwd = m.forward(tape, s, Mode::train, 4, r);
            return pair_loss(fwd.logits, fwd.samples, s.gt).total;
        });
    }
    const double secs = clock.seconds();
    return {worst < grad_tol && secs < grad_seconds,
            "max rel err " + fmt("%.2e", worst) + " over " + std::to_string(checked) + " entries, worst " + where +
                ", " + fmt("%.1f", secs) + " s"};
}

// 2 and 3 ----------------------------------------------------------------------

std::vector<AdjacencyMatrix> clique_corpus() {
    Rng rng(77);
    std::vector<AdjacencyMatrix> out;
    for (std::size_t g = 0; g < clique_graphs; ++g) {
        const auto v = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(clique_max_v)));
        out.push_back(testing_oracles::random_symmetric_reflexive(v, 0.1 + 0.8 * uniform01(rng), rng));
    }
    return out;
}

Outcome clique_oracle(const std::vector<AdjacencyMatrix>& corpus) {
    Stopwatch clock;
    std::size_t agree = 0, cliques = 0;
    for (const auto& a : corpus) {
        const auto got = maximal_cliques(a).cliques;
        const auto want = testing_oracles::brute_force_maximal_cliques(a);
        cliques += want.size();
        if (got == want) ++agree;
    }
    const double secs = clock.seconds();
    return {agree == corpus.size() && secs < clique_seconds,
            std::to_string(agree) + "/" + std::to_string(corpus.size()) + " graphs identical (" +
                std::to_string(cliques) + " cliques), " + fmt("%.1f", secs) + " s"};
}

Outcome clique_round_trip(const std::vector<AdjacencyMatrix>& corpus) {
    std::size_t agree = 0;
    for (const auto& a : corpus)
        if (adjacency_from_cliques(maximal_cliques(a), a.size()) == a) ++agree;
    return {agree == corpus.size(), std::to_string(agree) + "/" + std::to_string(corpus.size()) + " graphs restored"};
}

// 4 ---------------------------------------------------------------------------

Outcome sampler_balance() {
    Stopwatch clock;
    Rng rng(4242);
    double worst_mass = 0.0, chi2 = 0.0, min_row_p = 1.0;
    std::size_t dof = 0, rows = 0;
    while (rows < sampler_rows) {
        const auto v = static_cast<std::size_t>(uniform_int(rng, 4, 30));
        const auto a = testing_oracles::random_symmetric_reflexive(v, 0.15 + 0.7 * uniform01(rng), rng);
        const auto i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(v) - 1));
        std::size_t adjacent = 0;
        for (std::size_t j = 0; j < v; ++j) adjacent += a(i, j) ? 1 : 0;
        if (adjacent == v) continue; // needs both classes; the diagonal guarantees class 1
        ++rows;
        const auto s = draw(balanced_distribution(a), sampler_draws, rng);
        std::vector<double> freq(v, 0.0);
        for (std::size_t m = 0; m < s.t; ++m) freq[s(i, m)] += 1.0;
        double ones = 0.0;
        for (std::size_t j = 0; j < v; ++j) ones += a(i, j) ? freq[j] : 0.0;
        worst_mass = std::max(worst_mass, std::abs(ones / sampler_draws - 0.5));
        // Within each class, counts against a uniform split of that class's total.
        for (bool cls : {true, false}) {
            std::vector<double> f;
            for (std::size_t j = 0; j < v; ++j)
                if (a(i, j) == cls) f.push_back(freq[j]);
            if (f.size() < 2) continue;
            const double total = std::accumulate(f.begin(), f.end(), 0.0);
            const double expect = total / static_cast<double>(f.size());
            double c = 0.0;
            for (double x : f) c += (x - expect) * (x - expect) / expect;
            chi2 += c;
            dof += f.size() - 1;
            const boost::math::chi_squared row_dist(static_cast<double>(f.size() - 1));
            min_row_p = std::min(min_row_p, boost::math::cdf(boost::math::complement(row_dist, c)));
        }
    }
    const boost::math::chi_squared dist(static_cast<double>(dof));
    const double p = boost::math::cdf(boost::math::complement(dist, chi2));
    const double secs = clock.seconds();
    return {worst_mass <= sampler_mass_tol && p > sampler_p_min && secs < sampler_seconds,
            std::to_string(rows) + " rows, max |mass-0.5| " + fmt("%.4f", worst_mass) + ", pooled chi2 " +
                fmt("%.1f", chi2) + " on " + std::to_string(dof) + " dof p=" + fmt("%.3f", p) +
                " (min per-row p " + fmt("%.4f", min_row_p) + "), " + fmt("%.1f", secs) + " s"};
}

// 5 ---------------------------------------------------------------------------

Outcome ground_truth_validity() {
    Stopwatch clock;
    std::size_t valid = 0, merged_plain = 0;
    std::array<std::size_t, 4> per{};
    for (std::size_t i = 0; i < validity_samples; ++i) {
        GenConfig g;
        g.seed = sample_seed(5555, i);
        const int category = static_cast<int>(i % 4) + 1;
        const auto s = generate(g, category);
        ++per[static_cast<std::size_t>(category - 1)];
        if (validate(s.gt).empty() && derive_ground_truth(s.vertices) == s.gt) ++valid;
        if (category <= 2) {
            for (const auto& w : s.vertices)
                if (w.row_ids.size() != 1 || w.col_ids.size() != 1) {
                    ++merged_plain;
                    break;
                }
        }
    }
    const double secs = clock.seconds();
    return {valid == validity_samples && merged_plain == 0 && secs < validity_seconds,
            std::to_string(valid) + "/" + std::to_string(validity_samples) + " valid (" + std::to_string(per[0]) +
                "/" + std::to_string(per[1]) + "/" + std::to_string(per[2]) + "/" + std::to_string(per[3]) +
                " per category), " + std::to_string(merged_plain) + " category 1/2 samples with merges, " +
                fmt("%.1f", secs) + " s"};
}

// 6 ---------------------------------------------------------------------------

Outcome determinism() {
    const fs::path root = work / "determinism";
    std::vector<std::string> differ;
    std::size_t compared = 0;
    auto same_dir = [&](const fs::path& a, const fs::path& b) {
        for (const auto& e : fs::directory_iterator(a)) {
            ++compared;
            if (read_bytes(e.path()) != read_bytes(b / e.path().filename()))
                differ.push_back(e.path().filename().string());
        }
    };
    int rc = 0;
    for (const char* run : {"a", "b"}) {
        const fs::path r = root / run;
        rc |= run_cli("generate --out " + (r / "data").string() + " --count 8 --category mixed --seed 19");
        rc |= run_cli("train --data " + (r / "data").string() + " --out " + (r / "train").string() +
                      " --steps 30 --eval-every 10 --seed 3");
        rc |= run_cli("evaluate --data " + (r / "data").string() + " --checkpoint " +
                      (r / "train" / checkpoint_name).string() + " --out " + (r / "report.json").string() +
                      " --csv " + (r / "report.csv").string());
    }
    if (rc != 0) return {false, "a subcommand failed"};
    same_dir(root / "a" / "data", root / "b" / "data");
    same_dir(root / "a" / "train", root / "b" / "train");
    for (const char* f : {"report.json", "report.csv"}) {
        ++compared;
        if (read_bytes(root / "a" / f) != read_bytes(root / "b" / f)) differ.push_back(f);
    }
    std::string detail = std::to_string(compared) + " artifacts compared across generate/train/evaluate";
    for (const auto& d : differ) detail += ", differs: " + d;
    return {differ.empty() && compared > 20, detail};
}

// 7 ---------------------------------------------------------------------------

struct OverfitRun {
    std::size_t first_step = 0; // first evaluation at or above the gate; 0 if never
    double best = 0.0;
    double final_perfect = 0.0;
    double loss_ratio = 0.0;
    double seconds = 0.0;
};

OverfitRun overfit(InteractionKind kind, const std::vector<TableSample>& data, bool stop_at_gate) {
    Stopwatch clock;
    TrainConfig cfg;
    cfg.model.interaction.kind = kind;
    cfg.steps = overfit_steps;
    cfg.eval_every = overfit_eval_every;
    cfg.log_timestamps = false;
    cfg.out_dir = work / ("overfit_" + std::string(to_string(kind)));
    OverfitRun r;
    std::vector<StepRecord> records;
    // Train in eval-sized chunks; resuming follows the uninterrupted run.
    for (std::size_t target = overfit_eval_every; target <= overfit_steps; target += overfit_eval_every) {
        cfg.steps = target;
        const auto res = train(cfg, data);
        cfg.resume = res.checkpoint;
        records.insert(records.end(), res.log.records().begin(), res.log.records().end());
        Model m = load_model(res.checkpoint);
        const auto rep = evaluate(&m, data);
        r.final_perfect = rep.overall.perfect;
        r.best = std::max(r.best, rep.overall.perfect);
        if (r.first_step == 0 && rep.overall.perfect >= overfit_perfect) r.first_step = target;
        if (stop_at_gate && r.first_step != 0) break;
    }
    const std::size_t n = std::min<std::size_t>(50, records.size() / 2);
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        head += records[i].total_loss;
        tail += records[records.size() - 1 - i].total_loss;
    }
    r.loss_ratio = tail > 0 ? head / tail : 0.0;
    r.seconds = clock.seconds();
    return r;
}

Outcome overfit_gate() {
    const auto data = tables(overfit_tables, 1, 7007);
    const auto dg = overfit(InteractionKind::dgcnn_star, data, true);
    const auto fc = overfit(InteractionKind::fcnn, data, false);
    const bool pass = dg.first_step != 0 && dg.loss_ratio >= overfit_loss_drop;
    return {pass, "dgcnn_star reached " + fmt("%.1f", dg.best) + "% perfect at step " +
                      std::to_string(dg.first_step) + ", loss down " + fmt("%.0f", dg.loss_ratio) + "x, " +
                      fmt("%.0f", dg.seconds) + " s; fcnn (non-gating) " + fmt("%.1f", fc.final_perfect) +
                      "% after " + std::to_string(overfit_steps) + " steps, best " + fmt("%.1f", fc.best) + "%, " +
                      fmt("%.0f", fc.seconds) + " s"};
}

// 8 ---------------------------------------------------------------------------

Outcome generalisation() {
    Stopwatch clock;
    const auto train_set = tables(general_train, 1, 8008);
    const auto held = tables(general_held, 1, 9009);
    TrainConfig cfg;
    cfg.steps = general_steps;
    cfg.eval_every = 0;
    cfg.log_timestamps = false;
    cfg.out_dir = work / "general";
    Model untrained(cfg.model, cfg.seed);
    const auto before = evaluate(&untrained, held);
    const auto res = train(cfg, train_set);
    Model trained = load_model(res.checkpoint);
    const auto after = evaluate(&trained, held);
    const double secs = clock.seconds();
    const bool pass = after.overall.tpr[0] >= general_cell_tpr && after.overall.perfect > before.overall.perfect &&
                      secs <= general_seconds;
    return {pass, "held-out cell TPR " + fmt("%.2f", after.overall.tpr[0]) + ", rows " +
                      fmt("%.2f", after.overall.tpr[1]) + ", cols " + fmt("%.2f", after.overall.tpr[2]) +
                      ", perfect " + fmt("%.2f", after.overall.perfect) + " vs untrained " +
                      fmt("%.2f", before.overall.perfect) + ", " + fmt("%.0f", secs) + " s"};
}

// 9 ---------------------------------------------------------------------------

Outcome oracle_identity() {
    const fs::path root = work / "oracle";
    if (run_cli("generate --out " + (root / "data").string() + " --count " + std::to_string(oracle_samples) +
                " --category mixed --seed 31") != 0 ||
        run_cli("evaluate --data " + (root / "data").string() + " --oracle --out " + (root / "report.json").string()) !=
            0)
        return {false, "a subcommand failed"};
    const auto j = nlohmann::json::parse(read_bytes(root / "report.json"));
    std::size_t exact = 0, cats = 0;
    for (const auto& [c, r] : j.at("categories").items()) {
        ++cats;
        bool ok = r.at("perfect_matching").get<double>() == 100.0;
        for (const char* kind : {"cells", "rows", "cols"})
            ok = ok && r.at(kind).at("tpr").get<double>() == 100.0 && r.at(kind).at("fpr").get<double>() == 0.0;
        exact += ok ? 1 : 0;
    }
    return {cats == 4 && exact == 4,
            std::to_string(exact) + "/" + std::to_string(cats) + " categories exactly TPR 100, FPR 0, perfect 100"};
}

} // namespace

int main() {
    fs::remove_all(work);
    fs::create_directories(work);
    int failures = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << " " << name << ": " << o.detail << std::endl;
    };
    const auto corpus = clique_corpus();
    report(1, "gradient correctness", gradients);
    report(2, "clique oracle equivalence", [&] { return clique_oracle(corpus); });
    report(3, "clique round trip", [&] { return clique_round_trip(corpus); });
    report(4, "sampler balance", sampler_balance);
    report(5, "ground-truth validity", ground_truth_validity);
    report(6, "determinism", determinism);
    report(7, "overfit gate", overfit_gate);
    report(8, "generalisation smoke", generalisation);
    report(9, "oracle evaluation identity", oracle_identity);
    fs::remove_all(work);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
