#include "tabgraph/dataset.hpp"
#include "tabgraph/errors.hpp"
#include "tabgraph/eval.hpp"
#include "tabgraph/trainer.hpp"
#include "tabgraph/visualize.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

using namespace tabgraph;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, other = 1, config = 2, io = 3, numeric = 4 };

nlohmann::json read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

fs::path sample_stem(fs::path p) {
    if (p.extension() == ".pgm" || p.extension() == ".json") p.replace_extension();
    return p;
}

int parse_category(const std::string& s) {
    if (s == "mixed") return mixed_category;
    if (s.size() == 1 && s[0] >= '1' && s[0] <= '4') return s[0] - '0';
    throw ConfigError("category must be 1, 2, 3, 4 or mixed, got '" + s + "'");
}

std::string percent(double x) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

// generate ------------------------------------------------------------------

struct GenerateArgs {
    fs::path out;
    std::size_t count = 0;
    std::string category = "mixed";
    std::uint64_t seed = 0;
    std::optional<fs::path> config;
};

int cmd_generate(const GenerateArgs& a) {
    const int category = parse_category(a.category);
    GenConfig cfg;
    if (a.config) cfg = gen_config_from_json(read_config_file(*a.config));
    check_config(cfg);
    const auto recs = generate_dataset(a.out, a.count, category, a.seed, cfg);
    std::map<int, std::size_t> counts;
    for (const auto& r : recs) ++counts[r.category];
    std::cout << "generated " << recs.size() << " samples in " << a.out.string() << ":";
    for (int c = 1; c <= 4; ++c) std::cout << " cat" << c << "=" << counts[c];
    std::cout << "\n";
    return ok;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
    fs::path data;
    fs::path out;
    std::optional<fs::path> config;
    std::optional<fs::path> eval_data;
    std::optional<fs::path> resume;
    std::string model;
    bool large = false;
    std::optional<std::size_t> steps, epochs, batch, samples, eval_every, eval_count;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
    bool timestamps = false;
};

int cmd_train(const TrainArgs& a) {
    TrainConfig cfg;
    cfg.log_timestamps = a.timestamps;
    if (a.config) cfg = train_config_from_json(read_config_file(*a.config), cfg);
    if (!a.model.empty() || a.large) {
        const auto kind = a.model.empty() ? cfg.model.interaction.kind : interaction_kind_from_string(a.model);
        if (a.large) {
            cfg.model = large_config(kind);
        } else {
            cfg.model.interaction.kind = kind;
        }
    }
    if (a.steps) cfg.steps = *a.steps;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.batch) cfg.batch = *a.batch;
    if (a.samples) cfg.samples_per_vertex = *a.samples;
    if (a.eval_every) cfg.eval_every = *a.eval_every;
    if (a.lr) cfg.adam.lr = *a.lr;
    if (a.seed) cfg.seed = *a.seed;
    if (a.timestamps) cfg.log_timestamps = true;
    if (a.resume) cfg.resume = *a.resume;
    cfg.out_dir = a.out;
    check_config(cfg);

    const auto tables = load_dataset(a.data);
    std::vector<TableSample> held;
    if (a.eval_data) held = load_dataset(*a.eval_data);
    const std::size_t n_eval = a.eval_count.value_or(16);
    const auto& eval_src = a.eval_data ? held : tables;
    const std::span<const TableSample> eval_set(eval_src.data(), std::min(n_eval, eval_src.size()));

    fs::create_directories(a.out);
    write_text(a.out / "train_config.json", to_json(cfg).dump(2) + "\n");
    std::cout << "training " << to_string(cfg.model.interaction.kind) << " on " << tables.size() << " tables for "
              << total_steps(cfg, tables.size()) << " steps\n";
    const auto result = train(cfg, tables, [&](std::size_t step, Model& model) {
        if (eval_set.empty()) return;
        const auto rep = evaluate(&model, eval_set);
        std::cout << "step " << step << "  perfect " << percent(rep.overall.perfect) << "  tpr cells "
                  << percent(rep.overall.tpr[0]) << " rows " << percent(rep.overall.tpr[1]) << " cols "
                  << percent(rep.overall.tpr[2]) << std::endl;
    });
    if (!result.log.records().empty()) {
        const auto& last = result.log.records().back();
        std::cout << "final loss " << last.total_loss << "\n";
    }
    std::cout << "checkpoint " << result.checkpoint.string() << "\n";
    return ok;
}

// evaluate ------------------------------------------------------------------

struct EvaluateArgs {
    fs::path data;
    std::optional<fs::path> checkpoint;
    bool oracle = false;
    std::optional<fs::path> out;
    std::optional<fs::path> csv;
    bool micro = false;
    std::string symmetrize = "either";
    std::size_t max_cliques = 0;
};

Symmetrize parse_rule(const std::string& s) {
    if (s == "either" || s == "or") return Symmetrize::either;
    if (s == "both" || s == "and") return Symmetrize::both;
    throw ConfigError("symmetrize must be either or both, got '" + s + "'");
}

int cmd_evaluate(const EvaluateArgs& a) {
    if (a.oracle == a.checkpoint.has_value()) throw ConfigError("pass exactly one of --checkpoint or --oracle");
    EvalOptions opts;
    opts.rule = parse_rule(a.symmetrize);
    opts.micro = a.micro;
    opts.max_cliques = a.max_cliques;
    std::optional<Model> model;
    if (a.checkpoint) model.emplace(load_model(*a.checkpoint));
    const auto samples = load_dataset(a.data);
    const auto rep = evaluate(model ? &*model : nullptr, samples, opts);
    std::cout << format_table(rep);
    if (a.out) write_text(*a.out, to_json(rep).dump(2) + "\n");
    if (a.csv) write_text(*a.csv, to_csv(rep));
    return ok;
}

// predict / visualize --------------------------------------------------------

Reconstruction reconstruct_sample(const TableSample& s, const std::optional<fs::path>& checkpoint,
                                  Symmetrize rule) {
    if (!checkpoint) return reconstruct(s.gt);
    Model model = load_model(*checkpoint);
    return reconstruct(predict(model, s, rule));
}

struct PredictArgs {
    fs::path sample;
    fs::path checkpoint;
    std::optional<fs::path> out;
    std::string symmetrize = "either";
};

int cmd_predict(const PredictArgs& a) {
    const auto s = read_sample(sample_stem(a.sample));
    Model model = load_model(a.checkpoint);
    const auto adj = predict(model, s, parse_rule(a.symmetrize));
    const auto rec = reconstruct(adj);
    nlohmann::json j;
    j["vertices"] = s.vertices.size();
    const char* names[] = {"cells", "rows", "cols"};
    for (std::size_t k = 0; k < 3; ++k) {
        if (rec.sets[k]) {
            j[names[k]] = rec.sets[k]->cliques;
        } else {
            j[names[k]] = nullptr;
        }
    }
    const auto sc = score_sample(s.gt, adj, s.category);
    j["perfect"] = sc.perfect;
    const std::string text = j.dump(2) + "\n";
    if (a.out) {
        write_text(*a.out, text);
    } else {
        std::cout << text;
    }
    return ok;
}

struct VisualizeArgs {
    fs::path sample;
    std::optional<fs::path> checkpoint;
    std::string out;
    std::string symmetrize = "either";
    int stripe = 3;
};

int cmd_visualize(const VisualizeArgs& a) {
    const auto s = read_sample(sample_stem(a.sample));
    const auto rec = reconstruct_sample(s, a.checkpoint, parse_rule(a.symmetrize));
    const fs::path prefix(a.out);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    const char* names[] = {"cells", "rows", "cols"};
    const CliqueKind kinds[] = {CliqueKind::cell, CliqueKind::row, CliqueKind::column};
    for (std::size_t k = 0; k < 3; ++k) {
        // An exploded reconstruction is drawn as one colour per word.
        CliqueSet sets{{}, kinds[k]};
        if (rec.sets[k]) {
            sets = *rec.sets[k];
        } else {
            for (std::size_t i = 0; i < s.vertices.size(); ++i) sets.cliques.push_back({static_cast<int>(i)});
            std::cerr << "warning: " << names[k] << " clique explosion\n";
        }
        const fs::path path = a.out + "_" + names[k] + ".ppm";
        write_ppm(clique_overlay(s, sets, a.stripe), path);
        std::cout << path.string() << ": " << sets.cliques.size() << " " << names[k] << "\n";
    }
    return ok;
}

template <class F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config;
    } catch (const GenOverflow& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config;
    } catch (const FormatError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return io;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return io;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return io;
    } catch (const NonFinite& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return numeric;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return other;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Table structure recognition by adjacency prediction over words"};
    app.require_subcommand(1);
    std::function<int()> run;

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic table dataset");
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--count", gen.count, "Number of samples")->required();
    g->add_option("--category", gen.category, "1, 2, 3, 4 or mixed")
        ->check(CLI::IsMember({"1", "2", "3", "4", "mixed"}))
        ->capture_default_str();
    g->add_option("--seed", gen.seed, "Base seed")->capture_default_str();
    g->add_option("--config", gen.config, "Generator config JSON");
    g->callback([&] { run = [&] { return cmd_generate(gen); }; });

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model on a generated dataset");
    t->add_option("--data", tr.data, "Dataset directory")->required();
    t->add_option("--out", tr.out, "Output directory for checkpoint and run log")->required();
    t->add_option("--model", tr.model, "Interaction block: fcnn, dgcnn or gravnet");
    t->add_flag("--large", tr.large, "Use the ~1M parameter configuration");
    t->add_option("--config", tr.config, "Training config JSON; flags override it");
    t->add_option("--steps", tr.steps, "Optimizer steps");
    t->add_option("--epochs", tr.epochs, "Epochs (overrides --steps)");
    t->add_option("--batch", tr.batch, "Tables per step");
    t->add_option("--lr", tr.lr, "Adam learning rate");
    t->add_option("--samples-per-vertex", tr.samples, "Partners drawn per vertex and head");
    t->add_option("--seed", tr.seed, "Initialisation and sampling seed");
    t->add_option("--eval-every", tr.eval_every, "Checkpoint and evaluation cadence in steps");
    t->add_option("--eval-data", tr.eval_data, "Held-out dataset for periodic evaluation");
    t->add_option("--eval-count", tr.eval_count, "Samples used by periodic evaluation (default 16)");
    t->add_option("--resume", tr.resume, "Continue from this checkpoint");
    t->add_flag("--timestamps", tr.timestamps, "Record wall-clock time in the run log");
    t->callback([&] { run = [&] { return cmd_train(tr); }; });

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
    e->add_option("--data", ev.data, "Dataset directory")->required();
    e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
    e->add_flag("--oracle", ev.oracle, "Decode the ground truth instead of a model");
    e->add_option("--out", ev.out, "Report JSON path");
    e->add_option("--csv", ev.csv, "Report CSV path");
    e->add_flag("--micro", ev.micro, "Pool clique counts instead of averaging per sample");
    e->add_option("--symmetrize", ev.symmetrize, "either (OR) or both (AND)")->capture_default_str();
    e->add_option("--max-cliques", ev.max_cliques, "Clique guard per kind; 0 means 10 per vertex");
    e->callback([&] { run = [&] { return cmd_evaluate(ev); }; });

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Predict cells, rows and columns of one sample");
    p->add_option("--sample", pr.sample, "Sample stem, .pgm or .json")->required();
    p->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")->required();
    p->add_option("--out", pr.out, "Output JSON (default stdout)");
    p->add_option("--symmetrize", pr.symmetrize, "either (OR) or both (AND)")->capture_default_str();
    p->callback([&] { run = [&] { return cmd_predict(pr); }; });

    VisualizeArgs vi;
    auto* v = app.add_subcommand("visualize", "Write cell, row and column overlays of one sample");
    v->add_option("--sample", vi.sample, "Sample stem, .pgm or .json")->required();
    v->add_option("--checkpoint", vi.checkpoint, "Model checkpoint (ground truth when omitted)");
    v->add_option("--out", vi.out, "Output prefix; writes PREFIX_{cells,rows,cols}.ppm")->required();
    v->add_option("--symmetrize", vi.symmetrize, "either (OR) or both (AND)")->capture_default_str();
    v->add_option("--stripe", vi.stripe, "Stripe width in pixels")->capture_default_str();
    v->callback([&] { run = [&] { return cmd_visualize(vi); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return config;
    }
    return guarded(run);
}
