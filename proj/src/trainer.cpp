#include "tabgraph/trainer.hpp"

#include "tabgraph/errors.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace tabgraph {

PairLoss pair_loss(const PairLogits& logits, const std::array<SampleMatrix, 3>& partners, const AdjacencyTriple& gt) {
    const std::size_t v = logits.v, t = logits.t;
    if (gt.size() != v) throw ShapeMismatch("pair_loss: ground truth for " + std::to_string(gt.size()) +
                                            " vertices, logits for " + std::to_string(v));
    PairLoss out;
    std::array<nn::Var, 3> losses;
    for (Head h : all_heads) {
        const auto k = static_cast<std::size_t>(h);
        const auto& s = partners[k];
        const nn::Var z = logits[h];
        if (s.v != v || s.t != t || z.shape() != nn::Shape{v, t, 2})
            throw ShapeMismatch(std::string("pair_loss: ") + to_string(h) + " logits " + nn::shape_string(z.shape()) +
                                " vs partners " + std::to_string(s.v) + "x" + std::to_string(s.t));
        const auto& a = h == Head::cells ? gt.cells : h == Head::rows ? gt.rows : gt.cols;
        std::vector<int> labels(v * t);
        std::size_t correct = 0;
        const auto& zv = z.value();
        for (std::size_t i = 0; i < v; ++i)
            for (std::size_t m = 0; m < t; ++m) {
                const std::size_t r = i * t + m;
                labels[r] = a(i, s(i, m)) ? 1 : 0;
                const int predicted = zv[2 * r + 1] > zv[2 * r] ? 1 : 0;
                correct += predicted == labels[r] ? 1 : 0;
            }
        losses[k] = nn::softmax_xent(nn::reshape(z, {v * t, 2}), labels);
        out.head_loss[k] = losses[k].value()[0];
        out.head_accuracy[k] = static_cast<double>(correct) / static_cast<double>(v * t);
    }
    out.total = nn::add(nn::add(losses[0], losses[1]), losses[2]);
    return out;
}

void check_config(const TrainConfig& cfg) {
    auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
    if (cfg.batch == 0) fail("batch must be at least 1");
    if (cfg.samples_per_vertex == 0) fail("samples_per_vertex must be at least 1");
    if (!(cfg.adam.lr >= 0) || !std::isfinite(cfg.adam.lr)) fail("lr must be finite and non-negative");
    if (!(cfg.adam.beta1 >= 0 && cfg.adam.beta1 < 1) || !(cfg.adam.beta2 >= 0 && cfg.adam.beta2 < 1))
        fail("betas must lie in [0, 1)");
    if (!(cfg.adam.eps > 0)) fail("eps must be positive");
    check_config(cfg.model);
}

nlohmann::json to_json(const TrainConfig& cfg) {
    nlohmann::json j{
        {"steps", cfg.steps},
        {"epochs", cfg.epochs},
        {"batch", cfg.batch},
        {"lr", cfg.adam.lr},
        {"beta1", cfg.adam.beta1},
        {"beta2", cfg.adam.beta2},
        {"eps", cfg.adam.eps},
        {"samples_per_vertex", cfg.samples_per_vertex},
        {"seed", cfg.seed},
        {"eval_every", cfg.eval_every},
        {"log_timestamps", cfg.log_timestamps},
        {"model", to_json(cfg.model)},
    };
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "steps") cfg.steps = value.get<std::size_t>();
            else if (key == "epochs") cfg.epochs = value.get<std::size_t>();
            else if (key == "batch") cfg.batch = value.get<std::size_t>();
            else if (key == "lr") cfg.adam.lr = value.get<double>();
            else if (key == "beta1") cfg.adam.beta1 = value.get<double>();
            else if (key == "beta2") cfg.adam.beta2 = value.get<double>();
            else if (key == "eps") cfg.adam.eps = value.get<double>();
            else if (key == "samples_per_vertex") cfg.samples_per_vertex = value.get<std::size_t>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "eval_every") cfg.eval_every = value.get<std::size_t>();
            else if (key == "log_timestamps") cfg.log_timestamps = value.get<bool>();
            else if (key == "model") cfg.model = model_config_from_json(value, cfg.model);
            else throw ConfigError("unknown train config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    check_config(cfg);
    return cfg;
}

std::size_t total_steps(const TrainConfig& cfg, std::size_t tables) {
    if (cfg.epochs == 0) return cfg.steps;
    return cfg.epochs * ((tables + cfg.batch - 1) / cfg.batch);
}

nlohmann::json to_json(const StepRecord& r) {
    nlohmann::json j{
        {"step", r.step},
        {"loss", {{"cells", r.loss[0]}, {"rows", r.loss[1]}, {"cols", r.loss[2]}, {"total", r.total_loss}}},
        {"accuracy", {{"cells", r.accuracy[0]}, {"rows", r.accuracy[1]}, {"cols", r.accuracy[2]}}},
        {"logits_shape", {r.logits_rows, r.logits_partners, 2}},
    };
    if (r.elapsed_seconds) j["elapsed_seconds"] = *r.elapsed_seconds;
    return j;
}

RunLog::RunLog(std::filesystem::path path, bool append) : path_(std::move(path)) {
    std::ofstream out(path_, append ? std::ios::app : std::ios::trunc);
    if (!out) throw IoError("cannot open run log " + path_.string());
}

void RunLog::append(const StepRecord& record) {
    if (!records_.empty() && record.step <= records_.back().step)
        throw ConfigError("run log steps must increase");
    records_.push_back(record);
    if (path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    out << to_json(record).dump() << "\n";
    if (!out) throw IoError("failed writing run log " + path_.string());
}

StepRecord train_step(Model& model, std::span<const TableSample* const> tables, const TrainConfig& cfg,
                      std::uint64_t step) {
    auto& params = model.params();
    params.zero_grad();
    StepRecord rec;
    rec.step = static_cast<std::size_t>(step) + 1;
    for (std::size_t b = 0; b < tables.size(); ++b) {
        nn::Tape tape;
        Rng rng(splitmix64(cfg.seed ^ splitmix64(step * 4096 + b)));
        const auto fwd = model.forward(tape, *tables[b], Mode::train, cfg.samples_per_vertex, rng);
        const auto loss = pair_loss(fwd.logits, fwd.samples, tables[b]->gt);
        tape.backward(loss.total);
        for (std::size_t h = 0; h < 3; ++h) {
            rec.loss[h] += loss.head_loss[h] / static_cast<double>(tables.size());
            rec.accuracy[h] += loss.head_accuracy[h] / static_cast<double>(tables.size());
        }
        rec.logits_rows = std::max(rec.logits_rows, fwd.logits.v);
        rec.logits_partners = std::max(rec.logits_partners, fwd.logits.t);
    }
    rec.total_loss = rec.loss[0] + rec.loss[1] + rec.loss[2];
    params.scale_grad(1.0 / static_cast<double>(tables.size()));
    nn::adam_step(params, cfg.adam);
    return rec;
}

TrainResult train(const TrainConfig& cfg, std::span<const TableSample> tables, const EvalHook& hook) {
    check_config(cfg);
    if (tables.empty()) throw ConfigError("training set is empty");
    if (cfg.out_dir.empty()) throw ConfigError("train config: out_dir not set");
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir.string() + ": " + ec.message());

    Model model = cfg.resume ? load_model(*cfg.resume) : Model(cfg.model, cfg.seed);
    const std::size_t start = static_cast<std::size_t>(model.params().step());
    const std::size_t steps = total_steps(cfg, tables.size());

    TrainResult result;
    result.checkpoint = cfg.out_dir / checkpoint_name;
    result.log_path = cfg.out_dir / run_log_name;
    result.log = RunLog(result.log_path, cfg.resume.has_value());

    // Tables are visited in a fresh permutation every epoch.
    const std::size_t n = tables.size();
    std::vector<std::size_t> order(n);
    std::size_t order_epoch = SIZE_MAX;
    auto table_at = [&](std::size_t position) {
        const std::size_t epoch = position / n;
        if (epoch != order_epoch) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng rng(splitmix64(cfg.seed + 0x9e3779b97f4a7c15ULL * (epoch + 1)));
            for (std::size_t i = n; i > 1; --i)
                std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)))]);
            order_epoch = epoch;
        }
        return &tables[order[position % n]];
    };

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<const TableSample*> batch(cfg.batch);
    for (std::size_t step = start; step < steps; ++step) {
        for (std::size_t b = 0; b < cfg.batch; ++b) batch[b] = table_at(step * cfg.batch + b);
        auto rec = train_step(model, batch, cfg, step);
        if (cfg.log_timestamps)
            rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.append(rec);
        if (cfg.eval_every != 0 && rec.step % cfg.eval_every == 0 && rec.step < steps) {
            save_model(model, result.checkpoint);
            if (hook) hook(rec.step, model);
        }
    }
    save_model(model, result.checkpoint);
    if (hook) hook(steps, model);
    return result;
}

} // namespace tabgraph
