#include "tabgraph/errors.hpp"
#include "tabgraph/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>

using namespace tabgraph;
using nn::Tensor;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<TableSample> small_tables(std::size_t n, int category = 1) {
    GenConfig g;
    g.rows = {3, 4};
    g.cols = {3, 3};
    std::vector<TableSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        g.seed = 500 + i;
        out.push_back(generate(g, category));
    }
    return out;
}

ModelConfig small_model() {
    ModelConfig cfg;
    cfg.cnn_widths = {4, 4, 8};
    cfg.q = 8;
    cfg.interaction.width = 16;
    cfg.interaction.output_width = 16;
    cfg.head_hidden = {16, 8};
    return cfg;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / ("tabgraph_" + name)) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

PairLogits constant_logits(nn::Tape& tape, std::size_t v, std::size_t t, const std::function<double(std::size_t, std::size_t, int, std::size_t)>& f) {
    PairLogits out;
    out.v = v;
    out.t = t;
    for (std::size_t h = 0; h < 3; ++h) {
        Tensor z({v, t, 2});
        for (std::size_t i = 0; i < v; ++i)
            for (std::size_t m = 0; m < t; ++m)
                for (int c = 0; c < 2; ++c) z[(i * t + m) * 2 + static_cast<std::size_t>(c)] = f(i, m, c, h);
        out.heads[h] = tape.constant(std::move(z));
    }
    return out;
}

} // namespace

TEST(PairLoss, UniformLogitsGiveThreeLn2) {
    const auto s = small_tables(1)[0];
    const std::size_t v = s.vertices.size();
    Rng rng(1);
    const std::array<SampleMatrix, 3> partners{draw(balanced_distribution(s.gt.cells), 10, rng),
                                               draw(balanced_distribution(s.gt.rows), 10, rng),
                                               draw(balanced_distribution(s.gt.cols), 10, rng)};
    nn::Tape tape;
    const auto logits = constant_logits(tape, v, 10, [](auto, auto, int, auto) { return 0.0; });
    const auto loss = pair_loss(logits, partners, s.gt);
    for (double l : loss.head_loss) EXPECT_NEAR(l, std::log(2.0), 1e-12);
    EXPECT_NEAR(loss.total.value()[0], 3 * std::log(2.0), 1e-12);
    EXPECT_NEAR(loss.total.value()[0], 2.079, 1e-3);
}

TEST(PairLoss, SaturatedCorrectLogits) {
    const auto s = small_tables(1)[0];
    const std::size_t v = s.vertices.size();
    Rng rng(2);
    const std::array<SampleMatrix, 3> partners{draw(balanced_distribution(s.gt.cells), 10, rng),
                                               draw(balanced_distribution(s.gt.rows), 10, rng),
                                               draw(balanced_distribution(s.gt.cols), 10, rng)};
    const std::array<const AdjacencyMatrix*, 3> gt{&s.gt.cells, &s.gt.rows, &s.gt.cols};
    nn::Tape tape;
    const auto logits = constant_logits(tape, v, 10, [&](std::size_t i, std::size_t m, int c, std::size_t h) {
        const bool label = (*gt[h])(i, partners[h](i, m));
        return (c == 1) == label ? 10.0 : -10.0;
    });
    const auto loss = pair_loss(logits, partners, s.gt);
    EXPECT_LT(loss.total.value()[0], 1e-3);
    for (double a : loss.head_accuracy) EXPECT_EQ(a, 1.0);
}

TEST(PairLoss, ShapeMismatch) {
    const auto s = small_tables(1)[0];
    nn::Tape tape;
    const auto logits = constant_logits(tape, s.vertices.size(), 4, [](auto, auto, int, auto) { return 0.0; });
    const std::array<SampleMatrix, 3> full{full_pairing(s.vertices.size()), full_pairing(s.vertices.size()),
                                           full_pairing(s.vertices.size())};
    EXPECT_THROW(pair_loss(logits, full, s.gt), ShapeMismatch);
}

TEST(PairLoss, BalancedSamplingHalvesLabels) {
    GenConfig g;
    std::array<std::size_t, 3> ones{}, total{};
    Rng rng(3);
    for (std::uint64_t seed = 0; total[0] < 10000; ++seed) {
        g.seed = seed;
        const auto s = generate(g, static_cast<int>(seed % 3) + 1);
        const std::array<const AdjacencyMatrix*, 3> gt{&s.gt.cells, &s.gt.rows, &s.gt.cols};
        for (std::size_t h = 0; h < 3; ++h) {
            const auto m = draw(balanced_distribution(*gt[h]), 10, rng);
            for (std::size_t i = 0; i < m.v; ++i)
                for (std::size_t k = 0; k < m.t; ++k) {
                    ones[h] += (*gt[h])(i, m(i, k)) ? 1 : 0;
                    ++total[h];
                }
        }
    }
    for (std::size_t h = 0; h < 3; ++h)
        EXPECT_NEAR(static_cast<double>(ones[h]) / static_cast<double>(total[h]), 0.5, 0.02) << h;
}

TEST(TrainConfigJson, RoundTripAndRejection) {
    TrainConfig cfg;
    cfg.steps = 17;
    cfg.adam.lr = 0.01;
    cfg.model.interaction.kind = InteractionKind::fcnn;
    const auto back = train_config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
    EXPECT_THROW(train_config_from_json(nlohmann::json{{"momentum", 0.9}}), ConfigError);
    EXPECT_THROW(train_config_from_json(nlohmann::json{{"batch", 0}}), ConfigError);
    EXPECT_THROW(train_config_from_json(nlohmann::json{{"samples_per_vertex", 0}}), ConfigError);
}

TEST(TrainConfigJson, EpochsOverrideSteps) {
    TrainConfig cfg;
    cfg.steps = 5;
    EXPECT_EQ(total_steps(cfg, 10), 5U);
    cfg.epochs = 3;
    cfg.batch = 4;
    EXPECT_EQ(total_steps(cfg, 10), 9U);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
    TempDir dir("train_lr0");
    const auto tables = small_tables(3);
    TrainConfig cfg;
    cfg.model = small_model();
    cfg.steps = 4;
    cfg.adam.lr = 0.0;
    cfg.out_dir = dir.path;
    train(cfg, tables);
    const Model init(cfg.model, cfg.seed);
    const Model trained = load_model(dir.path / checkpoint_name);
    for (std::size_t i = 0; i < init.params().all().size(); ++i)
        EXPECT_EQ(trained.params().all()[i].value, init.params().all()[i].value);

    // The same sampled batch scores identically before and after.
    auto loss_of = [&](const Model& m) {
        Model copy = m;
        nn::Tape tape;
        Rng rng(9);
        const auto f = copy.forward(tape, tables[0], Mode::train, 10, rng);
        return pair_loss(f.logits, f.samples, tables[0].gt).total.value()[0];
    };
    EXPECT_EQ(loss_of(trained), loss_of(init));
}

TEST(Train, ZeroStepsWritesInitialisation) {
    TempDir dir("train_0");
    TrainConfig cfg;
    cfg.model = small_model();
    cfg.steps = 0;
    cfg.seed = 4;
    cfg.out_dir = dir.path;
    const auto result = train(cfg, small_tables(2));
    EXPECT_TRUE(result.log.records().empty());
    EXPECT_TRUE(load_model(result.checkpoint).params() == Model(cfg.model, 4).params());
}

TEST(Train, DeterministicArtifacts) {
    TempDir a("train_det_a"), b("train_det_b");
    const auto tables = small_tables(3);
    TrainConfig cfg;
    cfg.model = small_model();
    cfg.steps = 5;
    cfg.log_timestamps = false;
    cfg.out_dir = a.path;
    train(cfg, tables);
    cfg.out_dir = b.path;
    train(cfg, tables);
    EXPECT_EQ(read_bytes(a.path / checkpoint_name), read_bytes(b.path / checkpoint_name));
    EXPECT_EQ(read_bytes(a.path / run_log_name), read_bytes(b.path / run_log_name));
    EXPECT_FALSE(read_bytes(a.path / run_log_name).empty());
}

TEST(Train, ResumeFollowsUninterruptedTrajectory) {
    TempDir full("train_full"), part("train_part");
    const auto tables = small_tables(3);
    TrainConfig cfg;
    cfg.model = small_model();
    cfg.batch = 2;
    cfg.log_timestamps = false;
    cfg.steps = 6;
    cfg.out_dir = full.path;
    train(cfg, tables);

    cfg.steps = 3;
    cfg.out_dir = part.path;
    train(cfg, tables);
    cfg.steps = 6;
    cfg.resume = part.path / checkpoint_name;
    train(cfg, tables);
    EXPECT_EQ(read_bytes(full.path / checkpoint_name), read_bytes(part.path / checkpoint_name));
    EXPECT_EQ(read_bytes(full.path / run_log_name), read_bytes(part.path / run_log_name));
}

TEST(Train, LossDropsAndLogitsStaySampled) {
    TempDir dir("train_drop");
    const auto tables = small_tables(2);
    TrainConfig cfg;
    cfg.model = small_model();
    cfg.steps = 150;
    cfg.adam.lr = 3e-3;
    cfg.samples_per_vertex = 6;
    cfg.out_dir = dir.path;
    std::vector<std::size_t> hook_steps;
    cfg.eval_every = 50;
    const auto result = train(cfg, tables, [&](std::size_t step, Model&) { hook_steps.push_back(step); });
    const auto& log = result.log.records();
    ASSERT_EQ(log.size(), 150U);
    EXPECT_EQ(hook_steps, (std::vector<std::size_t>{50, 100, 150}));
    double first = 0, last = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        first += log[i].total_loss;
        last += log[log.size() - 1 - i].total_loss;
    }
    EXPECT_LT(last, 0.8 * first);
    for (const auto& r : log) {
        EXPECT_EQ(r.logits_partners, 6U);
        EXPECT_LT(r.logits_partners, r.logits_rows);
        ASSERT_TRUE(r.elapsed_seconds.has_value());
    }
    for (std::size_t i = 1; i < log.size(); ++i) EXPECT_EQ(log[i].step, log[i - 1].step + 1);
}

TEST(Train, NonFiniteAbortsKeepingLastCheckpoint) {
    TempDir dir("train_nan");
    TrainConfig cfg;
    cfg.model = small_model();
    cfg.steps = 20;
    cfg.adam.lr = 1e200;
    cfg.eval_every = 1;
    cfg.out_dir = dir.path;
    EXPECT_THROW(train(cfg, small_tables(2)), NonFinite);
    const Model last = load_model(dir.path / checkpoint_name);
    EXPECT_GE(last.params().step(), 1U);
    for (const auto& p : last.params().all()) EXPECT_TRUE(p.value.all_finite());
}

TEST(Train, RejectsEmptyData) {
    TrainConfig cfg;
    cfg.out_dir = std::filesystem::temp_directory_path() / "tabgraph_empty";
    EXPECT_THROW(train(cfg, {}), ConfigError);
}

TEST(RunLog, StepsMustIncrease) {
    RunLog log;
    StepRecord r;
    r.step = 2;
    log.append(r);
    EXPECT_THROW(log.append(r), ConfigError);
}
