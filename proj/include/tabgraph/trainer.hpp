#pragma once

#include "tabgraph/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace tabgraph {

struct PairLoss {
    /// Sum of the three head losses, recorded on the logits' tape.
    nn::Var total;
    std::array<double, 3> head_loss{};
    /// Fraction of sampled pairs whose argmax matches the label.
    std::array<double, 3> head_accuracy{};
};

/// Mean softmax cross-entropy per head over every (i, partners(i, m)) pair,
/// with labels read from the matching ground-truth matrix.
PairLoss pair_loss(const PairLogits& logits, const std::array<SampleMatrix, 3>& partners, const AdjacencyTriple& gt);

struct TrainConfig {
    /// Optimizer steps; `epochs`, when nonzero, overrides this with
    /// epochs · ceil(tables / batch).
    std::size_t steps = 3000;
    std::size_t epochs = 0;
    /// Tables per optimizer step (gradients are averaged over them).
    std::size_t batch = 1;
    nn::AdamConfig adam;
    /// Partners drawn per vertex and head.
    std::size_t samples_per_vertex = 10;
    std::uint64_t seed = 0;
    ModelConfig model;
    /// Checkpoint (and evaluation hook) every this many steps; 0 disables.
    std::size_t eval_every = 500;
    /// Include wall-clock time in the run log.
    bool log_timestamps = true;
    std::filesystem::path out_dir;
    /// Continue from this checkpoint instead of a fresh initialisation.
    std::optional<std::filesystem::path> resume;
};

void check_config(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
/// Unknown keys are rejected; missing keys keep the defaults of `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

std::size_t total_steps(const TrainConfig& cfg, std::size_t tables);

struct StepRecord {
    std::size_t step = 0; // steps completed after this update
    std::array<double, 3> loss{};
    std::array<double, 3> accuracy{};
    double total_loss = 0.0;
    /// Largest logits tensor of the step, as rows × partners.
    std::size_t logits_rows = 0;
    std::size_t logits_partners = 0;
    std::optional<double> elapsed_seconds;
};

nlohmann::json to_json(const StepRecord& r);

/// Append-only JSON-lines log. Each append is flushed to disk when a path
/// is set.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(std::filesystem::path path, bool append);

    void append(const StepRecord& record);
    const std::vector<StepRecord>& records() const noexcept { return records_; }

private:
    std::filesystem::path path_;
    std::vector<StepRecord> records_;
};

struct TrainResult {
    std::filesystem::path checkpoint;
    std::filesystem::path log_path;
    RunLog log;
};

/// Called after each checkpoint write with the step count and model.
using EvalHook = std::function<void(std::size_t step, Model& model)>;

inline constexpr const char* checkpoint_name = "model.ckpt";
inline constexpr const char* run_log_name = "runlog.jsonl";

/// Trains on `tables`, writing `model.ckpt` (+ sidecar config) and
/// `runlog.jsonl` into cfg.out_dir. Deterministic given cfg.seed; a run
/// resumed from a checkpoint of step k follows the uninterrupted
/// trajectory. A non-finite value aborts with the last checkpoint intact.
TrainResult train(const TrainConfig& cfg, std::span<const TableSample> tables, const EvalHook& hook = {});

/// One optimizer step on the given tables; returns the averaged record.
StepRecord train_step(Model& model, std::span<const TableSample* const> tables, const TrainConfig& cfg,
                      std::uint64_t step);

} // namespace tabgraph
