#pragma once

#include "tabgraph/nn/ops.hpp"
#include "tabgraph/nn/params.hpp"
#include "tabgraph/rng.hpp"
#include "tabgraph/sampler.hpp"
#include "tabgraph/synth.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace tabgraph {

enum class InteractionKind { fcnn, dgcnn_star, gravnet_star };

const char* to_string(InteractionKind kind);
/// Accepts "fcnn", "dgcnn", "dgcnn_star", "gravnet", "gravnet_star".
InteractionKind interaction_kind_from_string(const std::string& name);

struct InteractionConfig {
    InteractionKind kind = InteractionKind::dgcnn_star;
    std::size_t layers = 2;
    /// Hidden width inside each block and output width of all but the last.
    std::size_t width = 64;
    /// Output width of the last block (r).
    std::size_t output_width = 64;
    /// Neighbours per vertex; clamped to v - 1 at run time.
    std::size_t k = 8;
    std::size_t spatial_dims = 2;
    /// Width of the features propagated between neighbours (GravNet F_LR).
    std::size_t propagate_width = 32;
};

struct ModelConfig {
    /// Channels of the convolutions before the last one; the last has `q`.
    std::vector<std::size_t> cnn_widths{16, 16, 32};
    /// Per-layer strides; must have cnn_widths.size() + 1 entries.
    std::vector<std::size_t> cnn_strides{2, 2, 1, 1};
    std::size_t q = 32;
    InteractionConfig interaction;
    std::vector<std::size_t> head_hidden{64, 32};
    /// Word lengths are divided by this before entering the network.
    double max_word_len = 20.0;
};

/// Throws ConfigError on an unusable configuration.
void check_config(const ModelConfig& cfg);
nlohmann::json to_json(const ModelConfig& cfg);
/// Unknown keys are rejected; missing keys keep the defaults of `base`.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

/// Roughly one million parameters, the budget used at full scale.
ModelConfig large_config(InteractionKind kind);

enum class Head { cells = 0, rows = 1, cols = 2 };
inline constexpr std::array<Head, 3> all_heads{Head::cells, Head::rows, Head::cols};
const char* to_string(Head head);

enum class Mode { train, infer };

/// Logits per head, each [v, t, 2].
struct PairLogits {
    std::array<nn::Var, 3> heads;
    std::size_t v = 0;
    std::size_t t = 0;

    nn::Var operator[](Head h) const { return heads[static_cast<std::size_t>(h)]; }
};

struct ForwardResult {
    PairLogits logits;
    /// Partner indices per head (sampled in train mode, full pairing in infer).
    std::array<SampleMatrix, 3> samples;
    /// Set when a graph interaction ran on a single vertex (no neighbours).
    bool degenerate_graph = false;
};

/// Indices of the k nearest rows of `points` [v, d] for every row, nearest
/// first, excluding the row itself; ties break toward the lower index.
/// k is clamped to v - 1; a single vertex is its own neighbour. Returns v·k'
/// indices and writes k' to `k_used`.
std::vector<std::size_t> nearest_neighbours(const nn::Tensor& points, std::size_t k, std::size_t& k_used);

/// Input image as a [h, w, 1] tensor scaled so ink is 1 and paper is 0.
nn::Tensor image_tensor(const GrayImage& image);

/// Feature-map cell (row, col) read for a vertex box.
std::pair<std::size_t, std::size_t> gather_cell(const Box& box, std::size_t h, std::size_t w, std::size_t fh,
                                                std::size_t fw);

/// CNN, gather, interaction network and the three pair classifiers.
class Model {
public:
    /// Parameters are initialised from `init_seed`.
    Model(ModelConfig cfg, std::uint64_t init_seed);

    const ModelConfig& config() const noexcept { return cfg_; }
    nn::ParamStore& params() noexcept { return params_; }
    const nn::ParamStore& params() const noexcept { return params_; }

    /// Binds parameters to `tape` once per forward pass.
    class Bound;

    /// Train mode draws `s` balanced partners per vertex and head from `rng`
    /// using sample.gt; infer mode pairs every vertex with every vertex.
    ForwardResult forward(nn::Tape& tape, const TableSample& sample, Mode mode, std::size_t s, Rng& rng);

    // Stages, exposed for testing.
    nn::Var cnn_features(Bound& b, nn::Var image);
    nn::Var vertex_features(Bound& b, nn::Var feature_map, const TableSample& sample);
    nn::Var interact(Bound& b, nn::Var features, bool& degenerate);
    nn::Var classify_pairs(Bound& b, nn::Var features, const SampleMatrix& partners, Head head);

    Bound bind(nn::Tape& tape);

private:
    void add_dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

    ModelConfig cfg_;
    nn::ParamStore params_;
};

class Model::Bound {
public:
    Bound(nn::Tape& tape, nn::ParamStore& params) : tape_(&tape), params_(&params) {}
    nn::Var operator()(const std::string& name);
    nn::Tape& tape() { return *tape_; }

private:
    nn::Tape* tape_;
    nn::ParamStore* params_;
    std::unordered_map<std::string, nn::Var> vars_;
};

/// Model config is stored next to a checkpoint as `<checkpoint>.json`.
std::filesystem::path model_config_path(const std::filesystem::path& checkpoint);
void save_model(Model& model, const std::filesystem::path& checkpoint);
/// Reads the sidecar config, builds the model and loads the weights.
Model load_model(const std::filesystem::path& checkpoint);

} // namespace tabgraph
