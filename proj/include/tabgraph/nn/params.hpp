#pragma once

#include "tabgraph/nn/tensor.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <string>

namespace tabgraph::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    // Adam moments, same shape as value.
    Tensor first_moment;
    Tensor second_moment;
};

/// Named learnable tensors with gradient slots and optimizer state.
/// Parameter addresses are stable for the lifetime of the store.
class ParamStore {
public:
    /// Registers a parameter; throws ConfigError on a duplicate name.
    Parameter& add(const std::string& name, Tensor init);

    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    const Parameter* find(const std::string& name) const;

    std::deque<Parameter>& all() noexcept { return params_; }
    const std::deque<Parameter>& all() const noexcept { return params_; }

    /// Total number of scalar parameters.
    std::size_t parameter_count() const;

    void zero_grad();
    /// Multiplies every gradient by `factor` (gradient accumulation averaging).
    void scale_grad(double factor);

    std::uint64_t step() const noexcept { return step_; }
    void set_step(std::uint64_t step) noexcept { step_ = step; }

    friend bool operator==(const ParamStore& a, const ParamStore& b);

private:
    std::deque<Parameter> params_;
    std::uint64_t step_ = 0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Increments the store's step counter.
void adam_step(ParamStore& params, double lr, double beta1, double beta2, double eps);

inline void adam_step(ParamStore& params, const AdamConfig& cfg) {
    adam_step(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
}

// Checkpoint file layout (little-endian):
//   header : magic "TGCK" | u32 version | u64 tensor count
//   tensor : u32 name length | name bytes | u8 dtype (0 = f64, 1 = f32)
//            | u32 rank | u64 dims[rank] | raw values
// Parameter values come first, then the Adam moments under "adam.m/<name>"
// and "adam.v/<name>", then the step counter as the rank-0 tensor "adam.step".
inline constexpr std::uint32_t checkpoint_version = 1;

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);

/// Loads into `params`, whose parameter names and shapes must match the file.
/// Throws FormatError on malformed input and IoError if unreadable.
void load_checkpoint(ParamStore& params, const std::filesystem::path& path);

} // namespace tabgraph::nn
