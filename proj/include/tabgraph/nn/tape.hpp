#pragma once

#include "tabgraph/nn/params.hpp"
#include "tabgraph/nn/tensor.hpp"

#include <functional>
#include <vector>

namespace tabgraph::nn {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// Records a forward computation and replays it in reverse.
///
/// Nodes are appended in evaluation order, so reverse index order is a valid
/// topological order for backpropagation. Gradients of parameter nodes are
/// accumulated into Parameter::grad, which lets callers sum over several
/// tapes before an optimizer step.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var param(Parameter& p);

    /// Appends an op result. `backward` is only invoked when some input
    /// requires a gradient. Throws NonFinite when `value` has NaN/Inf.
    Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Gradient slot of a node, zero-initialised on first access.
    Tensor& grad(std::size_t id);
    const Tensor* grad_if_present(std::size_t id) const;
    std::size_t input(std::size_t self, std::size_t k) const { return nodes_[self].inputs[k]; }

    /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one value.
    void backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

} // namespace tabgraph::nn
