#include "tabgraph/nn/tape.hpp"

#include "tabgraph/errors.hpp"

namespace tabgraph::nn {

Var Tape::constant(Tensor value) {
    if (!value.all_finite()) throw NonFinite("constant input holds non-finite values");
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
    if (!p.value.all_finite()) throw NonFinite("parameter " + p.name + " holds non-finite values");
    Node n;
    n.value = p.value;
    n.param = &p;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    if (!value.all_finite()) throw NonFinite(std::string(op) + " produced non-finite values");
    Node n;
    n.value = std::move(value);
    for (const auto i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
    n.inputs = std::move(inputs);
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

const Tensor* Tape::grad_if_present(std::size_t id) const {
    const auto& n = nodes_[id];
    return n.grad.shape() == n.value.shape() && !n.grad.empty() ? &n.grad : nullptr;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw ShapeMismatch("backward: variable belongs to another tape");
    if (nodes_[loss.id].value.size() != 1)
        throw ShapeMismatch("backward: loss must be scalar, got " + shape_string(nodes_[loss.id].value.shape()));
    grad(loss.id)[0] = 1.0;
    for (std::size_t k = loss.id + 1; k-- > 0;) {
        auto& n = nodes_[k];
        if (!n.requires_grad || grad_if_present(k) == nullptr) continue;
        if (n.backward) n.backward(*this, k);
        if (n.param != nullptr) {
            auto& pg = n.param->grad;
            const auto g = nodes_[k].grad.data();
            auto dst = pg.data();
            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
            if (!pg.all_finite()) throw NonFinite("gradient of " + n.param->name + " is non-finite");
        }
    }
}

} // namespace tabgraph::nn
