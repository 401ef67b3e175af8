#include "tabgraph/nn/ops.hpp"

#include "tabgraph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tabgraph::nn {

namespace {

void require(bool ok, const char* op, const std::string& detail) {
    if (!ok) throw ShapeMismatch(std::string(op) + ": " + detail);
}

void require_rank(Var x, std::size_t rank, const char* op) {
    require(x.value().rank() == rank, op,
            "expected rank " + std::to_string(rank) + ", got " + shape_string(x.shape()));
}

void require_same(Var a, Var b, const char* op) {
    require(a.shape() == b.shape(), op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

Tape& tape_of(Var a, Var b, const char* op) {
    require(a.tape == b.tape && a.tape != nullptr, op, "operands recorded on different tapes");
    return *a.tape;
}

bool wants(Tape& t, std::size_t self, std::size_t k) { return t.requires_grad(t.input(self, k)); }

// dst += src
void accumulate(Tensor& dst, const Tensor& src) {
    auto d = dst.data();
    const auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

} // namespace

Var dense(Var x, Var w, Var b) {
    constexpr const char* op = "dense";
    require_rank(x, 2, op);
    require_rank(w, 2, op);
    require_rank(b, 1, op);
    const std::size_t n = x.shape()[0], d = x.shape()[1], m = w.shape()[1];
    require(w.shape()[0] == d && b.shape()[0] == m, op,
            "x " + shape_string(x.shape()) + ", w " + shape_string(w.shape()) + ", b " + shape_string(b.shape()));
    Tape& t = tape_of(x, w, op);

    Tensor y({n, m});
    const double* xv = x.value().ptr();
    const double* wv = w.value().ptr();
    const double* bv = b.value().ptr();
    for (std::size_t i = 0; i < n; ++i) {
        double* yr = y.ptr() + i * m;
        std::copy(bv, bv + m, yr);
        for (std::size_t k = 0; k < d; ++k) {
            const double a = xv[i * d + k];
            if (a == 0.0) continue;
            const double* wr = wv + k * m;
            for (std::size_t j = 0; j < m; ++j) yr[j] += a * wr[j];
        }
    }
    return t.record(op, std::move(y), {x.id, w.id, b.id}, [n, d, m](Tape& t, std::size_t self) {
        const double* gy = t.grad(self).ptr();
        const auto xi = t.input(self, 0), wi = t.input(self, 1), bi = t.input(self, 2);
        const double* xv = t.value(xi).ptr();
        const double* wv = t.value(wi).ptr();
        if (t.requires_grad(xi)) {
            double* gx = t.grad(xi).ptr();
            for (std::size_t i = 0; i < n; ++i) {
                const double* g = gy + i * m;
                for (std::size_t k = 0; k < d; ++k) {
                    const double* wr = wv + k * m;
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) s += g[j] * wr[j];
                    gx[i * d + k] += s;
                }
            }
        }
        if (t.requires_grad(wi)) {
            double* gw = t.grad(wi).ptr();
            for (std::size_t i = 0; i < n; ++i) {
                const double* g = gy + i * m;
                for (std::size_t k = 0; k < d; ++k) {
                    const double a = xv[i * d + k];
                    if (a == 0.0) continue;
                    double* gr = gw + k * m;
                    for (std::size_t j = 0; j < m; ++j) gr[j] += a * g[j];
                }
            }
        }
        if (t.requires_grad(bi)) {
            double* gb = t.grad(bi).ptr();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) gb[j] += gy[i * m + j];
        }
    });
}

Var relu(Var x) {
    Tensor y = x.value();
    for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
    return x.tape->record("relu", std::move(y), {x.id}, [](Tape& t, std::size_t self) {
        const auto xi = t.input(self, 0);
        const auto xv = t.value(xi).data();
        const auto gy = t.grad(self).data();
        auto gx = t.grad(xi).data();
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (xv[i] > 0.0) gx[i] += gy[i];
    });
}

Var exp(Var x) {
    Tensor y = x.value();
    for (auto& v : y.data()) v = std::exp(v);
    return x.tape->record("exp", std::move(y), {x.id}, [](Tape& t, std::size_t self) {
        const auto xi = t.input(self, 0);
        const auto yv = t.value(self).data();
        const auto gy = t.grad(self).data();
        auto gx = t.grad(xi).data();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * yv[i];
    });
}

Var scale(Var x, double factor) {
    Tensor y = x.value();
    for (auto& v : y.data()) v *= factor;
    return x.tape->record("scale", std::move(y), {x.id}, [factor](Tape& t, std::size_t self) {
        const auto gy = t.grad(self).data();
        auto gx = t.grad(t.input(self, 0)).data();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * gy[i];
    });
}

Var add(Var a, Var b) {
    require_same(a, b, "add");
    Tape& tp = tape_of(a, b, "add");
    Tensor y = a.value();
    auto yd = y.data();
    const auto bd = b.value().data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += bd[i];
    return tp.record("add", std::move(y), {a.id, b.id}, [](Tape& t, std::size_t self) {
        for (std::size_t k = 0; k < 2; ++k)
            if (wants(t, self, k)) accumulate(t.grad(t.input(self, k)), t.grad(self));
    });
}

Var sub(Var a, Var b) {
    require_same(a, b, "sub");
    Tape& tp = tape_of(a, b, "sub");
    Tensor y = a.value();
    auto yd = y.data();
    const auto bd = b.value().data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] -= bd[i];
    return tp.record("sub", std::move(y), {a.id, b.id}, [](Tape& t, std::size_t self) {
        if (wants(t, self, 0)) accumulate(t.grad(t.input(self, 0)), t.grad(self));
        if (wants(t, self, 1)) {
            const auto gy = t.grad(self).data();
            auto gb = t.grad(t.input(self, 1)).data();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gy[i];
        }
    });
}

Var mul(Var a, Var b) {
    require_same(a, b, "mul");
    Tape& tp = tape_of(a, b, "mul");
    Tensor y = a.value();
    auto yd = y.data();
    const auto bd = b.value().data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] *= bd[i];
    return tp.record("mul", std::move(y), {a.id, b.id}, [](Tape& t, std::size_t self) {
        const auto gy = t.grad(self).data();
        for (std::size_t k = 0; k < 2; ++k) {
            if (!wants(t, self, k)) continue;
            const auto other = t.value(t.input(self, 1 - k)).data();
            auto g = t.grad(t.input(self, k)).data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * other[i];
        }
    });
}

Var mul_rows(Var x, Var w) {
    constexpr const char* op = "mul_rows";
    require_rank(x, 2, op);
    require_rank(w, 2, op);
    const std::size_t n = x.shape()[0], d = x.shape()[1];
    require(w.shape()[0] == n && w.shape()[1] == 1, op, shape_string(x.shape()) + " * " + shape_string(w.shape()));
    Tape& tp = tape_of(x, w, op);
    Tensor y = x.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) y.at(i, j) *= w.value()[i];
    return tp.record(op, std::move(y), {x.id, w.id}, [n, d](Tape& t, std::size_t self) {
        const auto& gy = t.grad(self);
        const auto xi = t.input(self, 0), wi = t.input(self, 1);
        if (t.requires_grad(xi)) {
            const auto& wv = t.value(wi);
            auto& gx = t.grad(xi);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) gx.at(i, j) += gy.at(i, j) * wv[i];
        }
        if (t.requires_grad(wi)) {
            const auto& xv = t.value(xi);
            auto& gw = t.grad(wi);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < d; ++j) s += gy.at(i, j) * xv.at(i, j);
                gw[i] += s;
            }
        }
    });
}

Var row_sum(Var x) {
    require_rank(x, 2, "row_sum");
    const std::size_t n = x.shape()[0], d = x.shape()[1];
    Tensor y({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += x.value().at(i, j);
        y[i] = s;
    }
    return x.tape->record("row_sum", std::move(y), {x.id}, [n, d](Tape& t, std::size_t self) {
        const auto& gy = t.grad(self);
        auto& gx = t.grad(t.input(self, 0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gx.at(i, j) += gy[i];
    });
}

Var conv2d(Var x, Var kernel, Var bias, std::size_t stride, std::size_t pad) {
    constexpr const char* op = "conv2d";
    require_rank(x, 3, op);
    require_rank(kernel, 4, op);
    require_rank(bias, 1, op);
    const auto& xs = x.shape();
    const auto& ks = kernel.shape();
    const std::size_t H = xs[0], W = xs[1], C = xs[2];
    const std::size_t KH = ks[0], KW = ks[1], CO = ks[3];
    require(ks[2] == C && bias.shape()[0] == CO && stride >= 1, op,
            "x " + shape_string(xs) + ", kernel " + shape_string(ks) + ", bias " + shape_string(bias.shape()));
    require(H + 2 * pad >= KH && W + 2 * pad >= KW, op, "kernel larger than padded input " + shape_string(xs));
    const std::size_t HO = (H + 2 * pad - KH) / stride + 1;
    const std::size_t WO = (W + 2 * pad - KW) / stride + 1;
    Tape& tp = tape_of(x, kernel, op);

    // Visits every (output pixel, kernel tap) pair whose input pixel lies
    // inside the image.
    auto for_each_tap = [=](auto&& f) {
        for (std::size_t oy = 0; oy < HO; ++oy) {
            for (std::size_t ox = 0; ox < WO; ++ox) {
                const std::size_t o = (oy * WO + ox) * CO;
                for (std::size_t ky = 0; ky < KH; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t kx = 0; kx < KW; ++kx) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                        const std::size_t in = (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * C;
                        const std::size_t wk = (ky * KW + kx) * C * CO;
                        f(o, in, wk);
                    }
                }
            }
        }
    };

    Tensor y({HO, WO, CO});
    {
        double* yv = y.ptr();
        const double* bv = bias.value().ptr();
        for (std::size_t p = 0; p < HO * WO; ++p) std::copy(bv, bv + CO, yv + p * CO);
        const double* xv = x.value().ptr();
        const double* kv = kernel.value().ptr();
        for_each_tap([&](std::size_t o, std::size_t in, std::size_t wk) {
            double* yr = yv + o;
            for (std::size_t c = 0; c < C; ++c) {
                const double a = xv[in + c];
                if (a == 0.0) continue;
                const double* wr = kv + wk + c * CO;
                for (std::size_t j = 0; j < CO; ++j) yr[j] += a * wr[j];
            }
        });
    }

    return tp.record(op, std::move(y), {x.id, kernel.id, bias.id},
                     [for_each_tap, HO, WO, C, CO](Tape& t, std::size_t self) {
        const double* gy = t.grad(self).ptr();
        const auto xi = t.input(self, 0), ki = t.input(self, 1), bi = t.input(self, 2);
        const double* xv = t.value(xi).ptr();
        const double* kv = t.value(ki).ptr();
        double* gx = t.requires_grad(xi) ? t.grad(xi).ptr() : nullptr;
        double* gk = t.requires_grad(ki) ? t.grad(ki).ptr() : nullptr;

        // Pixels whose output gradient is entirely zero contribute nothing.
        std::vector<char> active(HO * WO, 0);
        for (std::size_t p = 0; p < HO * WO; ++p)
            for (std::size_t j = 0; j < CO; ++j)
                if (gy[p * CO + j] != 0.0) {
                    active[p] = 1;
                    break;
                }

        for_each_tap([&](std::size_t o, std::size_t in, std::size_t wk) {
            if (!active[o / CO]) return;
            const double* g = gy + o;
            for (std::size_t c = 0; c < C; ++c) {
                if (gk != nullptr) {
                    const double a = xv[in + c];
                    if (a != 0.0) {
                        double* gr = gk + wk + c * CO;
                        for (std::size_t j = 0; j < CO; ++j) gr[j] += a * g[j];
                    }
                }
                if (gx != nullptr) {
                    const double* wr = kv + wk + c * CO;
                    double s = 0.0;
                    for (std::size_t j = 0; j < CO; ++j) s += wr[j] * g[j];
                    gx[in + c] += s;
                }
            }
        });
        if (t.requires_grad(bi)) {
            double* gb = t.grad(bi).ptr();
            for (std::size_t p = 0; p < HO * WO; ++p)
                for (std::size_t j = 0; j < CO; ++j) gb[j] += gy[p * CO + j];
        }
    });
}

Var max_pool(Var x, std::size_t size, std::size_t stride) {
    constexpr const char* op = "max_pool";
    require_rank(x, 3, op);
    const std::size_t H = x.shape()[0], W = x.shape()[1], C = x.shape()[2];
    require(size >= 1 && stride >= 1 && H >= size && W >= size, op,
            "window " + std::to_string(size) + " on " + shape_string(x.shape()));
    const std::size_t HO = (H - size) / stride + 1, WO = (W - size) / stride + 1;
    Tensor y({HO, WO, C});
    std::vector<std::size_t> argmax(y.size());
    const double* xv = x.value().ptr();
    for (std::size_t oy = 0; oy < HO; ++oy)
        for (std::size_t ox = 0; ox < WO; ++ox)
            for (std::size_t c = 0; c < C; ++c) {
                std::size_t best = (oy * stride * W + ox * stride) * C + c;
                for (std::size_t dy = 0; dy < size; ++dy)
                    for (std::size_t dx = 0; dx < size; ++dx) {
                        const std::size_t i = ((oy * stride + dy) * W + ox * stride + dx) * C + c;
                        if (xv[i] > xv[best]) best = i;
                    }
                const std::size_t o = (oy * WO + ox) * C + c;
                y[o] = xv[best];
                argmax[o] = best;
            }
    return x.tape->record(op, std::move(y), {x.id}, [argmax = std::move(argmax)](Tape& t, std::size_t self) {
        const auto gy = t.grad(self).data();
        auto gx = t.grad(t.input(self, 0)).data();
        for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
    });
}

Var reshape(Var x, Shape shape) {
    Tensor y = x.value().reshaped(std::move(shape));
    return x.tape->record("reshape", std::move(y), {x.id}, [](Tape& t, std::size_t self) {
        accumulate(t.grad(t.input(self, 0)), t.grad(self));
    });
}

Var concat(std::span<const Var> parts) {
    constexpr const char* op = "concat";
    require(!parts.empty(), op, "no inputs");
    Tape& tp = *parts[0].tape;
    const std::size_t n = parts[0].shape().at(0);
    std::vector<std::size_t> widths, ids;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_rank(p, 2, op);
        require(p.tape == &tp, op, "operands recorded on different tapes");
        require(p.shape()[0] == n, op, "row counts differ: " + shape_string(parts[0].shape()) + " vs " +
                                           shape_string(p.shape()));
        widths.push_back(p.shape()[1]);
        ids.push_back(p.id);
        total += p.shape()[1];
    }
    Tensor y({n, total});
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& v = parts[k].value();
        for (std::size_t i = 0; i < n; ++i)
            std::copy(v.ptr() + i * widths[k], v.ptr() + (i + 1) * widths[k], y.ptr() + i * total + offset);
        offset += widths[k];
    }
    return tp.record(op, std::move(y), ids, [widths, n, total](Tape& t, std::size_t self) {
        const double* gy = t.grad(self).ptr();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            if (wants(t, self, k)) {
                double* g = t.grad(t.input(self, k)).ptr();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += gy[i * total + offset + j];
            }
            offset += widths[k];
        }
    });
}

Var gather_rows(Var x, std::span<const std::size_t> index) {
    constexpr const char* op = "gather_rows";
    require(x.value().rank() >= 1, op, "scalar input");
    const std::size_t rows = x.shape()[0];
    const std::size_t width = rows == 0 ? 0 : x.value().size() / rows;
    Shape shape = x.shape();
    shape[0] = index.size();
    Tensor y(shape);
    const double* xv = x.value().ptr();
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= rows)
            throw IndexOutOfRange("gather_rows: index " + std::to_string(index[i]) + " >= " + std::to_string(rows));
        std::copy(xv + index[i] * width, xv + (index[i] + 1) * width, y.ptr() + i * width);
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    return x.tape->record(op, std::move(y), {x.id}, [idx = std::move(idx), width](Tape& t, std::size_t self) {
        const double* gy = t.grad(self).ptr();
        double* gx = t.grad(t.input(self, 0)).ptr();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < width; ++j) gx[idx[i] * width + j] += gy[i * width + j];
    });
}

Var reduce_max(Var x, std::size_t group) {
    constexpr const char* op = "reduce_max";
    require_rank(x, 2, op);
    const std::size_t rows = x.shape()[0], d = x.shape()[1];
    require(group >= 1 && rows % group == 0, op,
            std::to_string(rows) + " rows not divisible into groups of " + std::to_string(group));
    const std::size_t n = rows / group;
    Tensor y({n, d});
    std::vector<std::size_t> argmax(n * d);
    const auto& xv = x.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            std::size_t best = i * group;
            for (std::size_t r = i * group + 1; r < (i + 1) * group; ++r)
                if (xv.at(r, j) > xv.at(best, j)) best = r;
            y.at(i, j) = xv.at(best, j);
            argmax[i * d + j] = best * d + j;
        }
    return x.tape->record(op, std::move(y), {x.id}, [argmax = std::move(argmax)](Tape& t, std::size_t self) {
        const auto gy = t.grad(self).data();
        auto gx = t.grad(t.input(self, 0)).data();
        for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
    });
}

Var reduce_mean(Var x, std::size_t group) {
    constexpr const char* op = "reduce_mean";
    require_rank(x, 2, op);
    const std::size_t rows = x.shape()[0], d = x.shape()[1];
    require(group >= 1 && rows % group == 0, op,
            std::to_string(rows) + " rows not divisible into groups of " + std::to_string(group));
    const std::size_t n = rows / group;
    const double inv = 1.0 / static_cast<double>(group);
    Tensor y({n, d});
    const auto& xv = x.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t r = i * group; r < (i + 1) * group; ++r) s += xv.at(r, j);
            y.at(i, j) = s * inv;
        }
    return x.tape->record(op, std::move(y), {x.id}, [group, n, d, inv](Tape& t, std::size_t self) {
        const auto& gy = t.grad(self);
        auto& gx = t.grad(t.input(self, 0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = i * group; r < (i + 1) * group; ++r)
                for (std::size_t j = 0; j < d; ++j) gx.at(r, j) += gy.at(i, j) * inv;
    });
}

Var sum(Var x) {
    double s = 0.0;
    for (const double v : x.value().data()) s += v;
    return x.tape->record("sum", Tensor({1}, {s}), {x.id}, [](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (auto& v : t.grad(t.input(self, 0)).data()) v += g;
    });
}

Var mean(Var x) {
    require(x.value().size() > 0, "mean", "empty input");
    return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var softmax_xent(Var logits, std::span<const int> labels) {
    constexpr const char* op = "softmax_xent";
    require_rank(logits, 2, op);
    const std::size_t n = logits.shape()[0], c = logits.shape()[1];
    require(n == labels.size() && n > 0 && c > 0, op,
            "logits " + shape_string(logits.shape()) + ", " + std::to_string(labels.size()) + " labels");
    Tensor probs({n, c});
    double total = 0.0;
    const auto& z = logits.value();
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
            throw IndexOutOfRange("softmax_xent: label " + std::to_string(labels[i]) + " outside [0, " +
                                  std::to_string(c) + ")");
        double hi = z.at(i, 0);
        for (std::size_t j = 1; j < c; ++j) hi = std::max(hi, z.at(i, j));
        double norm = 0.0;
        for (std::size_t j = 0; j < c; ++j) norm += std::exp(z.at(i, j) - hi);
        for (std::size_t j = 0; j < c; ++j) probs.at(i, j) = std::exp(z.at(i, j) - hi) / norm;
        total += hi + std::log(norm) - z.at(i, static_cast<std::size_t>(labels[i]));
    }
    std::vector<int> lab(labels.begin(), labels.end());
    return logits.tape->record(op, Tensor({1}, {total / static_cast<double>(n)}), {logits.id},
                               [probs = std::move(probs), lab = std::move(lab), n, c](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] / static_cast<double>(n);
        auto& gz = t.grad(t.input(self, 0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j)
                gz.at(i, j) += g * (probs.at(i, j) - (static_cast<int>(j) == lab[i] ? 1.0 : 0.0));
    });
}

} // namespace tabgraph::nn
