#pragma once

// Dense double-precision tensors with reverse-mode differentiation on a
// dynamic tape.  The tape is rebuilt every forward pass: ops record a node
// whenever an input is tracked, backward() walks the node list once in
// reverse, and gradients come back keyed by leaf name.
//
// Supported ranks are 1..3; broadcasting is limited to what the model
// needs (scalar either side, trailing-dim vector on the right, per-row
// column on the right).

#include <algorithm>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "physe/common.hpp"
#include "physe/kernels.hpp"

namespace physe {

enum class OpKind {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Sigmoid,
    Tanh,
    Relu,
    Exp,
    Log,
    Power,
    Mean,
    Sum,
    Concat,
    Slice,
    Reshape,
    Transpose,
    RowSoftmax,
    Dropout,
    CosineSimilarity,
    LstmLayer,
};

inline const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Tanh: return "tanh";
        case OpKind::Relu: return "relu";
        case OpKind::Exp: return "exp";
        case OpKind::Log: return "log";
        case OpKind::Power: return "power";
        case OpKind::Mean: return "mean";
        case OpKind::Sum: return "sum";
        case OpKind::Concat: return "concat";
        case OpKind::Slice: return "slice";
        case OpKind::Reshape: return "reshape";
        case OpKind::Transpose: return "transpose";
        case OpKind::RowSoftmax: return "row_softmax";
        case OpKind::Dropout: return "dropout";
        case OpKind::CosineSimilarity: return "cosine_similarity";
        case OpKind::LstmLayer: return "lstm_layer";
    }
    return "?";
}

class Tape;

using Buffer = std::shared_ptr<std::vector<double>>;

inline Buffer make_buffer(std::size_t n, double fill = 0.0) {
    return std::make_shared<std::vector<double>>(n, fill);
}

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), vals_(make_buffer(shape_size(shape_), fill)) {}

    Tensor(Shape shape, std::vector<double> values)
        : shape_(std::move(shape)), vals_(std::make_shared<std::vector<double>>(std::move(values))) {
        if (shape_size(shape_) != vals_->size()) {
            throw ShapeError("tensor: shape " + shape_str(shape_) + " does not match " +
                             std::to_string(vals_->size()) + " values");
        }
    }

    static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi) {
        Tensor t(std::move(shape));
        for (double& v : *t.vals_) v = physe::uniform(rng, lo, hi);
        return t;
    }

    static Tensor gaussian(Shape shape, Rng& rng, double mean, double stddev) {
        Tensor t(std::move(shape));
        for (double& v : *t.vals_) v = physe::gaussian(rng, mean, stddev);
        return t;
    }

    bool defined() const { return static_cast<bool>(vals_); }
    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return vals_ ? vals_->size() : 0; }
    double* data() { return vals_->data(); }
    const double* data() const { return vals_->data(); }
    const std::vector<double>& values() const { return *vals_; }
    Buffer buffer() const { return vals_; }

    double value() const {
        if (size() != 1) throw ContractError("tensor: value() on non-scalar " + shape_str(shape_));
        return (*vals_)[0];
    }

    double at(std::size_t i) const { return (*vals_)[i]; }
    double at(std::size_t i, std::size_t j) const { return (*vals_)[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return (*vals_)[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool all_finite() const {
        for (double v : *vals_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    /// True when this tensor participates in the tape (gradients flow to or
    /// through it).
    bool requires_grad() const { return node_ >= 0; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

private:
    friend class Tape;
    Shape shape_;
    Buffer vals_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

/// Gradients keyed by leaf (parameter) name; shapes match the leaves.
using GradientMap = std::map<std::string, Tensor>;

class Tape {
public:
    struct Node {
        OpKind kind;
        std::vector<int> inputs;  // node ids; -1 marks an untracked operand
        Shape shape;
        Buffer values;
        std::function<void(Tape&, const Node&)> backward;
        std::vector<double> grad;
        bool touched = false;
        std::string leaf_name;
    };

    /// Registers a named differentiable leaf; values are copied so later
    /// updates to `init` do not alias the recorded graph.
    Tensor leaf(const std::string& name, const Tensor& init) {
        if (consumed_) throw ContractError("tape: consumed; reset() before reuse");
        if (name.empty()) throw ContractError("tape: leaf requires a name");
        for (const Node& n : nodes_) {
            if (n.kind == OpKind::Leaf && n.leaf_name == name) {
                throw ContractError("tape: duplicate leaf '" + name + "'");
            }
        }
        Node n;
        n.kind = OpKind::Leaf;
        n.shape = init.shape();
        n.values = std::make_shared<std::vector<double>>(init.values());
        n.leaf_name = name;
        nodes_.push_back(std::move(n));
        Tensor out;
        out.shape_ = init.shape();
        out.vals_ = nodes_.back().values;
        out.tape_ = this;
        out.node_ = static_cast<int>(nodes_.size()) - 1;
        return out;
    }

    Tensor record(OpKind kind, Shape shape, Buffer values, std::vector<int> inputs,
                  std::function<void(Tape&, const Node&)> backward) {
        if (consumed_) throw ContractError("tape: consumed; reset() before reuse");
        Node n;
        n.kind = kind;
        n.inputs = std::move(inputs);
        n.shape = shape;
        n.values = values;
        n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        Tensor out;
        out.shape_ = std::move(shape);
        out.vals_ = std::move(values);
        out.tape_ = this;
        out.node_ = static_cast<int>(nodes_.size()) - 1;
        return out;
    }

    /// Reverse sweep from a scalar loss.  Visits each touched node exactly
    /// once, newest to oldest; the append order of the tape is already a
    /// topological order.  Returns gradients for every named leaf (zeros
    /// for leaves the loss does not reach) and marks the tape consumed.
    GradientMap backward(const Tensor& loss) {
        if (loss.tape() != this || !loss.requires_grad()) {
            throw ContractError("backward: loss is not tracked on this tape");
        }
        if (loss.size() != 1) {
            throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
        }
        if (consumed_) throw ContractError("backward: tape already consumed");
        consumed_ = true;

        const int ln = loss.node();
        nodes_[ln].grad.assign(1, 1.0);
        nodes_[ln].touched = true;
        for (int i = ln; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.touched && n.backward) n.backward(*this, n);
        }

        GradientMap grads;
        for (Node& n : nodes_) {
            if (n.kind != OpKind::Leaf) continue;
            const std::size_t sz = shape_size(n.shape);
            if (n.grad.size() != sz) n.grad.assign(sz, 0.0);
            grads.emplace(n.leaf_name, Tensor(n.shape, std::move(n.grad)));
        }
        return grads;
    }

    /// Accumulation buffer for a node's adjoint; nullptr for untracked
    /// operands so op backwards can skip constants uniformly.
    double* grad_acc(int id) {
        if (id < 0) return nullptr;
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty()) n.grad.assign(shape_size(n.shape), 0.0);
        n.touched = true;
        return n.grad.data();
    }

    void reset() {
        nodes_.clear();
        consumed_ = false;
    }

    std::size_t node_count() const { return nodes_.size(); }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    bool consumed() const { return consumed_; }

private:
    std::vector<Node> nodes_;
    bool consumed_ = false;
};

/// backward(tape, loss) free-function form.
inline GradientMap backward(Tape& tape, const Tensor& loss) { return tape.backward(loss); }

// ===========================================================================
// Op implementations
// ===========================================================================

namespace detail {

inline void require_defined(const Tensor& t, const char* kind) {
    if (!t.defined()) throw ShapeError(std::string(kind) + ": undefined operand");
}

inline Tape* common_tape(std::initializer_list<const Tensor*> ts, const char* kind) {
    Tape* tape = nullptr;
    for (const Tensor* t : ts) {
        if (!t->requires_grad()) continue;
        if (tape && t->tape() != tape) {
            throw ContractError(std::string(kind) + ": operands belong to different tapes");
        }
        tape = t->tape();
    }
    return tape;
}

inline void add_to(double* dst, const double* src, std::size_t n) {
    if (!dst) return;
    kernels::ArrMap(dst, n) += kernels::ConstArrMap(src, n);
}

// Broadcast classes for binary elementwise ops.
enum class Bc { Same, ScalLeft, ScalRight, RowRight, ColRight };

inline Bc classify(const char* kind, const Shape& a, const Shape& b, Shape& out) {
    if (a == b) {
        out = a;
        return Bc::Same;
    }
    if (shape_size(b) == 1) {
        out = a;
        return Bc::ScalRight;
    }
    if (shape_size(a) == 1) {
        out = b;
        return Bc::ScalLeft;
    }
    if (b.size() == 1 && a.size() >= 2 && b[0] == a.back()) {
        out = a;
        return Bc::RowRight;
    }
    if (a.size() == 2 && b.size() == 2 && b[0] == a[0] && b[1] == 1) {
        out = a;
        return Bc::ColRight;
    }
    throw ShapeError(std::string(kind) + ": incompatible shapes " + shape_str(a) + " vs " +
                     shape_str(b));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_defined(a, "matmul");
    detail::require_defined(b, "matmul");
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    Shape out_shape;
    enum { MM22, MM32, MM33 } mode;
    if (sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0]) {
        out_shape = {sa[0], sb[1]};
        mode = MM22;
    } else if (sa.size() == 3 && sb.size() == 2 && sa[2] == sb[0]) {
        out_shape = {sa[0], sa[1], sb[1]};
        mode = MM32;
    } else if (sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[1]) {
        out_shape = {sa[0], sa[1], sb[2]};
        mode = MM33;
    } else {
        throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
    }

    Buffer out = make_buffer(shape_size(out_shape));
    if (mode == MM33) {
        const std::size_t batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
        for (std::size_t i = 0; i < batch; ++i) {
            kernels::gemm(false, false, m, k, n, 1.0, a.data() + i * m * k, b.data() + i * k * n,
                          0.0, out->data() + i * m * n);
        }
    } else {
        // A 3-D left operand against a shared right matrix is one flat GEMM.
        const std::size_t m = (mode == MM22) ? sa[0] : sa[0] * sa[1];
        const std::size_t k = sb[0], n = sb[1];
        kernels::gemm(false, false, m, k, n, 1.0, a.data(), b.data(), 0.0, out->data());
    }

    Tape* tape = detail::common_tape({&a, &b}, "matmul");
    if (!tape) return Tensor(std::move(out_shape), std::move(*out));

    return tape->record(
        OpKind::MatMul, out_shape, out, {a.node(), b.node()},
        [av = a.buffer(), bv = b.buffer(), sa, sb, mode](Tape& t, const Tape::Node& n) {
            const double* g = n.grad.data();
            double* da = t.grad_acc(n.inputs[0]);
            double* db = t.grad_acc(n.inputs[1]);
            if (mode == MM33) {
                const std::size_t batch = sa[0], m = sa[1], k = sa[2], nn = sb[2];
                for (std::size_t i = 0; i < batch; ++i) {
                    if (da)
                        kernels::gemm(false, true, m, nn, k, 1.0, g + i * m * nn,
                                      bv->data() + i * k * nn, 1.0, da + i * m * k);
                    if (db)
                        kernels::gemm(true, false, k, m, nn, 1.0, av->data() + i * m * k,
                                      g + i * m * nn, 1.0, db + i * k * nn);
                }
            } else {
                const std::size_t m = (mode == MM22) ? sa[0] : sa[0] * sa[1];
                const std::size_t k = sb[0], nn = sb[1];
                if (da) kernels::gemm(false, true, m, nn, k, 1.0, g, bv->data(), 1.0, da);
                if (db) kernels::gemm(true, false, k, m, nn, 1.0, av->data(), g, 1.0, db);
            }
        });
}

// ---------------------------------------------------------------------------
// binary elementwise with limited broadcasting

namespace detail {

template <class Fwd>
inline Buffer binary_forward(const Tensor& a, const Tensor& b, Bc cls, const Shape& out_shape,
                             Fwd&& f) {
    Buffer out = make_buffer(shape_size(out_shape));
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out->data();
    const std::size_t n = out->size();
    switch (cls) {
        case Bc::Same:
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
            break;
        case Bc::ScalRight:
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[0]);
            break;
        case Bc::ScalLeft:
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[0], pb[i]);
            break;
        case Bc::RowRight: {
            const std::size_t cols = out_shape.back(), rows = n / cols;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c)
                    po[r * cols + c] = f(pa[r * cols + c], pb[c]);
            break;
        }
        case Bc::ColRight: {
            const std::size_t cols = out_shape[1], rows = out_shape[0];
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c)
                    po[r * cols + c] = f(pa[r * cols + c], pb[r]);
            break;
        }
    }
    return out;
}

/// Accumulates per-element contributions into the possibly-broadcast
/// operand slots.  `df` maps (flat index, index into a, index into b) to
/// the pair of partials (dc/da, dc/db) times the incoming gradient.
template <class Da, class Db>
inline void binary_backward(Tape& t, const Tape::Node& n, Bc cls, Da&& da_at, Db&& db_at) {
    double* da = t.grad_acc(n.inputs[0]);
    double* db = t.grad_acc(n.inputs[1]);
    if (!da && !db) return;
    const double* g = n.grad.data();
    const std::size_t sz = shape_size(n.shape);
    auto b_index = [&](std::size_t i) -> std::size_t {
        switch (cls) {
            case Bc::Same: return i;
            case Bc::ScalRight:
            case Bc::ScalLeft: return 0;
            case Bc::RowRight: return i % n.shape.back();
            case Bc::ColRight: return i / n.shape[1];
        }
        return 0;
    };
    if (cls == Bc::ScalLeft) {
        for (std::size_t i = 0; i < sz; ++i) {
            if (da) da[0] += g[i] * da_at(0, i);
            if (db) db[i] += g[i] * db_at(0, i);
        }
        return;
    }
    for (std::size_t i = 0; i < sz; ++i) {
        const std::size_t bi = b_index(i);
        if (da) da[i] += g[i] * da_at(i, bi);
        if (db) db[bi] += g[i] * db_at(i, bi);
    }
}

template <OpKind K>
inline Tensor binary_op(const Tensor& a, const Tensor& b) {
    const char* kind = op_name(K);
    require_defined(a, kind);
    require_defined(b, kind);
    Shape out_shape;
    const Bc cls = classify(kind, a.shape(), b.shape(), out_shape);

    if constexpr (K == OpKind::Div) {
        for (double v : b.values()) {
            if (v == 0.0) throw DomainError("div: division by zero region");
        }
    }

    Buffer out;
    if constexpr (K == OpKind::Add) {
        out = binary_forward(a, b, cls, out_shape, [](double x, double y) { return x + y; });
    } else if constexpr (K == OpKind::Sub) {
        out = binary_forward(a, b, cls, out_shape, [](double x, double y) { return x - y; });
    } else if constexpr (K == OpKind::Mul) {
        out = binary_forward(a, b, cls, out_shape, [](double x, double y) { return x * y; });
    } else {
        out = binary_forward(a, b, cls, out_shape, [](double x, double y) { return x / y; });
    }

    Tape* tape = common_tape({&a, &b}, kind);
    if (!tape) return Tensor(std::move(out_shape), std::move(*out));

    return tape->record(K, out_shape, out, {a.node(), b.node()},
                        [av = a.buffer(), bv = b.buffer(), cls](Tape& t, const Tape::Node& n) {
                            const double* pa = av->data();
                            const double* pb = bv->data();
                            if constexpr (K == OpKind::Add) {
                                binary_backward(
                                    t, n, cls, [](std::size_t, std::size_t) { return 1.0; },
                                    [](std::size_t, std::size_t) { return 1.0; });
                            } else if constexpr (K == OpKind::Sub) {
                                binary_backward(
                                    t, n, cls, [](std::size_t, std::size_t) { return 1.0; },
                                    [](std::size_t, std::size_t) { return -1.0; });
                            } else if constexpr (K == OpKind::Mul) {
                                binary_backward(
                                    t, n, cls,
                                    [pb](std::size_t, std::size_t bi) { return pb[bi]; },
                                    [pa](std::size_t ai, std::size_t) { return pa[ai]; });
                            } else {
                                binary_backward(
                                    t, n, cls,
                                    [pb](std::size_t, std::size_t bi) { return 1.0 / pb[bi]; },
                                    [pa, pb](std::size_t ai, std::size_t bi) {
                                        return -pa[ai] / (pb[bi] * pb[bi]);
                                    });
                            }
                        });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary_op<OpKind::Add>(a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary_op<OpKind::Sub>(a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary_op<OpKind::Mul>(a, b); }
inline Tensor divide(const Tensor& a, const Tensor& b) {
    return detail::binary_op<OpKind::Div>(a, b);
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return divide(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator*(double s, const Tensor& a) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, Tensor::scalar(s)); }
inline Tensor operator-(double s, const Tensor& a) { return sub(Tensor::scalar(s), a); }

// ---------------------------------------------------------------------------
// unary elementwise

namespace detail {

template <OpKind K>
inline Tensor unary_op(const Tensor& x, double exponent = 0.0) {
    const char* kind = op_name(K);
    require_defined(x, kind);
    const std::size_t n = x.size();
    Buffer out = make_buffer(n);
    const double* px = x.data();
    double* po = out->data();

    if constexpr (K == OpKind::Sigmoid) {
        kernels::vsigmoid(px, po, n);
    } else if constexpr (K == OpKind::Tanh) {
        kernels::vtanh(px, po, n);
    } else if constexpr (K == OpKind::Relu) {
        kernels::vrelu(px, po, n);
    } else if constexpr (K == OpKind::Exp) {
        kernels::vexp(px, po, n);
    } else if constexpr (K == OpKind::Log) {
        for (std::size_t i = 0; i < n; ++i) {
            if (px[i] <= 0.0) {
                throw DomainError("log: non-positive input " + std::to_string(px[i]));
            }
            po[i] = std::log(px[i]);
        }
    } else {  // Power
        for (std::size_t i = 0; i < n; ++i) {
            po[i] = std::pow(px[i], exponent);
            if (!std::isfinite(po[i])) {
                throw DomainError("power: non-finite result at coordinate " + std::to_string(i));
            }
        }
    }

    Tape* tape = common_tape({&x}, kind);
    if (!tape) return Tensor(x.shape(), std::move(*out));

    return tape->record(K, x.shape(), out, {x.node()},
                        [xv = x.buffer(), yv = out, exponent](Tape& t, const Tape::Node& n) {
                            double* dx = t.grad_acc(n.inputs[0]);
                            if (!dx) return;
                            const double* g = n.grad.data();
                            const double* y = yv->data();
                            const double* xp = xv->data();
                            const std::size_t sz = yv->size();
                            if constexpr (K == OpKind::Sigmoid) {
                                for (std::size_t i = 0; i < sz; ++i)
                                    dx[i] += g[i] * y[i] * (1.0 - y[i]);
                            } else if constexpr (K == OpKind::Tanh) {
                                for (std::size_t i = 0; i < sz; ++i)
                                    dx[i] += g[i] * (1.0 - y[i] * y[i]);
                            } else if constexpr (K == OpKind::Relu) {
                                for (std::size_t i = 0; i < sz; ++i)
                                    dx[i] += xp[i] > 0.0 ? g[i] : 0.0;
                            } else if constexpr (K == OpKind::Exp) {
                                for (std::size_t i = 0; i < sz; ++i) dx[i] += g[i] * y[i];
                            } else if constexpr (K == OpKind::Log) {
                                for (std::size_t i = 0; i < sz; ++i) dx[i] += g[i] / xp[i];
                            } else {
                                for (std::size_t i = 0; i < sz; ++i)
                                    dx[i] += g[i] * exponent * std::pow(xp[i], exponent - 1.0);
                            }
                        });
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& x) { return detail::unary_op<OpKind::Sigmoid>(x); }
inline Tensor tanh(const Tensor& x) { return detail::unary_op<OpKind::Tanh>(x); }
inline Tensor relu(const Tensor& x) { return detail::unary_op<OpKind::Relu>(x); }
inline Tensor exp(const Tensor& x) { return detail::unary_op<OpKind::Exp>(x); }
inline Tensor log(const Tensor& x) { return detail::unary_op<OpKind::Log>(x); }
inline Tensor power(const Tensor& x, double exponent) {
    return detail::unary_op<OpKind::Power>(x, exponent);
}

// ---------------------------------------------------------------------------
// reductions

namespace detail {

inline Tensor reduce_all(const Tensor& x, bool is_mean) {
    const char* kind = is_mean ? "mean" : "sum";
    require_defined(x, kind);
    if (x.size() == 0) throw ContractError(std::string(kind) + ": empty tensor");
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    const double scale = is_mean ? 1.0 / static_cast<double>(x.size()) : 1.0;
    Buffer out = make_buffer(1, acc * scale);

    Tape* tape = common_tape({&x}, kind);
    if (!tape) return Tensor(Shape{1}, std::move(*out));
    return tape->record(is_mean ? OpKind::Mean : OpKind::Sum, Shape{1}, out, {x.node()},
                        [sz = x.size(), scale](Tape& t, const Tape::Node& n) {
                            double* dx = t.grad_acc(n.inputs[0]);
                            if (!dx) return;
                            const double g = n.grad[0] * scale;
                            for (std::size_t i = 0; i < sz; ++i) dx[i] += g;
                        });
}

inline Tensor reduce_axis(const Tensor& x, int axis, bool is_mean) {
    const char* kind = is_mean ? "mean" : "sum";
    require_defined(x, kind);
    if (x.rank() != 2 || (axis != 0 && axis != 1)) {
        throw ShapeError(std::string(kind) + ": axis reduction expects rank-2 input, axis 0 or 1");
    }
    const std::size_t rows = x.shape()[0], cols = x.shape()[1];
    const Shape out_shape = axis == 1 ? Shape{rows, 1} : Shape{1, cols};
    const std::size_t reduced = axis == 1 ? cols : rows;
    const double scale = is_mean ? 1.0 / static_cast<double>(reduced) : 1.0;
    Buffer out = make_buffer(shape_size(out_shape));
    const double* px = x.data();
    if (axis == 1) {
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < cols; ++c) acc += px[r * cols + c];
            (*out)[r] = acc * scale;
        }
    } else {
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) acc += px[r * cols + c];
            (*out)[c] = acc * scale;
        }
    }

    Tape* tape = common_tape({&x}, kind);
    if (!tape) return Tensor(out_shape, std::move(*out));
    return tape->record(is_mean ? OpKind::Mean : OpKind::Sum, out_shape, out, {x.node()},
                        [rows, cols, axis, scale](Tape& t, const Tape::Node& n) {
                            double* dx = t.grad_acc(n.inputs[0]);
                            if (!dx) return;
                            const double* g = n.grad.data();
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c)
                                    dx[r * cols + c] += scale * (axis == 1 ? g[r] : g[c]);
                        });
}

}  // namespace detail

inline Tensor mean(const Tensor& x) { return detail::reduce_all(x, true); }
inline Tensor sum(const Tensor& x) { return detail::reduce_all(x, false); }
inline Tensor mean_axis(const Tensor& x, int axis) { return detail::reduce_axis(x, axis, true); }
inline Tensor sum_axis(const Tensor& x, int axis) { return detail::reduce_axis(x, axis, false); }

// ---------------------------------------------------------------------------
// shape ops

inline Tensor reshape(const Tensor& x, Shape shape) {
    detail::require_defined(x, "reshape");
    if (shape_size(shape) != x.size()) {
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
    }
    Tape* tape = detail::common_tape({&x}, "reshape");
    if (!tape) return Tensor(std::move(shape), std::vector<double>(x.values()));
    // Values alias the input buffer; only the shape changes.
    return tape->record(OpKind::Reshape, std::move(shape), x.buffer(), {x.node()},
                        [](Tape& t, const Tape::Node& n) {
                            double* dx = t.grad_acc(n.inputs[0]);
                            if (!dx) return;
                            detail::add_to(dx, n.grad.data(), n.grad.size());
                        });
}

inline Tensor transpose(const Tensor& x) {
    detail::require_defined(x, "transpose");
    const Shape& s = x.shape();
    Shape out_shape;
    std::size_t batch = 1, m = 0, n = 0;
    if (s.size() == 2) {
        m = s[0], n = s[1];
        out_shape = {n, m};
    } else if (s.size() == 3) {
        batch = s[0], m = s[1], n = s[2];
        out_shape = {batch, n, m};
    } else {
        throw ShapeError("transpose: expects rank 2 or 3, got " + shape_str(s));
    }
    Buffer out = make_buffer(x.size());
    const double* px = x.data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                (*out)[b * m * n + j * m + i] = px[b * m * n + i * n + j];

    Tape* tape = detail::common_tape({&x}, "transpose");
    if (!tape) return Tensor(std::move(out_shape), std::move(*out));
    return tape->record(OpKind::Transpose, out_shape, out, {x.node()},
                        [batch, m, n](Tape& t, const Tape::Node& nd) {
                            double* dx = t.grad_acc(nd.inputs[0]);
                            if (!dx) return;
                            const double* g = nd.grad.data();
                            for (std::size_t b = 0; b < batch; ++b)
                                for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t j = 0; j < n; ++j)
                                        dx[b * m * n + i * n + j] += g[b * m * n + j * m + i];
                        });
}

namespace detail {

/// Views a tensor as [outer, axis_dim, inner] around `axis`.
inline void axis_split(const Shape& s, int axis, std::size_t& outer, std::size_t& dim,
                       std::size_t& inner) {
    outer = 1;
    inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<std::size_t>(i)];
    dim = s[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}

}  // namespace detail

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    if (axis < 0 || static_cast<std::size_t>(axis) >= s0.size()) {
        throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s0));
    }
    Shape out_shape = s0;
    out_shape[static_cast<std::size_t>(axis)] = 0;
    for (const Tensor& p : parts) {
        detail::require_defined(p, "concat");
        if (p.rank() != s0.size()) {
            throw ShapeError("concat: rank mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(s0));
        }
        for (std::size_t d = 0; d < s0.size(); ++d) {
            if (d != static_cast<std::size_t>(axis) && p.shape()[d] != s0[d]) {
                throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(s0));
            }
        }
        out_shape[static_cast<std::size_t>(axis)] += p.shape()[static_cast<std::size_t>(axis)];
    }

    std::size_t outer, odim, inner;
    detail::axis_split(out_shape, axis, outer, odim, inner);
    Buffer out = make_buffer(shape_size(out_shape));
    std::vector<std::size_t> dims(parts.size());
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const std::size_t d = parts[pi].shape()[static_cast<std::size_t>(axis)];
        dims[pi] = d;
        const double* src = parts[pi].data();
        for (std::size_t o = 0; o < outer; ++o) {
            std::memcpy(out->data() + (o * odim + off) * inner, src + o * d * inner,
                        d * inner * sizeof(double));
        }
        off += d;
    }

    std::vector<int> input_ids;
    Tape* tape = nullptr;
    for (const Tensor& p : parts) {
        if (p.requires_grad()) {
            if (tape && p.tape() != tape) throw ContractError("concat: mixed tapes");
            tape = p.tape();
        }
        input_ids.push_back(p.node());
    }
    if (!tape) return Tensor(std::move(out_shape), std::move(*out));

    return tape->record(OpKind::Concat, out_shape, out, input_ids,
                        [outer, odim, inner, dims](Tape& t, const Tape::Node& n) {
                            const double* g = n.grad.data();
                            std::size_t off2 = 0;
                            for (std::size_t pi = 0; pi < dims.size(); ++pi) {
                                double* dx = t.grad_acc(n.inputs[pi]);
                                const std::size_t d = dims[pi];
                                if (dx) {
                                    for (std::size_t o = 0; o < outer; ++o) {
                                        detail::add_to(dx + o * d * inner,
                                                       g + (o * odim + off2) * inner, d * inner);
                                    }
                                }
                                off2 += d;
                            }
                        });
}

inline Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t len) {
    detail::require_defined(x, "slice");
    const Shape& s = x.shape();
    if (axis < 0 || static_cast<std::size_t>(axis) >= s.size()) {
        throw ShapeError("slice: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s));
    }
    const std::size_t dim = s[static_cast<std::size_t>(axis)];
    if (len == 0 || start + len > dim) {
        throw ShapeError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") exceeds axis size " +
                         std::to_string(dim));
    }
    Shape out_shape = s;
    out_shape[static_cast<std::size_t>(axis)] = len;
    std::size_t outer, odim, inner;
    detail::axis_split(s, axis, outer, odim, inner);
    Buffer out = make_buffer(shape_size(out_shape));
    const double* px = x.data();
    for (std::size_t o = 0; o < outer; ++o) {
        std::memcpy(out->data() + o * len * inner, px + (o * odim + start) * inner,
                    len * inner * sizeof(double));
    }

    Tape* tape = detail::common_tape({&x}, "slice");
    if (!tape) return Tensor(std::move(out_shape), std::move(*out));
    return tape->record(OpKind::Slice, out_shape, out, {x.node()},
                        [outer, odim, inner, start, len](Tape& t, const Tape::Node& n) {
                            double* dx = t.grad_acc(n.inputs[0]);
                            if (!dx) return;
                            const double* g = n.grad.data();
                            for (std::size_t o = 0; o < outer; ++o) {
                                detail::add_to(dx + (o * odim + start) * inner, g + o * len * inner,
                                               len * inner);
                            }
                        });
}

// ---------------------------------------------------------------------------
// row_softmax

inline Tensor row_softmax(const Tensor& x) {
    detail::require_defined(x, "row_softmax");
    if (x.rank() < 1) throw ShapeError("row_softmax: undefined rank");
    const std::size_t cols = x.shape().back();
    const std::size_t rows = x.size() / cols;
    Buffer out = make_buffer(x.size());
    const double* px = x.data();
    double* po = out->data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = px + r * cols;
        double* yr = po + r * cols;
        double mx = xr[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
        // Max-shift before exponentiation for stability.
        for (std::size_t c = 0; c < cols; ++c) yr[c] = xr[c] - mx;
        kernels::vexp(yr, yr, cols);
        double denom = 0.0;
        for (std::size_t c = 0; c < cols; ++c) denom += yr[c];
        for (std::size_t c = 0; c < cols; ++c) yr[c] /= denom;
    }

    Tape* tape = detail::common_tape({&x}, "row_softmax");
    if (!tape) return Tensor(x.shape(), std::move(*out));
    return tape->record(OpKind::RowSoftmax, x.shape(), out, {x.node()},
                        [yv = out, rows, cols](Tape& t, const Tape::Node& n) {
                            double* dx = t.grad_acc(n.inputs[0]);
                            if (!dx) return;
                            const double* g = n.grad.data();
                            const double* y = yv->data();
                            for (std::size_t r = 0; r < rows; ++r) {
                                const double* gr = g + r * cols;
                                const double* yr = y + r * cols;
                                double dot = 0.0;
                                for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
                                double* dr = dx + r * cols;
                                for (std::size_t c = 0; c < cols; ++c)
                                    dr[c] += yr[c] * (gr[c] - dot);
                            }
                        });
}

// ---------------------------------------------------------------------------
// dropout

/// Inverted dropout: retained activations are scaled by 1/keep at train
/// time so evaluation is a plain identity.
inline Tensor dropout(const Tensor& x, double rate, bool train, std::uint64_t seed) {
    detail::require_defined(x, "dropout");
    if (rate < 0.0 || rate >= 1.0) {
        throw ContractError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    }
    if (!train || rate == 0.0) return x;

    const double keep = 1.0 - rate;
    auto mask = make_buffer(x.size());
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& m : *mask) m = u(rng) < keep ? 1.0 / keep : 0.0;

    Buffer out = make_buffer(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) (*out)[i] = x.data()[i] * (*mask)[i];

    Tape* tape = detail::common_tape({&x}, "dropout");
    if (!tape) return Tensor(x.shape(), std::move(*out));
    return tape->record(OpKind::Dropout, x.shape(), out, {x.node()},
                        [mask](Tape& t, const Tape::Node& n) {
                            double* dx = t.grad_acc(n.inputs[0]);
                            if (!dx) return;
                            const double* g = n.grad.data();
                            for (std::size_t i = 0; i < mask->size(); ++i)
                                dx[i] += g[i] * (*mask)[i];
                        });
}

// ---------------------------------------------------------------------------
// cosine similarity (row-wise)

inline constexpr double kCosineNormFloor = 1e-12;

inline Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
    detail::require_defined(a, "cosine_similarity");
    detail::require_defined(b, "cosine_similarity");
    if (a.shape() != b.shape() || a.rank() != 2) {
        throw ShapeError("cosine_similarity: expects equal rank-2 shapes, got " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    Buffer out = make_buffer(rows);
    auto norms = make_buffer(2 * rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* ar = a.data() + r * cols;
        const double* br = b.data() + r * cols;
        double na = 0.0, nb = 0.0, dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            na += ar[c] * ar[c];
            nb += br[c] * br[c];
            dot += ar[c] * br[c];
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        if (na < kCosineNormFloor || nb < kCosineNormFloor) {
            throw DomainError("cosine_similarity: degenerate embedding norm at row " +
                              std::to_string(r));
        }
        (*norms)[2 * r] = na;
        (*norms)[2 * r + 1] = nb;
        (*out)[r] = dot / (na * nb);
    }

    const Shape out_shape{rows, 1};
    Tape* tape = detail::common_tape({&a, &b}, "cosine_similarity");
    if (!tape) return Tensor(out_shape, std::move(*out));
    return tape->record(
        OpKind::CosineSimilarity, out_shape, out, {a.node(), b.node()},
        [av = a.buffer(), bv = b.buffer(), cv = out, norms, rows, cols](Tape& t,
                                                                        const Tape::Node& n) {
            double* da = t.grad_acc(n.inputs[0]);
            double* db = t.grad_acc(n.inputs[1]);
            if (!da && !db) return;
            const double* g = n.grad.data();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* ar = av->data() + r * cols;
                const double* br = bv->data() + r * cols;
                const double na = (*norms)[2 * r], nb = (*norms)[2 * r + 1];
                const double cosv = (*cv)[r];
                const double inv = 1.0 / (na * nb);
                for (std::size_t c = 0; c < cols; ++c) {
                    if (da) da[r * cols + c] += g[r] * (br[c] * inv - cosv * ar[c] / (na * na));
                    if (db) db[r * cols + c] += g[r] * (ar[c] * inv - cosv * br[c] / (nb * nb));
                }
            }
        });
}

// ---------------------------------------------------------------------------
// fused LSTM layer
//
// One tape node per layer: the input-to-hidden projection is expected to be
// precomputed (preact = X . W_ih + b), so the node owns only the recurrence
// h_t, c_t = cell(preact_t + h_{t-1} . W_hh).  Gate order along the last
// axis is [input, forget, candidate, output]; initial states are zero.
// Backward is truncated-nowhere BPTT with the weight gradient deferred to a
// single flat GEMM.

inline Tensor lstm_layer(const Tensor& preact, const Tensor& w_hh) {
    detail::require_defined(preact, "lstm_layer");
    detail::require_defined(w_hh, "lstm_layer");
    if (preact.rank() != 3 || w_hh.rank() != 2) {
        throw ShapeError("lstm_layer: expects preact rank 3 and w_hh rank 2");
    }
    const std::size_t B = preact.shape()[0], T = preact.shape()[1], G = preact.shape()[2];
    if (G % 4 != 0 || w_hh.shape()[0] != G / 4 || w_hh.shape()[1] != G) {
        throw ShapeError("lstm_layer: gate dim " + shape_str(preact.shape()) +
                         " inconsistent with w_hh " + shape_str(w_hh.shape()));
    }
    const std::size_t H = G / 4;

    Buffer out = make_buffer(B * T * H);               // h over time
    auto cache = make_buffer(6 * B * T * H);           // i,f,g,o,c,tanh(c)
    std::vector<double> gates(B * G);                  // per-step scratch
    std::vector<double> hprev(B * H);                  // contiguous h_{t-1}

    double* I = cache->data();
    double* F = I + B * T * H;
    double* Gc = F + B * T * H;
    double* O = Gc + B * T * H;
    double* C = O + B * T * H;
    double* TC = C + B * T * H;

    const double* pre = preact.data();
    double* h = out->data();
    for (std::size_t t = 0; t < T; ++t) {
        // gates = preact[:,t,:] + h_{t-1} . w_hh
        for (std::size_t b = 0; b < B; ++b)
            std::memcpy(gates.data() + b * G, pre + (b * T + t) * G, G * sizeof(double));
        if (t > 0) {
            for (std::size_t b = 0; b < B; ++b)
                std::memcpy(hprev.data() + b * H, h + (b * T + t - 1) * H, H * sizeof(double));
            kernels::gemm(false, false, B, H, G, 1.0, hprev.data(), w_hh.data(), 1.0,
                          gates.data());
        }
        for (std::size_t b = 0; b < B; ++b) {
            const double* gb = gates.data() + b * G;
            const std::size_t at = (b * T + t) * H;
            kernels::vsigmoid(gb, I + at, H);
            kernels::vsigmoid(gb + H, F + at, H);
            kernels::vtanh(gb + 2 * H, Gc + at, H);
            kernels::vsigmoid(gb + 3 * H, O + at, H);
            for (std::size_t j = 0; j < H; ++j) {
                const double cprev = t > 0 ? C[(b * T + t - 1) * H + j] : 0.0;
                C[at + j] = F[at + j] * cprev + I[at + j] * Gc[at + j];
            }
            kernels::vtanh(C + at, TC + at, H);
            for (std::size_t j = 0; j < H; ++j) h[at + j] = O[at + j] * TC[at + j];
        }
    }

    Tape* tape = detail::common_tape({&preact, &w_hh}, "lstm_layer");
    if (!tape) return Tensor(Shape{B, T, H}, std::move(*out));

    return tape->record(
        OpKind::LstmLayer, Shape{B, T, H}, out, {preact.node(), w_hh.node()},
        [cache, hv = out, wv = w_hh.buffer(), B, T, H, G](Tape& t, const Tape::Node& n) {
            double* dpre = t.grad_acc(n.inputs[0]);
            double* dwhh = t.grad_acc(n.inputs[1]);
            if (!dpre && !dwhh) return;
            const double* g = n.grad.data();
            const double* I = cache->data();
            const double* F = I + B * T * H;
            const double* Gc = F + B * T * H;
            const double* O = Gc + B * T * H;
            const double* C = O + B * T * H;
            const double* TC = C + B * T * H;
            const double* h = hv->data();

            // Gate pre-activation gradients for all steps; feeds both dpre
            // and the deferred weight gradient.
            std::vector<double> dgates(B * T * G, 0.0);
            std::vector<double> dh(B * H, 0.0), dc(B * H, 0.0);
            std::vector<double> dg_step(B * G);

            for (std::size_t t2 = T; t2-- > 0;) {
                for (std::size_t b = 0; b < B; ++b) {
                    const std::size_t at = (b * T + t2) * H;
                    double* dg = dgates.data() + (b * T + t2) * G;
                    for (std::size_t j = 0; j < H; ++j) {
                        const double dhj = g[at + j] + dh[b * H + j];
                        const double doj = dhj * TC[at + j];
                        double dcj = dhj * O[at + j] * (1.0 - TC[at + j] * TC[at + j]) +
                                     dc[b * H + j];
                        const double cprev = t2 > 0 ? C[(b * T + t2 - 1) * H + j] : 0.0;
                        const double dij = dcj * Gc[at + j];
                        const double dfj = dcj * cprev;
                        const double dgj = dcj * I[at + j];
                        dc[b * H + j] = dcj * F[at + j];
                        dg[j] = dij * I[at + j] * (1.0 - I[at + j]);
                        dg[H + j] = dfj * F[at + j] * (1.0 - F[at + j]);
                        dg[2 * H + j] = dgj * (1.0 - Gc[at + j] * Gc[at + j]);
                        dg[3 * H + j] = doj * O[at + j] * (1.0 - O[at + j]);
                    }
                }
                // dh_{t-1} = dgates_t . w_hh^T
                if (t2 > 0) {
                    for (std::size_t b = 0; b < B; ++b)
                        std::memcpy(dg_step.data() + b * G, dgates.data() + (b * T + t2) * G,
                                    G * sizeof(double));
                    kernels::gemm(false, true, B, G, H, 1.0, dg_step.data(), wv->data(), 0.0,
                                  dh.data());
                } else {
                    std::fill(dh.begin(), dh.end(), 0.0);
                }
            }

            if (dpre) detail::add_to(dpre, dgates.data(), dgates.size());
            if (dwhh) {
                // dW_hh = sum_t h_{t-1}^T . dgates_t as one GEMM over the
                // shifted hidden sequence.
                std::vector<double> hprev(B * T * H, 0.0);
                for (std::size_t b = 0; b < B; ++b) {
                    std::memcpy(hprev.data() + (b * T + 1) * H, h + b * T * H,
                                (T - 1) * H * sizeof(double));
                }
                kernels::gemm(true, false, H, B * T, G, 1.0, hprev.data(), dgates.data(), 1.0,
                              dwhh);
            }
        });
}

// ---------------------------------------------------------------------------
// generic dispatcher

struct OpAttrs {
    double exponent = 2.0;       // power
    int axis = -1;               // mean/sum (-1 reduces all), concat, slice
    std::size_t start = 0;       // slice
    std::size_t len = 0;         // slice
    Shape shape;                 // reshape
    double rate = 0.5;           // dropout
    bool train = true;           // dropout
    std::uint64_t seed = 0;      // dropout
};

/// Uniform entry point over the op vocabulary; records a tape node when any
/// input is tracked.  Typed wrappers above are what model code uses; this
/// surface exists for generic drivers (the gradient-check suite, tooling).
inline Tensor forward_op(OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs = {}) {
    auto arity = [&](std::size_t n) {
        if (inputs.size() != n) {
            throw ContractError(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                                " inputs, got " + std::to_string(inputs.size()));
        }
    };
    switch (kind) {
        case OpKind::MatMul: arity(2); return matmul(inputs[0], inputs[1]);
        case OpKind::Add: arity(2); return add(inputs[0], inputs[1]);
        case OpKind::Sub: arity(2); return sub(inputs[0], inputs[1]);
        case OpKind::Mul: arity(2); return mul(inputs[0], inputs[1]);
        case OpKind::Div: arity(2); return divide(inputs[0], inputs[1]);
        case OpKind::Sigmoid: arity(1); return sigmoid(inputs[0]);
        case OpKind::Tanh: arity(1); return tanh(inputs[0]);
        case OpKind::Relu: arity(1); return relu(inputs[0]);
        case OpKind::Exp: arity(1); return exp(inputs[0]);
        case OpKind::Log: arity(1); return log(inputs[0]);
        case OpKind::Power: arity(1); return power(inputs[0], attrs.exponent);
        case OpKind::Mean:
            arity(1);
            return attrs.axis < 0 ? mean(inputs[0]) : mean_axis(inputs[0], attrs.axis);
        case OpKind::Sum:
            arity(1);
            return attrs.axis < 0 ? sum(inputs[0]) : sum_axis(inputs[0], attrs.axis);
        case OpKind::Concat: return concat(inputs, std::max(attrs.axis, 0));
        case OpKind::Slice: arity(1); return slice(inputs[0], std::max(attrs.axis, 0), attrs.start, attrs.len);
        case OpKind::Reshape: arity(1); return reshape(inputs[0], attrs.shape);
        case OpKind::Transpose: arity(1); return transpose(inputs[0]);
        case OpKind::RowSoftmax: arity(1); return row_softmax(inputs[0]);
        case OpKind::Dropout: arity(1); return dropout(inputs[0], attrs.rate, attrs.train, attrs.seed);
        case OpKind::CosineSimilarity: arity(2); return cosine_similarity(inputs[0], inputs[1]);
        case OpKind::LstmLayer: arity(2); return lstm_layer(inputs[0], inputs[1]);
        case OpKind::Leaf: break;
    }
    throw ContractError("forward_op: unsupported kind");
}

}  // namespace physe
