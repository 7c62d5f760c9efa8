#include "cars/autodiff.hpp"

#include <algorithm>
#include <memory>
#include <utility>

namespace cars {

// ============================================================================
// forward_op: tape-free single cell op
// ============================================================================

Tensor forward_op(OpKind kind, const Tensor& x, std::span<const float> params, int stride) {
    if (x.shape.size() != 4) throw StructuralError("forward_op: expected NCHW input");
    const int c = x.shape[1];
    if (params.size() != op_param_count(kind, c))
        throw StructuralError("forward_op: param slice size mismatch for op " +
                              std::string(op_name(kind)));
    const size_t cc = static_cast<size_t>(c) * c;
    Tensor r, y;
    switch (kind) {
    case OpKind::conv3x3:
        relu_fwd(x, r);
        conv2d_fwd(r, params.data(), params.data() + cc * 9, c, 3, stride, 1, y);
        return y;
    case OpKind::conv1x1:
        relu_fwd(x, r);
        conv2d_fwd(r, params.data(), params.data() + cc, c, 1, stride, 0, y);
        return y;
    case OpKind::sepconv3x3: {
        relu_fwd(x, r);
        Tensor mid;
        dwconv2d_fwd(r, params.data(), 3, stride, 1, mid);
        conv2d_fwd(mid, params.data() + static_cast<size_t>(c) * 9,
                   params.data() + static_cast<size_t>(c) * 9 + cc, c, 1, 1, 0, y);
        return y;
    }
    case OpKind::sepconv5x5: {
        relu_fwd(x, r);
        Tensor mid;
        dwconv2d_fwd(r, params.data(), 5, stride, 2, mid);
        conv2d_fwd(mid, params.data() + static_cast<size_t>(c) * 25,
                   params.data() + static_cast<size_t>(c) * 25 + cc, c, 1, 1, 0, y);
        return y;
    }
    case OpKind::maxpool3x3: {
        std::vector<int32_t> argmax;
        maxpool_fwd(x, 3, stride, 1, y, argmax);
        return y;
    }
    case OpKind::avgpool3x3:
        avgpool_fwd(x, 3, stride, 1, y);
        return y;
    case OpKind::skip:
        if (stride == 1) return x;
        fac_reduce_fwd(x, y);
        return y;
    case OpKind::none: {
        const int ho = stride == 1 ? x.shape[2] : conv_out_dim(x.shape[2], 3, stride, 1);
        const int wo = stride == 1 ? x.shape[3] : conv_out_dim(x.shape[3], 3, stride, 1);
        return Tensor({x.shape[0], c, ho, wo});
    }
    }
    throw StructuralError("forward_op: unknown op kind");
}

// ============================================================================
// Tape
// ============================================================================

size_t Tape::check(int node) const {
    if (node < 0 || static_cast<size_t>(node) >= entries_.size())
        throw UsageError("tape node out of range (backward/read without forward?)");
    return static_cast<size_t>(node);
}

int Tape::push(Tensor value, std::function<void(Tape&)> backprop) {
    entries_.push_back(Entry{std::move(value), Tensor{}, false, std::move(backprop)});
    return static_cast<int>(entries_.size()) - 1;
}

const float* Tape::param(size_t offset) const { return params_->values().data() + offset; }

Tensor& Tape::grad_of(int node) {
    Entry& e = entries_[static_cast<size_t>(node)];
    e.touched = true;
    return e.grad;
}

const Tensor& Tape::grad(int node) const {
    if (!backward_ran_) throw UsageError("gradient read before backward");
    return entries_[check(node)].grad;
}

int Tape::input(Tensor x) { return push(std::move(x), nullptr); }

int Tape::relu(int x) {
    const int xi = static_cast<int>(check(x));
    Tensor y;
    relu_fwd(entries_[xi].value, y);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [xi, self](Tape& t) {
        relu_bwd(t.entries_[xi].value, t.entries_[self].grad, t.grad_of(xi));
    });
}

int Tape::conv2d(int x, size_t offset, int cout, int k, int stride, int pad) {
    const int xi = static_cast<int>(check(x));
    const Tensor& xv = entries_[xi].value;
    const int cin = xv.shape[1];
    const size_t wlen = static_cast<size_t>(cout) * cin * k * k;
    Tensor y;
    conv2d_fwd(xv, param(offset), param(offset + wlen), cout, k, stride, pad, y);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [xi, self, offset, wlen, cout, k, stride, pad](Tape& t) {
        conv2d_bwd(t.entries_[xi].value, t.param(offset), cout, k, stride, pad,
                   t.entries_[self].grad, &t.grad_of(xi), t.sink(offset), t.sink(offset + wlen));
    });
}

int Tape::dwconv2d(int x, size_t offset, int k, int stride, int pad) {
    const int xi = static_cast<int>(check(x));
    Tensor y;
    dwconv2d_fwd(entries_[xi].value, param(offset), k, stride, pad, y);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [xi, self, offset, k, stride, pad](Tape& t) {
        dwconv2d_bwd(t.entries_[xi].value, t.param(offset), k, stride, pad, t.entries_[self].grad,
                     &t.grad_of(xi), t.sink(offset));
    });
}

int Tape::apply_op(OpKind kind, int x, size_t offset, int stride) {
    const int c = entries_[check(x)].value.shape[1];
    switch (kind) {
    case OpKind::conv3x3:
        return conv2d(relu(x), offset, c, 3, stride, 1);
    case OpKind::conv1x1:
        return conv2d(relu(x), offset, c, 1, stride, 0);
    case OpKind::sepconv3x3:
        return conv2d(dwconv2d(relu(x), offset, 3, stride, 1), offset + static_cast<size_t>(c) * 9,
                      c, 1, 1, 0);
    case OpKind::sepconv5x5:
        return conv2d(dwconv2d(relu(x), offset, 5, stride, 2), offset + static_cast<size_t>(c) * 25,
                      c, 1, 1, 0);
    case OpKind::maxpool3x3:
        return maxpool(x, 3, stride, 1);
    case OpKind::avgpool3x3:
        return avgpool(x, 3, stride, 1);
    case OpKind::skip:
        return stride == 1 ? x : fac_reduce(x);
    case OpKind::none:
        return zeros_like_strided(x, stride);
    }
    throw StructuralError("apply_op: unknown op kind");
}

int Tape::maxpool(int x, int k, int stride, int pad) {
    const int xi = static_cast<int>(check(x));
    Tensor y;
    auto argmax = std::make_shared<std::vector<int32_t>>();
    maxpool_fwd(entries_[xi].value, k, stride, pad, y, *argmax);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [xi, self, argmax](Tape& t) {
        maxpool_bwd(*argmax, t.entries_[self].grad, t.grad_of(xi));
    });
}

int Tape::avgpool(int x, int k, int stride, int pad) {
    const int xi = static_cast<int>(check(x));
    Tensor y;
    avgpool_fwd(entries_[xi].value, k, stride, pad, y);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [xi, self, k, stride, pad](Tape& t) {
        avgpool_bwd(t.entries_[xi].value, k, stride, pad, t.entries_[self].grad, t.grad_of(xi));
    });
}

int Tape::fac_reduce(int x) {
    const int xi = static_cast<int>(check(x));
    Tensor y;
    fac_reduce_fwd(entries_[xi].value, y);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [xi, self](Tape& t) {
        fac_reduce_bwd(t.entries_[xi].value, t.entries_[self].grad, t.grad_of(xi));
    });
}

int Tape::zeros_like_strided(int x, int stride) {
    const Tensor& xv = entries_[check(x)].value;
    const int ho = stride == 1 ? xv.shape[2] : conv_out_dim(xv.shape[2], 3, stride, 1);
    const int wo = stride == 1 ? xv.shape[3] : conv_out_dim(xv.shape[3], 3, stride, 1);
    return push(Tensor({xv.shape[0], xv.shape[1], ho, wo}), nullptr);
}

int Tape::add2_scaled(int a, int b, float scale) {
    const int ai = static_cast<int>(check(a));
    const int bi = static_cast<int>(check(b));
    const Tensor& av = entries_[ai].value;
    const Tensor& bv = entries_[bi].value;
    if (!av.same_shape(bv)) throw StructuralError("add2_scaled: shape mismatch");
    Tensor y(av.shape);
    for (size_t i = 0; i < y.numel(); ++i) y.data[i] = scale * (av.data[i] + bv.data[i]);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [ai, bi, self, scale](Tape& t) {
        const Tensor& g = t.entries_[self].grad;
        Tensor& ga = t.grad_of(ai);
        for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += scale * g.data[i];
        Tensor& gb = t.grad_of(bi);
        for (size_t i = 0; i < g.numel(); ++i) gb.data[i] += scale * g.data[i];
    });
}

int Tape::mean_list(const std::vector<int>& xs) {
    if (xs.empty()) throw UsageError("mean_list of nothing");
    std::vector<int> idx;
    idx.reserve(xs.size());
    for (int x : xs) idx.push_back(static_cast<int>(check(x)));
    const Tensor& first = entries_[idx[0]].value;
    Tensor y(first.shape);
    const float inv = 1.0f / static_cast<float>(xs.size());
    for (int x : idx) {
        const Tensor& v = entries_[x].value;
        if (!v.same_shape(first)) throw StructuralError("mean_list: shape mismatch");
        for (size_t i = 0; i < y.numel(); ++i) y.data[i] += inv * v.data[i];
    }
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [idx, self, inv](Tape& t) {
        const Tensor& g = t.entries_[self].grad;
        for (int x : idx) {
            Tensor& gx = t.grad_of(x);
            for (size_t i = 0; i < g.numel(); ++i) gx.data[i] += inv * g.data[i];
        }
    });
}

int Tape::gap(int x) {
    const int xi = static_cast<int>(check(x));
    Tensor y;
    gap_fwd(entries_[xi].value, y);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [xi, self](Tape& t) {
        gap_bwd(t.entries_[xi].value, t.entries_[self].grad, t.grad_of(xi));
    });
}

int Tape::linear(int x, size_t offset, int out) {
    const int xi = static_cast<int>(check(x));
    const Tensor& xv = entries_[xi].value;
    const size_t wlen = static_cast<size_t>(out) * xv.shape[1];
    Tensor y;
    linear_fwd(xv, param(offset), param(offset + wlen), out, y);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [xi, self, offset, wlen, out](Tape& t) {
        linear_bwd(t.entries_[xi].value, t.param(offset), out, t.entries_[self].grad,
                   &t.grad_of(xi), t.sink(offset), t.sink(offset + wlen));
    });
}

int Tape::dot(int x, std::vector<float> weights) {
    const int xi = static_cast<int>(check(x));
    const Tensor& xv = entries_[xi].value;
    if (weights.size() != xv.numel()) throw StructuralError("dot: weight length mismatch");
    auto w = std::make_shared<std::vector<float>>(std::move(weights));
    Tensor y({1});
    double acc = 0.0;
    for (size_t i = 0; i < xv.numel(); ++i) acc += (*w)[i] * xv.data[i];
    y.data[0] = static_cast<float>(acc);
    const int self = static_cast<int>(entries_.size());
    return push(std::move(y), [xi, self, w](Tape& t) {
        const float g = t.entries_[self].grad.data[0];
        Tensor& gx = t.grad_of(xi);
        for (size_t i = 0; i < gx.numel(); ++i) gx.data[i] += g * (*w)[i];
    });
}

Tape::CeResult Tape::softmax_ce(int logits, std::vector<int> targets) {
    const int xi = static_cast<int>(check(logits));
    CeResult res;
    res.loss.value = softmax_ce_fwd(entries_[xi].value, targets, &res.loss.correct);
    if (res.loss.value < 0.0f && res.loss.value > -1e-6f) res.loss.value = 0.0f;
    Tensor y({1});
    y.data[0] = res.loss.value;
    auto tgt = std::make_shared<std::vector<int>>(std::move(targets));
    const int self = static_cast<int>(entries_.size());
    res.node = push(std::move(y), [xi, self, tgt](Tape& t) {
        softmax_ce_bwd(t.entries_[xi].value, *tgt, t.entries_[self].grad.data[0], t.grad_of(xi));
    });
    return res;
}

void Tape::backward(int node, float seed, std::span<float> sink) {
    if (entries_.empty()) throw UsageError("backward without forward");
    const size_t root = check(node);
    if (params_ && sink.size() != params_->total())
        throw UsageError("backward: gradient sink does not span the parameter store");
    sink_ = sink;
    backward_ran_ = true;
    for (auto& e : entries_) {
        e.grad = Tensor(e.value.shape);
        e.touched = false;
    }
    Entry& seed_entry = entries_[root];
    if (seed_entry.value.numel() != 1) throw UsageError("backward: root node is not scalar");
    seed_entry.grad.data[0] = seed;
    seed_entry.touched = true;
    for (size_t i = root + 1; i-- > 0;) {
        Entry& e = entries_[i];
        if (e.touched && e.backprop) e.backprop(*this);
    }
    sink_ = {};
}

} // namespace cars
