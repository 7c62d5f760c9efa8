#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cars/nn_kernels.hpp"
#include "cars/param_store.hpp"
#include "cars/search_space.hpp"
#include "cars/tensor.hpp"

namespace cars {

struct Batch {
    Tensor inputs; // N x C x H x W
    std::vector<int> targets;
};

struct LossValue {
    float value = 0.0f;
    int correct = 0;
};

// Single cell-op forward without a tape, C_out == C_in. params must be the
// op's packed slot (see op_param_count). Used directly by tests and the
// standalone evaluators; the tape ops route through the same kernels.
Tensor forward_op(OpKind kind, const Tensor& x, std::span<const float> params, int stride);

// Reverse-mode tape over the kernel set. Values are computed eagerly at
// record time; backward() replays the recorded closures in reverse and
// accumulates parameter gradients into a caller-supplied flat sink aligned
// with the bound ParamStore.
class Tape {
  public:
    explicit Tape(const ParamStore* params = nullptr) : params_(params) {}

    int input(Tensor x);
    int relu(int x);
    // Packed conv slot [w cout*cin*k*k][b cout] at `offset` in the store.
    int conv2d(int x, size_t offset, int cout, int k, int stride, int pad);
    int dwconv2d(int x, size_t offset, int k, int stride, int pad);
    // Cell op: relu + conv / relu + dw + pw / pool / skip / none.
    int apply_op(OpKind kind, int x, size_t offset, int stride);
    int maxpool(int x, int k, int stride, int pad);
    int avgpool(int x, int k, int stride, int pad);
    int fac_reduce(int x);
    int zeros_like_strided(int x, int stride);
    int add2_scaled(int a, int b, float scale);
    int mean_list(const std::vector<int>& xs);
    int gap(int x);
    int linear(int x, size_t offset, int out);
    // Fixed scalar projection; handy for probing gradients of any output.
    int dot(int x, std::vector<float> weights);

    struct CeResult {
        int node = -1;
        LossValue loss;
    };
    CeResult softmax_ce(int logits, std::vector<int> targets);

    const Tensor& value(int node) const { return entries_[check(node)].value; }
    const Tensor& grad(int node) const;

    // Seeds d(output)/d(output) = seed and accumulates parameter gradients
    // into sink (which must span the bound store). May be called repeatedly;
    // each call adds another full contribution.
    void backward(int node, float seed, std::span<float> sink);

    size_t size() const { return entries_.size(); }

  private:
    struct Entry {
        Tensor value;
        Tensor grad;
        bool touched = false;
        std::function<void(Tape&)> backprop;
    };

    size_t check(int node) const;
    int push(Tensor value, std::function<void(Tape&)> backprop);
    const float* param(size_t offset) const;
    float* sink(size_t offset) { return sink_.data() + offset; }
    Tensor& grad_of(int node);

    const ParamStore* params_ = nullptr;
    std::vector<Entry> entries_;
    std::span<float> sink_;
    bool backward_ran_ = false;
};

} // namespace cars
