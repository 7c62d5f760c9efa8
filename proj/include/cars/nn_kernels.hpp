#pragma once

#include <cstdint>
#include <vector>

#include "cars/tensor.hpp"

namespace cars {

// Low-level forward/backward kernels on NCHW tensors. All backward kernels
// accumulate into their gradient outputs; callers zero the buffers when a
// fresh gradient is wanted.

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Full convolution, weight layout [cout, cin, k, k], bias [cout].
void conv2d_fwd(const Tensor& x, const float* w, const float* b, int cout, int k, int stride,
                int pad, Tensor& y);
void conv2d_bwd(const Tensor& x, const float* w, int cout, int k, int stride, int pad,
                const Tensor& gy, Tensor* gx, float* gw, float* gb);

// Depthwise convolution, weight layout [c, k, k], no bias.
void dwconv2d_fwd(const Tensor& x, const float* w, int k, int stride, int pad, Tensor& y);
void dwconv2d_bwd(const Tensor& x, const float* w, int k, int stride, int pad, const Tensor& gy,
                  Tensor* gx, float* gw);

void relu_fwd(const Tensor& x, Tensor& y);
void relu_bwd(const Tensor& x, const Tensor& gy, Tensor& gx);

// Max pool over valid (non-padded) positions; argmax recorded for backward.
void maxpool_fwd(const Tensor& x, int k, int stride, int pad, Tensor& y,
                 std::vector<int32_t>& argmax);
void maxpool_bwd(const std::vector<int32_t>& argmax, const Tensor& gy, Tensor& gx);

// Average pool dividing by the count of valid positions in each window.
void avgpool_fwd(const Tensor& x, int k, int stride, int pad, Tensor& y);
void avgpool_bwd(const Tensor& x, int k, int stride, int pad, const Tensor& gy, Tensor& gx);

// Stride-2 spatial subsample that keeps the channel count: the first half of
// the channels reads offset (0,0), the second half offset (1,1).
void fac_reduce_fwd(const Tensor& x, Tensor& y);
void fac_reduce_bwd(const Tensor& x, const Tensor& gy, Tensor& gx);

// Fully connected, x [n, in], weight [out, in], bias [out].
void linear_fwd(const Tensor& x, const float* w, const float* b, int out, Tensor& y);
void linear_bwd(const Tensor& x, const float* w, int out, const Tensor& gy, Tensor* gx, float* gw,
                float* gb);

// Global average pool NCHW -> NC.
void gap_fwd(const Tensor& x, Tensor& y);
void gap_bwd(const Tensor& x, const Tensor& gy, Tensor& gx);

// Mean softmax cross-entropy over the batch. Returns mean loss; fills
// correct with the number of argmax hits (first max index wins ties).
float softmax_ce_fwd(const Tensor& logits, const std::vector<int>& targets, int* correct);
void softmax_ce_bwd(const Tensor& logits, const std::vector<int>& targets, float seed, Tensor& gx);

} // namespace cars
