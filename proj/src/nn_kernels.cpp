#include "cars/nn_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cars {

namespace {

inline void check_4d(const Tensor& x, const char* who) {
    if (x.shape.size() != 4) throw StructuralError(std::string(who) + ": expected NCHW tensor");
}

// Valid output range so that i = o*stride - pad + kk stays inside [0, in).
inline void out_range(int in, int out, int stride, int pad, int kk, int& lo, int& hi) {
    int first = pad - kk; // o*stride >= first
    lo = first <= 0 ? 0 : (first + stride - 1) / stride;
    int last = in - 1 + pad - kk; // o*stride <= last
    hi = last < 0 ? 0 : std::min(out, last / stride + 1);
    lo = std::min(lo, hi);
}

} // namespace

// ============================================================================
// conv2d
// ============================================================================

void conv2d_fwd(const Tensor& x, const float* w, const float* b, int cout, int k, int stride,
                int pad, Tensor& y) {
    check_4d(x, "conv2d");
    const int n = x.shape[0], cin = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int hout = conv_out_dim(hin, k, stride, pad);
    const int wout = conv_out_dim(win, k, stride, pad);
    if (hout < 1 || wout < 1) throw StructuralError("conv2d: input too small for kernel");
    y = Tensor({n, cout, hout, wout});

    const float* xd = x.data.data();
    float* yd = y.data.data();
    for (int in = 0; in < n; ++in) {
        for (int co = 0; co < cout; ++co) {
            float* yp = yd + (static_cast<size_t>(in) * cout + co) * hout * wout;
            const float bias = b ? b[co] : 0.0f;
            std::fill(yp, yp + static_cast<size_t>(hout) * wout, bias);
            for (int ci = 0; ci < cin; ++ci) {
                const float* xp = xd + (static_cast<size_t>(in) * cin + ci) * hin * win;
                const float* wp = w + (static_cast<size_t>(co) * cin + ci) * k * k;
                for (int kh = 0; kh < k; ++kh) {
                    int ho_lo, ho_hi;
                    out_range(hin, hout, stride, pad, kh, ho_lo, ho_hi);
                    for (int kw = 0; kw < k; ++kw) {
                        const float wv = wp[kh * k + kw];
                        if (wv == 0.0f) continue;
                        int wo_lo, wo_hi;
                        out_range(win, wout, stride, pad, kw, wo_lo, wo_hi);
                        for (int ho = ho_lo; ho < ho_hi; ++ho) {
                            const int hi = ho * stride - pad + kh;
                            float* yrow = yp + static_cast<size_t>(ho) * wout;
                            const float* xrow = xp + static_cast<size_t>(hi) * win - pad + kw;
                            if (stride == 1) {
                                for (int wo = wo_lo; wo < wo_hi; ++wo) yrow[wo] += wv * xrow[wo];
                            } else {
                                for (int wo = wo_lo; wo < wo_hi; ++wo)
                                    yrow[wo] += wv * xrow[wo * stride];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_bwd(const Tensor& x, const float* w, int cout, int k, int stride, int pad,
                const Tensor& gy, Tensor* gx, float* gw, float* gb) {
    const int n = x.shape[0], cin = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int hout = gy.shape[2], wout = gy.shape[3];
    const float* xd = x.data.data();
    const float* gyd = gy.data.data();

    if (gb) {
        for (int in = 0; in < n; ++in) {
            for (int co = 0; co < cout; ++co) {
                const float* gp = gyd + (static_cast<size_t>(in) * cout + co) * hout * wout;
                float acc = 0.0f;
                for (size_t i = 0; i < static_cast<size_t>(hout) * wout; ++i) acc += gp[i];
                gb[co] += acc;
            }
        }
    }

    for (int in = 0; in < n; ++in) {
        for (int co = 0; co < cout; ++co) {
            const float* gp = gyd + (static_cast<size_t>(in) * cout + co) * hout * wout;
            for (int ci = 0; ci < cin; ++ci) {
                const float* xp = xd + (static_cast<size_t>(in) * cin + ci) * hin * win;
                float* gxp =
                    gx ? gx->data.data() + (static_cast<size_t>(in) * cin + ci) * hin * win
                       : nullptr;
                const float* wp = w + (static_cast<size_t>(co) * cin + ci) * k * k;
                float* gwp = gw ? gw + (static_cast<size_t>(co) * cin + ci) * k * k : nullptr;
                for (int kh = 0; kh < k; ++kh) {
                    int ho_lo, ho_hi;
                    out_range(hin, hout, stride, pad, kh, ho_lo, ho_hi);
                    for (int kw = 0; kw < k; ++kw) {
                        int wo_lo, wo_hi;
                        out_range(win, wout, stride, pad, kw, wo_lo, wo_hi);
                        const float wv = wp[kh * k + kw];
                        float wacc = 0.0f;
                        for (int ho = ho_lo; ho < ho_hi; ++ho) {
                            const int hi = ho * stride - pad + kh;
                            const float* grow = gp + static_cast<size_t>(ho) * wout;
                            const float* xrow = xp + static_cast<size_t>(hi) * win - pad + kw;
                            float* gxrow =
                                gxp ? gxp + static_cast<size_t>(hi) * win - pad + kw : nullptr;
                            for (int wo = wo_lo; wo < wo_hi; ++wo) {
                                const float g = grow[wo];
                                wacc += g * xrow[wo * stride];
                                if (gxrow) gxrow[wo * stride] += wv * g;
                            }
                        }
                        if (gwp) gwp[kh * k + kw] += wacc;
                    }
                }
            }
        }
    }
}

// ============================================================================
// depthwise conv2d
// ============================================================================

void dwconv2d_fwd(const Tensor& x, const float* w, int k, int stride, int pad, Tensor& y) {
    check_4d(x, "dwconv2d");
    const int n = x.shape[0], c = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int hout = conv_out_dim(hin, k, stride, pad);
    const int wout = conv_out_dim(win, k, stride, pad);
    y = Tensor({n, c, hout, wout});
    for (int in = 0; in < n; ++in) {
        for (int ci = 0; ci < c; ++ci) {
            const float* xp = x.data.data() + (static_cast<size_t>(in) * c + ci) * hin * win;
            float* yp = y.data.data() + (static_cast<size_t>(in) * c + ci) * hout * wout;
            const float* wp = w + static_cast<size_t>(ci) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                int ho_lo, ho_hi;
                out_range(hin, hout, stride, pad, kh, ho_lo, ho_hi);
                for (int kw = 0; kw < k; ++kw) {
                    const float wv = wp[kh * k + kw];
                    int wo_lo, wo_hi;
                    out_range(win, wout, stride, pad, kw, wo_lo, wo_hi);
                    for (int ho = ho_lo; ho < ho_hi; ++ho) {
                        const int hi = ho * stride - pad + kh;
                        float* yrow = yp + static_cast<size_t>(ho) * wout;
                        const float* xrow = xp + static_cast<size_t>(hi) * win - pad + kw;
                        for (int wo = wo_lo; wo < wo_hi; ++wo) yrow[wo] += wv * xrow[wo * stride];
                    }
                }
            }
        }
    }
}

void dwconv2d_bwd(const Tensor& x, const float* w, int k, int stride, int pad, const Tensor& gy,
                  Tensor* gx, float* gw) {
    const int n = x.shape[0], c = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int hout = gy.shape[2], wout = gy.shape[3];
    for (int in = 0; in < n; ++in) {
        for (int ci = 0; ci < c; ++ci) {
            const float* xp = x.data.data() + (static_cast<size_t>(in) * c + ci) * hin * win;
            const float* gp = gy.data.data() + (static_cast<size_t>(in) * c + ci) * hout * wout;
            float* gxp =
                gx ? gx->data.data() + (static_cast<size_t>(in) * c + ci) * hin * win : nullptr;
            const float* wp = w + static_cast<size_t>(ci) * k * k;
            float* gwp = gw ? gw + static_cast<size_t>(ci) * k * k : nullptr;
            for (int kh = 0; kh < k; ++kh) {
                int ho_lo, ho_hi;
                out_range(hin, hout, stride, pad, kh, ho_lo, ho_hi);
                for (int kw = 0; kw < k; ++kw) {
                    int wo_lo, wo_hi;
                    out_range(win, wout, stride, pad, kw, wo_lo, wo_hi);
                    const float wv = wp[kh * k + kw];
                    float wacc = 0.0f;
                    for (int ho = ho_lo; ho < ho_hi; ++ho) {
                        const int hi = ho * stride - pad + kh;
                        const float* grow = gp + static_cast<size_t>(ho) * wout;
                        const float* xrow = xp + static_cast<size_t>(hi) * win - pad + kw;
                        float* gxrow = gxp ? gxp + static_cast<size_t>(hi) * win - pad + kw : nullptr;
                        for (int wo = wo_lo; wo < wo_hi; ++wo) {
                            const float g = grow[wo];
                            wacc += g * xrow[wo * stride];
                            if (gxrow) gxrow[wo * stride] += wv * g;
                        }
                    }
                    if (gwp) gwp[kh * k + kw] += wacc;
                }
            }
        }
    }
}

// ============================================================================
// relu / pooling / reshaping
// ============================================================================

void relu_fwd(const Tensor& x, Tensor& y) {
    y = Tensor(x.shape);
    for (size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > 0.0f ? x.data[i] : 0.0f;
}

void relu_bwd(const Tensor& x, const Tensor& gy, Tensor& gx) {
    for (size_t i = 0; i < x.numel(); ++i) {
        if (x.data[i] > 0.0f) gx.data[i] += gy.data[i];
    }
}

void maxpool_fwd(const Tensor& x, int k, int stride, int pad, Tensor& y,
                 std::vector<int32_t>& argmax) {
    check_4d(x, "maxpool");
    const int n = x.shape[0], c = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int hout = conv_out_dim(hin, k, stride, pad);
    const int wout = conv_out_dim(win, k, stride, pad);
    y = Tensor({n, c, hout, wout});
    argmax.assign(y.numel(), -1);
    size_t oi = 0;
    for (int in = 0; in < n; ++in) {
        for (int ci = 0; ci < c; ++ci) {
            const size_t base = (static_cast<size_t>(in) * c + ci) * hin * win;
            const float* xp = x.data.data() + base;
            for (int ho = 0; ho < hout; ++ho) {
                for (int wo = 0; wo < wout; ++wo, ++oi) {
                    float best = -std::numeric_limits<float>::infinity();
                    int32_t best_i = -1;
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * stride - pad + kh;
                        if (hi < 0 || hi >= hin) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * stride - pad + kw;
                            if (wi < 0 || wi >= win) continue;
                            const float v = xp[hi * win + wi];
                            if (v > best) {
                                best = v;
                                best_i = static_cast<int32_t>(base) + hi * win + wi;
                            }
                        }
                    }
                    y.data[oi] = best;
                    argmax[oi] = best_i;
                }
            }
        }
    }
}

void maxpool_bwd(const std::vector<int32_t>& argmax, const Tensor& gy, Tensor& gx) {
    for (size_t i = 0; i < gy.numel(); ++i) {
        if (argmax[i] >= 0) gx.data[static_cast<size_t>(argmax[i])] += gy.data[i];
    }
}

void avgpool_fwd(const Tensor& x, int k, int stride, int pad, Tensor& y) {
    check_4d(x, "avgpool");
    const int n = x.shape[0], c = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int hout = conv_out_dim(hin, k, stride, pad);
    const int wout = conv_out_dim(win, k, stride, pad);
    y = Tensor({n, c, hout, wout});
    size_t oi = 0;
    for (int in = 0; in < n; ++in) {
        for (int ci = 0; ci < c; ++ci) {
            const float* xp = x.data.data() + (static_cast<size_t>(in) * c + ci) * hin * win;
            for (int ho = 0; ho < hout; ++ho) {
                for (int wo = 0; wo < wout; ++wo, ++oi) {
                    float acc = 0.0f;
                    int cnt = 0;
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * stride - pad + kh;
                        if (hi < 0 || hi >= hin) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * stride - pad + kw;
                            if (wi < 0 || wi >= win) continue;
                            acc += xp[hi * win + wi];
                            ++cnt;
                        }
                    }
                    y.data[oi] = acc / static_cast<float>(cnt);
                }
            }
        }
    }
}

void avgpool_bwd(const Tensor& x, int k, int stride, int pad, const Tensor& gy, Tensor& gx) {
    const int n = x.shape[0], c = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int hout = gy.shape[2], wout = gy.shape[3];
    size_t oi = 0;
    for (int in = 0; in < n; ++in) {
        for (int ci = 0; ci < c; ++ci) {
            float* gxp = gx.data.data() + (static_cast<size_t>(in) * c + ci) * hin * win;
            for (int ho = 0; ho < hout; ++ho) {
                for (int wo = 0; wo < wout; ++wo, ++oi) {
                    int cnt = 0;
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * stride - pad + kh;
                        if (hi < 0 || hi >= hin) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * stride - pad + kw;
                            if (wi >= 0 && wi < win) ++cnt;
                        }
                    }
                    const float g = gy.data[oi] / static_cast<float>(cnt);
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * stride - pad + kh;
                        if (hi < 0 || hi >= hin) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * stride - pad + kw;
                            if (wi >= 0 && wi < win) gxp[hi * win + wi] += g;
                        }
                    }
                }
            }
        }
    }
}

void fac_reduce_fwd(const Tensor& x, Tensor& y) {
    check_4d(x, "fac_reduce");
    const int n = x.shape[0], c = x.shape[1], hin = x.shape[2], win = x.shape[3];
    if (c % 2 != 0) throw StructuralError("fac_reduce: channel count must be even");
    const int hout = hin / 2, wout = win / 2;
    y = Tensor({n, c, hout, wout});
    for (int in = 0; in < n; ++in) {
        for (int ci = 0; ci < c; ++ci) {
            const int off = ci < c / 2 ? 0 : 1;
            const float* xp = x.data.data() + (static_cast<size_t>(in) * c + ci) * hin * win;
            float* yp = y.data.data() + (static_cast<size_t>(in) * c + ci) * hout * wout;
            for (int ho = 0; ho < hout; ++ho) {
                const float* xrow = xp + static_cast<size_t>(2 * ho + off) * win + off;
                for (int wo = 0; wo < wout; ++wo) yp[ho * wout + wo] = xrow[2 * wo];
            }
        }
    }
}

void fac_reduce_bwd(const Tensor& x, const Tensor& gy, Tensor& gx) {
    const int n = x.shape[0], c = x.shape[1], hin = x.shape[2], win = x.shape[3];
    const int hout = gy.shape[2], wout = gy.shape[3];
    for (int in = 0; in < n; ++in) {
        for (int ci = 0; ci < c; ++ci) {
            const int off = ci < c / 2 ? 0 : 1;
            float* gxp = gx.data.data() + (static_cast<size_t>(in) * c + ci) * hin * win;
            const float* gp = gy.data.data() + (static_cast<size_t>(in) * c + ci) * hout * wout;
            for (int ho = 0; ho < hout; ++ho) {
                float* gxrow = gxp + static_cast<size_t>(2 * ho + off) * win + off;
                for (int wo = 0; wo < wout; ++wo) gxrow[2 * wo] += gp[ho * wout + wo];
            }
        }
    }
}

// ============================================================================
// linear / gap / loss
// ============================================================================

void linear_fwd(const Tensor& x, const float* w, const float* b, int out, Tensor& y) {
    if (x.shape.size() != 2) throw StructuralError("linear: expected 2-d input");
    const int n = x.shape[0], in = x.shape[1];
    y = Tensor({n, out});
    for (int i = 0; i < n; ++i) {
        const float* xp = x.data.data() + static_cast<size_t>(i) * in;
        float* yp = y.data.data() + static_cast<size_t>(i) * out;
        for (int o = 0; o < out; ++o) {
            const float* wp = w + static_cast<size_t>(o) * in;
            float acc = b ? b[o] : 0.0f;
            for (int j = 0; j < in; ++j) acc += wp[j] * xp[j];
            yp[o] = acc;
        }
    }
}

void linear_bwd(const Tensor& x, const float* w, int out, const Tensor& gy, Tensor* gx, float* gw,
                float* gb) {
    const int n = x.shape[0], in = x.shape[1];
    for (int i = 0; i < n; ++i) {
        const float* xp = x.data.data() + static_cast<size_t>(i) * in;
        const float* gp = gy.data.data() + static_cast<size_t>(i) * out;
        float* gxp = gx ? gx->data.data() + static_cast<size_t>(i) * in : nullptr;
        for (int o = 0; o < out; ++o) {
            const float g = gp[o];
            if (gb) gb[o] += g;
            const float* wp = w + static_cast<size_t>(o) * in;
            float* gwp = gw ? gw + static_cast<size_t>(o) * in : nullptr;
            for (int j = 0; j < in; ++j) {
                if (gwp) gwp[j] += g * xp[j];
                if (gxp) gxp[j] += g * wp[j];
            }
        }
    }
}

void gap_fwd(const Tensor& x, Tensor& y) {
    check_4d(x, "gap");
    const int n = x.shape[0], c = x.shape[1];
    const size_t hw = static_cast<size_t>(x.shape[2]) * x.shape[3];
    y = Tensor({n, c});
    for (int i = 0; i < n; ++i) {
        for (int ci = 0; ci < c; ++ci) {
            const float* xp = x.data.data() + (static_cast<size_t>(i) * c + ci) * hw;
            double acc = 0.0;
            for (size_t j = 0; j < hw; ++j) acc += xp[j];
            y.data[static_cast<size_t>(i) * c + ci] = static_cast<float>(acc / static_cast<double>(hw));
        }
    }
}

void gap_bwd(const Tensor& x, const Tensor& gy, Tensor& gx) {
    const int n = x.shape[0], c = x.shape[1];
    const size_t hw = static_cast<size_t>(x.shape[2]) * x.shape[3];
    const float inv = 1.0f / static_cast<float>(hw);
    for (int i = 0; i < n; ++i) {
        for (int ci = 0; ci < c; ++ci) {
            const float g = gy.data[static_cast<size_t>(i) * c + ci] * inv;
            float* gxp = gx.data.data() + (static_cast<size_t>(i) * c + ci) * hw;
            for (size_t j = 0; j < hw; ++j) gxp[j] += g;
        }
    }
}

float softmax_ce_fwd(const Tensor& logits, const std::vector<int>& targets, int* correct) {
    if (logits.shape.size() != 2) throw StructuralError("cross_entropy: expected [n, classes]");
    const int n = logits.shape[0], c = logits.shape[1];
    if (static_cast<int>(targets.size()) != n)
        throw StructuralError("cross_entropy: batch/targets size mismatch");
    double total = 0.0;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const int t = targets[i];
        if (t < 0 || t >= c) throw DataError("label out of range: " + std::to_string(t));
        const float* lp = logits.data.data() + static_cast<size_t>(i) * c;
        float mx = lp[0];
        int arg = 0;
        for (int j = 1; j < c; ++j) {
            if (lp[j] > mx) {
                mx = lp[j];
                arg = j;
            }
        }
        double sum = 0.0;
        for (int j = 0; j < c; ++j) sum += std::exp(static_cast<double>(lp[j] - mx));
        total += std::log(sum) - static_cast<double>(lp[t] - mx);
        if (arg == t) ++hits;
    }
    if (correct) *correct = hits;
    return static_cast<float>(total / n);
}

void softmax_ce_bwd(const Tensor& logits, const std::vector<int>& targets, float seed, Tensor& gx) {
    const int n = logits.shape[0], c = logits.shape[1];
    const float scale = seed / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        const float* lp = logits.data.data() + static_cast<size_t>(i) * c;
        float* gp = gx.data.data() + static_cast<size_t>(i) * c;
        float mx = lp[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, lp[j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) sum += std::exp(static_cast<double>(lp[j] - mx));
        for (int j = 0; j < c; ++j) {
            const float p = static_cast<float>(std::exp(static_cast<double>(lp[j] - mx)) / sum);
            gp[j] += scale * (p - (j == targets[i] ? 1.0f : 0.0f));
        }
    }
}

} // namespace cars
