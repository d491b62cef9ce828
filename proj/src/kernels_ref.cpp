#include "xsim/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

// Textbook loop nests, one output element at a time. These stay deliberately
// naive; the parallel kernels are validated against them.

namespace xsim::kernels::ref {

void conv2d_forward(const double* in, int ic, int ih, int iw,
                    const double* w, const double* bias,
                    int oc, int k, int stride, int pad,
                    double* out) {
    const int oh = conv_out_dim(ih, k, stride, pad);
    const int ow = conv_out_dim(iw, k, stride, pad);
    for (int o = 0; o < oc; ++o) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double acc = bias ? bias[o] : 0.0;
                for (int c = 0; c < ic; ++c) {
                    for (int kh = 0; kh < k; ++kh) {
                        const int yy = y * stride - pad + kh;
                        if (yy < 0 || yy >= ih) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int xx = x * stride - pad + kw;
                            if (xx < 0 || xx >= iw) continue;
                            acc += w[((o * ic + c) * k + kh) * k + kw] *
                                   in[(c * ih + yy) * iw + xx];
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
}

void conv2d_backward_input(const double* dout, int oc, int oh, int ow,
                           const double* w, int ic, int k, int stride, int pad,
                           double* din, int ih, int iw) {
    std::memset(din, 0, sizeof(double) * static_cast<std::size_t>(ic) * ih * iw);
    for (int o = 0; o < oc; ++o) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const double g = dout[(o * oh + y) * ow + x];
                for (int c = 0; c < ic; ++c) {
                    for (int kh = 0; kh < k; ++kh) {
                        const int yy = y * stride - pad + kh;
                        if (yy < 0 || yy >= ih) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int xx = x * stride - pad + kw;
                            if (xx < 0 || xx >= iw) continue;
                            din[(c * ih + yy) * iw + xx] +=
                                g * w[((o * ic + c) * k + kh) * k + kw];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_params(const double* dout, int oc, int oh, int ow,
                            const double* in, int ic, int ih, int iw,
                            int k, int stride, int pad,
                            double* dw, double* dbias) {
    for (int o = 0; o < oc; ++o) {
        for (int c = 0; c < ic; ++c) {
            for (int kh = 0; kh < k; ++kh) {
                for (int kw = 0; kw < k; ++kw) {
                    double acc = 0.0;
                    for (int y = 0; y < oh; ++y) {
                        const int yy = y * stride - pad + kh;
                        if (yy < 0 || yy >= ih) continue;
                        for (int x = 0; x < ow; ++x) {
                            const int xx = x * stride - pad + kw;
                            if (xx < 0 || xx >= iw) continue;
                            acc += dout[(o * oh + y) * ow + x] *
                                   in[(c * ih + yy) * iw + xx];
                        }
                    }
                    dw[((o * ic + c) * k + kh) * k + kw] += acc;
                }
            }
        }
        if (dbias) {
            double acc = 0.0;
            for (int i = 0; i < oh * ow; ++i) acc += dout[o * oh * ow + i];
            dbias[o] += acc;
        }
    }
}

void dense_forward(const double* in, int n_in,
                   const double* w, const double* bias, int n_out,
                   double* out) {
    for (int o = 0; o < n_out; ++o) {
        double acc = bias ? bias[o] : 0.0;
        for (int i = 0; i < n_in; ++i) acc += w[o * n_in + i] * in[i];
        out[o] = acc;
    }
}

void dense_backward_input(const double* dout, int n_out,
                          const double* w, int n_in,
                          double* din) {
    for (int i = 0; i < n_in; ++i) {
        double acc = 0.0;
        for (int o = 0; o < n_out; ++o) acc += w[o * n_in + i] * dout[o];
        din[i] = acc;
    }
}

void dense_backward_params(const double* dout, int n_out,
                           const double* in, int n_in,
                           double* dw, double* dbias) {
    for (int o = 0; o < n_out; ++o) {
        for (int i = 0; i < n_in; ++i) dw[o * n_in + i] += dout[o] * in[i];
        if (dbias) dbias[o] += dout[o];
    }
}

void relu_forward(const double* x, std::int64_t n, double* y) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* dy, const double* x, std::int64_t n, double* dx) {
    for (std::int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void maxpool_forward(const double* in, int c, int ih, int iw,
                     int k, int stride, int pad,
                     double* out, int oh, int ow, int* argmax) {
    for (int ch = 0; ch < c; ++ch) {
        const double* src = in + static_cast<std::size_t>(ch) * ih * iw;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double best = -HUGE_VAL;
                int best_idx = -1;
                for (int kh = 0; kh < k; ++kh) {
                    const int yy = y * stride - pad + kh;
                    if (yy < 0 || yy >= ih) continue;
                    for (int kw = 0; kw < k; ++kw) {
                        const int xx = x * stride - pad + kw;
                        if (xx < 0 || xx >= iw) continue;
                        const double v = src[yy * iw + xx];
                        if (v > best) {
                            best = v;
                            best_idx = yy * iw + xx;
                        }
                    }
                }
                out[(ch * oh + y) * ow + x] = best;
                argmax[(ch * oh + y) * ow + x] = best_idx;
            }
        }
    }
}

void maxpool_backward(const double* dout, const int* argmax,
                      int c, int oh, int ow,
                      double* din, int ih, int iw) {
    std::memset(din, 0, sizeof(double) * static_cast<std::size_t>(c) * ih * iw);
    for (int ch = 0; ch < c; ++ch) {
        double* dst = din + static_cast<std::size_t>(ch) * ih * iw;
        for (int i = 0; i < oh * ow; ++i) {
            dst[argmax[ch * oh * ow + i]] += dout[ch * oh * ow + i];
        }
    }
}

void global_avg_pool_forward(const double* in, int c, int h, int w, double* out) {
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int i = 0; i < h * w; ++i) acc += in[ch * h * w + i];
        out[ch] = acc * inv;
    }
}

void global_avg_pool_backward(const double* dout, int c, int h, int w, double* din) {
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        const double g = dout[ch] * inv;
        for (int i = 0; i < h * w; ++i) din[ch * h * w + i] = g;
    }
}

void batchnorm_forward(const double* in, int c, int h, int w,
                       const double* gamma, const double* beta,
                       const double* mean, const double* var, double eps,
                       double* out) {
    for (int ch = 0; ch < c; ++ch) {
        const double inv_std = 1.0 / std::sqrt(var[ch] + eps);
        const double g = gamma[ch] * inv_std;
        const double b = beta[ch] - mean[ch] * g;
        for (int i = 0; i < h * w; ++i) {
            out[ch * h * w + i] = g * in[ch * h * w + i] + b;
        }
    }
}

void batchnorm_backward(const double* dout, const double* in, int c, int h, int w,
                        const double* gamma, const double* mean, const double* var,
                        double eps,
                        double* din, double* dgamma, double* dbeta) {
    for (int ch = 0; ch < c; ++ch) {
        const double inv_std = 1.0 / std::sqrt(var[ch] + eps);
        const double g = gamma[ch] * inv_std;
        double acc_g = 0.0;
        double acc_b = 0.0;
        for (int i = 0; i < h * w; ++i) {
            const double dy = dout[ch * h * w + i];
            din[ch * h * w + i] = dy * g;
            acc_g += dy * (in[ch * h * w + i] - mean[ch]) * inv_std;
            acc_b += dy;
        }
        dgamma[ch] += acc_g;
        dbeta[ch] += acc_b;
    }
}

void bilinear_resize(const double* in, int h, int w, double* out, int oh, int ow) {
    if (h == oh && w == ow) {
        std::memcpy(out, in, sizeof(double) * static_cast<std::size_t>(h) * w);
        return;
    }
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
    for (int y = 0; y < oh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < ow; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            const double top = in[y0 * w + x0] * (1.0 - wx) + in[y0 * w + x1] * wx;
            const double bot = in[y1 * w + x0] * (1.0 - wx) + in[y1 * w + x1] * wx;
            out[y * ow + x] = top * (1.0 - wy) + bot * wy;
        }
    }
}

}  // namespace xsim::kernels::ref
