#include "xsim/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

// Parallelisation rule: every kernel splits work over the dimension that owns
// its output elements (output channel, input channel, ...), so each element is
// written by one thread with a fixed accumulation order. Results are identical
// for any OMP_NUM_THREADS, which keeps seeded runs reproducible.

namespace xsim::kernels {

namespace {

inline int floor_div(int a, int b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

inline int ceil_div(int a, int b) {
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

// Output rows y with y*stride - pad + k_off inside [0, in_dim).
inline void valid_range(int out_dim, int in_dim, int stride, int pad, int k_off,
                        int* lo, int* hi) {
    *lo = std::max(0, ceil_div(pad - k_off, stride));
    *hi = std::min(out_dim - 1, floor_div(in_dim - 1 + pad - k_off, stride));
}

}  // namespace

void conv2d_forward(const double* in, int ic, int ih, int iw,
                    const double* w, const double* bias,
                    int oc, int k, int stride, int pad,
                    double* out) {
    const int oh = conv_out_dim(ih, k, stride, pad);
    const int ow = conv_out_dim(iw, k, stride, pad);
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;

#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        double* out_o = out + o * plane;
        const double b = bias ? bias[o] : 0.0;
        std::fill(out_o, out_o + plane, b);
        for (int c = 0; c < ic; ++c) {
            const double* in_c = in + static_cast<std::size_t>(c) * ih * iw;
            const double* w_oc = w + (static_cast<std::size_t>(o) * ic + c) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                int y_lo, y_hi;
                valid_range(oh, ih, stride, pad, kh, &y_lo, &y_hi);
                for (int kw = 0; kw < k; ++kw) {
                    const double wv = w_oc[kh * k + kw];
                    int x_lo, x_hi;
                    valid_range(ow, iw, stride, pad, kw, &x_lo, &x_hi);
                    for (int y = y_lo; y <= y_hi; ++y) {
                        const int yy = y * stride - pad + kh;
                        const double* src = in_c + yy * iw - pad + kw;
                        double* dst = out_o + y * ow;
                        if (stride == 1) {
                            for (int x = x_lo; x <= x_hi; ++x) dst[x] += wv * src[x];
                        } else {
                            for (int x = x_lo; x <= x_hi; ++x) dst[x] += wv * src[x * stride];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(const double* dout, int oc, int oh, int ow,
                           const double* w, int ic, int k, int stride, int pad,
                           double* din, int ih, int iw) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ic; ++c) {
        double* din_c = din + static_cast<std::size_t>(c) * ih * iw;
        std::memset(din_c, 0, sizeof(double) * static_cast<std::size_t>(ih) * iw);
        for (int o = 0; o < oc; ++o) {
            const double* dout_o = dout + static_cast<std::size_t>(o) * oh * ow;
            const double* w_oc = w + (static_cast<std::size_t>(o) * ic + c) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                int y_lo, y_hi;
                valid_range(oh, ih, stride, pad, kh, &y_lo, &y_hi);
                for (int kw = 0; kw < k; ++kw) {
                    const double wv = w_oc[kh * k + kw];
                    int x_lo, x_hi;
                    valid_range(ow, iw, stride, pad, kw, &x_lo, &x_hi);
                    for (int y = y_lo; y <= y_hi; ++y) {
                        const int yy = y * stride - pad + kh;
                        double* dst = din_c + yy * iw - pad + kw;
                        const double* src = dout_o + y * ow;
                        if (stride == 1) {
                            for (int x = x_lo; x <= x_hi; ++x) dst[x] += wv * src[x];
                        } else {
                            for (int x = x_lo; x <= x_hi; ++x) dst[x * stride] += wv * src[x];
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
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        const double* dout_o = dout + static_cast<std::size_t>(o) * oh * ow;
        for (int c = 0; c < ic; ++c) {
            const double* in_c = in + static_cast<std::size_t>(c) * ih * iw;
            double* dw_oc = dw + (static_cast<std::size_t>(o) * ic + c) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                int y_lo, y_hi;
                valid_range(oh, ih, stride, pad, kh, &y_lo, &y_hi);
                for (int kw = 0; kw < k; ++kw) {
                    int x_lo, x_hi;
                    valid_range(ow, iw, stride, pad, kw, &x_lo, &x_hi);
                    double acc = 0.0;
                    for (int y = y_lo; y <= y_hi; ++y) {
                        const int yy = y * stride - pad + kh;
                        const double* src = in_c + yy * iw - pad + kw;
                        const double* g = dout_o + y * ow;
                        if (stride == 1) {
                            for (int x = x_lo; x <= x_hi; ++x) acc += g[x] * src[x];
                        } else {
                            for (int x = x_lo; x <= x_hi; ++x) acc += g[x] * src[x * stride];
                        }
                    }
                    dw_oc[kh * k + kw] += acc;
                }
            }
        }
        if (dbias) {
            double acc = 0.0;
            for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) acc += dout_o[i];
            dbias[o] += acc;
        }
    }
}

void dense_forward(const double* in, int n_in,
                   const double* w, const double* bias, int n_out,
                   double* out) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < n_out; ++o) {
        const double* row = w + static_cast<std::size_t>(o) * n_in;
        double acc = bias ? bias[o] : 0.0;
        for (int i = 0; i < n_in; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
}

void dense_backward_input(const double* dout, int n_out,
                          const double* w, int n_in,
                          double* din) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_in; ++i) {
        double acc = 0.0;
        for (int o = 0; o < n_out; ++o) acc += w[static_cast<std::size_t>(o) * n_in + i] * dout[o];
        din[i] = acc;
    }
}

void dense_backward_params(const double* dout, int n_out,
                           const double* in, int n_in,
                           double* dw, double* dbias) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < n_out; ++o) {
        double* row = dw + static_cast<std::size_t>(o) * n_in;
        const double g = dout[o];
        for (int i = 0; i < n_in; ++i) row[i] += g * in[i];
        if (dbias) dbias[o] += g;
    }
}

void relu_forward(const double* x, std::int64_t n, double* y) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* dy, const double* x, std::int64_t n, double* dx) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void maxpool_forward(const double* in, int c, int ih, int iw,
                     int k, int stride, int pad,
                     double* out, int oh, int ow, int* argmax) {
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const double* src = in + static_cast<std::size_t>(ch) * ih * iw;
        double* dst = out + static_cast<std::size_t>(ch) * oh * ow;
        int* arg = argmax + static_cast<std::size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            const int yy0 = std::max(0, y * stride - pad);
            const int yy1 = std::min(ih, y * stride - pad + k);
            for (int x = 0; x < ow; ++x) {
                const int xx0 = std::max(0, x * stride - pad);
                const int xx1 = std::min(iw, x * stride - pad + k);
                double best = -HUGE_VAL;
                int best_idx = -1;
                for (int yy = yy0; yy < yy1; ++yy) {
                    for (int xx = xx0; xx < xx1; ++xx) {
                        const double v = src[yy * iw + xx];
                        if (v > best) {
                            best = v;
                            best_idx = yy * iw + xx;
                        }
                    }
                }
                dst[y * ow + x] = best;
                arg[y * ow + x] = best_idx;
            }
        }
    }
}

void maxpool_backward(const double* dout, const int* argmax,
                      int c, int oh, int ow,
                      double* din, int ih, int iw) {
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        double* dst = din + static_cast<std::size_t>(ch) * ih * iw;
        std::memset(dst, 0, sizeof(double) * static_cast<std::size_t>(ih) * iw);
        const double* g = dout + static_cast<std::size_t>(ch) * oh * ow;
        const int* arg = argmax + static_cast<std::size_t>(ch) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) dst[arg[i]] += g[i];
    }
}

void global_avg_pool_forward(const double* in, int c, int h, int w, double* out) {
    const double inv = 1.0 / (static_cast<double>(h) * w);
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const double* src = in + static_cast<std::size_t>(ch) * h * w;
        double acc = 0.0;
        for (int i = 0; i < h * w; ++i) acc += src[i];
        out[ch] = acc * inv;
    }
}

void global_avg_pool_backward(const double* dout, int c, int h, int w, double* din) {
    const double inv = 1.0 / (static_cast<double>(h) * w);
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        double* dst = din + static_cast<std::size_t>(ch) * h * w;
        const double g = dout[ch] * inv;
        for (int i = 0; i < h * w; ++i) dst[i] = g;
    }
}

void batchnorm_forward(const double* in, int c, int h, int w,
                       const double* gamma, const double* beta,
                       const double* mean, const double* var, double eps,
                       double* out) {
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const double inv_std = 1.0 / std::sqrt(var[ch] + eps);
        const double g = gamma[ch] * inv_std;
        const double b = beta[ch] - mean[ch] * g;
        const double* src = in + static_cast<std::size_t>(ch) * h * w;
        double* dst = out + static_cast<std::size_t>(ch) * h * w;
        for (int i = 0; i < h * w; ++i) dst[i] = g * src[i] + b;
    }
}

void batchnorm_backward(const double* dout, const double* in, int c, int h, int w,
                        const double* gamma, const double* mean, const double* var,
                        double eps,
                        double* din, double* dgamma, double* dbeta) {
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const double inv_std = 1.0 / std::sqrt(var[ch] + eps);
        const double g = gamma[ch] * inv_std;
        const double* dy = dout + static_cast<std::size_t>(ch) * h * w;
        const double* x = in + static_cast<std::size_t>(ch) * h * w;
        double* dx = din + static_cast<std::size_t>(ch) * h * w;
        double acc_g = 0.0;
        double acc_b = 0.0;
        for (int i = 0; i < h * w; ++i) {
            dx[i] = dy[i] * g;
            acc_g += dy[i] * (x[i] - mean[ch]) * inv_std;
            acc_b += dy[i];
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
#pragma omp parallel for schedule(static)
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

}  // namespace xsim::kernels
