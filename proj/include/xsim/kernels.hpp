#pragma once

#include <cstdint>

// Compute kernels for the network layers, in two flavours:
//
//   xsim::kernels       OpenMP-parallel versions used by the layers. Each
//                       output element is owned by exactly one thread and its
//                       inner accumulation order is fixed, so results do not
//                       depend on the thread count.
//   xsim::kernels::ref  Plain serial loop-nest implementations kept as the
//                       correctness reference for the parallel versions.
//
// Layout conventions: feature maps are [C,H,W] row-major, conv weights
// [OC,IC,K,K], dense weights [OUT,IN]. Backward-input kernels overwrite
// their destination; backward-parameter kernels accumulate (+=) so batches
// can sum gradients across samples.

namespace xsim::kernels {

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

void conv2d_forward(const double* in, int ic, int ih, int iw,
                    const double* w, const double* bias,
                    int oc, int k, int stride, int pad,
                    double* out);

void conv2d_backward_input(const double* dout, int oc, int oh, int ow,
                           const double* w, int ic, int k, int stride, int pad,
                           double* din, int ih, int iw);

void conv2d_backward_params(const double* dout, int oc, int oh, int ow,
                            const double* in, int ic, int ih, int iw,
                            int k, int stride, int pad,
                            double* dw, double* dbias);

void dense_forward(const double* in, int n_in,
                   const double* w, const double* bias, int n_out,
                   double* out);

void dense_backward_input(const double* dout, int n_out,
                          const double* w, int n_in,
                          double* din);

void dense_backward_params(const double* dout, int n_out,
                           const double* in, int n_in,
                           double* dw, double* dbias);

void relu_forward(const double* x, std::int64_t n, double* y);

void relu_backward(const double* dy, const double* x, std::int64_t n, double* dx);

// argmax records the flat within-channel input index of each window maximum
// (first maximum in scan order on ties). Window cells outside the input are
// ignored, which matches implicit -inf padding.
void maxpool_forward(const double* in, int c, int ih, int iw,
                     int k, int stride, int pad,
                     double* out, int oh, int ow, int* argmax);

void maxpool_backward(const double* dout, const int* argmax,
                      int c, int oh, int ow,
                      double* din, int ih, int iw);

void global_avg_pool_forward(const double* in, int c, int h, int w, double* out);

void global_avg_pool_backward(const double* dout, int c, int h, int w, double* din);

// Batch norm as used here: stored running statistics, trainable affine.
// Statistics are treated as constants by the backward pass.
void batchnorm_forward(const double* in, int c, int h, int w,
                       const double* gamma, const double* beta,
                       const double* mean, const double* var, double eps,
                       double* out);

void batchnorm_backward(const double* dout, const double* in, int c, int h, int w,
                        const double* gamma, const double* mean, const double* var,
                        double eps,
                        double* din, double* dgamma, double* dbeta);

// Single-channel bilinear resize (half-pixel-centred sampling). Used to bring
// heatmaps from feature-map resolution up to input resolution.
void bilinear_resize(const double* in, int h, int w, double* out, int oh, int ow);

}  // namespace xsim::kernels

namespace xsim::kernels::ref {

void conv2d_forward(const double* in, int ic, int ih, int iw,
                    const double* w, const double* bias,
                    int oc, int k, int stride, int pad,
                    double* out);

void conv2d_backward_input(const double* dout, int oc, int oh, int ow,
                           const double* w, int ic, int k, int stride, int pad,
                           double* din, int ih, int iw);

void conv2d_backward_params(const double* dout, int oc, int oh, int ow,
                            const double* in, int ic, int ih, int iw,
                            int k, int stride, int pad,
                            double* dw, double* dbias);

void dense_forward(const double* in, int n_in,
                   const double* w, const double* bias, int n_out,
                   double* out);

void dense_backward_input(const double* dout, int n_out,
                          const double* w, int n_in,
                          double* din);

void dense_backward_params(const double* dout, int n_out,
                           const double* in, int n_in,
                           double* dw, double* dbias);

void relu_forward(const double* x, std::int64_t n, double* y);

void relu_backward(const double* dy, const double* x, std::int64_t n, double* dx);

void maxpool_forward(const double* in, int c, int ih, int iw,
                     int k, int stride, int pad,
                     double* out, int oh, int ow, int* argmax);

void maxpool_backward(const double* dout, const int* argmax,
                      int c, int oh, int ow,
                      double* din, int ih, int iw);

void global_avg_pool_forward(const double* in, int c, int h, int w, double* out);

void global_avg_pool_backward(const double* dout, int c, int h, int w, double* din);

void batchnorm_forward(const double* in, int c, int h, int w,
                       const double* gamma, const double* beta,
                       const double* mean, const double* var, double eps,
                       double* out);

void batchnorm_backward(const double* dout, const double* in, int c, int h, int w,
                        const double* gamma, const double* mean, const double* var,
                        double eps,
                        double* din, double* dgamma, double* dbeta);

void bilinear_resize(const double* in, int h, int w, double* out, int oh, int ow);

}  // namespace xsim::kernels::ref
