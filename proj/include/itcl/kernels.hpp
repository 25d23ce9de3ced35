#pragma once

#include <cstdint>

namespace itcl::kernels {

// Execution backend for the hot kernels. Every kernel has a serial reference
// implementation and an OpenMP one; both produce bit-identical results
// because each output element is reduced in the same fixed order. The serial
// path is kept for testing and benchmarking against the parallel one.
enum class Exec { serial, openmp };

Exec default_exec();
void set_default_exec(Exec e);
int max_threads();

int conv_out_side(int side, int k, int stride, int pad);

// y[n,oc,oh,ow] = sum_{ic,kh,kw} x[n,ic,oh*stride-pad+kh, ow*stride-pad+kw] * w[oc,ic,kh,kw]
void conv2d_forward(const double* x, int n, int c, int h, int w,
                    const double* wt, int oc, int k, int stride, int pad,
                    double* y, Exec e);
// gx (shape of x) is overwritten.
void conv2d_backward_input(const double* gy, int n, int c, int h, int w,
                           const double* wt, int oc, int k, int stride, int pad,
                           double* gx, Exec e);
// gw [oc,c,k,k] is accumulated into.
void conv2d_backward_weight(const double* gy, const double* x, int n, int c, int h, int w,
                            int oc, int k, int stride, int pad,
                            double* gw, Exec e);

// y[n,o] = b[o] + sum_i x[n,i] * w[o,i]   (w stored [out,in], b may be null)
void linear_forward(const double* x, int n, int in, const double* w, const double* b,
                    int out, double* y, Exec e);
// gx [n,in] overwritten.
void linear_backward_input(const double* gy, const double* w, int n, int in, int out,
                           double* gx, Exec e);
// gw [out,in] and gb [out] accumulated into (gb may be null).
void linear_backward_params(const double* gy, const double* x, int n, int in, int out,
                            double* gw, double* gb, Exec e);

} // namespace itcl::kernels
