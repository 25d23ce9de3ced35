#include "itcl/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace itcl::kernels {

namespace {
#ifdef _OPENMP
Exec g_exec = Exec::openmp;
#else
Exec g_exec = Exec::serial;
#endif
} // namespace

Exec default_exec() { return g_exec; }
void set_default_exec(Exec e) { g_exec = e; }

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int conv_out_side(int side, int k, int stride, int pad) {
    return (side + 2 * pad - k) / stride + 1;
}

// ---------------------------------------------------------------------------
// conv2d forward
// ---------------------------------------------------------------------------

namespace {

inline double conv_cell(const double* x, int c, int h, int w,
                        const double* wrow, int k, int stride, int pad,
                        int i, int j) {
    double acc = 0.0;
    const int ih0 = i * stride - pad;
    const int iw0 = j * stride - pad;
    for (int ic = 0; ic < c; ++ic) {
        const double* xplane = x + static_cast<int64_t>(ic) * h * w;
        const double* wplane = wrow + static_cast<int64_t>(ic) * k * k;
        for (int kh = 0; kh < k; ++kh) {
            const int ih = ih0 + kh;
            if (ih < 0 || ih >= h) continue;
            const double* xrow = xplane + static_cast<int64_t>(ih) * w;
            const double* wr = wplane + static_cast<int64_t>(kh) * k;
            for (int kw = 0; kw < k; ++kw) {
                const int iw = iw0 + kw;
                if (iw < 0 || iw >= w) continue;
                acc += xrow[iw] * wr[kw];
            }
        }
    }
    return acc;
}

void conv2d_forward_serial(const double* x, int n, int c, int h, int w,
                           const double* wt, int oc, int k, int stride, int pad,
                           double* y) {
    const int oh = conv_out_side(h, k, stride, pad);
    const int ow = conv_out_side(w, k, stride, pad);
    for (int in = 0; in < n; ++in) {
        const double* xb = x + static_cast<int64_t>(in) * c * h * w;
        for (int co = 0; co < oc; ++co) {
            const double* wrow = wt + static_cast<int64_t>(co) * c * k * k;
            double* yb = y + (static_cast<int64_t>(in) * oc + co) * oh * ow;
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j)
                    yb[static_cast<int64_t>(i) * ow + j] =
                        conv_cell(xb, c, h, w, wrow, k, stride, pad, i, j);
        }
    }
}

void conv2d_forward_omp(const double* x, int n, int c, int h, int w,
                        const double* wt, int oc, int k, int stride, int pad,
                        double* y) {
    const int oh = conv_out_side(h, k, stride, pad);
    const int ow = conv_out_side(w, k, stride, pad);
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < n; ++in) {
        for (int co = 0; co < oc; ++co) {
            const double* xb = x + static_cast<int64_t>(in) * c * h * w;
            const double* wrow = wt + static_cast<int64_t>(co) * c * k * k;
            double* yb = y + (static_cast<int64_t>(in) * oc + co) * oh * ow;
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j)
                    yb[static_cast<int64_t>(i) * ow + j] =
                        conv_cell(xb, c, h, w, wrow, k, stride, pad, i, j);
        }
    }
}

} // namespace

void conv2d_forward(const double* x, int n, int c, int h, int w,
                    const double* wt, int oc, int k, int stride, int pad,
                    double* y, Exec e) {
    if (e == Exec::openmp)
        conv2d_forward_omp(x, n, c, h, w, wt, oc, k, stride, pad, y);
    else
        conv2d_forward_serial(x, n, c, h, w, wt, oc, k, stride, pad, y);
}

// ---------------------------------------------------------------------------
// conv2d backward w.r.t. input (gather form: one pass per input element)
// ---------------------------------------------------------------------------

namespace {

inline double conv_bwd_input_cell(const double* gyb, const double* wt,
                                  int oc, int c, int k, int stride, int pad,
                                  int oh, int ow, int ic, int ih, int iw) {
    double acc = 0.0;
    for (int co = 0; co < oc; ++co) {
        const double* gplane = gyb + static_cast<int64_t>(co) * oh * ow;
        const double* wplane = wt + (static_cast<int64_t>(co) * c + ic) * k * k;
        for (int kh = 0; kh < k; ++kh) {
            const int t = ih + pad - kh;
            if (t < 0 || t % stride != 0) continue;
            const int i = t / stride;
            if (i >= oh) continue;
            for (int kw = 0; kw < k; ++kw) {
                const int u = iw + pad - kw;
                if (u < 0 || u % stride != 0) continue;
                const int j = u / stride;
                if (j >= ow) continue;
                acc += gplane[static_cast<int64_t>(i) * ow + j] *
                       wplane[static_cast<int64_t>(kh) * k + kw];
            }
        }
    }
    return acc;
}

void conv2d_backward_input_serial(const double* gy, int n, int c, int h, int w,
                                  const double* wt, int oc, int k, int stride, int pad,
                                  double* gx) {
    const int oh = conv_out_side(h, k, stride, pad);
    const int ow = conv_out_side(w, k, stride, pad);
    for (int in = 0; in < n; ++in) {
        const double* gyb = gy + static_cast<int64_t>(in) * oc * oh * ow;
        for (int ic = 0; ic < c; ++ic) {
            double* gxp = gx + (static_cast<int64_t>(in) * c + ic) * h * w;
            for (int ih = 0; ih < h; ++ih)
                for (int iw = 0; iw < w; ++iw)
                    gxp[static_cast<int64_t>(ih) * w + iw] = conv_bwd_input_cell(
                        gyb, wt, oc, c, k, stride, pad, oh, ow, ic, ih, iw);
        }
    }
}

void conv2d_backward_input_omp(const double* gy, int n, int c, int h, int w,
                               const double* wt, int oc, int k, int stride, int pad,
                               double* gx) {
    const int oh = conv_out_side(h, k, stride, pad);
    const int ow = conv_out_side(w, k, stride, pad);
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < n; ++in) {
        for (int ic = 0; ic < c; ++ic) {
            const double* gyb = gy + static_cast<int64_t>(in) * oc * oh * ow;
            double* gxp = gx + (static_cast<int64_t>(in) * c + ic) * h * w;
            for (int ih = 0; ih < h; ++ih)
                for (int iw = 0; iw < w; ++iw)
                    gxp[static_cast<int64_t>(ih) * w + iw] = conv_bwd_input_cell(
                        gyb, wt, oc, c, k, stride, pad, oh, ow, ic, ih, iw);
        }
    }
}

} // namespace

void conv2d_backward_input(const double* gy, int n, int c, int h, int w,
                           const double* wt, int oc, int k, int stride, int pad,
                           double* gx, Exec e) {
    if (e == Exec::openmp)
        conv2d_backward_input_omp(gy, n, c, h, w, wt, oc, k, stride, pad, gx);
    else
        conv2d_backward_input_serial(gy, n, c, h, w, wt, oc, k, stride, pad, gx);
}

// ---------------------------------------------------------------------------
// conv2d backward w.r.t. weights
// ---------------------------------------------------------------------------

namespace {

inline double conv_bwd_weight_cell(const double* gy, const double* x,
                                   int n, int c, int h, int w,
                                   int oc, int stride, int pad,
                                   int oh, int ow, int co, int ic, int kh, int kw) {
    double acc = 0.0;
    for (int in = 0; in < n; ++in) {
        const double* gplane = gy + (static_cast<int64_t>(in) * oc + co) * oh * ow;
        const double* xplane = x + (static_cast<int64_t>(in) * c + ic) * h * w;
        for (int i = 0; i < oh; ++i) {
            const int ih = i * stride - pad + kh;
            if (ih < 0 || ih >= h) continue;
            const double* grow = gplane + static_cast<int64_t>(i) * ow;
            const double* xrow = xplane + static_cast<int64_t>(ih) * w;
            for (int j = 0; j < ow; ++j) {
                const int iw = j * stride - pad + kw;
                if (iw < 0 || iw >= w) continue;
                acc += grow[j] * xrow[iw];
            }
        }
    }
    return acc;
}

void conv2d_backward_weight_serial(const double* gy, const double* x,
                                   int n, int c, int h, int w,
                                   int oc, int k, int stride, int pad, double* gw) {
    const int oh = conv_out_side(h, k, stride, pad);
    const int ow = conv_out_side(w, k, stride, pad);
    for (int co = 0; co < oc; ++co)
        for (int ic = 0; ic < c; ++ic)
            for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw)
                    gw[((static_cast<int64_t>(co) * c + ic) * k + kh) * k + kw] +=
                        conv_bwd_weight_cell(gy, x, n, c, h, w, oc, stride, pad,
                                             oh, ow, co, ic, kh, kw);
}

void conv2d_backward_weight_omp(const double* gy, const double* x,
                                int n, int c, int h, int w,
                                int oc, int k, int stride, int pad, double* gw) {
    const int oh = conv_out_side(h, k, stride, pad);
    const int ow = conv_out_side(w, k, stride, pad);
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < oc; ++co) {
        for (int ic = 0; ic < c; ++ic) {
            for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw)
                    gw[((static_cast<int64_t>(co) * c + ic) * k + kh) * k + kw] +=
                        conv_bwd_weight_cell(gy, x, n, c, h, w, oc, stride, pad,
                                             oh, ow, co, ic, kh, kw);
        }
    }
}

} // namespace

void conv2d_backward_weight(const double* gy, const double* x, int n, int c, int h, int w,
                            int oc, int k, int stride, int pad, double* gw, Exec e) {
    if (e == Exec::openmp)
        conv2d_backward_weight_omp(gy, x, n, c, h, w, oc, k, stride, pad, gw);
    else
        conv2d_backward_weight_serial(gy, x, n, c, h, w, oc, k, stride, pad, gw);
}

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

void linear_forward(const double* x, int n, int in, const double* w, const double* b,
                    int out, double* y, Exec e) {
    auto cell = [&](int i, int o) {
        const double* xr = x + static_cast<int64_t>(i) * in;
        const double* wr = w + static_cast<int64_t>(o) * in;
        double acc = b ? b[o] : 0.0;
        for (int t = 0; t < in; ++t) acc += xr[t] * wr[t];
        y[static_cast<int64_t>(i) * out + o] = acc;
    };
    if (e == Exec::openmp) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int i = 0; i < n; ++i)
            for (int o = 0; o < out; ++o) cell(i, o);
    } else {
        for (int i = 0; i < n; ++i)
            for (int o = 0; o < out; ++o) cell(i, o);
    }
}

void linear_backward_input(const double* gy, const double* w, int n, int in, int out,
                           double* gx, Exec e) {
    auto cell = [&](int i, int t) {
        const double* gr = gy + static_cast<int64_t>(i) * out;
        double acc = 0.0;
        for (int o = 0; o < out; ++o) acc += gr[o] * w[static_cast<int64_t>(o) * in + t];
        gx[static_cast<int64_t>(i) * in + t] = acc;
    };
    if (e == Exec::openmp) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int i = 0; i < n; ++i)
            for (int t = 0; t < in; ++t) cell(i, t);
    } else {
        for (int i = 0; i < n; ++i)
            for (int t = 0; t < in; ++t) cell(i, t);
    }
}

void linear_backward_params(const double* gy, const double* x, int n, int in, int out,
                            double* gw, double* gb, Exec e) {
    auto wcell = [&](int o, int t) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            acc += gy[static_cast<int64_t>(i) * out + o] * x[static_cast<int64_t>(i) * in + t];
        gw[static_cast<int64_t>(o) * in + t] += acc;
    };
    if (gw) {
        if (e == Exec::openmp) {
#pragma omp parallel for collapse(2) schedule(static)
            for (int o = 0; o < out; ++o)
                for (int t = 0; t < in; ++t) wcell(o, t);
        } else {
            for (int o = 0; o < out; ++o)
                for (int t = 0; t < in; ++t) wcell(o, t);
        }
    }
    if (gb) {
        for (int o = 0; o < out; ++o) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += gy[static_cast<int64_t>(i) * out + o];
            gb[o] += acc;
        }
    }
}

} // namespace itcl::kernels
