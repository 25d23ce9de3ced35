#include "itcl/input_transforms.hpp"

#include <cmath>

namespace itcl {

std::string to_string(TransformKind k) {
    switch (k) {
        case TransformKind::pad: return "pad";
        case TransformKind::add: return "add";
        case TransformKind::pad_latent: return "pad_latent";
    }
    return "?";
}

TransformKind transform_kind_from_string(const std::string& s) {
    if (s == "pad") return TransformKind::pad;
    if (s == "add") return TransformKind::add;
    if (s == "pad_latent") return TransformKind::pad_latent;
    throw ConfigInvalid("unknown transform kind '" + s + "'");
}

int64_t param_count(const TransformConfig& cfg) {
    const int64_t s = cfg.side;
    const int64_t c = cfg.channels;
    switch (cfg.kind) {
        case TransformKind::add:
            return c * s * s;
        case TransformKind::pad:
        case TransformKind::pad_latent: {
            const int64_t inner = s - 2 * static_cast<int64_t>(cfg.thickness);
            if (inner < 0) throw ShapeMismatch("frame thickness exceeds half the canvas side");
            return c * (s * s - inner * inner);
        }
    }
    return 0;
}

TransformParams TransformParams::allocate(const TransformConfig& cfg, int owner_task) {
    TransformParams p;
    p.kind = cfg.kind;
    p.side = cfg.side;
    p.thickness = cfg.kind == TransformKind::add ? 0 : cfg.thickness;
    p.channels = cfg.channels;
    p.owner_task = owner_task;
    p.theta = nn::Param({static_cast<int>(param_count(cfg))});
    return p;
}

Tensor apply_pad(const Tensor& x, const Tensor& theta, int side, int thickness) {
    x.require_ndim(4, "apply_pad input");
    const int n = x.dim(0), c = x.dim(1);
    const int inner = side - 2 * thickness;
    if (inner <= 0) throw ShapeMismatch("frame thickness exceeds half the canvas side");
    if (x.dim(2) != inner || x.dim(3) != inner)
        throw ShapeMismatch("apply_pad expects inner side " + std::to_string(inner) +
                            ", got " + x.shape_str());
    const int64_t per_channel =
        static_cast<int64_t>(side) * side - static_cast<int64_t>(inner) * inner;
    if (theta.numel() != per_channel * c)
        throw ShapeMismatch("frame parameter count " + std::to_string(theta.numel()));

    Tensor y({n, c, side, side});
    for (int in = 0; in < n; ++in) {
        const double* t = theta.ptr();
        for (int ic = 0; ic < c; ++ic) {
            for (int i = 0; i < side; ++i) {
                for (int j = 0; j < side; ++j) {
                    const bool border = i < thickness || i >= side - thickness ||
                                        j < thickness || j >= side - thickness;
                    y.at4(in, ic, i, j) =
                        border ? *t++ : x.at4(in, ic, i - thickness, j - thickness);
                }
            }
        }
    }
    return y;
}

void pad_backward(const Tensor& gy, int side, int thickness, Tensor* gx, Tensor* gtheta) {
    const int n = gy.dim(0), c = gy.dim(1);
    const int inner = side - 2 * thickness;
    if (gx) *gx = Tensor({n, c, inner, inner});
    for (int in = 0; in < n; ++in) {
        double* t = gtheta ? gtheta->ptr() : nullptr;
        for (int ic = 0; ic < c; ++ic) {
            for (int i = 0; i < side; ++i) {
                for (int j = 0; j < side; ++j) {
                    const bool border = i < thickness || i >= side - thickness ||
                                        j < thickness || j >= side - thickness;
                    const double g = gy.at4(in, ic, i, j);
                    if (border) {
                        if (t) *t++ += g;
                    } else if (gx) {
                        gx->at4(in, ic, i - thickness, j - thickness) = g;
                    }
                }
            }
        }
    }
}

Tensor apply_add(const Tensor& x, const Tensor& theta) {
    x.require_ndim(4, "apply_add input");
    const int64_t per_image = x.numel() / x.dim(0);
    if (theta.numel() != per_image)
        throw ShapeMismatch("perturbation shape must equal the input shape");
    Tensor y(x.shape);
    for (int in = 0; in < x.dim(0); ++in) {
        const double* xp = x.ptr() + in * per_image;
        double* yp = y.ptr() + in * per_image;
        for (int64_t i = 0; i < per_image; ++i) yp[i] = xp[i] + theta.data[static_cast<size_t>(i)];
    }
    return y;
}

void add_backward(const Tensor& gy, Tensor* gx, Tensor* gtheta) {
    const int64_t per_image = gy.numel() / gy.dim(0);
    if (gx) *gx = gy;
    if (gtheta) {
        for (int in = 0; in < gy.dim(0); ++in) {
            const double* gp = gy.ptr() + in * per_image;
            for (int64_t i = 0; i < per_image; ++i) gtheta->data[static_cast<size_t>(i)] += gp[i];
        }
    }
}

Tensor frame_to_canvas(const TransformParams& p) {
    if (p.kind == TransformKind::add)
        return Tensor({p.channels, p.side, p.side}, p.theta.value.data);
    Tensor canvas({p.channels, p.side, p.side});
    const double* t = p.theta.value.ptr();
    for (int ic = 0; ic < p.channels; ++ic)
        for (int i = 0; i < p.side; ++i)
            for (int j = 0; j < p.side; ++j) {
                const bool border = i < p.thickness || i >= p.side - p.thickness ||
                                    j < p.thickness || j >= p.side - p.thickness;
                if (border)
                    canvas.data[(static_cast<size_t>(ic) * p.side + i) * p.side + j] = *t++;
            }
    return canvas;
}

Tensor resize_images(const Tensor& x, int out_side, Interp interp) {
    x.require_ndim(4, "resize input");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h == out_side && w == out_side) return x;
    Tensor y({n, c, out_side, out_side});
    const double sh = static_cast<double>(h) / out_side;
    const double sw = static_cast<double>(w) / out_side;
    for (int in = 0; in < n; ++in) {
        for (int ic = 0; ic < c; ++ic) {
            for (int i = 0; i < out_side; ++i) {
                for (int j = 0; j < out_side; ++j) {
                    if (interp == Interp::nearest) {
                        int si = std::min(h - 1, static_cast<int>((i + 0.5) * sh));
                        int sj = std::min(w - 1, static_cast<int>((j + 0.5) * sw));
                        y.at4(in, ic, i, j) = x.at4(in, ic, si, sj);
                    } else {
                        const double fi = std::min(std::max((i + 0.5) * sh - 0.5, 0.0),
                                                   static_cast<double>(h - 1));
                        const double fj = std::min(std::max((j + 0.5) * sw - 0.5, 0.0),
                                                   static_cast<double>(w - 1));
                        const int i0 = static_cast<int>(fi), j0 = static_cast<int>(fj);
                        const int i1 = std::min(i0 + 1, h - 1), j1 = std::min(j0 + 1, w - 1);
                        const double di = fi - i0, dj = fj - j0;
                        y.at4(in, ic, i, j) =
                            (1 - di) * ((1 - dj) * x.at4(in, ic, i0, j0) + dj * x.at4(in, ic, i0, j1)) +
                            di * ((1 - dj) * x.at4(in, ic, i1, j0) + dj * x.at4(in, ic, i1, j1));
                    }
                }
            }
        }
    }
    return y;
}

} // namespace itcl
