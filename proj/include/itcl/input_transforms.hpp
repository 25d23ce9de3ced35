#pragma once

#include <cstdint>
#include <string>

#include "itcl/nn.hpp"

namespace itcl {

enum class TransformKind { pad, add, pad_latent };
enum class Interp { bilinear, nearest };

std::string to_string(TransformKind k);
TransformKind transform_kind_from_string(const std::string& s);

// Geometry of the learnable input transform g(x, θ_g).
//  pad:        a `thickness`-pixel learnable border around the inner-resized
//              image; `side` is the backbone input side.
//  add:        a learnable tensor of the full input shape, added elementwise.
//  pad_latent: same border semantics applied to the activation right after
//              `insertion_point`; `side`/`channels` describe that activation.
struct TransformConfig {
    TransformKind kind = TransformKind::pad;
    int thickness = 4;
    int side = 0;     // canvas side (input side for pad/add, latent side for pad_latent)
    int channels = 0; // filled from the backbone at assembly time when 0
    std::string insertion_point = "stem";
    bool freeze_after_first_task = false;
    Interp interpolation = Interp::bilinear;
};

// One learned parameter set θ_g. Frame values are stored in canvas scan
// order (c, then row, then column), skipping the interior.
struct TransformParams {
    TransformKind kind = TransformKind::pad;
    int side = 0;
    int thickness = 0;
    int channels = 0;
    int owner_task = -1; // task index in per-task mode, -1 when shared
    nn::Param theta;     // zero-initialized at allocation

    static TransformParams allocate(const TransformConfig& cfg, int owner_task);
};

// Closed-form parameter counts: pad -> C*(S^2-(S-2p)^2), add -> C*S^2.
int64_t param_count(const TransformConfig& cfg);

// x: [N,C,S-2p,S-2p] -> [N,C,S,S]; interior equals x exactly, border is θ_g.
Tensor apply_pad(const Tensor& x, const Tensor& theta, int side, int thickness);
// gx gets the interior of gy; gtheta (flat frame layout) is accumulated.
void pad_backward(const Tensor& gy, int side, int thickness, Tensor* gx, Tensor* gtheta);

// x: [N,C,S,S] + θ broadcast over the batch.
Tensor apply_add(const Tensor& x, const Tensor& theta);
void add_backward(const Tensor& gy, Tensor* gx, Tensor* gtheta);

// Debug/figure export helper: lay the flat frame values back onto an
// S x S canvas (interior zero); add/pad_latent params are already dense.
Tensor frame_to_canvas(const TransformParams& p);

// Data-pipeline resize (not differentiated; runs before the transform).
Tensor resize_images(const Tensor& x, int out_side, Interp interp);

} // namespace itcl
