#pragma once

#include <vector>

#include "trifusion/graph.hpp"

namespace trifusion::nn {

enum class Act { relu, sigmoid, leaky_relu };

// Same-padded cross-correlation (no kernel flip), zero padding, odd kernel.
// x: [C_in,H,W], w: [C_out,C_in,k,k], b: [C_out] -> [C_out,H/stride,W/stride].
// stride must be 1 or 2; strided extents must divide evenly.
NodePtr conv2d(NodePtr x, NodePtr w, NodePtr b, int stride = 1);

NodePtr relu(NodePtr x);
NodePtr leaky_relu(NodePtr x, double slope = 0.2);
NodePtr sigmoid(NodePtr x);
NodePtr activation(NodePtr x, Act kind);

// x: [N], w: [M,N], b: [M] -> [M].
NodePtr linear(NodePtr x, NodePtr w, NodePtr b);

// [C,H,W] -> [C,1,1]. Max routes its gradient to the first argmax in
// row-major scan order.
NodePtr global_avg_pool(NodePtr x);
NodePtr global_max_pool(NodePtr x);

// Per-pixel softmax across channels, max-stabilized.
NodePtr softmax_channels(NodePtr x);

// Elementwise on matching shapes.
NodePtr add(NodePtr a, NodePtr b);
NodePtr sub(NodePtr a, NodePtr b);
NodePtr mul(NodePtr a, NodePtr b);

NodePtr scale(NodePtr x, double s);
// x * s where s is a learnable scalar of shape [1].
NodePtr mul_scalar_param(NodePtr x, NodePtr s);

// x: [C,H,W] plus per-channel vector v: [C] (broadcast over pixels).
NodePtr add_channel_vec(NodePtr x, NodePtr v);
// x: [C,H,W] scaled per channel by s: [C] or [C,1,1].
NodePtr scale_channels(NodePtr x, NodePtr s);
// x: [C,H,W] scaled per pixel by m: [1,H,W].
NodePtr scale_pixels(NodePtr x, NodePtr m);

NodePtr concat_channels(std::vector<NodePtr> xs);
NodePtr slice_channels(NodePtr x, int c0, int c1);  // [c0,c1) -> [c1-c0,H,W]

// Channelwise statistics maps, [C,H,W] -> [1,H,W]. Max uses the same
// first-argmax subgradient convention as global_max_pool.
NodePtr channel_mean_map(NodePtr x);
NodePtr channel_max_map(NodePtr x);

// Data-preserving shape change (same numel).
NodePtr reshape(NodePtr x, std::vector<int> shape);

NodePtr nearest_upsample2x(NodePtr x);
NodePtr bilinear_upsample2x(NodePtr x);
NodePtr bicubic_resize(NodePtr x, int out_h, int out_w);

// Multi-level orthonormal Haar decomposition packed onto the level-1 grid
// (see wavelet::pack_spectrum). [C,H,W] -> [C*(3J+1),H/2,W/2]. Linear map;
// backward applies the exact transpose.
NodePtr haar_packed(NodePtr x, int levels);

NodePtr sum_all(NodePtr x);   // -> [1]
NodePtr mean_all(NodePtr x);  // -> [1]
NodePtr abs_val(NodePtr x);

}  // namespace trifusion::nn
