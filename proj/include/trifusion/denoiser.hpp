#pragma once

#include <vector>

#include "trifusion/optim.hpp"
#include "trifusion/ops.hpp"

namespace trifusion::unet {

struct UNetConfig {
    int in_channels = 35;  // 3 + C_f
    int base_width = 32;
    int depth = 2;  // down/up levels; extents must divide 2^depth
    int embed_dim = 64;
    int out_channels = 3;
};

// Two 3x3 convs with a per-channel shift from the noise embedding after
// the first conv: conv -> +shift -> relu -> conv -> relu.
struct ConvBlock {
    Param *w1, *b1, *emb_w, *emb_b, *w2, *b2;
    int c_in = 0, c_out = 0;
};

struct UNetParams {
    UNetConfig cfg;
    Param *in_w, *in_b;                    // 3x3 conv in_channels -> width
    Param *emb_w, *emb_b;                  // embedding projection
    std::vector<ConvBlock> enc;            // depth blocks, widths w*2^i
    std::vector<Param*> down_w, down_b;    // stride-2 convs w_i -> w_{i+1}
    ConvBlock bottleneck;                  // width w*2^depth
    std::vector<Param*> up_w, up_b;        // 3x3 convs after nearest x2, w_{i+1} -> w_i
    std::vector<ConvBlock> dec;            // concat(skip, up): 2*w_i -> w_i
    Param *out_w, *out_b;                  // zero-initialized 3x3 conv width -> 3
    // Noise-level-gated global skip: eps_hat += linear(emb) . I_t per
    // channel. Gives the optimizer a direct path to the I_t component of
    // the noise target at every gamma; zero-initialized.
    Param *skip_w, *skip_b;
};

UNetParams build_unet_params(ParamSet& params, const UNetConfig& cfg, Rng& rng);

// Sinusoidal features of sqrt(gamma) at geometrically spaced frequencies;
// dim must be even. Deterministic, not learned.
Tensor sinusoidal_features(double gamma, int dim);

// Learned projection of the sinusoidal features; gamma in (0, 1].
NodePtr noise_embedding(GraphParams& gp, const UNetParams& p, double gamma);

// eps_hat = U-Net(concat(I_t, z), gamma). Shape-preserving: [3,H,W].
NodePtr unet_forward(GraphParams& gp, const UNetParams& p, NodePtr i_t, NodePtr z, double gamma);

Tensor unet_eval(const UNetParams& p, const Tensor& i_t, const Tensor& z, double gamma);

}  // namespace trifusion::unet
