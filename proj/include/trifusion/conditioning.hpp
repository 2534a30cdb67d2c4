#pragma once

#include <array>
#include <optional>

#include "trifusion/optim.hpp"
#include "trifusion/ops.hpp"

namespace trifusion::cond {

// Registered low-resolution triplet: two anatomical channels plus one
// functional modality (1 or 3 channels), values in [0,1].
struct ModalityTriplet {
    Tensor x;  // anatomical A, [1,h,w]
    Tensor y;  // anatomical B, [1,h,w]
    Tensor s;  // functional, [C_s,h,w]
    int scale = 2;
};

void validate_triplet(const ModalityTriplet& t);

struct ConditionConfig {
    int functional_channels = 1;  // C_s
    int levels = 1;               // wavelet depth J
    int width = 32;               // rectifier hidden width
    int out_channels = 32;        // C_f
    int reduction = 16;           // channel-attention bottleneck ratio
    int spatial_kernel = 7;
    int gate_kernel = 3;

    int raw_channels() const { return (2 + functional_channels) * (3 * levels + 1); }
    int bottleneck() const { return std::max(1, out_channels / reduction); }
};

// All learnable parameters of the conditioning branch. Pointers are owned
// by the ParamSet they were built in.
struct ConditionParams {
    ConditionConfig cfg;
    // Rectification network: 3x3 convs raw->width->width->out.
    Param *rwf_w1, *rwf_b1, *rwf_w2, *rwf_b2, *rwf_w3, *rwf_b3;
    // Channel attention bottleneck.
    Param *ca_w1, *ca_b1, *ca_w2, *ca_b2;
    // Spatial attention conv over [mean,max] maps.
    Param *sa_w, *sa_b;
    // Gating head: conv 2C_f -> C_f -> 2.
    Param *gate_w1, *gate_b1, *gate_w2, *gate_b2;
    // Learnable residual scalar, initialized to 0.
    Param* residual_gamma;
};

ConditionParams build_condition_params(ParamSet& params, const ConditionConfig& cfg, Rng& rng);

// Bicubic upsampling of the three modalities to the target resolution.
std::array<Tensor, 3> upsample_triplet(const ModalityTriplet& triplet);

// Per-modality multi-level Haar decomposition packed on the level-1 grid,
// channel-concatenated in (x, y, s) order.
NodePtr build_raw_frequency_map(NodePtr x_up, NodePtr y_up, NodePtr s_up, int levels);

NodePtr rwf_forward(GraphParams& gp, const ConditionParams& p, NodePtr f_raw);
NodePtr channel_attention(GraphParams& gp, const ConditionParams& p, NodePtr f);
NodePtr spatial_attention(GraphParams& gp, const ConditionParams& p, NodePtr f);
std::pair<NodePtr, NodePtr> gate_forward(GraphParams& gp, const ConditionParams& p, NodePtr f_rect,
                                         NodePtr f_sa);

// Test hook: overrides the gate outputs and/or the residual scalar.
struct ForcedGates {
    std::optional<Tensor> w1, w2;          // [1,H,W] each
    std::optional<double> residual_gamma;  // overrides the learnable scalar
};

// z = w1 . F_rect + w2 . F_sa + gamma_res . F_rect with
// F_sa = spatial_attention(channel_attention(F_rect)).
NodePtr asff_forward(GraphParams& gp, const ConditionParams& p, NodePtr f_rect,
                     const ForcedGates* forced = nullptr);

// Rectifier plus fusion starting from a precomputed raw frequency map
// (at the half-resolution wavelet grid), bilinearly upsampled x2 at the end.
NodePtr condition_from_raw(GraphParams& gp, const ConditionParams& p, NodePtr f_raw);

// Full conditioning path from low-resolution leaves.
NodePtr condition(GraphParams& gp, const ConditionParams& p, NodePtr lr_x, NodePtr lr_y,
                  NodePtr lr_s, int scale);

// Convenience forward-only evaluations.
Tensor raw_frequency_map_eval(const ModalityTriplet& triplet, int levels);
Tensor condition_eval(const ConditionParams& p, const ModalityTriplet& triplet);

}  // namespace trifusion::cond
