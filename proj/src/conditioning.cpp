#include "trifusion/conditioning.hpp"

#include "trifusion/errors.hpp"
#include "trifusion/resample.hpp"

namespace trifusion::cond {

using namespace trifusion::nn;

void validate_triplet(const ModalityTriplet& t) {
    require_rank3(t.x, "triplet.x");
    require_rank3(t.y, "triplet.y");
    require_rank3(t.s, "triplet.s");
    if (t.x.channels() != 1 || t.y.channels() != 1)
        throw ShapeError("triplet: anatomical modalities must be single-channel");
    if (t.s.channels() != 1 && t.s.channels() != 3)
        throw ShapeError("triplet: functional modality must have 1 or 3 channels");
    if (t.x.height() != t.y.height() || t.x.width() != t.y.width() ||
        t.x.height() != t.s.height() || t.x.width() != t.s.width())
        throw ShapeError("triplet: modalities must share extents");
    if (t.scale != 2 && t.scale != 4 && t.scale != 8)
        throw ValueError("triplet: scale must be one of {2,4,8}");
}

ConditionParams build_condition_params(ParamSet& params, const ConditionConfig& cfg, Rng& rng) {
    ConditionParams p;
    p.cfg = cfg;
    const int cr = cfg.raw_channels(), cw = cfg.width, cf = cfg.out_channels;
    const int cb = cfg.bottleneck(), sk = cfg.spatial_kernel, gk = cfg.gate_kernel;

    p.rwf_w1 = params.add("cond.rwf.w1", he_uniform({cw, cr, 3, 3}, cr * 9, rng));
    p.rwf_b1 = params.add("cond.rwf.b1", Tensor::zeros({cw}));
    p.rwf_w2 = params.add("cond.rwf.w2", he_uniform({cw, cw, 3, 3}, cw * 9, rng));
    p.rwf_b2 = params.add("cond.rwf.b2", Tensor::zeros({cw}));
    p.rwf_w3 = params.add("cond.rwf.w3", he_uniform({cf, cw, 3, 3}, cw * 9, rng));
    p.rwf_b3 = params.add("cond.rwf.b3", Tensor::zeros({cf}));

    p.ca_w1 = params.add("cond.ca.w1", he_uniform({cb, cf}, cf, rng));
    p.ca_b1 = params.add("cond.ca.b1", Tensor::zeros({cb}));
    p.ca_w2 = params.add("cond.ca.w2", he_uniform({cf, cb}, cb, rng));
    p.ca_b2 = params.add("cond.ca.b2", Tensor::zeros({cf}));

    p.sa_w = params.add("cond.sa.w", he_uniform({1, 2, sk, sk}, 2 * sk * sk, rng));
    p.sa_b = params.add("cond.sa.b", Tensor::zeros({1}));

    p.gate_w1 = params.add("cond.gate.w1", he_uniform({cf, 2 * cf, gk, gk}, 2 * cf * gk * gk, rng));
    p.gate_b1 = params.add("cond.gate.b1", Tensor::zeros({cf}));
    p.gate_w2 = params.add("cond.gate.w2", he_uniform({2, cf, gk, gk}, cf * gk * gk, rng));
    p.gate_b2 = params.add("cond.gate.b2", Tensor::zeros({2}));

    p.residual_gamma = params.add("cond.residual_gamma", Tensor::zeros({1}));
    return p;
}

std::array<Tensor, 3> upsample_triplet(const ModalityTriplet& triplet) {
    validate_triplet(triplet);
    const int th = triplet.x.height() * triplet.scale;
    const int tw = triplet.x.width() * triplet.scale;
    return {resample::bicubic_resize(triplet.x, th, tw), resample::bicubic_resize(triplet.y, th, tw),
            resample::bicubic_resize(triplet.s, th, tw)};
}

NodePtr build_raw_frequency_map(NodePtr x_up, NodePtr y_up, NodePtr s_up, int levels) {
    return concat_channels(
        {haar_packed(x_up, levels), haar_packed(y_up, levels), haar_packed(s_up, levels)});
}

NodePtr rwf_forward(GraphParams& gp, const ConditionParams& p, NodePtr f_raw) {
    if (f_raw->value.channels() != p.cfg.raw_channels())
        throw ShapeError("rwf_forward: raw map has " + std::to_string(f_raw->value.channels()) +
                         " channels, params expect " + std::to_string(p.cfg.raw_channels()));
    NodePtr h = leaky_relu(conv2d(f_raw, gp.use(p.rwf_w1), gp.use(p.rwf_b1)));
    h = leaky_relu(conv2d(h, gp.use(p.rwf_w2), gp.use(p.rwf_b2)));
    return conv2d(h, gp.use(p.rwf_w3), gp.use(p.rwf_b3));
}

NodePtr channel_attention(GraphParams& gp, const ConditionParams& p, NodePtr f) {
    const int cf = f->value.channels();
    NodePtr squeezed = reshape(global_avg_pool(f), {cf});
    NodePtr hidden = relu(linear(squeezed, gp.use(p.ca_w1), gp.use(p.ca_b1)));
    NodePtr weights = sigmoid(linear(hidden, gp.use(p.ca_w2), gp.use(p.ca_b2)));
    return scale_channels(f, weights);
}

NodePtr spatial_attention(GraphParams& gp, const ConditionParams& p, NodePtr f) {
    NodePtr stats = concat_channels({channel_mean_map(f), channel_max_map(f)});
    NodePtr map = sigmoid(conv2d(stats, gp.use(p.sa_w), gp.use(p.sa_b)));
    return scale_pixels(f, map);
}

std::pair<NodePtr, NodePtr> gate_forward(GraphParams& gp, const ConditionParams& p, NodePtr f_rect,
                                         NodePtr f_sa) {
    require_same_shape(f_rect->value, f_sa->value, "gate_forward");
    NodePtr h = relu(conv2d(concat_channels({f_rect, f_sa}), gp.use(p.gate_w1), gp.use(p.gate_b1)));
    NodePtr logits = conv2d(h, gp.use(p.gate_w2), gp.use(p.gate_b2));
    NodePtr weights = softmax_channels(logits);
    return {slice_channels(weights, 0, 1), slice_channels(weights, 1, 2)};
}

NodePtr asff_forward(GraphParams& gp, const ConditionParams& p, NodePtr f_rect,
                     const ForcedGates* forced) {
    NodePtr f_sa = spatial_attention(gp, p, channel_attention(gp, p, f_rect));

    NodePtr w1, w2;
    if (forced && forced->w1 && forced->w2) {
        w1 = make_leaf(*forced->w1);
        w2 = make_leaf(*forced->w2);
    } else {
        std::tie(w1, w2) = gate_forward(gp, p, f_rect, f_sa);
    }

    NodePtr gated = add(scale_pixels(f_rect, w1), scale_pixels(f_sa, w2));
    NodePtr residual = (forced && forced->residual_gamma)
                           ? scale(f_rect, *forced->residual_gamma)
                           : mul_scalar_param(f_rect, gp.use(p.residual_gamma));
    return add(gated, residual);
}

NodePtr condition_from_raw(GraphParams& gp, const ConditionParams& p, NodePtr f_raw) {
    return bilinear_upsample2x(asff_forward(gp, p, rwf_forward(gp, p, f_raw)));
}

NodePtr condition(GraphParams& gp, const ConditionParams& p, NodePtr lr_x, NodePtr lr_y,
                  NodePtr lr_s, int scale) {
    const int th = lr_x->value.height() * scale, tw = lr_x->value.width() * scale;
    NodePtr x_up = bicubic_resize(lr_x, th, tw);
    NodePtr y_up = bicubic_resize(lr_y, th, tw);
    NodePtr s_up = bicubic_resize(lr_s, th, tw);
    return condition_from_raw(gp, p, build_raw_frequency_map(x_up, y_up, s_up, p.cfg.levels));
}

Tensor raw_frequency_map_eval(const ModalityTriplet& triplet, int levels) {
    auto [xu, yu, su] = upsample_triplet(triplet);
    NodePtr raw = build_raw_frequency_map(make_leaf(std::move(xu)), make_leaf(std::move(yu)),
                                          make_leaf(std::move(su)), levels);
    return raw->value;
}

Tensor condition_eval(const ConditionParams& p, const ModalityTriplet& triplet) {
    GraphParams gp(false);
    NodePtr z = condition(gp, p, make_leaf(triplet.x), make_leaf(triplet.y), make_leaf(triplet.s),
                          triplet.scale);
    return z->value;
}

}  // namespace trifusion::cond
