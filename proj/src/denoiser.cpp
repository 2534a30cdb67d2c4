#include "trifusion/denoiser.hpp"

#include <cmath>
#include <string>

#include "trifusion/errors.hpp"

namespace trifusion::unet {

using namespace trifusion::nn;

namespace {

ConvBlock build_block(ParamSet& params, const std::string& prefix, int c_in, int c_out,
                      int embed_dim, Rng& rng) {
    ConvBlock b;
    b.c_in = c_in;
    b.c_out = c_out;
    b.w1 = params.add(prefix + ".w1", he_uniform({c_out, c_in, 3, 3}, c_in * 9, rng));
    b.b1 = params.add(prefix + ".b1", Tensor::zeros({c_out}));
    b.emb_w = params.add(prefix + ".emb_w", he_uniform({c_out, embed_dim}, embed_dim, rng));
    b.emb_b = params.add(prefix + ".emb_b", Tensor::zeros({c_out}));
    b.w2 = params.add(prefix + ".w2", he_uniform({c_out, c_out, 3, 3}, c_out * 9, rng));
    b.b2 = params.add(prefix + ".b2", Tensor::zeros({c_out}));
    return b;
}

NodePtr run_block(GraphParams& gp, const ConvBlock& b, NodePtr x, NodePtr emb) {
    NodePtr shift = linear(emb, gp.use(b.emb_w), gp.use(b.emb_b));
    NodePtr h = relu(add_channel_vec(conv2d(x, gp.use(b.w1), gp.use(b.b1)), shift));
    return relu(conv2d(h, gp.use(b.w2), gp.use(b.b2)));
}

}  // namespace

UNetParams build_unet_params(ParamSet& params, const UNetConfig& cfg, Rng& rng) {
    if (cfg.depth < 1) throw ValueError("unet: depth must be >= 1");
    if (cfg.embed_dim < 2 || cfg.embed_dim % 2 != 0)
        throw ValueError("unet: embed_dim must be even and >= 2");
    UNetParams p;
    p.cfg = cfg;
    const int w = cfg.base_width;

    p.in_w = params.add("unet.in.w", he_uniform({w, cfg.in_channels, 3, 3}, cfg.in_channels * 9, rng));
    p.in_b = params.add("unet.in.b", Tensor::zeros({w}));
    p.emb_w = params.add("unet.emb.w", he_uniform({cfg.embed_dim, cfg.embed_dim}, cfg.embed_dim, rng));
    p.emb_b = params.add("unet.emb.b", Tensor::zeros({cfg.embed_dim}));

    for (int i = 0; i < cfg.depth; ++i) {
        const int wi = w << i, wn = w << (i + 1);
        p.enc.push_back(build_block(params, "unet.enc" + std::to_string(i), wi, wi, cfg.embed_dim, rng));
        p.down_w.push_back(params.add("unet.down" + std::to_string(i) + ".w",
                                      he_uniform({wn, wi, 3, 3}, wi * 9, rng)));
        p.down_b.push_back(params.add("unet.down" + std::to_string(i) + ".b", Tensor::zeros({wn})));
    }
    const int wb = w << cfg.depth;
    p.bottleneck = build_block(params, "unet.bottleneck", wb, wb, cfg.embed_dim, rng);
    for (int i = cfg.depth - 1; i >= 0; --i) {
        const int wi = w << i, wn = w << (i + 1);
        p.up_w.push_back(params.add("unet.up" + std::to_string(i) + ".w",
                                    he_uniform({wi, wn, 3, 3}, wn * 9, rng)));
        p.up_b.push_back(params.add("unet.up" + std::to_string(i) + ".b", Tensor::zeros({wi})));
        p.dec.push_back(
            build_block(params, "unet.dec" + std::to_string(i), 2 * wi, wi, cfg.embed_dim, rng));
    }
    // Zero init: predicted noise starts at zero.
    p.out_w = params.add("unet.out.w", Tensor::zeros({cfg.out_channels, w, 3, 3}));
    p.out_b = params.add("unet.out.b", Tensor::zeros({cfg.out_channels}));
    p.skip_w = params.add("unet.skip.w", Tensor::zeros({cfg.out_channels, cfg.embed_dim}));
    p.skip_b = params.add("unet.skip.b", Tensor::zeros({cfg.out_channels}));
    return p;
}

Tensor sinusoidal_features(double gamma, int dim) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ValueError("sinusoidal_features: gamma out of (0,1]");
    if (dim < 2 || dim % 2 != 0) throw ValueError("sinusoidal_features: dim must be even and >= 2");
    const double level = std::sqrt(gamma);
    const int pairs = dim / 2;
    Tensor out({dim});
    for (int k = 0; k < pairs; ++k) {
        // Geometric frequencies over [1, 64]: the top frequency still varies
        // smoothly between adjacent schedule steps, so nearby noise levels
        // get nearby embeddings.
        const double freq =
            pairs == 1 ? 1.0 : std::pow(64.0, static_cast<double>(k) / (pairs - 1));
        out[2 * k] = std::sin(level * freq);
        out[2 * k + 1] = std::cos(level * freq);
    }
    return out;
}

NodePtr noise_embedding(GraphParams& gp, const UNetParams& p, double gamma) {
    NodePtr raw = make_leaf(sinusoidal_features(gamma, p.cfg.embed_dim));
    return linear(raw, gp.use(p.emb_w), gp.use(p.emb_b));
}

NodePtr unet_forward(GraphParams& gp, const UNetParams& p, NodePtr i_t, NodePtr z, double gamma) {
    const auto& cfg = p.cfg;
    require_rank3(i_t->value, "unet i_t");
    require_rank3(z->value, "unet z");
    if (i_t->value.channels() + z->value.channels() != cfg.in_channels)
        throw ShapeError("unet: channel mismatch, expected " + std::to_string(cfg.in_channels) +
                         " = I_t + z channels");
    if (i_t->value.height() != z->value.height() || i_t->value.width() != z->value.width())
        throw ShapeError("unet: I_t and z extents differ");
    const int div = 1 << cfg.depth;
    if (i_t->value.height() % div != 0 || i_t->value.width() % div != 0)
        throw ShapeError("unet: extents must divide 2^depth");

    NodePtr emb = noise_embedding(gp, p, gamma);
    NodePtr h = relu(conv2d(concat_channels({i_t, z}), gp.use(p.in_w), gp.use(p.in_b)));

    std::vector<NodePtr> skips;
    for (int i = 0; i < cfg.depth; ++i) {
        NodePtr e = run_block(gp, p.enc[i], h, emb);
        skips.push_back(e);
        h = conv2d(e, gp.use(p.down_w[i]), gp.use(p.down_b[i]), 2);
    }
    h = run_block(gp, p.bottleneck, h, emb);
    for (int k = 0; k < cfg.depth; ++k) {
        const int level = cfg.depth - 1 - k;
        NodePtr u = conv2d(nearest_upsample2x(h), gp.use(p.up_w[k]), gp.use(p.up_b[k]));
        h = run_block(gp, p.dec[k], concat_channels({u, skips[level]}), emb);
    }
    NodePtr out = conv2d(h, gp.use(p.out_w), gp.use(p.out_b));
    NodePtr gate = linear(emb, gp.use(p.skip_w), gp.use(p.skip_b));
    return add(out, scale_channels(i_t, gate));
}

Tensor unet_eval(const UNetParams& p, const Tensor& i_t, const Tensor& z, double gamma) {
    GraphParams gp(false);
    return unet_forward(gp, p, make_leaf(i_t), make_leaf(z), gamma)->value;
}

}  // namespace trifusion::unet
