#include <doctest.h>

#include <cmath>

#include "naive_ref.hpp"
#include "trifusion/denoiser.hpp"
#include "trifusion/errors.hpp"
#include "trifusion/gradcheck.hpp"

using namespace trifusion;
using namespace trifusion::unet;

namespace {

UNetConfig toy_config() {
    UNetConfig cfg;
    cfg.in_channels = 5;  // 3 + 2 conditioning channels
    cfg.base_width = 4;
    cfg.depth = 1;
    cfg.embed_dim = 8;
    return cfg;
}

void randomize_params(ParamSet& ps, Rng& rng) {
    for (const auto& p : ps.items())
        for (double& v : p->value.data) v = 0.3 * rng.uniform(-1, 1);
}

// Straight-line re-evaluation of the depth-1 architecture from named
// parameters: conv_in -> enc block -> down -> bottleneck -> up -> dec
// block (skip concat) -> out conv, with per-block embedding shifts.
Tensor naive_unet(const ParamSet& ps, const UNetConfig& cfg, const Tensor& i_t, const Tensor& z,
                  double gamma) {
    const auto P = [&](const std::string& n) -> const Tensor& { return ps.require(n)->value; };
    const auto emb_raw = naive::sinusoidal(gamma, cfg.embed_dim);
    const auto emb = naive::linear(emb_raw, P("unet.emb.w"), P("unet.emb.b"));

    const auto block = [&](const std::string& prefix, Tensor x) {
        Tensor h = naive::conv2d(x, P(prefix + ".w1"), P(prefix + ".b1"));
        const auto shift = naive::linear(emb, P(prefix + ".emb_w"), P(prefix + ".emb_b"));
        const int hw = h.shape[1] * h.shape[2];
        for (int c = 0; c < h.shape[0]; ++c)
            for (int i = 0; i < hw; ++i) h.data[static_cast<size_t>(c) * hw + i] += shift[c];
        h = naive::relu(h);
        return naive::relu(naive::conv2d(h, P(prefix + ".w2"), P(prefix + ".b2")));
    };

    Tensor h = naive::relu(naive::conv2d(naive::concat_channels({i_t, z}), P("unet.in.w"), P("unet.in.b")));
    const Tensor e0 = block("unet.enc0", h);
    Tensor down = naive::conv2d(e0, P("unet.down0.w"), P("unet.down0.b"), 2);
    Tensor mid = block("unet.bottleneck", down);
    Tensor up = naive::conv2d(naive::nearest_up2x(mid), P("unet.up0.w"), P("unet.up0.b"));
    Tensor dec = block("unet.dec0", naive::concat_channels({up, e0}));
    Tensor out = naive::conv2d(dec, P("unet.out.w"), P("unet.out.b"));
    const auto gate = naive::linear(emb, P("unet.skip.w"), P("unet.skip.b"));
    const int hw = out.shape[1] * out.shape[2];
    for (int c = 0; c < out.shape[0]; ++c)
        for (int i = 0; i < hw; ++i)
            out.data[static_cast<size_t>(c) * hw + i] += gate[c] * i_t.data[static_cast<size_t>(c) * hw + i];
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("denoiser");

TEST_CASE("shape contract and zero-initialized output conv") {
    Rng rng(71);
    ParamSet ps;
    const UNetParams p = build_unet_params(ps, toy_config(), rng);

    Tensor i_t = Tensor::uniform({3, 8, 8}, rng, -1, 1);
    Tensor z = Tensor::uniform({2, 8, 8}, rng, 0, 1);
    const Tensor out = unet_eval(p, i_t, z, 0.5);
    CHECK(out.shape == std::vector<int>{3, 8, 8});
    CHECK(out.abs_max() == 0.0);  // out conv starts at zero
}

TEST_CASE("shape errors") {
    Rng rng(72);
    ParamSet ps;
    UNetConfig deep = toy_config();
    deep.depth = 2;
    const UNetParams p = build_unet_params(ps, deep, rng);
    CHECK_THROWS_AS(unet_eval(p, Tensor::zeros({3, 6, 6}), Tensor::zeros({2, 6, 6}), 0.5),
                    ShapeError);  // 6 not divisible by 2^2
    CHECK_THROWS_AS(unet_eval(p, Tensor::zeros({3, 8, 8}), Tensor::zeros({3, 8, 8}), 0.5),
                    ShapeError);  // channel mismatch
    CHECK_THROWS_AS(unet_eval(p, Tensor::zeros({3, 8, 8}), Tensor::zeros({2, 4, 4}), 0.5),
                    ShapeError);  // extents differ
}

TEST_CASE("noise embedding determinism and injectivity on a grid") {
    CHECK_THROWS_AS(sinusoidal_features(0.0, 8), ValueError);
    CHECK_THROWS_AS(sinusoidal_features(0.5, 7), ValueError);

    const Tensor e1 = sinusoidal_features(0.37, 16);
    const Tensor e2 = sinusoidal_features(0.37, 16);
    CHECK(e1.data == e2.data);

    const Tensor a = sinusoidal_features(0.1, 16);
    const Tensor b = sinusoidal_features(0.9, 16);
    CHECK(max_abs_diff(a, b) > 1e-3);

    // Pairwise distinct over a sampled grid.
    for (double g1 = 0.05; g1 < 1.0; g1 += 0.13)
        for (double g2 = g1 + 0.13; g2 < 1.0; g2 += 0.13)
            CHECK(max_abs_diff(sinusoidal_features(g1, 16), sinusoidal_features(g2, 16)) > 1e-8);
}

TEST_CASE("full forward matches the composed-primitive oracle") {
    Rng rng(73);
    ParamSet ps;
    UNetConfig cfg = toy_config();
    const UNetParams p = build_unet_params(ps, cfg, rng);
    randomize_params(ps, rng);

    Tensor i_t = Tensor::uniform({3, 16, 16}, rng, -1, 1);
    Tensor z = Tensor::uniform({2, 16, 16}, rng, 0, 1);
    const Tensor out = unet_eval(p, i_t, z, 0.41);
    const Tensor ref = naive_unet(ps, cfg, i_t, z, 0.41);
    CHECK(max_abs_diff(out, ref) < 1e-10);
}

TEST_CASE("gamma conditioning changes the prediction") {
    Rng rng(74);
    ParamSet ps;
    const UNetParams p = build_unet_params(ps, toy_config(), rng);
    randomize_params(ps, rng);
    Tensor i_t = Tensor::uniform({3, 8, 8}, rng, -1, 1);
    Tensor z = Tensor::uniform({2, 8, 8}, rng, 0, 1);
    CHECK(max_abs_diff(unet_eval(p, i_t, z, 0.1), unet_eval(p, i_t, z, 0.9)) > 1e-9);
}

TEST_CASE("gradient check through the embedding projection and blocks") {
    Rng rng(75);
    ParamSet ps;
    const UNetParams p = build_unet_params(ps, toy_config(), rng);
    randomize_params(ps, rng);
    Tensor i_t = Tensor::uniform({3, 8, 8}, rng, -1, 1);
    Tensor z = Tensor::uniform({2, 8, 8}, rng, 0, 1);

    for (Param* target : {ps.require("unet.emb.w"), ps.require("unet.enc0.emb_w"),
                          ps.require("unet.down0.w"), ps.require("unet.dec0.w2"),
                          ps.require("unet.out.w")}) {
        GradCheckOptions opts;
        opts.max_coords_per_input = 10;
        const auto res = finite_diff_check(
            [&](const std::vector<NodePtr>& in) {
                GraphParams gp;
                gp.override_param(target, in[0]);
                return unet_forward(gp, p, make_leaf(i_t), make_leaf(z), 0.37);
            },
            {target->value}, rng, opts);
        CHECK(res.max_rel_err <= 1e-3);
    }
}

TEST_CASE("gradient flows into I_t and z inputs") {
    Rng rng(76);
    ParamSet ps;
    const UNetParams p = build_unet_params(ps, toy_config(), rng);
    randomize_params(ps, rng);
    Tensor i_t = Tensor::uniform({3, 8, 8}, rng, -1, 1);
    Tensor z = Tensor::uniform({2, 8, 8}, rng, 0, 1);

    GradCheckOptions opts;
    opts.max_coords_per_input = 16;
    const auto res = finite_diff_check(
        [&](const std::vector<NodePtr>& in) {
            GraphParams gp;
            return unet_forward(gp, p, in[0], in[1], 0.6);
        },
        {i_t, z}, rng, opts);
    CHECK(res.max_rel_err <= 1e-3);
}

TEST_SUITE_END();
