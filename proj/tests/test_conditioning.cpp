#include <doctest.h>

#include <cmath>

#include "naive_ref.hpp"
#include "trifusion/conditioning.hpp"
#include "trifusion/errors.hpp"
#include "trifusion/gradcheck.hpp"

using namespace trifusion;
using namespace trifusion::cond;

namespace {

ModalityTriplet random_triplet(Rng& rng, int h, int w, int cs, int scale) {
    ModalityTriplet t;
    t.x = Tensor::uniform({1, h, w}, rng, 0, 1);
    t.y = Tensor::uniform({1, h, w}, rng, 0, 1);
    t.s = Tensor::uniform({cs, h, w}, rng, 0, 1);
    t.scale = scale;
    return t;
}

ConditionConfig small_config() {
    ConditionConfig cfg;
    cfg.functional_channels = 1;
    cfg.levels = 1;
    cfg.width = 8;
    cfg.out_channels = 8;
    cfg.reduction = 4;
    return cfg;
}

void randomize_biases(ParamSet& ps, Rng& rng) {
    for (const auto& p : ps.items())
        if (p->name != "cond.residual_gamma")
            for (double& v : p->value.data) v += 0.05 * rng.uniform(-1, 1);
}

}  // namespace

TEST_SUITE_BEGIN("conditioning");

TEST_CASE("upsample_triplet shapes and constants") {
    Rng rng(51);
    ModalityTriplet t;
    t.x = Tensor::full({1, 8, 8}, 0.37);
    t.y = Tensor::full({1, 8, 8}, 0.2);
    t.s = Tensor::full({1, 8, 8}, 0.9);
    t.scale = 2;
    const auto up = upsample_triplet(t);
    CHECK(up[0].shape == std::vector<int>{1, 16, 16});
    for (const double v : up[0].data) CHECK(v == doctest::Approx(0.37).epsilon(1e-13));

    // Scale steps quoted for the reference resolutions.
    ModalityTriplet t128 = random_triplet(rng, 128, 128, 1, 2);
    CHECK(upsample_triplet(t128)[1].shape == std::vector<int>{1, 256, 256});
    ModalityTriplet t32 = random_triplet(rng, 32, 32, 1, 8);
    CHECK(upsample_triplet(t32)[2].shape == std::vector<int>{1, 256, 256});

    t.scale = 3;
    CHECK_THROWS_AS(upsample_triplet(t), ValueError);
}

TEST_CASE("raw frequency map channel counts and zeros") {
    Rng rng(52);
    ModalityTriplet t1 = random_triplet(rng, 8, 8, 1, 2);
    CHECK(raw_frequency_map_eval(t1, 1).shape == std::vector<int>{12, 8, 8});

    ModalityTriplet t3 = random_triplet(rng, 8, 8, 3, 2);
    CHECK(raw_frequency_map_eval(t3, 1).shape == std::vector<int>{20, 8, 8});

    ModalityTriplet z;
    z.x = Tensor::zeros({1, 8, 8});
    z.y = Tensor::zeros({1, 8, 8});
    z.s = Tensor::zeros({1, 8, 8});
    z.scale = 2;
    CHECK(raw_frequency_map_eval(z, 1).abs_max() == 0.0);
}

TEST_CASE("rwf zero input with zero biases gives zero output") {
    Rng rng(53);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    GraphParams gp;
    NodePtr out = rwf_forward(gp, p, make_leaf(Tensor::zeros({p.cfg.raw_channels(), 6, 6})));
    CHECK(out->value.abs_max() == 0.0);
}

TEST_CASE("rwf identity construction passes input through") {
    // Degenerate width = raw = out with center-one identity kernels; the
    // leaky relu between layers is identity on non-negative values.
    ConditionConfig cfg = small_config();
    cfg.functional_channels = 1;
    cfg.levels = 1;
    cfg.width = cfg.raw_channels();
    cfg.out_channels = cfg.raw_channels();
    Rng rng(54);
    ParamSet ps;
    ConditionParams p = build_condition_params(ps, cfg, rng);
    for (Param* w : {p.rwf_w1, p.rwf_w2, p.rwf_w3}) {
        w->value.fill(0.0);
        const int c = w->value.shape[0];
        for (int i = 0; i < c; ++i) w->value.data[((static_cast<size_t>(i) * c + i) * 3 + 1) * 3 + 1] = 1.0;
    }
    Tensor input = Tensor::uniform({cfg.raw_channels(), 5, 5}, rng, 0.0, 1.0);
    GraphParams gp;
    NodePtr out = rwf_forward(gp, p, make_leaf(input));
    CHECK(max_abs_diff(out->value, input) < 1e-15);
}

TEST_CASE("rwf matches a straight-line conv-stack oracle") {
    Rng rng(55);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    randomize_biases(ps, rng);
    Tensor input = Tensor::uniform({p.cfg.raw_channels(), 6, 6}, rng, -1, 1);

    GraphParams gp;
    NodePtr out = rwf_forward(gp, p, make_leaf(input));

    Tensor ref = naive::conv2d(input, p.rwf_w1->value, p.rwf_b1->value);
    ref = naive::leaky_relu(ref);
    ref = naive::conv2d(ref, p.rwf_w2->value, p.rwf_b2->value);
    ref = naive::leaky_relu(ref);
    ref = naive::conv2d(ref, p.rwf_w3->value, p.rwf_b3->value);
    CHECK(max_abs_diff(out->value, ref) < 1e-10);
}

TEST_CASE("channel attention halves features when parameters are zero") {
    Rng rng(56);
    ParamSet ps;
    ConditionParams p = build_condition_params(ps, small_config(), rng);
    p.ca_w1->value.fill(0.0);
    p.ca_w2->value.fill(0.0);
    Tensor f = Tensor::uniform({8, 5, 5}, rng, -1, 1);
    GraphParams gp;
    NodePtr out = channel_attention(gp, p, make_leaf(f));
    Tensor half = f;
    half *= 0.5;
    CHECK(max_abs_diff(out->value, half) < 1e-15);
}

TEST_CASE("channel attention symmetry and bottleneck width") {
    ConditionConfig cfg;
    cfg.out_channels = 32;
    cfg.reduction = 16;
    CHECK(cfg.bottleneck() == 2);
    ConditionConfig tiny;
    tiny.out_channels = 8;
    tiny.reduction = 16;
    CHECK(tiny.bottleneck() == 1);

    // All channels identical: every channel gets the same weight.
    Rng rng(57);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    Tensor plane = Tensor::uniform({1, 5, 5}, rng, 0, 1);
    Tensor f({8, 5, 5});
    for (int c = 0; c < 8; ++c)
        for (size_t i = 0; i < plane.numel(); ++i) f.data[c * plane.numel() + i] = plane[i];
    GraphParams gp;
    NodePtr out = channel_attention(gp, p, make_leaf(f));
    for (int c = 1; c < 8; ++c)
        for (size_t i = 0; i < plane.numel(); ++i)
            CHECK(out->value.data[c * plane.numel() + i] ==
                  doctest::Approx(out->value.data[i]).epsilon(1e-12));

    // Scaling factors live strictly inside (0,1): |scaled| < |input|.
    Tensor rnd = Tensor::uniform({8, 5, 5}, rng, 0.5, 1.0);
    GraphParams gp2;
    NodePtr out2 = channel_attention(gp2, p, make_leaf(rnd));
    for (size_t i = 0; i < rnd.numel(); ++i) {
        CHECK(out2->value[i] > 0.0);
        CHECK(out2->value[i] < rnd[i]);
    }
}

TEST_CASE("spatial attention halves features when parameters are zero") {
    Rng rng(58);
    ParamSet ps;
    ConditionParams p = build_condition_params(ps, small_config(), rng);
    p.sa_w->value.fill(0.0);
    Tensor f = Tensor::uniform({8, 6, 6}, rng, -1, 1);
    GraphParams gp;
    NodePtr out = spatial_attention(gp, p, make_leaf(f));
    Tensor half = f;
    half *= 0.5;
    CHECK(max_abs_diff(out->value, half) < 1e-15);
}

TEST_CASE("spatial attention is spatially constant away from borders for constant input") {
    Rng rng(59);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    Tensor f({8, 12, 12});
    Rng vals(60);
    for (int c = 0; c < 8; ++c) {
        const double v = vals.uniform(0.1, 1.0);
        for (int i = 0; i < 144; ++i) f.data[c * 144 + i] = v;
    }
    GraphParams gp;
    NodePtr out = spatial_attention(gp, p, make_leaf(f));
    // Interior pixels (7x7 conv: margin 3) all share one attention value.
    const double ref = out->value.at(0, 5, 5) / f.at(0, 5, 5);
    for (int y = 3; y < 9; ++y)
        for (int x = 3; x < 9; ++x)
            CHECK(out->value.at(0, y, x) / f.at(0, y, x) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("spatial attention matches the primitive-chain oracle") {
    Rng rng(61);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    randomize_biases(ps, rng);
    Tensor f = Tensor::uniform({8, 6, 6}, rng, -1, 1);
    GraphParams gp;
    NodePtr out = spatial_attention(gp, p, make_leaf(f));

    const Tensor stats = naive::concat_channels({naive::channel_mean_map(f), naive::channel_max_map(f)});
    const Tensor amap = naive::sigmoid(naive::conv2d(stats, p.sa_w->value, p.sa_b->value));
    Tensor ref(f.shape);
    for (int c = 0; c < 8; ++c)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x) ref.at(c, y, x) = f.at(c, y, x) * amap.at(0, y, x);
    CHECK(max_abs_diff(out->value, ref) < 1e-10);
}

TEST_CASE("gate constraints") {
    Rng rng(62);
    ParamSet ps;
    ConditionParams p = build_condition_params(ps, small_config(), rng);

    // Zero gate parameters: equal logits everywhere.
    p.gate_w1->value.fill(0.0);
    p.gate_w2->value.fill(0.0);
    Tensor f1 = Tensor::uniform({8, 5, 5}, rng, -1, 1);
    Tensor f2 = Tensor::uniform({8, 5, 5}, rng, -1, 1);
    GraphParams gp;
    auto [w1, w2] = gate_forward(gp, p, make_leaf(f1), make_leaf(f2));
    for (const double v : w1->value.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

    // Random parameters: per-pixel convex weights.
    ParamSet ps2;
    Rng rng2(63);
    const ConditionParams p2 = build_condition_params(ps2, small_config(), rng2);
    GraphParams gp2;
    auto [v1, v2] = gate_forward(gp2, p2, make_leaf(f1), make_leaf(f2));
    for (size_t i = 0; i < v1->value.numel(); ++i) {
        CHECK(std::fabs(v1->value[i] + v2->value[i] - 1.0) < 1e-12);
        CHECK(v1->value[i] > 0.0);
        CHECK(v1->value[i] < 1.0);
    }
}

TEST_CASE("gate gradient check") {
    Rng rng(64);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    Tensor f1 = Tensor::uniform({8, 4, 4}, rng, -1, 1);
    Tensor f2 = Tensor::uniform({8, 4, 4}, rng, -1, 1);

    GradCheckOptions opts;
    opts.max_coords_per_input = 30;
    const auto res = finite_diff_check(
        [&](const std::vector<NodePtr>& in) {
            GraphParams gp;
            auto [w1, w2] = gate_forward(gp, p, in[0], in[1]);
            return nn::concat_channels({w1, w2});
        },
        {f1, f2}, rng, opts);
    CHECK(res.max_rel_err <= 1e-3);
}

TEST_CASE("asff specializations under forced gates") {
    Rng rng(65);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    Tensor f_rect = Tensor::uniform({8, 5, 5}, rng, -1, 1);

    // Reference F_sa from the public ops.
    GraphParams gp_ref;
    NodePtr rect_leaf = make_leaf(f_rect);
    NodePtr f_sa = spatial_attention(gp_ref, p, channel_attention(gp_ref, p, rect_leaf));

    ForcedGates forced;
    forced.residual_gamma = 0.0;
    forced.w1 = Tensor::full({1, 5, 5}, 1.0);
    forced.w2 = Tensor::zeros({1, 5, 5});
    GraphParams gp1;
    CHECK(max_abs_diff(asff_forward(gp1, p, make_leaf(f_rect), &forced)->value, f_rect) < 1e-12);

    forced.w1 = Tensor::full({1, 5, 5}, 0.5);
    forced.w2 = Tensor::full({1, 5, 5}, 0.5);
    GraphParams gp2;
    NodePtr half = asff_forward(gp2, p, make_leaf(f_rect), &forced);
    for (size_t i = 0; i < f_rect.numel(); ++i)
        CHECK(half->value[i] == doctest::Approx(0.5 * (f_rect[i] + f_sa->value[i])).epsilon(1e-12));

    forced.residual_gamma = 1.0;
    forced.w1 = Tensor::zeros({1, 5, 5});
    forced.w2 = Tensor::full({1, 5, 5}, 1.0);
    GraphParams gp3;
    NodePtr res = asff_forward(gp3, p, make_leaf(f_rect), &forced);
    for (size_t i = 0; i < f_rect.numel(); ++i)
        CHECK(res->value[i] == doctest::Approx(f_sa->value[i] + f_rect[i]).epsilon(1e-12));
}

TEST_CASE("asff equals the closed-form combination with live gates") {
    Rng rng(66);
    ParamSet ps;
    ConditionParams p = build_condition_params(ps, small_config(), rng);
    for (double& v : p.residual_gamma->value.data) v = 0.3;
    Tensor f_rect = Tensor::uniform({8, 5, 5}, rng, -1, 1);

    GraphParams gp;
    NodePtr z = asff_forward(gp, p, make_leaf(f_rect));

    GraphParams gp_ref;
    NodePtr rect_leaf = make_leaf(f_rect);
    NodePtr f_sa = spatial_attention(gp_ref, p, channel_attention(gp_ref, p, rect_leaf));
    auto [w1, w2] = gate_forward(gp_ref, p, rect_leaf, f_sa);
    Tensor expect(f_rect.shape);
    const size_t hw = 25;
    for (int c = 0; c < 8; ++c)
        for (size_t i = 0; i < hw; ++i)
            expect.data[c * hw + i] = w1->value[i] * f_rect.data[c * hw + i] +
                                      w2->value[i] * f_sa->value.data[c * hw + i] +
                                      0.3 * f_rect.data[c * hw + i];
    CHECK(max_abs_diff(z->value, expect) < 1e-12);
}

TEST_CASE("condition shape contract and zero propagation") {
    Rng rng(67);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);

    ModalityTriplet t = random_triplet(rng, 8, 8, 1, 2);
    const Tensor z = condition_eval(p, t);
    CHECK(z.shape == std::vector<int>{8, 16, 16});

    ModalityTriplet zero;
    zero.x = Tensor::zeros({1, 8, 8});
    zero.y = Tensor::zeros({1, 8, 8});
    zero.s = Tensor::zeros({1, 8, 8});
    zero.scale = 2;
    CHECK(condition_eval(p, zero).abs_max() == 0.0);

    // Deterministic: identical inputs give identical z.
    const Tensor z2 = condition_eval(p, t);
    CHECK(z.data == z2.data);
}

TEST_CASE("condition is sensitive to modality order") {
    Rng rng(68);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    ModalityTriplet t = random_triplet(rng, 8, 8, 1, 2);
    ModalityTriplet swapped = t;
    std::swap(swapped.x, swapped.y);
    CHECK(max_abs_diff(condition_eval(p, t), condition_eval(p, swapped)) > 1e-6);
}

TEST_CASE("condition end-to-end gradient check on 1x8x8 inputs") {
    Rng rng(69);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    ModalityTriplet t = random_triplet(rng, 8, 8, 1, 2);

    GradCheckOptions opts;
    opts.max_coords_per_input = 25;
    const auto res = finite_diff_check(
        [&](const std::vector<NodePtr>& in) {
            GraphParams gp;
            return condition(gp, p, in[0], in[1], in[2], 2);
        },
        {t.x, t.y, t.s}, rng, opts);
    CHECK(res.max_rel_err <= 1e-3);
}

TEST_CASE("condition gradient check w.r.t. parameters") {
    Rng rng(70);
    ParamSet ps;
    const ConditionParams p = build_condition_params(ps, small_config(), rng);
    randomize_biases(ps, rng);
    ModalityTriplet t = random_triplet(rng, 4, 4, 1, 2);
    const Tensor f_raw = raw_frequency_map_eval(t, 1);

    // Differentiate w.r.t. a representative parameter from each block.
    for (Param* target : {p.rwf_w2, p.ca_w1, p.sa_w, p.gate_w2, p.residual_gamma}) {
        GradCheckOptions opts;
        opts.max_coords_per_input = 12;
        const auto res = finite_diff_check(
            [&](const std::vector<NodePtr>& in) {
                GraphParams gp;
                gp.override_param(target, in[0]);
                return condition_from_raw(gp, p, make_leaf(f_raw));
            },
            {target->value}, rng, opts);
        CHECK(res.max_rel_err <= 1e-3);
    }
}

TEST_SUITE_END();
