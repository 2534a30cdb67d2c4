#include "trifusion/diffusion.hpp"

#include <cmath>
#include <thread>
#include <atomic>

#include "trifusion/errors.hpp"
#include "trifusion/ops.hpp"

namespace trifusion::diffusion {

using namespace trifusion::nn;

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ValueError("make_schedule: steps must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ValueError("make_schedule: requires 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.steps = steps;
    s.beta.resize(steps);
    s.alpha.resize(steps);
    s.gamma.resize(steps);
    double running = 1.0;
    for (int t = 0; t < steps; ++t) {
        const double b = steps == 1
                             ? beta_start
                             : beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                                                static_cast<double>(steps - 1);
        s.beta[t] = b;
        s.alpha[t] = 1.0 - b;
        running *= s.alpha[t];
        s.gamma[t] = running;
    }
    return s;
}

Tensor q_sample(const Tensor& i0, int t, const Tensor& eps, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.steps) throw ValueError("q_sample: t out of range");
    require_same_shape(i0, eps, "q_sample");
    const double g = schedule.gamma_t(t);
    const double a = std::sqrt(g), b = std::sqrt(1.0 - g);
    Tensor out(i0.shape);
    for (size_t i = 0; i < out.numel(); ++i) out[i] = a * i0[i] + b * eps[i];
    return out;
}

Tensor p_sample_step(const Denoiser& model, const Tensor& i_t, const Tensor& z, int t,
                     const NoiseSchedule& schedule, Rng& rng, VarianceMode mode, bool add_noise) {
    if (t < 1 || t > schedule.steps) throw ValueError("p_sample_step: t out of range");
    const double beta = schedule.beta_t(t);
    const double alpha = schedule.alpha_t(t);
    const double gamma = schedule.gamma_t(t);

    const Tensor eps_hat = model.predict(i_t, z, gamma);
    require_same_shape(i_t, eps_hat, "p_sample_step");

    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    const double coeff = beta / std::sqrt(1.0 - gamma);
    Tensor out(i_t.shape);
    for (size_t i = 0; i < out.numel(); ++i)
        out[i] = inv_sqrt_alpha * (i_t[i] - coeff * eps_hat[i]);

    if (t > 1 && add_noise) {
        double var = beta;
        if (mode == VarianceMode::posterior) {
            const double gamma_prev = schedule.gamma_t(t - 1);
            var = (1.0 - gamma_prev) / (1.0 - gamma) * beta;
        }
        const double sigma = std::sqrt(var);
        for (size_t i = 0; i < out.numel(); ++i) out[i] += sigma * rng.normal();
    }
    require_finite(out, "p_sample_step");
    return out;
}

Tensor sample(const Denoiser& model, const Tensor& z, const NoiseSchedule& schedule, Rng& rng,
              const std::vector<int>& shape, VarianceMode mode) {
    if (shape.size() != 3) throw ShapeError("sample: shape must be [C,H,W]");
    if (z.height() != shape[1] || z.width() != shape[2])
        throw ShapeError("sample: conditioning extents do not match requested shape");
    Tensor state = Tensor::normal(shape, rng);
    for (int t = schedule.steps; t >= 1; --t)
        state = p_sample_step(model, state, z, t, schedule, rng, mode);
    state.clamp(-1.0, 1.0);
    return state;
}

LossDraw draw_loss_randomness(Rng& rng, const std::vector<int>& shape,
                              const NoiseSchedule& schedule) {
    LossDraw d;
    d.t = static_cast<int>(rng.uniform_int(1, schedule.steps));
    d.eps = Tensor::normal(shape, rng);
    return d;
}

ModelBuilder unet_model_builder(const unet::UNetParams& params) {
    const unet::UNetParams* p = &params;
    return [p](GraphParams& gp, size_t, NodePtr z, NodePtr i_t, double gamma_t) {
        return unet::unet_forward(gp, *p, i_t, z, gamma_t);
    };
}

NodePtr sample_loss_graph(GraphParams& gp, const ModelBuilder& model, size_t index, NodePtr z,
                          const Tensor& i0, const LossDraw& draw, const NoiseSchedule& schedule,
                          LossKind kind) {
    NodePtr i_t = make_leaf(q_sample(i0, draw.t, draw.eps, schedule));
    NodePtr eps_hat = model(gp, index, z, i_t, schedule.gamma_t(draw.t));
    NodePtr residual = sub(make_leaf(draw.eps), eps_hat);
    if (kind == LossKind::l2) return mean_all(mul(residual, residual));
    return mean_all(abs_val(residual));
}

TrainingLossResult training_loss(const std::vector<CondBuilder>& conds,
                                 const std::vector<Tensor>& targets, const ModelBuilder& model,
                                 const NoiseSchedule& schedule, Rng& rng, LossKind kind,
                                 bool backprop, int threads) {
    if (conds.size() != targets.size() || conds.empty())
        throw ValueError("training_loss: batch must be non-empty with matching sizes");
    const size_t batch = conds.size();

    TrainingLossResult result;
    result.draws.reserve(batch);
    for (const Tensor& i0 : targets)
        result.draws.push_back(draw_loss_randomness(rng, i0.shape, schedule));

    struct PerSample {
        GraphParams gp;
        double loss = 0.0;
        explicit PerSample(bool grads) : gp(grads) {}
    };
    std::vector<PerSample> locals;
    locals.reserve(batch);
    for (size_t i = 0; i < batch; ++i) locals.emplace_back(backprop);

    const auto run_sample = [&](size_t i) {
        PerSample& ps = locals[i];
        NodePtr z = conds[i](ps.gp);
        NodePtr loss =
            sample_loss_graph(ps.gp, model, i, z, targets[i], result.draws[i], schedule, kind);
        ps.loss = loss->value[0];
        if (backprop) backward(loss);
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(batch)));
    if (workers == 1) {
        for (size_t i = 0; i < batch; ++i) run_sample(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                for (size_t i = next.fetch_add(1); i < batch; i = next.fetch_add(1)) run_sample(i);
            });
        for (auto& th : pool) th.join();
    }

    // Merge in sample order so accumulation is deterministic regardless of
    // thread count.
    const double inv_batch = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    for (size_t i = 0; i < batch; ++i) {
        total += locals[i].loss;
        if (backprop) locals[i].gp.accumulate_grads(inv_batch);
    }
    result.loss = total * inv_batch;
    if (!std::isfinite(result.loss))
        throw DivergenceError("training_loss: non-finite loss");
    return result;
}

}  // namespace trifusion::diffusion
