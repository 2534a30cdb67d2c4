#pragma once

#include <functional>
#include <vector>

#include "trifusion/denoiser.hpp"
#include "trifusion/optim.hpp"
#include "trifusion/rng.hpp"
#include "trifusion/tensor.hpp"

namespace trifusion::diffusion {

enum class LossKind { l2, l1 };
enum class VarianceMode { beta, posterior };

// Linear beta schedule with cumulative signal-retention products
// gamma_t = prod_{s<=t} (1 - beta_s). Indexing is 1-based via the t-th
// entry of the vectors (index t-1).
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;  // 1 - beta_t
    std::vector<double> gamma;  // running product of alpha

    double beta_t(int t) const { return beta.at(t - 1); }
    double alpha_t(int t) const { return alpha.at(t - 1); }
    double gamma_t(int t) const { return gamma.at(t - 1); }
};

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end);

// I_t = sqrt(gamma_t) I_0 + sqrt(1 - gamma_t) eps.
Tensor q_sample(const Tensor& i0, int t, const Tensor& eps, const NoiseSchedule& schedule);

// Noise predictor interface; implementations must be pure in (I_t, z, gamma).
struct Denoiser {
    virtual ~Denoiser() = default;
    virtual Tensor predict(const Tensor& i_t, const Tensor& z, double gamma_t) const = 0;
};

struct UNetDenoiser final : Denoiser {
    const unet::UNetParams* params;
    explicit UNetDenoiser(const unet::UNetParams& p) : params(&p) {}
    Tensor predict(const Tensor& i_t, const Tensor& z, double gamma_t) const override {
        return unet::unet_eval(*params, i_t, z, gamma_t);
    }
};

// One ancestral update I_t -> I_{t-1}. Adds sigma_t * n for t > 1 (none at
// t = 1); sigma_t^2 = beta_t, or the posterior variance
// (1 - gamma_{t-1})/(1 - gamma_t) * beta_t when mode == posterior.
Tensor p_sample_step(const Denoiser& model, const Tensor& i_t, const Tensor& z, int t,
                     const NoiseSchedule& schedule, Rng& rng,
                     VarianceMode mode = VarianceMode::beta, bool add_noise = true);

// Full reverse chain from I_T ~ N(0, I); output clamped to [-1, 1].
Tensor sample(const Denoiser& model, const Tensor& z, const NoiseSchedule& schedule, Rng& rng,
              const std::vector<int>& shape, VarianceMode mode = VarianceMode::beta);

// Per-sample randomness of the training objective, drawn up front so
// batch evaluation order never touches the stream.
struct LossDraw {
    int t = 1;
    Tensor eps;
};

LossDraw draw_loss_randomness(Rng& rng, const std::vector<int>& shape,
                              const NoiseSchedule& schedule);

// Builds the conditioning subgraph for one sample within the given graph.
using CondBuilder = std::function<NodePtr(GraphParams&)>;

// Builds eps_hat for one sample; index identifies the batch element so
// test stubs can reference per-sample state.
using ModelBuilder =
    std::function<NodePtr(GraphParams&, size_t index, NodePtr z, NodePtr i_t, double gamma_t)>;

ModelBuilder unet_model_builder(const unet::UNetParams& params);

// Scalar objective for one sample: mean over elements of (eps - eps_hat)^2
// (or |.| for l1), with I_t built from the draw.
NodePtr sample_loss_graph(GraphParams& gp, const ModelBuilder& model, size_t index, NodePtr z,
                          const Tensor& i0, const LossDraw& draw, const NoiseSchedule& schedule,
                          LossKind kind);

struct TrainingLossResult {
    double loss = 0.0;
    std::vector<LossDraw> draws;  // exposed so tests can replay the math
};

// Mean objective over a batch; accumulates d(loss)/d(param) into every
// bound Param when backprop is enabled. Per-sample graphs may evaluate in
// parallel; gradient merge order is fixed by sample index.
TrainingLossResult training_loss(const std::vector<CondBuilder>& conds,
                                 const std::vector<Tensor>& targets, const ModelBuilder& model,
                                 const NoiseSchedule& schedule, Rng& rng, LossKind kind,
                                 bool backprop = true, int threads = 1);

inline TrainingLossResult training_loss(const std::vector<CondBuilder>& conds,
                                        const std::vector<Tensor>& targets,
                                        const unet::UNetParams& unet_params,
                                        const NoiseSchedule& schedule, Rng& rng, LossKind kind,
                                        bool backprop = true, int threads = 1) {
    return training_loss(conds, targets, unet_model_builder(unet_params), schedule, rng, kind,
                         backprop, threads);
}

}  // namespace trifusion::diffusion
