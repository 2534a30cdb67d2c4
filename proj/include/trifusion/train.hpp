#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trifusion/checkpoint.hpp"
#include "trifusion/config.hpp"
#include "trifusion/data.hpp"
#include "trifusion/diffusion.hpp"

namespace trifusion::train {

// Model state for one run: every learnable tensor lives in `params`;
// conditioning params exist only in full mode. Pixel mode conditions the
// denoiser on the bicubic-upsampled triplet directly.
struct TriFusionModel {
    RunConfig cfg;
    ParamSet params;
    std::optional<cond::ConditionParams> cond;
    unet::UNetParams unet;
    diffusion::NoiseSchedule schedule;
};

// Channel width of the conditioning tensor z fed to the denoiser.
int cond_out_channels(const RunConfig& cfg);

// Parameters initialized from a stream derived from cfg.seed.
TriFusionModel build_model(const RunConfig& cfg);

struct Dataset {
    std::vector<data::TriModalSample> samples;
    std::vector<std::string> names;
    std::vector<int> train_idx, val_idx, test_idx;

    const std::vector<int>& split(const std::string& name) const;
};

Dataset load_dataset(const RunConfig& cfg, const std::string& data_dir);

// Parameter-free conditioning input for one sample: the packed raw
// frequency map (full mode) or the upsampled pixel triplet (pixel mode).
Tensor conditioning_cache(const TriFusionModel& model, const data::TriModalSample& sample);

// Builds the z subgraph for one sample from its cache.
diffusion::CondBuilder make_cond_builder(const TriFusionModel& model, const Tensor& cache);

// Deterministic conditioning tensor for sampling/evaluation.
Tensor condition_for_sampling(const TriFusionModel& model, const cond::ModalityTriplet& lr);

struct TrainOptions {
    std::string checkpoint_dir;  // empty: keep everything in memory only
    std::string resume_path;     // empty: fresh start
};

struct TrainResult {
    std::vector<double> step_losses;                // index 0 = first executed step
    std::vector<std::pair<int, double>> val_losses;
    double best_val = 0.0;
    bool has_best_val = false;
    int64_t final_step = 0;
};

// Optimization loop: sample batch -> condition -> q_sample -> loss ->
// AdamW. All randomness is derived from (cfg.seed, step), so a resumed
// run continues the exact trajectory.
TrainResult train(TriFusionModel& model, const Dataset& dataset, const TrainOptions& opts);

// Mean noise-prediction loss over a split with frozen per-item draws
// (shared across models for fair comparison).
double heldout_noise_loss(const TriFusionModel& model, const Dataset& dataset,
                          const std::vector<int>& indices, uint64_t eval_seed, int draws_per_item);

// Full reverse chain on one LR triplet; output mapped back to [0,1].
Tensor sample_fused(const TriFusionModel& model, const cond::ModalityTriplet& lr, Rng& rng);

// Bicubic upsample of the LR anatomical-A channel replicated to 3 channels.
Tensor bicubic_anatomical_baseline(const cond::ModalityTriplet& lr, int hr_size);

}  // namespace trifusion::train
