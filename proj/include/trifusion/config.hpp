#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "trifusion/data.hpp"
#include "trifusion/diffusion.hpp"

namespace trifusion {

enum class CondMode { full, pixel };

// Flat key = value configuration. Unknown keys and malformed values are
// hard errors. Defaults mirror the reference training recipe; desk-scale
// profiles live under configs/.
struct RunConfig {
    int scale = 4;
    int hr_size = 256;
    int functional_channels = 1;

    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    diffusion::LossKind loss = diffusion::LossKind::l2;
    diffusion::VarianceMode variance = diffusion::VarianceMode::beta;

    int wavelet_levels = 1;
    int cond_channels = 32;  // C_f
    int cond_width = 32;
    int attention_reduction = 16;
    CondMode conditioning = CondMode::full;

    int unet_depth = 2;
    int unet_width = 32;
    int embed_dim = 64;

    double lr = 1e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;

    int batch_size = 4;
    int train_steps = 2000;
    int val_interval = 100;
    int checkpoint_interval = 500;
    int threads = 1;
    uint64_t seed = 0;

    int n_samples = 104;
    double split_train = 0.702;
    double split_val = 0.087;
    double split_test = 0.211;

    int phantom_ellipses_min = 4;
    int phantom_ellipses_max = 8;
    double phantom_texture_amp = 0.12;
    int phantom_blobs_min = 2;
    int phantom_blobs_max = 4;
    double phantom_blob_sigma_min = 0.10;
    double phantom_blob_sigma_max = 0.22;
    double phantom_blur_sigma = 2.0;

    std::string data_dir = "data";
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";

    bool operator==(const RunConfig&) const = default;

    int lr_size() const { return hr_size / scale; }
    std::array<double, 3> split_fractions() const { return {split_train, split_val, split_test}; }
    data::PhantomSpec phantom_spec() const;
    void validate() const;
};

RunConfig parse_config_text(const std::string& text);
std::string config_text(const RunConfig& config);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

}  // namespace trifusion
