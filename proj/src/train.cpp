#include "trifusion/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "trifusion/errors.hpp"

namespace trifusion::train {

namespace fs = std::filesystem;

int cond_out_channels(const RunConfig& cfg) {
    return cfg.conditioning == CondMode::full ? cfg.cond_channels : 2 + cfg.functional_channels;
}

TriFusionModel build_model(const RunConfig& cfg) {
    cfg.validate();
    TriFusionModel model;
    model.cfg = cfg;
    Rng init_rng = Rng(cfg.seed).derive("init");
    if (cfg.conditioning == CondMode::full) {
        cond::ConditionConfig cc;
        cc.functional_channels = cfg.functional_channels;
        cc.levels = cfg.wavelet_levels;
        cc.width = cfg.cond_width;
        cc.out_channels = cfg.cond_channels;
        cc.reduction = cfg.attention_reduction;
        model.cond = cond::build_condition_params(model.params, cc, init_rng);
    }
    unet::UNetConfig uc;
    uc.in_channels = 3 + cond_out_channels(cfg);
    uc.base_width = cfg.unet_width;
    uc.depth = cfg.unet_depth;
    uc.embed_dim = cfg.embed_dim;
    model.unet = unet::build_unet_params(model.params, uc, init_rng);
    model.schedule = diffusion::make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    return model;
}

const std::vector<int>& Dataset::split(const std::string& name) const {
    if (name == "train") return train_idx;
    if (name == "val") return val_idx;
    if (name == "test") return test_idx;
    throw ValueError("dataset: unknown split '" + name + "'");
}

Dataset load_dataset(const RunConfig& cfg, const std::string& data_dir) {
    const data::DatasetManifest manifest = data::read_manifest(data_dir + "/manifest.txt");
    if (manifest.entries.empty()) throw IoError("dataset: empty manifest in " + data_dir);

    Dataset ds;
    const std::string f_ext = cfg.functional_channels == 3 ? ".ppm" : ".pgm";
    for (const auto& entry : manifest.entries) {
        const std::string dir = data_dir + "/" + entry.path;
        data::TriModalSample sample;
        sample.scale = cfg.scale;
        sample.hr_a = data::read_image(dir + "/hr_a.pgm");
        sample.hr_b = data::read_image(dir + "/hr_b.pgm");
        sample.hr_f = data::read_image(dir + "/hr_f" + f_ext);
        sample.target = data::read_image(dir + "/target.ppm");
        sample.lr.x = data::read_image(dir + "/lr_a.pgm");
        sample.lr.y = data::read_image(dir + "/lr_b.pgm");
        sample.lr.s = data::read_image(dir + "/lr_f" + f_ext);
        sample.lr.scale = cfg.scale;
        cond::validate_triplet(sample.lr);
        if (sample.target.shape != std::vector<int>{3, cfg.hr_size, cfg.hr_size})
            throw IoError("dataset: target extents mismatch for " + entry.path);
        if (sample.lr.x.height() != cfg.lr_size())
            throw IoError("dataset: LR extents mismatch for " + entry.path);

        const int idx = static_cast<int>(ds.samples.size());
        if (entry.split == "train")
            ds.train_idx.push_back(idx);
        else if (entry.split == "val")
            ds.val_idx.push_back(idx);
        else
            ds.test_idx.push_back(idx);
        ds.samples.push_back(std::move(sample));
        ds.names.push_back(entry.path);
    }
    return ds;
}

Tensor conditioning_cache(const TriFusionModel& model, const data::TriModalSample& sample) {
    if (model.cfg.conditioning == CondMode::full)
        return cond::raw_frequency_map_eval(sample.lr, model.cfg.wavelet_levels);
    auto [xu, yu, su] = cond::upsample_triplet(sample.lr);
    NodePtr z = nn::concat_channels(
        {make_leaf(std::move(xu)), make_leaf(std::move(yu)), make_leaf(std::move(su))});
    return z->value;
}

diffusion::CondBuilder make_cond_builder(const TriFusionModel& model, const Tensor& cache) {
    if (model.cfg.conditioning == CondMode::full) {
        const cond::ConditionParams* cp = &*model.cond;
        return [cp, &cache](GraphParams& gp) {
            return cond::condition_from_raw(gp, *cp, make_leaf(cache));
        };
    }
    return [&cache](GraphParams&) { return make_leaf(cache); };
}

Tensor condition_for_sampling(const TriFusionModel& model, const cond::ModalityTriplet& lr) {
    if (model.cfg.conditioning == CondMode::full) return cond::condition_eval(*model.cond, lr);
    auto [xu, yu, su] = cond::upsample_triplet(lr);
    return nn::concat_channels(
               {make_leaf(std::move(xu)), make_leaf(std::move(yu)), make_leaf(std::move(su))})
        ->value;
}

namespace {

Tensor to_diffusion_range(const Tensor& image01) {
    Tensor out = image01;
    for (double& v : out.data) v = 2.0 * v - 1.0;
    return out;
}

struct SampleCaches {
    std::vector<Tensor> cond;     // parameter-free conditioning inputs
    std::vector<Tensor> targets;  // fused GT mapped to [-1,1]
};

SampleCaches build_caches(const TriFusionModel& model, const Dataset& ds) {
    SampleCaches caches;
    caches.cond.reserve(ds.samples.size());
    caches.targets.reserve(ds.samples.size());
    for (const auto& sample : ds.samples) {
        caches.cond.push_back(conditioning_cache(model, sample));
        caches.targets.push_back(to_diffusion_range(sample.target));
    }
    return caches;
}

double validation_loss(const TriFusionModel& model, const Dataset& ds, const SampleCaches& caches,
                       int step) {
    Rng rng = Rng(model.cfg.seed).derive("val").derive(static_cast<uint64_t>(step));
    std::vector<diffusion::CondBuilder> conds;
    std::vector<Tensor> targets;
    for (const int idx : ds.val_idx) {
        conds.push_back(make_cond_builder(model, caches.cond[idx]));
        targets.push_back(caches.targets[idx]);
    }
    auto result = diffusion::training_loss(conds, targets, model.unet, model.schedule, rng,
                                           model.cfg.loss, /*backprop=*/false, model.cfg.threads);
    return result.loss;
}

std::string step_checkpoint_name(int step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "step_%06d.ckpt", step);
    return buf;
}

}  // namespace

TrainResult train(TriFusionModel& model, const Dataset& dataset, const TrainOptions& opts) {
    const RunConfig& cfg = model.cfg;
    if (dataset.train_idx.empty()) throw ValueError("train: empty training split");
    if (dataset.val_idx.empty()) throw ValueError("train: empty validation split");

    AdamWConfig acfg;
    acfg.lr = cfg.lr;
    acfg.beta1 = cfg.adam_beta1;
    acfg.beta2 = cfg.adam_beta2;
    acfg.eps = cfg.adam_eps;
    acfg.weight_decay = cfg.weight_decay;
    AdamW optimizer(model.params, acfg);

    TrainResult result;
    int start_step = 0;
    if (!opts.resume_path.empty()) {
        const LoadedCheckpoint ckpt = load_checkpoint(opts.resume_path);
        // train_steps may grow on resume; everything else must match or
        // the continued trajectory would silently diverge.
        RunConfig comparable = ckpt.config;
        comparable.train_steps = cfg.train_steps;
        if (!(comparable == cfg))
            throw ConfigError("train: resume checkpoint config differs from run config");
        restore_params(ckpt, model.params, &optimizer);
        start_step = static_cast<int>(ckpt.step);
        if (ckpt.has_best_val) {
            result.best_val = ckpt.best_val;
            result.has_best_val = true;
        }
    }

    const SampleCaches caches = build_caches(model, dataset);

    std::ofstream log;
    if (!opts.checkpoint_dir.empty()) {
        fs::create_directories(opts.checkpoint_dir);
        const std::string log_path = opts.checkpoint_dir + "/train_log.csv";
        log.open(log_path, start_step == 0 ? std::ios::trunc : std::ios::app);
        if (!log) throw IoError("train: cannot open " + log_path);
        if (start_step == 0) log << "step,train_loss,val_loss\n";
        log.precision(17);
    }

    const auto save = [&](const std::string& name, int step) {
        if (opts.checkpoint_dir.empty()) return;
        save_checkpoint(opts.checkpoint_dir + "/" + name, cfg, model.params, &optimizer, step,
                        cfg.seed, result.has_best_val ? &result.best_val : nullptr);
    };

    double last_val = std::numeric_limits<double>::quiet_NaN();
    for (int step = start_step + 1; step <= cfg.train_steps; ++step) {
        Rng step_rng = Rng(cfg.seed).derive("train").derive(static_cast<uint64_t>(step));

        std::vector<diffusion::CondBuilder> conds;
        std::vector<Tensor> targets;
        conds.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
            const int idx = dataset.train_idx[static_cast<size_t>(
                step_rng.uniform_int(0, static_cast<int64_t>(dataset.train_idx.size()) - 1))];
            conds.push_back(make_cond_builder(model, caches.cond[idx]));
            targets.push_back(caches.targets[idx]);
        }

        model.params.zero_grads();
        const auto loss = diffusion::training_loss(conds, targets, model.unet, model.schedule,
                                                   step_rng, cfg.loss, /*backprop=*/true,
                                                   cfg.threads);
        optimizer.step();
        result.step_losses.push_back(loss.loss);

        if (step % cfg.val_interval == 0 || step == cfg.train_steps) {
            last_val = validation_loss(model, dataset, caches, step);
            result.val_losses.emplace_back(step, last_val);
            if (!result.has_best_val || last_val < result.best_val) {
                result.best_val = last_val;
                result.has_best_val = true;
                save("best.ckpt", step);
            }
        }
        if (log) log << step << "," << loss.loss << "," << last_val << "\n";
        if (step % cfg.checkpoint_interval == 0) save(step_checkpoint_name(step), step);
        result.final_step = step;
    }
    save("last.ckpt", static_cast<int>(result.final_step ? result.final_step : start_step));
    return result;
}

double heldout_noise_loss(const TriFusionModel& model, const Dataset& dataset,
                          const std::vector<int>& indices, uint64_t eval_seed, int draws_per_item) {
    if (indices.empty()) throw ValueError("heldout_noise_loss: empty split");
    const SampleCaches caches = build_caches(model, dataset);

    double total = 0.0;
    size_t count = 0;
    for (const int idx : indices) {
        for (int d = 0; d < draws_per_item; ++d) {
            // Draw stream depends only on (eval_seed, idx, d): identical
            // across models under comparison.
            Rng rng = Rng(eval_seed).derive("heldout").derive(static_cast<uint64_t>(idx)).derive(
                static_cast<uint64_t>(d));
            std::vector<diffusion::CondBuilder> conds{make_cond_builder(model, caches.cond[idx])};
            std::vector<Tensor> targets{caches.targets[idx]};
            const auto res = diffusion::training_loss(conds, targets, model.unet, model.schedule,
                                                      rng, model.cfg.loss, /*backprop=*/false, 1);
            total += res.loss;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

Tensor sample_fused(const TriFusionModel& model, const cond::ModalityTriplet& lr, Rng& rng) {
    const Tensor z = condition_for_sampling(model, lr);
    const diffusion::UNetDenoiser denoiser(model.unet);
    const int hr = lr.x.height() * lr.scale;
    Tensor out = diffusion::sample(denoiser, z, model.schedule, rng, {3, hr, hr},
                                   model.cfg.variance);
    for (double& v : out.data) v = 0.5 * (v + 1.0);
    return out;
}

Tensor bicubic_anatomical_baseline(const cond::ModalityTriplet& lr, int hr_size) {
    Tensor up = resample::bicubic_resize(lr.x, hr_size, hr_size);
    up.clamp(0.0, 1.0);
    Tensor out({3, hr_size, hr_size});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < hr_size; ++y)
            for (int x = 0; x < hr_size; ++x) out.at(c, y, x) = up.at(0, y, x);
    return out;
}

}  // namespace trifusion::train
