#include "trifusion/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "trifusion/errors.hpp"
#include "trifusion/metrics.hpp"
#include "trifusion/train.hpp"
#include "trifusion/wavelet.hpp"

namespace trifusion::commands {

namespace fs = std::filesystem;

namespace {

std::string sample_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%04d", index);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << text;
    if (!f) throw IoError("write failed for " + path);
}

train::TriFusionModel model_from_checkpoint(const std::string& path, LoadedCheckpoint& out_ckpt) {
    out_ckpt = load_checkpoint(path);
    train::TriFusionModel model = train::build_model(out_ckpt.config);
    restore_params(out_ckpt, model.params, nullptr);
    return model;
}

}  // namespace

void gen_data(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const std::string root = out_dir.empty() ? cfg.data_dir : out_dir;
    fs::create_directories(root);

    const data::PhantomSpec spec = cfg.phantom_spec();
    const std::string f_ext = cfg.functional_channels == 3 ? ".ppm" : ".pgm";

    std::vector<std::string> names;
    for (int i = 0; i < cfg.n_samples; ++i) {
        const std::string name = sample_dir_name(i);
        const std::string dir = root + "/" + name;
        fs::create_directories(dir);

        const uint64_t sample_seed = Rng(cfg.seed).derive("gen").derive(static_cast<uint64_t>(i)).seed();
        data::TriModalSample sample = data::make_sample(spec, sample_seed, cfg.scale);
        data::write_image(dir + "/hr_a.pgm", sample.hr_a);
        data::write_image(dir + "/hr_b.pgm", sample.hr_b);
        data::write_image(dir + "/hr_f" + f_ext, sample.hr_f);
        data::write_image(dir + "/target.ppm", sample.target);
        data::write_image(dir + "/lr_a.pgm", sample.lr.x);
        data::write_image(dir + "/lr_b.pgm", sample.lr.y);
        data::write_image(dir + "/lr_f" + f_ext, sample.lr.s);
        names.push_back(name);
    }

    const data::DatasetManifest manifest =
        data::make_split(names, cfg.split_fractions(), cfg.seed);
    data::write_manifest(root + "/manifest.txt", manifest);
}

void train(const RunConfig& cfg, const std::string& resume_path) {
    cfg.validate();
    train::TriFusionModel model = train::build_model(cfg);
    const train::Dataset dataset = train::load_dataset(cfg, cfg.data_dir);
    train::TrainOptions opts;
    opts.checkpoint_dir = cfg.checkpoint_dir;
    opts.resume_path = resume_path;
    train::train(model, dataset, opts);
}

void sample(const SampleArgs& args) {
    LoadedCheckpoint ckpt;
    train::TriFusionModel model = model_from_checkpoint(args.checkpoint, ckpt);
    const RunConfig& cfg = model.cfg;

    cond::ModalityTriplet lr;
    lr.x = data::read_image(args.lr_a);
    lr.y = data::read_image(args.lr_b);
    lr.s = data::read_image(args.lr_f);
    lr.scale = cfg.scale;
    cond::validate_triplet(lr);
    if (lr.x.height() != cfg.lr_size() || lr.x.width() != cfg.lr_size())
        throw ShapeError("sample: input extents must be " + std::to_string(cfg.lr_size()) +
                         ", got " + std::to_string(lr.x.height()));
    if (lr.s.channels() != cfg.functional_channels)
        throw ShapeError("sample: functional channel count mismatch");

    Rng rng = Rng(args.seed.value_or(cfg.seed)).derive("sample");
    Tensor fused = train::sample_fused(model, lr, rng);

    fs::create_directories(args.out_dir);
    const std::string out_path = args.out_dir + "/fused.ppm";
    data::write_image(out_path, fused);
    std::cout << "wrote " << out_path << "\n";

    if (!args.ground_truth.empty()) {
        const Tensor gt = data::read_image(args.ground_truth);
        std::cout << "psnr " << metrics::psnr(fused, gt) << " ssim " << metrics::ssim(fused, gt)
                  << " rmse " << metrics::rmse(fused, gt) << "\n";
    }
}

void eval(const EvalArgs& args) {
    LoadedCheckpoint ckpt;
    train::TriFusionModel model = model_from_checkpoint(args.checkpoint, ckpt);
    const RunConfig& cfg = model.cfg;

    const train::Dataset dataset = train::load_dataset(cfg, cfg.data_dir);
    const std::vector<int>& indices = dataset.split(args.split);
    if (indices.empty()) throw ValueError("eval: split '" + args.split + "' is empty");

    const uint64_t seed = args.seed.value_or(cfg.seed);
    std::vector<metrics::SampleMetrics> rows;
    for (const int idx : indices) {
        Rng rng = Rng(seed).derive("eval").derive(static_cast<uint64_t>(idx));
        const Tensor fused = train::sample_fused(model, dataset.samples[idx].lr, rng);
        const Tensor& gt = dataset.samples[idx].target;
        metrics::SampleMetrics m;
        m.name = dataset.names[idx];
        m.psnr = metrics::psnr(fused, gt);
        m.ssim = metrics::ssim(fused, gt);
        m.rmse = metrics::rmse(fused, gt);
        rows.push_back(std::move(m));
    }
    const metrics::MetricReport report = metrics::aggregate(std::move(rows));
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";

    const std::string out_dir = args.out_dir.empty() ? cfg.report_dir : args.out_dir;
    fs::create_directories(out_dir);
    const std::string out_path = out_dir + "/eval_" + args.split + ".csv";
    write_text(out_path, metrics::report_csv(report));
    std::cout << "wrote " << out_path << "\n";
    std::cout << "psnr " << report.psnr.mean << " +- " << report.psnr.stddev << "\n";
    std::cout << "ssim " << report.ssim.mean << " +- " << report.ssim.stddev << "\n";
    std::cout << "rmse " << report.rmse.mean << " +- " << report.rmse.stddev << "\n";
}

void inspect_dwt(const std::string& image_path, int levels, const std::string& out_dir) {
    const Tensor image = data::read_image(image_path);
    const wavelet::WaveletPyramid pyramid = wavelet::dwt_multi(image, levels);

    fs::create_directories(out_dir);
    std::ostringstream norm_log;
    norm_log << "# file band level display = offset + scale * coeff\n";
    norm_log.precision(17);

    const std::string ext = image.channels() == 3 ? ".ppm" : ".pgm";
    const auto write_band = [&](const Tensor& band, const std::string& name, int level,
                                bool is_detail) {
        // Detail bands are signed: map 0 to mid-gray 0.5. LL is
        // non-negative: scale by its max.
        double offset = 0.0, scale = 1.0;
        if (is_detail) {
            const double m = band.abs_max();
            offset = 0.5;
            scale = m > 0.0 ? 0.5 / m : 0.0;
        } else {
            const double m = band.max();
            scale = m > 0.0 ? 1.0 / m : 0.0;
        }
        Tensor display(band.shape);
        for (size_t i = 0; i < band.numel(); ++i) display[i] = offset + scale * band[i];
        display.clamp(0.0, 1.0);
        const std::string file = "band_" + name + "_l" + std::to_string(level) + ext;
        data::write_image(out_dir + "/" + file, display);
        norm_log << file << " " << name << " " << level << " " << offset << " " << scale << "\n";
    };

    write_band(pyramid.top_ll, "LL", pyramid.depth, false);
    static const char* names[3] = {"V", "H", "D"};
    for (int j = pyramid.depth; j >= 1; --j)
        for (int b = 0; b < 3; ++b) write_band(pyramid.levels[j - 1][b], names[b], j, true);

    const wavelet::EnergyTable table = wavelet::subband_energy(pyramid);
    write_text(out_dir + "/energy.csv", wavelet::energy_table_csv(table));
    write_text(out_dir + "/bands.txt", norm_log.str());
    std::cout << "wrote " << out_dir << " (" << 3 * levels + 1 << " band files)\n";
    std::cout << "hf_fraction " << table.hf_fraction << "\n";
}

}  // namespace trifusion::commands
