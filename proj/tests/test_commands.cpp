#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "trifusion/commands.hpp"
#include "trifusion/data.hpp"
#include "trifusion/errors.hpp"
#include "trifusion/metrics.hpp"
#include "trifusion/train.hpp"

using namespace trifusion;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("trifusion_cmd_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// Tiny configuration that trains in a couple of seconds.
RunConfig tiny_config(const std::string& root) {
    RunConfig cfg;
    cfg.scale = 2;
    cfg.hr_size = 16;
    cfg.timesteps = 8;
    cfg.wavelet_levels = 1;
    cfg.cond_channels = 6;
    cfg.cond_width = 6;
    cfg.unet_depth = 1;
    cfg.unet_width = 6;
    cfg.embed_dim = 8;
    cfg.lr = 1e-3;
    cfg.batch_size = 2;
    cfg.train_steps = 6;
    cfg.val_interval = 3;
    cfg.checkpoint_interval = 3;
    cfg.n_samples = 6;
    cfg.split_train = 0.5;
    cfg.split_val = 0.25;
    cfg.split_test = 0.25;
    cfg.phantom_blob_sigma_min = 0.1;
    cfg.phantom_blob_sigma_max = 0.2;
    cfg.data_dir = root + "/data";
    cfg.checkpoint_dir = root + "/ckpt";
    cfg.report_dir = root + "/reports";
    return cfg;
}

int count_split(const data::DatasetManifest& m, const std::string& split) {
    int n = 0;
    for (const auto& e : m.entries) n += e.split == split;
    return n;
}

}  // namespace

TEST_SUITE_BEGIN("commands");

TEST_CASE("gen-data writes a loadable dataset and is byte-identical on rerun") {
    const std::string root = temp_dir("gen");
    RunConfig cfg = tiny_config(root);
    commands::gen_data(cfg, "");

    // round(3.0)=3 train, round(1.5)=2 val, round(1.5)=2 test; the
    // remainder rule trims train by one.
    const auto manifest = data::read_manifest(cfg.data_dir + "/manifest.txt");
    CHECK(manifest.entries.size() == 6);
    CHECK(count_split(manifest, "train") == 2);
    CHECK(count_split(manifest, "val") == 2);
    CHECK(count_split(manifest, "test") == 2);

    const train::Dataset ds = train::load_dataset(cfg, cfg.data_dir);
    CHECK(ds.samples.size() == 6);
    CHECK(ds.samples[0].lr.x.shape == std::vector<int>{1, 8, 8});
    CHECK(ds.samples[0].target.shape == std::vector<int>{3, 16, 16});

    const std::string first = slurp(cfg.data_dir + "/sample_0000/target.ppm") +
                              slurp(cfg.data_dir + "/manifest.txt");
    commands::gen_data(cfg, "");
    const std::string second = slurp(cfg.data_dir + "/sample_0000/target.ppm") +
                               slurp(cfg.data_dir + "/manifest.txt");
    CHECK(first == second);
}

TEST_CASE("gen-data reproduces the reference split counts") {
    const std::string root = temp_dir("gen104");
    RunConfig cfg = tiny_config(root);
    cfg.hr_size = 8;  // keep 104 phantoms fast
    cfg.scale = 2;
    cfg.unet_depth = 1;
    cfg.n_samples = 104;
    cfg.split_train = 0.702;
    cfg.split_val = 0.087;
    cfg.split_test = 0.211;
    commands::gen_data(cfg, "");
    const auto manifest = data::read_manifest(cfg.data_dir + "/manifest.txt");
    CHECK(count_split(manifest, "train") == 73);
    CHECK(count_split(manifest, "val") == 9);
    CHECK(count_split(manifest, "test") == 22);
}

TEST_CASE("train writes checkpoints and a well-formed loss log") {
    const std::string root = temp_dir("train");
    RunConfig cfg = tiny_config(root);
    commands::gen_data(cfg, "");
    commands::train(cfg);

    CHECK(fs::exists(cfg.checkpoint_dir + "/step_000003.ckpt"));
    CHECK(fs::exists(cfg.checkpoint_dir + "/step_000006.ckpt"));
    CHECK(fs::exists(cfg.checkpoint_dir + "/last.ckpt"));
    CHECK(fs::exists(cfg.checkpoint_dir + "/best.ckpt"));

    std::ifstream log(cfg.checkpoint_dir + "/train_log.csv");
    std::string line;
    REQUIRE(std::getline(log, line));
    CHECK(line == "step,train_loss,val_loss");
    int rows = 0;
    while (std::getline(log, line)) {
        ++rows;
        std::istringstream ls(line);
        std::string step, train_loss, val_loss;
        CHECK(std::getline(ls, step, ','));
        CHECK(std::getline(ls, train_loss, ','));
        CHECK(std::getline(ls, val_loss, ','));
        CHECK(std::stoi(step) == rows);
        CHECK(std::stod(train_loss) > 0.0);
    }
    CHECK(rows == 6);
}

TEST_CASE("train twice from scratch is byte-identical; resume matches uninterrupted run") {
    const std::string root = temp_dir("resume");
    RunConfig cfg = tiny_config(root);
    commands::gen_data(cfg, "");

    commands::train(cfg);
    const std::string uninterrupted = slurp(cfg.checkpoint_dir + "/last.ckpt");
    const std::string log_a = slurp(cfg.checkpoint_dir + "/train_log.csv");

    fs::remove_all(cfg.checkpoint_dir);
    commands::train(cfg);
    CHECK(slurp(cfg.checkpoint_dir + "/last.ckpt") == uninterrupted);
    CHECK(slurp(cfg.checkpoint_dir + "/train_log.csv") == log_a);

    // Interrupted at step 3, then resumed to 6: bit-identical final state.
    fs::remove_all(cfg.checkpoint_dir);
    RunConfig half = cfg;
    half.train_steps = 3;
    train::TriFusionModel model = train::build_model(half);
    const train::Dataset ds = train::load_dataset(half, half.data_dir);
    train::TrainOptions opts;
    opts.checkpoint_dir = half.checkpoint_dir;
    train::train(model, ds, opts);

    train::TriFusionModel model2 = train::build_model(cfg);  // train_steps = 6
    train::TrainOptions opts2;
    opts2.checkpoint_dir = cfg.checkpoint_dir;
    opts2.resume_path = cfg.checkpoint_dir + "/step_000003.ckpt";
    train::train(model2, ds, opts2);
    CHECK(slurp(cfg.checkpoint_dir + "/last.ckpt") == uninterrupted);

    // Any other config difference is rejected.
    RunConfig other = cfg;
    other.lr = cfg.lr * 2;
    train::TriFusionModel model3 = train::build_model(other);
    train::TrainOptions opts3;
    opts3.checkpoint_dir = other.checkpoint_dir;
    opts3.resume_path = cfg.checkpoint_dir + "/step_000003.ckpt";
    CHECK_THROWS_AS(train::train(model3, ds, opts3), ConfigError);
}

TEST_CASE("sample command writes deterministic output and metrics") {
    const std::string root = temp_dir("sample");
    RunConfig cfg = tiny_config(root);
    commands::gen_data(cfg, "");
    commands::train(cfg);

    commands::SampleArgs args;
    args.checkpoint = cfg.checkpoint_dir + "/last.ckpt";
    args.lr_a = cfg.data_dir + "/sample_0000/lr_a.pgm";
    args.lr_b = cfg.data_dir + "/sample_0000/lr_b.pgm";
    args.lr_f = cfg.data_dir + "/sample_0000/lr_f.pgm";
    args.out_dir = root + "/out1";
    args.seed = 5;
    args.ground_truth = cfg.data_dir + "/sample_0000/target.ppm";
    commands::sample(args);

    const Tensor fused = data::read_image(root + "/out1/fused.ppm");
    CHECK(fused.shape == std::vector<int>{3, 16, 16});

    args.out_dir = root + "/out2";
    commands::sample(args);
    CHECK(slurp(root + "/out1/fused.ppm") == slurp(root + "/out2/fused.ppm"));

    args.out_dir = root + "/out3";
    args.seed = 6;
    commands::sample(args);
    CHECK(slurp(root + "/out1/fused.ppm") != slurp(root + "/out3/fused.ppm"));
}

TEST_CASE("eval command writes a report with the right row count") {
    const std::string root = temp_dir("eval");
    RunConfig cfg = tiny_config(root);
    commands::gen_data(cfg, "");
    commands::train(cfg);

    commands::EvalArgs args;
    args.checkpoint = cfg.checkpoint_dir + "/last.ckpt";
    args.split = "test";
    commands::eval(args);

    std::ifstream report(cfg.report_dir + "/eval_test.csv");
    REQUIRE(report);
    std::string line;
    int rows = 0;
    REQUIRE(std::getline(report, line));
    CHECK(line == "sample,psnr,ssim,rmse,lpips");
    while (std::getline(report, line)) ++rows;
    CHECK(rows == 2 + 2);  // two test samples + mean + std

    commands::EvalArgs bad = args;
    bad.split = "nope";
    CHECK_THROWS_AS(commands::eval(bad), ValueError);
}

TEST_CASE("inspect-dwt writes band files, energies, and normalization log") {
    const std::string root = temp_dir("inspect");

    // Constant image: detail bands display as uniform mid-gray, fraction 0.
    data::write_image(root + "/const.pgm", Tensor::full({1, 16, 16}, 0.5));
    commands::inspect_dwt(root + "/const.pgm", 2, root + "/out");
    for (const std::string name :
         {"band_LL_l2.pgm", "band_V_l2.pgm", "band_H_l2.pgm", "band_D_l2.pgm", "band_V_l1.pgm",
          "band_H_l1.pgm", "band_D_l1.pgm"})
        CHECK(fs::exists(root + "/out/" + name));

    const Tensor detail = data::read_image(root + "/out/band_D_l1.pgm");
    for (const double v : detail.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-2));

    const std::string energy = slurp(root + "/out/energy.csv");
    CHECK(energy.find("hf_fraction,,0\n") != std::string::npos);
    CHECK(fs::exists(root + "/out/bands.txt"));

    // 3-channel image at J=2 still yields 7 band files (PPM).
    Rng rng(1);
    data::write_image(root + "/rgb.ppm", Tensor::uniform({3, 16, 16}, rng, 0, 1));
    commands::inspect_dwt(root + "/rgb.ppm", 2, root + "/out_rgb");
    int files = 0;
    for (const auto& e : fs::directory_iterator(root + "/out_rgb"))
        files += e.path().extension() == ".ppm";
    CHECK(files == 7);

    CHECK_THROWS_AS(commands::inspect_dwt(root + "/missing.pgm", 1, root + "/x"), IoError);
}

TEST_CASE("phantom frequency disparity shows up in inspect-dwt tables") {
    const std::string root = temp_dir("disparity");
    data::PhantomSpec spec;
    spec.size = 32;
    const data::Phantom ph = data::generate_phantom(spec, 0);
    data::write_image(root + "/anat.pgm", ph.anatomical_a);
    data::write_image(root + "/func.pgm", ph.functional);
    commands::inspect_dwt(root + "/anat.pgm", 2, root + "/anat");
    commands::inspect_dwt(root + "/func.pgm", 2, root + "/func");

    const auto fraction = [&](const std::string& path) {
        const std::string csv = slurp(path);
        const auto pos = csv.find("hf_fraction,,");
        REQUIRE(pos != std::string::npos);
        return std::stod(csv.substr(pos + 13));
    };
    CHECK(fraction(root + "/anat/energy.csv") > fraction(root + "/func/energy.csv"));
}

TEST_SUITE_END();
