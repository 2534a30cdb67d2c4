#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "trifusion/checkpoint.hpp"
#include "trifusion/config.hpp"
#include "trifusion/errors.hpp"
#include "trifusion/train.hpp"

using namespace trifusion;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("trifusion_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

RunConfig tweaked_config() {
    RunConfig cfg;
    cfg.scale = 2;
    cfg.hr_size = 32;
    cfg.timesteps = 50;
    cfg.beta_start = 2e-4;
    cfg.beta_end = 0.019;
    cfg.loss = diffusion::LossKind::l1;
    cfg.variance = diffusion::VarianceMode::posterior;
    cfg.cond_channels = 16;
    cfg.cond_width = 12;
    cfg.unet_width = 8;
    cfg.embed_dim = 16;
    cfg.lr = 3.25e-4;
    cfg.batch_size = 2;
    cfg.train_steps = 7;
    cfg.seed = 123456789012345ULL;
    cfg.n_samples = 6;
    cfg.split_train = 0.5;
    cfg.split_val = 0.25;
    cfg.split_test = 0.25;
    cfg.data_dir = "some/dir";
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("config_checkpoint");

TEST_CASE("config round trip preserves every field") {
    const RunConfig cfg = tweaked_config();
    const RunConfig back = parse_config_text(config_text(cfg));
    CHECK(back == cfg);

    const std::string dir = temp_dir("config");
    save_config(cfg, dir + "/run.cfg");
    CHECK(load_config(dir + "/run.cfg") == cfg);
}

TEST_CASE("config rejects unknown keys, duplicates, bad values") {
    CHECK_THROWS_AS(parse_config_text("unknown_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("scale = 2\nscale = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("scale = banana\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("scale = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("loss = l3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("beta_start = 0.5\nbeta_end = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("split_train = 0.9\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("hr_size = 100\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("this line has no equals\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("timesteps = 10 # fine\ntimesteps = 10\n"), ConfigError);

    // Comments and blank lines are accepted.
    const RunConfig ok = parse_config_text("# comment\n\nscale = 2\nhr_size = 32 # inline\n");
    CHECK(ok.scale == 2);
    CHECK(ok.hr_size == 32);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const std::string dir = temp_dir("ckpt");
    RunConfig cfg = tweaked_config();
    cfg.conditioning = CondMode::full;

    train::TriFusionModel model = train::build_model(cfg);
    AdamW opt(model.params, {.lr = cfg.lr});
    // Touch moments so they are non-trivial.
    Rng rng(7);
    for (const auto& p : model.params.items())
        for (double& g : p->grad.data) g = rng.uniform(-1, 1);
    opt.step();

    const double best = 0.123456789123456789;
    save_checkpoint(dir + "/a.ckpt", cfg, model.params, &opt, 17, cfg.seed, &best);

    const LoadedCheckpoint ckpt = load_checkpoint(dir + "/a.ckpt");
    CHECK(ckpt.step == 17);
    CHECK(ckpt.rng_seed == cfg.seed);
    CHECK(ckpt.has_best_val);
    CHECK(ckpt.best_val == best);
    CHECK(ckpt.has_optim);
    CHECK(ckpt.optim_step == 1);
    CHECK(ckpt.config == cfg);

    train::TriFusionModel restored = train::build_model(cfg);
    AdamW opt2(restored.params, {.lr = cfg.lr});
    restore_params(ckpt, restored.params, &opt2);
    const auto& a = model.params.items();
    const auto& b = restored.params.items();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i]->name == b[i]->name);
        CHECK(a[i]->value.data == b[i]->value.data);
        CHECK(opt.first_moments()[i].data == opt2.first_moments()[i].data);
        CHECK(opt.second_moments()[i].data == opt2.second_moments()[i].data);
    }
    CHECK(opt2.step_count() == 1);

    // Rewriting the restored state yields identical bytes.
    save_checkpoint(dir + "/b.ckpt", cfg, restored.params, &opt2, 17, cfg.seed, &best);
    std::ifstream fa(dir + "/a.ckpt", std::ios::binary), fb(dir + "/b.ckpt", std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
}

TEST_CASE("checkpoint without optimizer state loads for inference only") {
    const std::string dir = temp_dir("ckpt_noopt");
    RunConfig cfg = tweaked_config();
    train::TriFusionModel model = train::build_model(cfg);
    save_checkpoint(dir + "/infer.ckpt", cfg, model.params, nullptr, 5, 1, nullptr);

    const LoadedCheckpoint ckpt = load_checkpoint(dir + "/infer.ckpt");
    CHECK(!ckpt.has_optim);
    CHECK(!ckpt.has_best_val);

    train::TriFusionModel restored = train::build_model(cfg);
    restore_params(ckpt, restored.params, nullptr);

    AdamW opt(restored.params, {.lr = 1e-3});
    CHECK_THROWS_AS(restore_params(ckpt, restored.params, &opt), IoError);
}

TEST_CASE("malformed checkpoints are hard errors") {
    const std::string dir = temp_dir("ckpt_bad");
    RunConfig cfg = tweaked_config();
    train::TriFusionModel model = train::build_model(cfg);
    const std::string good = dir + "/good.ckpt";
    save_checkpoint(good, cfg, model.params, nullptr, 1, 2, nullptr);

    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    const auto write_bytes = [&](const std::string& name, const std::string& content) {
        std::ofstream f(dir + "/" + name, std::ios::binary);
        f << content;
        return dir + "/" + name;
    };

    CHECK_THROWS_AS(load_checkpoint(write_bytes("magic.ckpt", "NOPE 9\n" + bytes.substr(17))),
                    IoError);
    CHECK_THROWS_AS(load_checkpoint(write_bytes("trunc.ckpt", bytes.substr(0, bytes.size() - 9))),
                    IoError);
    CHECK_THROWS_AS(load_checkpoint(dir + "/missing.ckpt"), IoError);

    // Restoring into a model with a different shape must fail.
    RunConfig other = cfg;
    other.unet_width = 16;
    train::TriFusionModel wrong = train::build_model(other);
    const LoadedCheckpoint ckpt = load_checkpoint(good);
    CHECK_THROWS_AS(restore_params(ckpt, wrong.params, nullptr), IoError);
}

TEST_CASE("model assembly in both conditioning modes") {
    RunConfig full = tweaked_config();
    full.conditioning = CondMode::full;
    const train::TriFusionModel mf = train::build_model(full);
    CHECK(mf.cond.has_value());
    CHECK(mf.unet.cfg.in_channels == 3 + full.cond_channels);

    RunConfig pixel = tweaked_config();
    pixel.conditioning = CondMode::pixel;
    const train::TriFusionModel mp = train::build_model(pixel);
    CHECK(!mp.cond.has_value());
    CHECK(mp.unet.cfg.in_channels == 3 + 3);  // I_t + (x,y,s) with C_s = 1

    // Same seed, same architecture: identical init.
    const train::TriFusionModel mf2 = train::build_model(full);
    for (size_t i = 0; i < mf.params.items().size(); ++i)
        CHECK(mf.params.items()[i]->value.data == mf2.params.items()[i]->value.data);
}

TEST_SUITE_END();
