#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "trifusion/commands.hpp"
#include "trifusion/errors.hpp"

namespace {

using trifusion::RunConfig;

RunConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{};
    return trifusion::load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TriFusion-SR: wavelet-guided conditional diffusion for tri-modal fusion + SR"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path, checkpoint_path, out_dir;
    bool has_seed = false;
    uint64_t seed = 0;
    int scale = 0;

    app.add_option("--config", config_path, "flat key = value config file")->capture_default_str();
    app.add_option("--checkpoint", checkpoint_path, "checkpoint file");
    app.add_option("--seed", seed, "seed override")->each([&](const std::string&) { has_seed = true; });
    app.add_option("--scale", scale, "scale override {2,4,8}")->check(CLI::IsMember({2, 4, 8}));
    app.add_option("--out", out_dir, "output directory override");

    auto* cmd_gen = app.add_subcommand("gen-data", "generate synthetic tri-modal dataset");
    auto* cmd_train = app.add_subcommand("train", "train the diffusion model");
    std::string resume_path;
    cmd_train->add_option("--resume", resume_path, "checkpoint to resume from");

    auto* cmd_sample = app.add_subcommand("sample", "fuse one LR triplet into an HR image");
    std::string lr_a, lr_b, lr_f, gt_path;
    cmd_sample->add_option("--lr-a", lr_a, "LR anatomical A (PGM)")->required();
    cmd_sample->add_option("--lr-b", lr_b, "LR anatomical B (PGM)")->required();
    cmd_sample->add_option("--lr-f", lr_f, "LR functional (PGM/PPM)")->required();
    cmd_sample->add_option("--gt", gt_path, "ground truth (PPM) for metric printout");

    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string split = "test";
    cmd_eval->add_option("--split", split, "train|val|test")
        ->check(CLI::IsMember({"train", "val", "test"}));

    auto* cmd_inspect = app.add_subcommand("inspect-dwt", "decompose an image and report energies");
    std::string image_path;
    int levels = 1;
    cmd_inspect->add_option("--image", image_path, "input image (PGM/PPM)")->required();
    cmd_inspect->add_option("--levels", levels, "decomposition depth J")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_or_default(config_path);
        if (has_seed) cfg.seed = seed;
        if (scale != 0) cfg.scale = scale;

        if (cmd_gen->parsed()) {
            trifusion::commands::gen_data(cfg, out_dir);
        } else if (cmd_train->parsed()) {
            trifusion::commands::train(cfg, resume_path);
        } else if (cmd_sample->parsed()) {
            if (checkpoint_path.empty()) throw trifusion::ConfigError("sample: --checkpoint required");
            trifusion::commands::SampleArgs args;
            args.checkpoint = checkpoint_path;
            args.lr_a = lr_a;
            args.lr_b = lr_b;
            args.lr_f = lr_f;
            args.out_dir = out_dir.empty() ? "." : out_dir;
            if (has_seed) args.seed = seed;
            args.ground_truth = gt_path;
            trifusion::commands::sample(args);
        } else if (cmd_eval->parsed()) {
            if (checkpoint_path.empty()) throw trifusion::ConfigError("eval: --checkpoint required");
            trifusion::commands::EvalArgs args;
            args.checkpoint = checkpoint_path;
            args.split = split;
            args.out_dir = out_dir;
            if (has_seed) args.seed = seed;
            trifusion::commands::eval(args);
        } else if (cmd_inspect->parsed()) {
            trifusion::commands::inspect_dwt(image_path, levels, out_dir.empty() ? "." : out_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error (" << trifusion::error_category(e) << "): " << e.what() << "\n";
        return 1;
    }
    return 0;
}
