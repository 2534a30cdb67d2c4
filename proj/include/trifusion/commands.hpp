#pragma once

#include <optional>
#include <string>

#include "trifusion/config.hpp"

namespace trifusion::commands {

// Library-level command entry points used by the CLI and the acceptance
// suite. All paths are created as needed; failures throw the categorized
// errors from errors.hpp.

// Writes n_samples phantom sample directories plus manifest.txt.
void gen_data(const RunConfig& cfg, const std::string& out_dir);

// Trains from cfg.data_dir, writing checkpoints and train_log.csv into
// cfg.checkpoint_dir. resume_path continues a previous run bit-exactly.
void train(const RunConfig& cfg, const std::string& resume_path = "");

struct SampleArgs {
    std::string checkpoint;
    std::string lr_a, lr_b, lr_f;
    std::string out_dir;
    std::optional<uint64_t> seed;    // default: checkpoint config seed
    std::string ground_truth;        // optional; prints metrics when given
};

// Runs conditioning + the reverse chain; writes <out_dir>/fused.ppm.
void sample(const SampleArgs& args);

struct EvalArgs {
    std::string checkpoint;
    std::string split = "test";
    std::string out_dir;           // default: checkpoint config report_dir
    std::optional<uint64_t> seed;  // default: checkpoint config seed
};

// Samples every item of the split and writes eval_<split>.csv.
void eval(const EvalArgs& args);

// Writes per-band images (display-normalized) plus energy.csv and
// bands.txt recording the normalization of each file.
void inspect_dwt(const std::string& image_path, int levels, const std::string& out_dir);

}  // namespace trifusion::commands
