#pragma once

#include <map>
#include <string>

#include "trifusion/config.hpp"
#include "trifusion/optim.hpp"

namespace trifusion {

// Checkpoint file: text manifest followed by a raw little-endian float
// payload. Manifest lines:
//   TRIFUSION-CKPT 1
//   step <int64>
//   rng_seed <u64>
//   best_val <double | none>
//   optim_step <int64 | none>
//   [config]
//   <flat key = value lines>
//   [tensors]
//   <name> <f64|f32> <rank> <extents...> <byte-offset>
//   [payload] <total-bytes>
//   <raw bytes>
// Parameters and (when present) Adam moments <name>.adam_m / .adam_v are
// stored as f64 so a resumed run continues the exact trajectory; f32
// payloads are accepted on read.
struct LoadedCheckpoint {
    RunConfig config;
    int64_t step = 0;
    uint64_t rng_seed = 0;
    double best_val = 0.0;
    bool has_best_val = false;
    bool has_optim = false;
    int64_t optim_step = 0;
    std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& path, const RunConfig& config, const ParamSet& params,
                     const AdamW* optimizer, int64_t step, uint64_t rng_seed,
                     const double* best_val);

LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies tensors into an existing ParamSet (and optimizer moments when
// present); missing or extra tensors are hard errors.
void restore_params(const LoadedCheckpoint& ckpt, ParamSet& params, AdamW* optimizer);

}  // namespace trifusion
