#pragma once

#include <array>
#include <string>
#include <vector>

#include "trifusion/conditioning.hpp"
#include "trifusion/resample.hpp"
#include "trifusion/rng.hpp"
#include "trifusion/tensor.hpp"

namespace trifusion::data {

// Synthetic tri-modal phantom controls. Anatomical modalities combine
// overlapping ellipses with per-pixel texture (broad high-frequency
// content); the functional modality is a sum of smooth Gaussian blobs
// placed inside the anatomical support and blurred, so its detail-band
// energy stays low at every seed.
struct PhantomSpec {
    int size = 64;  // HR extent, power of two
    int ellipses_min = 4, ellipses_max = 8;
    double texture_amp = 0.12;
    int blobs_min = 2, blobs_max = 4;
    double blob_sigma_min = 0.10, blob_sigma_max = 0.22;  // fraction of size
    double blur_sigma = 2.0;                              // pixels
    int functional_channels = 1;                          // C_s in {1,3}
};

void validate_phantom_spec(const PhantomSpec& spec);

struct Phantom {
    Tensor anatomical_a;  // [1,S,S]
    Tensor anatomical_b;  // [1,S,S]
    Tensor functional;    // [C_s,S,S]
};

Phantom generate_phantom(const PhantomSpec& spec, uint64_t seed);

// Analytic fused ground truth, frozen for reproducibility:
//   L(p)     = max(a(p), b(p))                  (luminance)
//   v(p)     = mean over functional channels    (intensity)
//   cmap(v)  = (min(1,3v), clamp(3v-1), clamp(3v-2))   ("hot" map)
//   out_c(p) = (1 - v) * L + v * cmap_c(v), clamped to [0,1]
// Piecewise linear; bounded perturbation response |df| <= 6 |dinput|.
Tensor fuse_ground_truth(const Tensor& anatomical_a, const Tensor& anatomical_b,
                         const Tensor& functional);

constexpr double kFuseLipschitzBound = 6.0;
std::array<double, 3> fuse_colormap(double v);

// Re-exported resampler (shared with the conditioning path).
inline Tensor bicubic_resize(const Tensor& image, int out_h, int out_w) {
    return resample::bicubic_resize(image, out_h, out_w);
}

// Bicubic downsample of all three HR modalities by 1/scale, clamped to [0,1].
cond::ModalityTriplet degrade(const Phantom& hr, int scale);

struct TriModalSample {
    cond::ModalityTriplet lr;
    Tensor hr_a, hr_b, hr_f;
    Tensor target;  // fused ground truth, [3,S,S]
    int scale = 2;
};

TriModalSample make_sample(const PhantomSpec& spec, uint64_t seed, int scale);

// Binary netpbm: PGM (P5) for 1 channel, PPM (P6) for 3 channels, maxval
// 255, q = round(255 v). Values must be in [0,1].
void write_image(const std::string& path, const Tensor& image);
Tensor read_image(const std::string& path);

struct SplitEntry {
    std::string path;
    std::string split;  // "train" | "val" | "test"
};

struct DatasetManifest {
    std::vector<SplitEntry> entries;
    uint64_t seed = 0;
};

// Deterministic shuffled split; counts are round(fraction * n) with any
// remainder assigned to train. Empty splits are an error.
DatasetManifest make_split(const std::vector<std::string>& paths,
                           const std::array<double, 3>& fractions, uint64_t seed);

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

}  // namespace trifusion::data
