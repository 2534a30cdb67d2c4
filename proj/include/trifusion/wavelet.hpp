#pragma once

#include <array>
#include <string>
#include <vector>

#include "trifusion/tensor.hpp"

namespace trifusion::wavelet {

// Orthonormal Haar 2D-DWT. For each 2x2 block [[a,b],[c,d]]:
//   LL = (a+b+c+d)/2   (approximation)
//   H  = (a-b+c-d)/2   (horizontal-frequency detail, row high-pass)
//   V  = (a+b-c-d)/2   (vertical-frequency detail, column high-pass)
//   D  = (a-b-c+d)/2   (diagonal detail)
// The 1/2 normalization makes the transform orthonormal, so energy is
// preserved exactly (Parseval) and the inverse is the transpose.
struct SubbandSet {
    Tensor ll, v, h, d;
};

// J-level decomposition: detail triples (V,H,D) from level 1 (finest) to
// level J (coarsest), plus the level-J approximation band.
struct WaveletPyramid {
    std::vector<std::array<Tensor, 3>> levels;  // per level: {V, H, D}
    Tensor top_ll;
    int depth = 0;
};

// Band layout of a packed spectrum. All bands live on the level-1 grid
// (H/2 x W/2); level-j bands are nearest-neighbor replicated by 2^(j-1).
// Channel order: LL(J) first, then per level j=J..1 the triples V,H,D,
// each spanning `channels` consecutive channels.
struct SpectrumManifest {
    int levels = 0;
    int channels = 0;  // channels of the source image
    int src_h = 0;
    int src_w = 0;

    int packed_channels() const { return channels * (3 * levels + 1); }
    bool operator==(const SpectrumManifest&) const = default;
};

struct SpectrumTensor {
    Tensor data;  // [channels*(3J+1), src_h/2, src_w/2]
    SpectrumManifest manifest;
};

SubbandSet dwt2(const Tensor& image);
Tensor idwt2(const SubbandSet& bands);

WaveletPyramid dwt_multi(const Tensor& image, int levels);
Tensor idwt_multi(const WaveletPyramid& pyramid);

SpectrumTensor pack_spectrum(const WaveletPyramid& pyramid);
WaveletPyramid unpack_spectrum(const SpectrumTensor& spectrum);

// Transpose of pack_spectrum's replication: block-sums each packed band
// back to its native grid. Used by the gradient path; unpack_spectrum
// (subsampling) is its data-path inverse.
WaveletPyramid pack_spectrum_transpose(const SpectrumTensor& cotangent);

struct BandEnergy {
    std::string band;  // "LL", "V", "H", "D"
    int level = 0;
    double mean_sq = 0.0;
};

struct EnergyTable {
    std::vector<BandEnergy> bands;
    double hf_fraction = 0.0;  // detail energy / total energy (sums of squares)
};

EnergyTable subband_energy(const WaveletPyramid& pyramid);

// CSV: header, one row per band, final row "hf_fraction,,<value>".
std::string energy_table_csv(const EnergyTable& table);

}  // namespace trifusion::wavelet
