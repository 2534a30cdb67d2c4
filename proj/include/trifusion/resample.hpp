#pragma once

#include "trifusion/tensor.hpp"

namespace trifusion::resample {

// Separable Catmull-Rom bicubic (a = -0.5), half-pixel centers, reflect
// boundary (edge sample repeated). Used for modality upsampling and for
// degradation downsampling; no anti-alias prefilter in either direction.
Tensor bicubic_resize(const Tensor& image, int out_h, int out_w);

// Transpose of the linear map bicubic_resize(., out_h, out_w) applied to a
// cotangent of the output; returns the cotangent of an [C,in_h,in_w] input.
Tensor bicubic_resize_transpose(const Tensor& cotangent, int in_h, int in_w);

// Factor-2 bilinear upsampling, half-pixel convention.
Tensor bilinear_up2x(const Tensor& image);
Tensor bilinear_up2x_transpose(const Tensor& cotangent);

Tensor nearest_up2x(const Tensor& image);
Tensor nearest_up2x_transpose(const Tensor& cotangent);

// Reflect (symmetric) index mapping used by all resamplers.
int reflect_index(int i, int n);

// Catmull-Rom kernel value at distance t.
double catmull_rom(double t);

}  // namespace trifusion::resample
