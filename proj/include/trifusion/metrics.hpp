#pragma once

#include <string>
#include <limits>
#include <vector>

#include "trifusion/tensor.hpp"

namespace trifusion::metrics {

// Reference metrics over images in [0,1] (data range 1.0).

double rmse(const Tensor& a, const Tensor& b);

// 10*log10(1/MSE); identical images give +infinity.
double psnr(const Tensor& a, const Tensor& b);

// Single-scale SSIM: 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03,
// valid-region windowing (no padding), computed per channel and averaged.
double ssim(const Tensor& a, const Tensor& b);

struct SampleMetrics {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
    double rmse = 0.0;
    double lpips = std::numeric_limits<double>::quiet_NaN();  // merged externally if at all
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // population
    size_t count = 0;     // non-excluded samples
};

struct MetricReport {
    std::vector<SampleMetrics> samples;
    Aggregate psnr, ssim, rmse;
    std::vector<std::string> warnings;  // e.g. infinite PSNR exclusions
};

MetricReport aggregate(std::vector<SampleMetrics> samples);

// CSV: header, one row per sample, aggregate rows "mean" and "std".
// The lpips column is left empty unless values were merged in.
std::string report_csv(const MetricReport& report);

}  // namespace trifusion::metrics
