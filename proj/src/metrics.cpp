#include "trifusion/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "trifusion/errors.hpp"

namespace trifusion::metrics {

double rmse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "rmse");
    double acc = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.numel()));
}

double psnr(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "psnr");
    double mse = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_window() {
    static const std::vector<double> win = [] {
        std::vector<double> w(kWindow * kWindow);
        double norm = 0.0;
        const int r = kWindow / 2;
        for (int y = -r; y <= r; ++y)
            for (int x = -r; x <= r; ++x) {
                const double v = std::exp(-0.5 * (y * y + x * x) / (kSigma * kSigma));
                w[(y + r) * kWindow + (x + r)] = v;
                norm += v;
            }
        for (double& v : w) v /= norm;
        return w;
    }();
    return win;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "ssim");
    require_rank3(a, "ssim");
    if (a.height() < kWindow || a.width() < kWindow)
        throw ShapeError("ssim: image smaller than 11x11 window");

    const auto& win = gaussian_window();
    const int c = a.channels(), h = a.height(), w = a.width();
    const int oh = h - kWindow + 1, ow = w - kWindow + 1;

    double total = 0.0;
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
                for (int wy = 0; wy < kWindow; ++wy)
                    for (int wx = 0; wx < kWindow; ++wx) {
                        const double wv = win[wy * kWindow + wx];
                        const double va = a.at(ch, y + wy, x + wx);
                        const double vb = b.at(ch, y + wy, x + wx);
                        mu_a += wv * va;
                        mu_b += wv * vb;
                        aa += wv * va * va;
                        bb += wv * vb * vb;
                        ab += wv * va * vb;
                    }
                const double var_a = aa - mu_a * mu_a;
                const double var_b = bb - mu_b * mu_b;
                const double cov = ab - mu_a * mu_b;
                acc += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
                       ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
            }
        }
        total += acc / (static_cast<double>(oh) * ow);
    }
    return total / c;
}

MetricReport aggregate(std::vector<SampleMetrics> samples) {
    MetricReport report;
    report.samples = std::move(samples);

    const auto agg = [&](auto getter, bool exclude_inf, const char* name) {
        Aggregate a;
        double sum = 0.0;
        for (const auto& s : report.samples) {
            const double v = getter(s);
            if (exclude_inf && std::isinf(v)) {
                report.warnings.push_back(std::string("sample ") + s.name + ": infinite " + name +
                                          " excluded from aggregates");
                continue;
            }
            sum += v;
            ++a.count;
        }
        if (a.count == 0) return a;
        a.mean = sum / static_cast<double>(a.count);
        double sq = 0.0;
        for (const auto& s : report.samples) {
            const double v = getter(s);
            if (exclude_inf && std::isinf(v)) continue;
            sq += (v - a.mean) * (v - a.mean);
        }
        a.stddev = std::sqrt(sq / static_cast<double>(a.count));
        return a;
    };

    report.psnr = agg([](const SampleMetrics& s) { return s.psnr; }, true, "psnr");
    report.ssim = agg([](const SampleMetrics& s) { return s.ssim; }, false, "ssim");
    report.rmse = agg([](const SampleMetrics& s) { return s.rmse; }, false, "rmse");
    return report;
}

std::string report_csv(const MetricReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "sample,psnr,ssim,rmse,lpips\n";
    for (const auto& s : report.samples) {
        os << s.name << ",";
        if (std::isinf(s.psnr))
            os << "inf";
        else
            os << s.psnr;
        os << "," << s.ssim << "," << s.rmse << ",";
        if (!std::isnan(s.lpips)) os << s.lpips;
        os << "\n";
    }
    os << "mean," << report.psnr.mean << "," << report.ssim.mean << "," << report.rmse.mean << ",\n";
    os << "std," << report.psnr.stddev << "," << report.ssim.stddev << "," << report.rmse.stddev
       << ",\n";
    return os.str();
}

}  // namespace trifusion::metrics
