#include "trifusion/resample.hpp"

#include <cmath>

#include "trifusion/errors.hpp"

namespace trifusion::resample {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

double catmull_rom(double t) {
    t = std::fabs(t);
    if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

namespace {

struct Tap {
    int idx[4];
    double w[4];
    int count;
};

// Per-output-index source taps for one axis, half-pixel mapping
// src = (i + 0.5) * n_in / n_out - 0.5.
std::vector<Tap> bicubic_taps(int n_in, int n_out) {
    std::vector<Tap> taps(n_out);
    const double ratio = static_cast<double>(n_in) / n_out;
    for (int i = 0; i < n_out; ++i) {
        const double src = (i + 0.5) * ratio - 0.5;
        const int base = static_cast<int>(std::floor(src));
        const double frac = src - base;
        Tap& t = taps[i];
        t.count = 4;
        for (int k = 0; k < 4; ++k) {
            t.idx[k] = reflect_index(base - 1 + k, n_in);
            t.w[k] = catmull_rom(frac + 1.0 - k);
        }
    }
    return taps;
}

std::vector<Tap> bilinear2x_taps(int n_in) {
    std::vector<Tap> taps(2 * n_in);
    for (int i = 0; i < 2 * n_in; ++i) {
        const double src = (i + 0.5) * 0.5 - 0.5;
        const int base = static_cast<int>(std::floor(src));
        const double frac = src - base;
        Tap& t = taps[i];
        t.count = 2;
        t.idx[0] = reflect_index(base, n_in);
        t.idx[1] = reflect_index(base + 1, n_in);
        t.w[0] = 1.0 - frac;
        t.w[1] = frac;
    }
    return taps;
}

// Resample the last axis (width) of [C,H,W] by the given taps.
Tensor apply_taps_w(const Tensor& in, const std::vector<Tap>& taps) {
    const int c = in.channels(), h = in.height(), w_in = in.width();
    const int w_out = static_cast<int>(taps.size());
    Tensor out({c, h, w_out});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            const double* row = &in.data[(static_cast<size_t>(ch) * h + y) * w_in];
            double* orow = &out.data[(static_cast<size_t>(ch) * h + y) * w_out];
            for (int x = 0; x < w_out; ++x) {
                const Tap& t = taps[x];
                double acc = 0.0;
                for (int k = 0; k < t.count; ++k) acc += t.w[k] * row[t.idx[k]];
                orow[x] = acc;
            }
        }
    }
    return out;
}

Tensor apply_taps_h(const Tensor& in, const std::vector<Tap>& taps) {
    const int c = in.channels(), h_in = in.height(), w = in.width();
    const int h_out = static_cast<int>(taps.size());
    Tensor out({c, h_out, w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h_out; ++y) {
            const Tap& t = taps[y];
            double* orow = &out.data[(static_cast<size_t>(ch) * h_out + y) * w];
            for (int k = 0; k < t.count; ++k) {
                const double* row = &in.data[(static_cast<size_t>(ch) * h_in + t.idx[k]) * w];
                const double wk = t.w[k];
                for (int x = 0; x < w; ++x) orow[x] += wk * row[x];
            }
        }
    }
    return out;
}

// Transposes: scatter output cotangent through the same taps.
Tensor scatter_taps_w(const Tensor& cot, const std::vector<Tap>& taps, int w_in) {
    const int c = cot.channels(), h = cot.height(), w_out = cot.width();
    Tensor out({c, h, w_in});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            const double* grow = &cot.data[(static_cast<size_t>(ch) * h + y) * w_out];
            double* row = &out.data[(static_cast<size_t>(ch) * h + y) * w_in];
            for (int x = 0; x < w_out; ++x) {
                const Tap& t = taps[x];
                for (int k = 0; k < t.count; ++k) row[t.idx[k]] += t.w[k] * grow[x];
            }
        }
    }
    return out;
}

Tensor scatter_taps_h(const Tensor& cot, const std::vector<Tap>& taps, int h_in) {
    const int c = cot.channels(), h_out = cot.height(), w = cot.width();
    Tensor out({c, h_in, w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h_out; ++y) {
            const Tap& t = taps[y];
            const double* grow = &cot.data[(static_cast<size_t>(ch) * h_out + y) * w];
            for (int k = 0; k < t.count; ++k) {
                double* row = &out.data[(static_cast<size_t>(ch) * h_in + t.idx[k]) * w];
                const double wk = t.w[k];
                for (int x = 0; x < w; ++x) row[x] += wk * grow[x];
            }
        }
    }
    return out;
}

}  // namespace

Tensor bicubic_resize(const Tensor& image, int out_h, int out_w) {
    require_rank3(image, "bicubic_resize");
    if (out_h < 1 || out_w < 1) throw ValueError("bicubic_resize: non-positive output extent");
    const auto taps_w = bicubic_taps(image.width(), out_w);
    const auto taps_h = bicubic_taps(image.height(), out_h);
    return apply_taps_h(apply_taps_w(image, taps_w), taps_h);
}

Tensor bicubic_resize_transpose(const Tensor& cotangent, int in_h, int in_w) {
    require_rank3(cotangent, "bicubic_resize_transpose");
    const auto taps_w = bicubic_taps(in_w, cotangent.width());
    const auto taps_h = bicubic_taps(in_h, cotangent.height());
    return scatter_taps_w(scatter_taps_h(cotangent, taps_h, in_h), taps_w, in_w);
}

Tensor bilinear_up2x(const Tensor& image) {
    require_rank3(image, "bilinear_up2x");
    return apply_taps_h(apply_taps_w(image, bilinear2x_taps(image.width())),
                        bilinear2x_taps(image.height()));
}

Tensor bilinear_up2x_transpose(const Tensor& cotangent) {
    require_rank3(cotangent, "bilinear_up2x_transpose");
    if (cotangent.height() % 2 != 0 || cotangent.width() % 2 != 0)
        throw ShapeError("bilinear_up2x_transpose: odd extents");
    const int in_h = cotangent.height() / 2, in_w = cotangent.width() / 2;
    return scatter_taps_w(scatter_taps_h(cotangent, bilinear2x_taps(in_h), in_h),
                          bilinear2x_taps(in_w), in_w);
}

Tensor nearest_up2x(const Tensor& image) {
    require_rank3(image, "nearest_up2x");
    const int c = image.channels(), h = image.height(), w = image.width();
    Tensor out({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < 2 * h; ++y)
            for (int x = 0; x < 2 * w; ++x) out.at(ch, y, x) = image.at(ch, y / 2, x / 2);
    return out;
}

Tensor nearest_up2x_transpose(const Tensor& cotangent) {
    require_rank3(cotangent, "nearest_up2x_transpose");
    if (cotangent.height() % 2 != 0 || cotangent.width() % 2 != 0)
        throw ShapeError("nearest_up2x_transpose: odd extents");
    const int c = cotangent.channels(), h = cotangent.height() / 2, w = cotangent.width() / 2;
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < 2 * h; ++y)
            for (int x = 0; x < 2 * w; ++x) out.at(ch, y / 2, x / 2) += cotangent.at(ch, y, x);
    return out;
}

}  // namespace trifusion::resample
