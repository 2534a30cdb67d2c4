#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "trifusion/rng.hpp"

namespace trifusion {

// Dense N-dimensional real array, row-major. Image-like tensors use the
// layout [channels, height, width]. Storage is double; checkpoints record
// the dtype explicitly.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v);
    static Tensor scalar(double v);
    static Tensor uniform(std::vector<int> s, Rng& rng, double lo, double hi);
    static Tensor normal(std::vector<int> s, Rng& rng);

    size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // [C,H,W] accessors.
    int channels() const { return shape.at(0); }
    int height() const { return shape.at(1); }
    int width() const { return shape.at(2); }
    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }

    bool all_finite() const;
    double sum() const;
    double min() const;
    double max() const;
    double abs_max() const;

    Tensor& operator+=(const Tensor& o);
    Tensor& operator-=(const Tensor& o);
    Tensor& operator*=(double s);
    void fill(double v);
    void clamp(double lo, double hi);
};

std::string shape_str(const std::vector<int>& shape);
size_t shape_numel(const std::vector<int>& shape);

void require_shape(const Tensor& t, const std::vector<int>& expect, const char* what);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_rank3(const Tensor& t, const char* what);
void require_finite(const Tensor& t, const char* what);

// Max absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace trifusion
