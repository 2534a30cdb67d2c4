#include "trifusion/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "trifusion/errors.hpp"

namespace trifusion {

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (const int d : shape) {
        if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
        n *= static_cast<size_t>(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}

Tensor Tensor::full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    t.fill(v);
    return t;
}

Tensor Tensor::scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
}

Tensor Tensor::uniform(std::vector<int> s, Rng& rng, double lo, double hi) {
    Tensor t(std::move(s));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::normal(std::vector<int> s, Rng& rng) {
    Tensor t(std::move(s));
    for (double& v : t.data) v = rng.normal();
    return t;
}

bool Tensor::all_finite() const {
    for (const double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::sum() const {
    double s = 0.0;
    for (const double v : data) s += v;
    return s;
}

double Tensor::min() const { return *std::min_element(data.begin(), data.end()); }
double Tensor::max() const { return *std::max_element(data.begin(), data.end()); }

double Tensor::abs_max() const {
    double m = 0.0;
    for (const double v : data) m = std::max(m, std::fabs(v));
    return m;
}

Tensor& Tensor::operator+=(const Tensor& o) {
    require_same_shape(*this, o, "tensor +=");
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
    require_same_shape(*this, o, "tensor -=");
    for (size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data) v *= s;
    return *this;
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

void Tensor::clamp(double lo, double hi) {
    for (double& v : data) v = std::min(hi, std::max(lo, v));
}

void require_shape(const Tensor& t, const std::vector<int>& expect, const char* what) {
    if (t.shape != expect)
        throw ShapeError(std::string(what) + ": expected shape " + shape_str(expect) + ", got " +
                         shape_str(t.shape));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
}

void require_rank3(const Tensor& t, const char* what) {
    if (t.rank() != 3)
        throw ShapeError(std::string(what) + ": expected rank-3 [C,H,W], got " + shape_str(t.shape));
}

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw ValueError(std::string(what) + ": non-finite values");
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace trifusion
