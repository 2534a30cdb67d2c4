#include "trifusion/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trifusion/errors.hpp"
#include "trifusion/ops.hpp"

namespace trifusion {

namespace {

double project(const Tensor& out, const Tensor& direction) {
    double s = 0.0;
    for (size_t i = 0; i < out.numel(); ++i) s += out[i] * direction[i];
    return s;
}

}  // namespace

GradCheckResult finite_diff_check(const GraphFn& fn, const std::vector<Tensor>& inputs, Rng& rng,
                                  const GradCheckOptions& opts) {
    // Analytic pass: build graph once, project output onto a fixed random
    // direction, backpropagate.
    std::vector<NodePtr> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(make_leaf(t, true));
    NodePtr out = fn(leaves);
    const Tensor direction = Tensor::normal(out->value.shape, rng);
    NodePtr s = nn::sum_all(nn::mul(out, make_leaf(direction)));
    backward(s);

    const auto eval = [&](const std::vector<Tensor>& xs) {
        std::vector<NodePtr> ls;
        ls.reserve(xs.size());
        for (const Tensor& t : xs) ls.push_back(make_leaf(t));
        return project(fn(ls)->value, direction);
    };

    std::vector<size_t> which = opts.check_inputs;
    if (which.empty()) {
        which.resize(inputs.size());
        std::iota(which.begin(), which.end(), 0);
    }

    GradCheckResult result;
    std::vector<Tensor> work = inputs;
    for (const size_t ii : which) {
        const size_t n = inputs[ii].numel();
        std::vector<size_t> coords(n);
        std::iota(coords.begin(), coords.end(), 0);
        if (opts.max_coords_per_input > 0 && opts.max_coords_per_input < n) {
            // Partial Fisher-Yates: deterministic subset without replacement.
            for (size_t k = 0; k < opts.max_coords_per_input; ++k) {
                const size_t j = k + static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(n - k - 1)));
                std::swap(coords[k], coords[j]);
            }
            coords.resize(opts.max_coords_per_input);
        }
        for (const size_t ci : coords) {
            const double orig = work[ii][ci];
            work[ii][ci] = orig + opts.h;
            const double fp = eval(work);
            work[ii][ci] = orig - opts.h;
            const double fm = eval(work);
            work[ii][ci] = orig;

            const double numeric = (fp - fm) / (2.0 * opts.h);
            const double analytic = leaves[ii]->grad.shape.empty() ? 0.0 : leaves[ii]->grad[ci];
            const double abs_err = std::fabs(numeric - analytic);
            const double rel_err =
                abs_err / std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
            result.max_abs_err = std::max(result.max_abs_err, abs_err);
            result.max_rel_err = std::max(result.max_rel_err, rel_err);
            ++result.checked;
        }
    }
    return result;
}

}  // namespace trifusion
