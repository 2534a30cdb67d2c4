#pragma once

#include <functional>
#include <vector>

#include "trifusion/graph.hpp"
#include "trifusion/rng.hpp"

namespace trifusion {

// Central-difference gradient verification. The operation under test is
// rebuilt from fresh leaves on every evaluation; the analytic gradient is
// compared against (f(x+h)-f(x-h))/2h of a fixed random scalar projection
// of the output.
struct GradCheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    size_t checked = 0;
};

using GraphFn = std::function<NodePtr(const std::vector<NodePtr>&)>;

struct GradCheckOptions {
    double h = 1e-5;
    // Coordinates checked per input; 0 means all. Coordinates are sampled
    // without replacement with the provided rng.
    size_t max_coords_per_input = 0;
    // Inputs to differentiate; empty means all.
    std::vector<size_t> check_inputs;
};

GradCheckResult finite_diff_check(const GraphFn& fn, const std::vector<Tensor>& inputs, Rng& rng,
                                  const GradCheckOptions& opts = {});

}  // namespace trifusion
