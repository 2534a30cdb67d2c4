#pragma once

#include <memory>
#include <string>
#include <vector>

#include "trifusion/graph.hpp"
#include "trifusion/rng.hpp"
#include "trifusion/tensor.hpp"

namespace trifusion {

// A named learnable tensor with its gradient accumulator. grad is zeroed
// at the start of each optimization step.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
};

class ParamSet {
public:
    Param* add(std::string name, Tensor init);
    Param* find(const std::string& name) const;
    Param* require(const std::string& name) const;

    void zero_grads();
    bool grads_finite() const;
    size_t total_elems() const;

    const std::vector<std::unique_ptr<Param>>& items() const { return items_; }

private:
    std::vector<std::unique_ptr<Param>> items_;
};

// Per-graph binding of parameters: use() creates (or reuses) a leaf node
// per Param for one forward/backward pass; accumulate_grads() folds the
// leaf gradients back, scaled by `weight`.
class GraphParams {
public:
    explicit GraphParams(bool needs_grad = true) : needs_grad_(needs_grad) {}

    NodePtr use(Param* p);
    void accumulate_grads(double weight = 1.0);

    // Substitutes an externally built node for a parameter (gradient-check
    // harness hook); the node is excluded from accumulate_grads().
    void override_param(Param* p, NodePtr node);

private:
    bool needs_grad_;
    std::vector<std::pair<Param*, NodePtr>> bound_;
    std::vector<std::pair<Param*, NodePtr>> overrides_;
};

// He-style centered uniform init scaled by fan-in.
Tensor he_uniform(std::vector<int> shape, int fan_in, Rng& rng);

// Decoupled-weight-decay Adam. Moments are kept per parameter in the same
// order as the ParamSet.
struct AdamWConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

class AdamW {
public:
    AdamW(ParamSet& params, AdamWConfig cfg);

    // Applies one update from the accumulated grads. Non-finite gradients
    // throw DivergenceError and leave parameters untouched.
    void step();

    int64_t step_count() const { return step_count_; }
    const AdamWConfig& config() const { return cfg_; }

    // Checkpoint access: first/second moments aligned with the ParamSet.
    std::vector<Tensor>& first_moments() { return m_; }
    std::vector<Tensor>& second_moments() { return v_; }
    void set_step_count(int64_t t) { step_count_ = t; }

private:
    ParamSet& params_;
    AdamWConfig cfg_;
    std::vector<Tensor> m_, v_;
    int64_t step_count_ = 0;
};

}  // namespace trifusion
