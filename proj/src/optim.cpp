#include "trifusion/optim.hpp"

#include <cmath>

#include "trifusion/errors.hpp"

namespace trifusion {

Param* ParamSet::add(std::string name, Tensor init) {
    if (find(name)) throw ValueError("ParamSet: duplicate parameter name " + name);
    auto p = std::make_unique<Param>();
    p->name = std::move(name);
    p->grad = Tensor::zeros(init.shape);
    p->value = std::move(init);
    items_.push_back(std::move(p));
    return items_.back().get();
}

Param* ParamSet::find(const std::string& name) const {
    for (const auto& p : items_)
        if (p->name == name) return p.get();
    return nullptr;
}

Param* ParamSet::require(const std::string& name) const {
    Param* p = find(name);
    if (!p) throw ValueError("ParamSet: missing parameter " + name);
    return p;
}

void ParamSet::zero_grads() {
    for (const auto& p : items_) p->grad.fill(0.0);
}

bool ParamSet::grads_finite() const {
    for (const auto& p : items_)
        if (!p->grad.all_finite()) return false;
    return true;
}

size_t ParamSet::total_elems() const {
    size_t n = 0;
    for (const auto& p : items_) n += p->value.numel();
    return n;
}

NodePtr GraphParams::use(Param* p) {
    for (const auto& [param, node] : overrides_)
        if (param == p) return node;
    for (const auto& [param, node] : bound_)
        if (param == p) return node;
    NodePtr node = make_leaf(p->value, needs_grad_);
    bound_.emplace_back(p, node);
    return node;
}

void GraphParams::override_param(Param* p, NodePtr node) { overrides_.emplace_back(p, node); }

void GraphParams::accumulate_grads(double weight) {
    for (const auto& [param, node] : bound_) {
        if (node->grad.shape.empty()) continue;
        for (size_t i = 0; i < param->grad.numel(); ++i)
            param->grad[i] += weight * node->grad[i];
    }
}

Tensor he_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), rng, -bound, bound);
}

AdamW::AdamW(ParamSet& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
    for (const auto& p : params_.items()) {
        m_.push_back(Tensor::zeros(p->value.shape));
        v_.push_back(Tensor::zeros(p->value.shape));
    }
}

void AdamW::step() {
    if (!params_.grads_finite())
        throw DivergenceError("adamw_step: non-finite gradients, aborting step");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    const auto& items = params_.items();
    for (size_t pi = 0; pi < items.size(); ++pi) {
        Param& p = *items[pi];
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        for (size_t i = 0; i < p.value.numel(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            // Decoupled decay acts on the value directly, not through moments.
            p.value[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p.value[i]);
        }
    }
}

}  // namespace trifusion
