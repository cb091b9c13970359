#include "unts/optim.hpp"

#include <cmath>

#include "unts/error.hpp"

namespace unts {

namespace {

void require_grad_present(const Value& p) {
    if (!p->has_grad())
        throw ContractError("optimizer: parameter '" + p->name + "' has no populated grad");
}

} // namespace

void sgd_step(const std::vector<Value>& params, double learning_rate) {
    for (const auto& p : params) require_grad_present(p);
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p->val.values.size(); ++i)
            p->val.values[i] -= learning_rate * p->grad[i];
        p->zero_grad();
    }
}

double clip_global_norm(const std::vector<Value>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        require_grad_present(p);
        for (double g : p->grad) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (const auto& p : params)
            for (auto& g : p->grad) g *= scale;
    }
    return norm;
}

void zero_grads(const std::vector<Value>& params) {
    for (const auto& p : params) p->zero_grad();
}

void Adam::step(const std::vector<Value>& params) {
    for (const auto& p : params) require_grad_present(p);
    for (const auto& p : params) {
        Slot& s = slots_[p->name];
        const std::size_t n = p->val.values.size();
        if (s.m.size() != n) {
            s.m.assign(n, 0.0);
            s.v.assign(n, 0.0);
            s.t = 0;
        }
        ++s.t;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
        for (std::size_t i = 0; i < n; ++i) {
            const double g = p->grad[i];
            s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g;
            s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g * g;
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            p->val.values[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        p->zero_grad();
    }
}

} // namespace unts
