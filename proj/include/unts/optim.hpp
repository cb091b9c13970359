#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "unts/tensor.hpp"

namespace unts {

// Plain gradient step: p -= lr * g, then clears grads.
// Throws ContractError if a listed parameter has no populated grad.
void sgd_step(const std::vector<Value>& params, double learning_rate);

// Scales grads in place so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(const std::vector<Value>& params, double max_norm);

void zero_grads(const std::vector<Value>& params);

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Steps exactly the listed parameters and clears their grads.
    // Moment buffers and step counts are tracked per parameter, so subsets
    // of one optimizer's parameters may step at different cadences.
    void step(const std::vector<Value>& params);

    double lr() const { return lr_; }

    struct Slot {
        std::vector<double> m, v;
        std::int64_t t = 0;
    };
    // Exposed for checkpointing; keyed by parameter name.
    std::map<std::string, Slot>& slots() { return slots_; }
    const std::map<std::string, Slot>& slots() const { return slots_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::map<std::string, Slot> slots_;
};

} // namespace unts
