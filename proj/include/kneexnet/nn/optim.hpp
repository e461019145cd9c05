#pragma once

#include <span>
#include <vector>

#include "kneexnet/nn/layers.hpp"

namespace kneexnet::nn {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// Adam with the usual bias-corrected moment estimates.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamOptions options);

    void set_lr(double lr) { options_.lr = lr; }
    double lr() const { return options_.lr; }
    void step();
    void zero_grad();

private:
    std::vector<Parameter*> params_;
    AdamOptions options_;
    std::vector<std::vector<double>> m_, v_;
    long step_ = 0;
};

struct LossResult {
    double loss = 0.0;  // mean over the batch
    Tensor grad;        // d loss / d logits
};

/// Mean softmax cross-entropy over a batch of logits (N x K).
LossResult cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

}  // namespace kneexnet::nn
