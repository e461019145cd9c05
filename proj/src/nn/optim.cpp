#include "kneexnet/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace kneexnet::nn {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), options_(options) {
    for (const auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->grad.fill(0.0);
}

void Adam::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
    const double step_size = options_.lr / bc1;
    const double bc2_sqrt = std::sqrt(bc2);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& value = params_[k]->value.values();
        const auto& grad = params_[k]->grad.values();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            double g = grad[i];
            if (options_.weight_decay != 0.0) g += options_.weight_decay * value[i];
            m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
            v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
            const double denom = std::sqrt(v[i]) / bc2_sqrt + options_.eps;
            value[i] -= step_size * m[i] / denom;
        }
    }
}

LossResult cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
    if (logits.rank() != 2 || logits.dim(0) != targets.size() || targets.empty()) {
        throw std::invalid_argument("cross_entropy: logits must be N x K with N matching targets");
    }
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    LossResult out{0.0, Tensor({n, k})};
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t b = 0; b < n; ++b) {
        if (targets[b] >= k) throw std::invalid_argument(fmt::format("cross_entropy: target {} out of range", targets[b]));
        const double* row = logits.data() + b * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const double log_z = mx + std::log(z);
        out.loss += (log_z - row[targets[b]]) * inv_n;
        for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(row[j] - log_z);
            out.grad[b * k + j] = (p - (j == targets[b] ? 1.0 : 0.0)) * inv_n;
        }
    }
    return out;
}

}  // namespace kneexnet::nn
