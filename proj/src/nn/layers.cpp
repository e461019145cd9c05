#include "kneexnet/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "kneexnet/random.hpp"

namespace kneexnet::nn {

std::string to_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
}

namespace {

void init_uniform(Tensor& t, std::size_t fan_in, Init init, std::uint64_t seed) {
    const double bound = init == Init::he_uniform ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                                  : 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng(seed);
    for (auto& v : t.values()) v = rng.uniform(-bound, bound);
}

void require_rank(const Tensor& x, std::size_t rank, const char* who) {
    if (x.rank() != rank) {
        throw std::invalid_argument(fmt::format("{}: expected rank-{} input, got {}", who, rank, to_string(x.shape())));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
               std::size_t padding, std::uint64_t seed, Init init)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding),
      weight_{"weight", Tensor({out_channels, in_channels * kernel * kernel}), Tensor({out_channels, in_channels * kernel * kernel})},
      bias_{"bias", Tensor({out_channels}), Tensor({out_channels})} {
    const std::size_t fan_in = in_ * k_ * k_;
    init_uniform(weight_.value, fan_in, init, derive_seed(seed, 1));
    init_uniform(bias_.value, fan_in, Init::fan_in_uniform, derive_seed(seed, 2));
}

Tensor Conv2d::run(const Tensor& x, std::vector<double>* cols_cache) const {
    require_rank(x, 4, "conv2d");
    if (x.dim(1) != in_) {
        throw std::invalid_argument(fmt::format("conv2d: expected {} input channels, got {}", in_, x.dim(1)));
    }
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_) throw std::invalid_argument("conv2d: input smaller than kernel");
    const std::size_t oh = (h + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t ow = (w + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t kk = in_ * k_ * k_, p = oh * ow;

    Tensor y({n, out_, oh, ow});
    std::vector<double> local;
    if (cols_cache) cols_cache->assign(n * kk * p, 0.0);
    else local.resize(kk * p);

    for (std::size_t b = 0; b < n; ++b) {
        double* cols = cols_cache ? cols_cache->data() + b * kk * p : local.data();
        const double* xb = x.data() + b * in_ * h * w;
        for (std::size_t c = 0; c < in_; ++c) {
            for (std::size_t ki = 0; ki < k_; ++ki) {
                for (std::size_t kj = 0; kj < k_; ++kj) {
                    double* row = cols + ((c * k_ + ki) * k_ + kj) * p;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ki) - static_cast<std::ptrdiff_t>(pad_);
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * stride_ + kj) - static_cast<std::ptrdiff_t>(pad_);
                            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                                                ix < static_cast<std::ptrdiff_t>(w);
                            row[oy * ow + ox] = inside ? xb[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] : 0.0;
                        }
                    }
                }
            }
        }
        double* yb = y.data() + b * out_ * p;
        for (std::size_t o = 0; o < out_; ++o) {
            double* yrow = yb + o * p;
            std::fill(yrow, yrow + p, bias_.value[o]);
            const double* wrow = weight_.value.data() + o * kk;
            for (std::size_t r = 0; r < kk; ++r) {
                const double wv = wrow[r];
                const double* crow = cols + r * p;
                for (std::size_t j = 0; j < p; ++j) yrow[j] += wv * crow[j];
            }
        }
    }
    return y;
}

Tensor Conv2d::infer(const Tensor& x) const { return run(x, nullptr); }

Tensor Conv2d::forward(const Tensor& x) {
    in_shape_ = x.shape();
    return run(x, &cols_);
}

Tensor Conv2d::backward(const Tensor& grad_out, bool input_grad) {
    const std::size_t n = in_shape_.at(0), h = in_shape_[2], w = in_shape_[3];
    const std::size_t oh = grad_out.dim(2), ow = grad_out.dim(3);
    const std::size_t kk = in_ * k_ * k_, p = oh * ow;

    Tensor dx = input_grad ? Tensor(in_shape_) : Tensor();
    std::vector<double> dcols(input_grad ? kk * p : 0);
    for (std::size_t b = 0; b < n; ++b) {
        const double* cols = cols_.data() + b * kk * p;
        const double* gb = grad_out.data() + b * out_ * p;
        for (std::size_t o = 0; o < out_; ++o) {
            const double* grow = gb + o * p;
            double* dwrow = weight_.grad.data() + o * kk;
            double bsum = 0.0;
            for (std::size_t j = 0; j < p; ++j) bsum += grow[j];
            bias_.grad[o] += bsum;
            for (std::size_t r = 0; r < kk; ++r) {
                const double* crow = cols + r * p;
                double acc = 0.0;
                for (std::size_t j = 0; j < p; ++j) acc += grow[j] * crow[j];
                dwrow[r] += acc;
            }
        }
        if (!input_grad) continue;
        std::fill(dcols.begin(), dcols.end(), 0.0);
        for (std::size_t o = 0; o < out_; ++o) {
            const double* grow = gb + o * p;
            const double* wrow = weight_.value.data() + o * kk;
            for (std::size_t r = 0; r < kk; ++r) {
                const double wv = wrow[r];
                double* drow = dcols.data() + r * p;
                for (std::size_t j = 0; j < p; ++j) drow[j] += wv * grow[j];
            }
        }
        double* dxb = dx.data() + b * in_ * h * w;
        for (std::size_t c = 0; c < in_; ++c) {
            for (std::size_t ki = 0; ki < k_; ++ki) {
                for (std::size_t kj = 0; kj < k_; ++kj) {
                    const double* row = dcols.data() + ((c * k_ + ki) * k_ + kj) * p;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ki) - static_cast<std::ptrdiff_t>(pad_);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * stride_ + kj) - static_cast<std::ptrdiff_t>(pad_);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            dxb[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] += row[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::size_t in_features, std::size_t out_features, std::uint64_t seed, Init init)
    : in_(in_features), out_(out_features),
      weight_{"weight", Tensor({out_features, in_features}), Tensor({out_features, in_features})},
      bias_{"bias", Tensor({out_features}), Tensor({out_features})} {
    init_uniform(weight_.value, in_, init, derive_seed(seed, 1));
    init_uniform(bias_.value, in_, Init::fan_in_uniform, derive_seed(seed, 2));
}

Tensor Linear::infer(const Tensor& x) const {
    require_rank(x, 2, "linear");
    if (x.dim(1) != in_) {
        throw std::invalid_argument(fmt::format("linear: expected {} input features, got {}", in_, x.dim(1)));
    }
    const std::size_t n = x.dim(0);
    Tensor y({n, out_});
    for (std::size_t b = 0; b < n; ++b) {
        const double* xr = x.data() + b * in_;
        for (std::size_t o = 0; o < out_; ++o) {
            const double* wr = weight_.value.data() + o * in_;
            double acc = 0.0;
            for (std::size_t i = 0; i < in_; ++i) acc += wr[i] * xr[i];
            y[b * out_ + o] = acc + bias_.value[o];
        }
    }
    return y;
}

Tensor Linear::forward(const Tensor& x) {
    Tensor y = infer(x);
    input_ = x;
    return y;
}

Tensor Linear::backward(const Tensor& grad_out, bool input_grad) {
    const std::size_t n = input_.dim(0);
    Tensor dx = input_grad ? Tensor({n, in_}) : Tensor();
    for (std::size_t b = 0; b < n; ++b) {
        const double* xr = input_.data() + b * in_;
        const double* gr = grad_out.data() + b * out_;
        double* dxr = input_grad ? dx.data() + b * in_ : nullptr;
        for (std::size_t o = 0; o < out_; ++o) {
            const double g = gr[o];
            bias_.grad[o] += g;
            double* dwr = weight_.grad.data() + o * in_;
            const double* wr = weight_.value.data() + o * in_;
            for (std::size_t i = 0; i < in_; ++i) dwr[i] += g * xr[i];
            if (dxr) {
                for (std::size_t i = 0; i < in_; ++i) dxr[i] += g * wr[i];
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Activations and pooling

Tensor ReLU::infer(const Tensor& x) const {
    Tensor y = x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor ReLU::forward(const Tensor& x) {
    mask_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mask_[i] = x[i] > 0.0;
    return infer(x);
}

Tensor ReLU::backward(const Tensor& grad_out, bool) {
    Tensor dx = grad_out;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        if (!mask_[i]) dx[i] = 0.0;
    }
    return dx;
}

Tensor MaxPool2d::run(const Tensor& x, std::vector<std::size_t>* argmax) const {
    require_rank(x, 4, "maxpool2d");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h / k_, ow = w / k_;
    Tensor y({n, c, oh, ow});
    if (argmax) argmax->assign(y.size(), 0);
    std::size_t out_i = 0;
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const std::size_t base = plane * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox, ++out_i) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_i = base + oy * k_ * w + ox * k_;
                for (std::size_t dy = 0; dy < k_; ++dy) {
                    for (std::size_t dx = 0; dx < k_; ++dx) {
                        const std::size_t i = base + (oy * k_ + dy) * w + ox * k_ + dx;
                        if (x[i] > best) {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                y[out_i] = best;
                if (argmax) (*argmax)[out_i] = best_i;
            }
        }
    }
    return y;
}

Tensor MaxPool2d::infer(const Tensor& x) const { return run(x, nullptr); }

Tensor MaxPool2d::forward(const Tensor& x) {
    in_shape_ = x.shape();
    return run(x, &argmax_);
}

Tensor MaxPool2d::backward(const Tensor& grad_out, bool) {
    Tensor dx(in_shape_);
    for (std::size_t i = 0; i < grad_out.size(); ++i) dx[argmax_[i]] += grad_out[i];
    return dx;
}

Tensor AvgPool2d::infer(const Tensor& x) const {
    require_rank(x, 4, "avgpool2d");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h / k_, ow = w / k_;
    const double scale = 1.0 / static_cast<double>(k_ * k_);
    Tensor y({n, c, oh, ow});
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const double* xp = x.data() + plane * h * w;
        double* yp = y.data() + plane * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t dy = 0; dy < k_; ++dy) {
                const double* xr = xp + (oy * k_ + dy) * w;
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (std::size_t dx = 0; dx < k_; ++dx) acc += xr[ox * k_ + dx];
                    yp[oy * ow + ox] += acc;
                }
            }
        }
        for (std::size_t i = 0; i < oh * ow; ++i) yp[i] *= scale;
    }
    return y;
}

Tensor AvgPool2d::forward(const Tensor& x) {
    in_shape_ = x.shape();
    return infer(x);
}

Tensor AvgPool2d::backward(const Tensor& grad_out, bool) {
    const std::size_t h = in_shape_[2], w = in_shape_[3];
    const std::size_t oh = grad_out.dim(2), ow = grad_out.dim(3);
    const double scale = 1.0 / static_cast<double>(k_ * k_);
    Tensor dx(in_shape_);
    for (std::size_t plane = 0; plane < in_shape_[0] * in_shape_[1]; ++plane) {
        const double* gp = grad_out.data() + plane * oh * ow;
        double* dp = dx.data() + plane * h * w;
        for (std::size_t y = 0; y < oh * k_; ++y) {
            for (std::size_t x = 0; x < ow * k_; ++x) dp[y * w + x] = gp[(y / k_) * ow + x / k_] * scale;
        }
    }
    return dx;
}

Tensor GlobalAvgPool::infer(const Tensor& x) const {
    require_rank(x, 4, "global_avgpool");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor y({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < hw; ++j) acc += x[i * hw + j];
        y[i] = acc / static_cast<double>(hw);
    }
    return y;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    in_shape_ = x.shape();
    return infer(x);
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out, bool) {
    const std::size_t hw = in_shape_[2] * in_shape_[3];
    Tensor dx(in_shape_);
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        const double g = grad_out[i] / static_cast<double>(hw);
        for (std::size_t j = 0; j < hw; ++j) dx[i * hw + j] = g;
    }
    return dx;
}

Tensor Flatten::infer(const Tensor& x) const {
    if (x.rank() < 2) throw std::invalid_argument("flatten: expected a batched input");
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor Flatten::forward(const Tensor& x) {
    in_shape_ = x.shape();
    return infer(x);
}

Tensor Flatten::backward(const Tensor& grad_out, bool) { return grad_out.reshaped(in_shape_); }

// ---------------------------------------------------------------------------
// Sequential

Sequential::Sequential(const Sequential& other) {
    for (const auto& [name, layer] : other.layers_) layers_.emplace_back(name, layer->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
    if (this != &other) {
        Sequential copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Sequential& Sequential::add(std::string name, std::unique_ptr<Layer> layer) {
    if (find(name) != size()) throw std::invalid_argument(fmt::format("duplicate layer name '{}'", name));
    layers_.emplace_back(std::move(name), std::move(layer));
    return *this;
}

void Sequential::append(Sequential&& other) {
    for (auto& [name, layer] : other.layers_) add(name, std::move(layer));
    other.layers_.clear();
}

std::vector<std::string> Sequential::names() const {
    std::vector<std::string> out;
    for (const auto& l : layers_) out.push_back(l.first);
    return out;
}

std::size_t Sequential::find(const std::string& name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].first == name) return i;
    }
    return layers_.size();
}

Tensor Sequential::infer(const Tensor& x) const {
    Tensor h = x;
    for (const auto& l : layers_) h = l.second->infer(h);
    return h;
}

Tensor Sequential::forward(const Tensor& x) {
    Tensor h = x;
    for (auto& l : layers_) h = l.second->forward(h);
    return h;
}

std::pair<Tensor, Tensor> Sequential::forward_capture(const Tensor& x, std::size_t index) {
    Tensor h = x;
    Tensor captured;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i].second->forward(h);
        if (i == index) captured = h;
    }
    return {std::move(h), std::move(captured)};
}

void Sequential::backward(const Tensor& grad_out) {
    std::size_t first = 0;
    while (first < layers_.size() && layers_[first].second->parameters().empty()) ++first;
    Tensor g = grad_out;
    for (std::size_t i = layers_.size(); i-- > first;) g = layers_[i].second->backward(g, i > first);
}

Tensor Sequential::backward_to(const Tensor& grad_out, std::size_t index) {
    Tensor g = grad_out;
    for (std::size_t i = layers_.size(); i-- > index + 1;) g = layers_[i].second->backward(g);
    return g;
}

std::vector<Parameter*> Sequential::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
        for (auto* p : l.second->parameters()) out.push_back(p);
    }
    return out;
}

void Sequential::zero_grad() {
    for (auto* p : parameters()) p->grad.fill(0.0);
}

}  // namespace kneexnet::nn
