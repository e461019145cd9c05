#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kneexnet/nn/tensor.hpp"

namespace kneexnet::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

enum class Init { he_uniform, fan_in_uniform };

/// A differentiable layer. infer() is pure; forward() additionally caches what
/// backward() needs. backward() accumulates parameter gradients and returns the
/// gradient with respect to the layer input (an empty tensor when
/// input_grad is false).
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual Tensor infer(const Tensor& x) const = 0;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad_out, bool input_grad = true) = 0;
    virtual std::vector<Parameter*> parameters() { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;
};

class Conv2d final : public Layer {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
           std::size_t padding, std::uint64_t seed, Init init = Init::he_uniform);

    std::string kind() const override { return "conv2d"; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool input_grad = true) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

private:
    Tensor run(const Tensor& x, std::vector<double>* cols_cache) const;

    std::size_t in_, out_, k_, stride_, pad_;
    Parameter weight_;  // out x (in*k*k)
    Parameter bias_;    // out
    Shape in_shape_;
    std::vector<double> cols_;  // cached im2col, N x (in*k*k) x (oh*ow)
};

class Linear final : public Layer {
public:
    Linear(std::size_t in_features, std::size_t out_features, std::uint64_t seed, Init init = Init::fan_in_uniform);

    std::string kind() const override { return "linear"; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool input_grad = true) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }
    std::size_t in_features() const { return in_; }
    std::size_t out_features() const { return out_; }

private:
    std::size_t in_, out_;
    Parameter weight_;  // out x in
    Parameter bias_;
    Tensor input_;
};

class ReLU final : public Layer {
public:
    std::string kind() const override { return "relu"; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool input_grad = true) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

private:
    std::vector<unsigned char> mask_;
};

class MaxPool2d final : public Layer {
public:
    explicit MaxPool2d(std::size_t kernel) : k_(kernel) {}
    std::string kind() const override { return "maxpool2d"; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool input_grad = true) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }

private:
    Tensor run(const Tensor& x, std::vector<std::size_t>* argmax) const;
    std::size_t k_;
    Shape in_shape_;
    std::vector<std::size_t> argmax_;
};

/// Non-overlapping average pooling (kernel = stride).
class AvgPool2d final : public Layer {
public:
    explicit AvgPool2d(std::size_t kernel) : k_(kernel) {}
    std::string kind() const override { return "avgpool2d"; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool input_grad = true) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<AvgPool2d>(*this); }

private:
    std::size_t k_;
    Shape in_shape_;
};

class GlobalAvgPool final : public Layer {
public:
    std::string kind() const override { return "global_avgpool"; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool input_grad = true) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

private:
    Shape in_shape_;
};

class Flatten final : public Layer {
public:
    std::string kind() const override { return "flatten"; }
    Tensor infer(const Tensor& x) const override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out, bool input_grad = true) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

private:
    Shape in_shape_;
};

/// Ordered, named chain of layers.
class Sequential {
public:
    Sequential() = default;
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    Sequential& add(std::string name, std::unique_ptr<Layer> layer);
    void append(Sequential&& other);

    std::size_t size() const { return layers_.size(); }
    const std::string& name(std::size_t i) const { return layers_[i].first; }
    const Layer& layer(std::size_t i) const { return *layers_[i].second; }
    Layer& layer(std::size_t i) { return *layers_[i].second; }
    std::vector<std::string> names() const;
    /// Index of the named layer, or size() if absent.
    std::size_t find(const std::string& name) const;

    Tensor infer(const Tensor& x) const;
    Tensor forward(const Tensor& x);
    /// Full backward pass for parameter gradients. Stops below the first
    /// layer that has parameters, so no input gradient is produced.
    void backward(const Tensor& grad_out);

    /// Forward pass that also returns the output of layer `index`.
    std::pair<Tensor, Tensor> forward_capture(const Tensor& x, std::size_t index);
    /// Backpropagates from the network output down to the output of layer
    /// `index` and returns that gradient. Requires a preceding forward.
    Tensor backward_to(const Tensor& grad_out, std::size_t index);

    std::vector<Parameter*> parameters();
    void zero_grad();

private:
    std::vector<std::pair<std::string, std::unique_ptr<Layer>>> layers_;
};

}  // namespace kneexnet::nn
