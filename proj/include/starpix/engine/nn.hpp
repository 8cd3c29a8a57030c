#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "starpix/common/rng.hpp"
#include "starpix/engine/graph.hpp"
#include "starpix/engine/ops.hpp"

namespace starpix::engine {

// Learnable leaf tensor. A frozen parameter (trainable() == false) never
// receives gradient and is never touched by optimizers.
template <typename T>
struct Parameter {
    std::string name;
    Var<T> var;

    Parameter() = default;
    Parameter(std::string n, TensorT<T> value, bool trainable = true)
        : name(std::move(n)), var(Var<T>::leaf(std::move(value), trainable)) {}

    TensorT<T>& tensor() { return var.value(); }
    const TensorT<T>& tensor() const { return var.value(); }
    bool trainable() const { return var.node()->requires_grad; }
    void set_trainable(bool on) { var.node()->requires_grad = on; }
    const TensorT<T>* grad() const { return var.grad(); }
    void clear_grad() { var.node()->clear_grad(); }
};

template <typename T>
struct NamedTensorRef {
    std::string name;
    TensorT<T>* tensor;
};

template <typename T>
class Module {
public:
    virtual ~Module() = default;

    // Parameters in a deterministic order.
    virtual void collect_parameters(std::vector<Parameter<T>*>& out) = 0;
    // Parameters plus non-trainable state (batch-norm running stats).
    virtual void collect_state(std::vector<NamedTensorRef<T>>& out) = 0;

    std::vector<Parameter<T>*> parameters() {
        std::vector<Parameter<T>*> out;
        collect_parameters(out);
        return out;
    }
    std::vector<NamedTensorRef<T>> state_tensors() {
        std::vector<NamedTensorRef<T>> out;
        collect_state(out);
        return out;
    }
};

namespace init {
// Fan-in scaled normal init for relu-family nets.
template <typename T>
TensorT<T> he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
    return TensorT<T>::randn(std::move(shape), rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
}
}  // namespace init

template <typename T>
class Linear : public Module<T> {
public:
    // init_std < 0 selects fan-in scaled init.
    Linear(std::string name, int in_features, int out_features, Rng& rng, double init_std = -1.0)
        : weight(name + ".weight",
                 init_std < 0
                     ? init::he_normal<T>({out_features, in_features},
                                          static_cast<std::size_t>(in_features), rng)
                     : TensorT<T>::randn({out_features, in_features}, rng, init_std)),
          bias(name + ".bias", TensorT<T>::zeros({out_features})) {}

    Var<T> forward(const Var<T>& x) { return linear(x, weight.var, bias.var); }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        out.push_back(&weight);
        out.push_back(&bias);
    }
    void collect_state(std::vector<NamedTensorRef<T>>& out) override {
        out.push_back({weight.name, &weight.tensor()});
        out.push_back({bias.name, &bias.tensor()});
    }

    Parameter<T> weight, bias;
};

template <typename T>
class Conv2d : public Module<T> {
public:
    Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad,
           Rng& rng, bool with_bias = true, double init_std = -1.0)
        : weight(name + ".weight",
                 init_std < 0
                     ? init::he_normal<T>({out_channels, in_channels, kernel, kernel},
                                          static_cast<std::size_t>(in_channels) * kernel * kernel,
                                          rng)
                     : TensorT<T>::randn({out_channels, in_channels, kernel, kernel}, rng,
                                         init_std)),
          stride_(stride),
          pad_(pad) {
        if (with_bias) bias = Parameter<T>(name + ".bias", TensorT<T>::zeros({out_channels}));
    }

    Var<T> forward(const Var<T>& x) {
        return conv2d(x, weight.var, bias.name.empty() ? Var<T>() : bias.var, stride_, pad_);
    }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        out.push_back(&weight);
        if (!bias.name.empty()) out.push_back(&bias);
    }
    void collect_state(std::vector<NamedTensorRef<T>>& out) override {
        out.push_back({weight.name, &weight.tensor()});
        if (!bias.name.empty()) out.push_back({bias.name, &bias.tensor()});
    }

    Parameter<T> weight, bias;

private:
    int stride_, pad_;
};

template <typename T>
class ConvTranspose2d : public Module<T> {
public:
    ConvTranspose2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                    int pad, Rng& rng, bool with_bias = true, double init_std = -1.0)
        : weight(name + ".weight",
                 init_std < 0
                     ? init::he_normal<T>({in_channels, out_channels, kernel, kernel},
                                          static_cast<std::size_t>(in_channels) * kernel * kernel,
                                          rng)
                     : TensorT<T>::randn({in_channels, out_channels, kernel, kernel}, rng,
                                         init_std)),
          stride_(stride),
          pad_(pad) {
        if (with_bias) bias = Parameter<T>(name + ".bias", TensorT<T>::zeros({out_channels}));
    }

    Var<T> forward(const Var<T>& x) {
        return conv_transpose2d(x, weight.var, bias.name.empty() ? Var<T>() : bias.var, stride_,
                                pad_);
    }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        out.push_back(&weight);
        if (!bias.name.empty()) out.push_back(&bias);
    }
    void collect_state(std::vector<NamedTensorRef<T>>& out) override {
        out.push_back({weight.name, &weight.tensor()});
        if (!bias.name.empty()) out.push_back({bias.name, &bias.tensor()});
    }

    Parameter<T> weight, bias;

private:
    int stride_, pad_;
};

template <typename T>
class BatchNorm2d : public Module<T> {
public:
    BatchNorm2d(std::string name, int channels, T momentum = T(0.1), T eps = T(1e-5))
        : gamma(name + ".gamma", TensorT<T>::full({channels}, T(1))),
          beta(name + ".beta", TensorT<T>::zeros({channels})),
          running_mean(TensorT<T>::zeros({channels})),
          running_var(TensorT<T>::full({channels}, T(1))),
          mean_name_(name + ".running_mean"),
          var_name_(name + ".running_var"),
          momentum_(momentum),
          eps_(eps) {}

    Var<T> forward(const Var<T>& x, bool training) {
        return batch_norm2d(x, gamma.var, beta.var, running_mean, running_var, training,
                            momentum_, eps_);
    }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
    void collect_state(std::vector<NamedTensorRef<T>>& out) override {
        out.push_back({gamma.name, &gamma.tensor()});
        out.push_back({beta.name, &beta.tensor()});
        out.push_back({mean_name_, &running_mean});
        out.push_back({var_name_, &running_var});
    }

    Parameter<T> gamma, beta;
    TensorT<T> running_mean, running_var;

private:
    std::string mean_name_, var_name_;
    T momentum_, eps_;
};

// conv-bn-relu-conv-bn plus skip; the skip path gets a strided 1x1
// projection whenever the block changes resolution or width.
template <typename T>
class ResidualBlock : public Module<T> {
public:
    ResidualBlock(const std::string& name, int in_channels, int out_channels, int stride, Rng& rng)
        : conv1_(name + ".conv1", in_channels, out_channels, 3, stride, 1, rng, false),
          bn1_(name + ".bn1", out_channels),
          conv2_(name + ".conv2", out_channels, out_channels, 3, 1, 1, rng, false),
          bn2_(name + ".bn2", out_channels) {
        if (stride != 1 || in_channels != out_channels) {
            proj_.emplace(name + ".proj", in_channels, out_channels, 1, stride, 0, rng, false);
            proj_bn_.emplace(name + ".proj_bn", out_channels);
        }
    }

    Var<T> forward(const Var<T>& x, bool training) {
        Var<T> main = bn2_.forward(conv2_.forward(relu(bn1_.forward(conv1_.forward(x), training))),
                                   training);
        Var<T> skip = proj_ ? proj_bn_->forward(proj_->forward(x), training) : x;
        return relu(residual_add(main, skip));
    }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        conv1_.collect_parameters(out);
        bn1_.collect_parameters(out);
        conv2_.collect_parameters(out);
        bn2_.collect_parameters(out);
        if (proj_) {
            proj_->collect_parameters(out);
            proj_bn_->collect_parameters(out);
        }
    }
    void collect_state(std::vector<NamedTensorRef<T>>& out) override {
        conv1_.collect_state(out);
        bn1_.collect_state(out);
        conv2_.collect_state(out);
        bn2_.collect_state(out);
        if (proj_) {
            proj_->collect_state(out);
            proj_bn_->collect_state(out);
        }
    }

private:
    Conv2d<T> conv1_;
    BatchNorm2d<T> bn1_;
    Conv2d<T> conv2_;
    BatchNorm2d<T> bn2_;
    std::optional<Conv2d<T>> proj_;
    std::optional<BatchNorm2d<T>> proj_bn_;
};

// Scaled-down residual CNN. Stage s runs at base_channels << s with a
// stride-2 entry block (stage 0 keeps the stem resolution). stage_blocks =
// {2,2,2,2} with base 64 reproduces the classic 18-layer shape; the default
// {1,1,1,1} is sized for CPU training.
struct BackboneConfig {
    int in_channels = 3;
    int base_channels = 16;
    std::vector<int> stage_blocks = {1, 1, 1, 1};
};

template <typename T>
class ResNetBackbone : public Module<T> {
public:
    ResNetBackbone(const BackboneConfig& config, Rng& rng)
        : stem_("stem.conv", config.in_channels, config.base_channels, 3, 2, 1, rng, false),
          stem_bn_("stem.bn", config.base_channels) {
        int channels = config.base_channels;
        for (std::size_t stage = 0; stage < config.stage_blocks.size(); ++stage) {
            const int out_channels = config.base_channels << stage;
            for (int b = 0; b < config.stage_blocks[stage]; ++b) {
                const int stride = (stage > 0 && b == 0) ? 2 : 1;
                const std::string name =
                    "stage" + std::to_string(stage) + ".block" + std::to_string(b);
                blocks_.push_back(std::make_unique<ResidualBlock<T>>(name, channels, out_channels,
                                                                     stride, rng));
                channels = out_channels;
            }
        }
        feature_dim_ = channels;
    }

    // (N,C,H,W) -> (N, feature_dim)
    Var<T> forward(const Var<T>& images, bool training) {
        Var<T> x = relu(stem_bn_.forward(stem_.forward(images), training));
        x = max_pool2d(x, 2, 2);
        for (auto& block : blocks_) x = block->forward(x, training);
        return global_avg_pool2d(x);
    }

    int feature_dim() const { return feature_dim_; }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        stem_.collect_parameters(out);
        stem_bn_.collect_parameters(out);
        for (auto& block : blocks_) block->collect_parameters(out);
    }
    void collect_state(std::vector<NamedTensorRef<T>>& out) override {
        stem_.collect_state(out);
        stem_bn_.collect_state(out);
        for (auto& block : blocks_) block->collect_state(out);
    }

private:
    Conv2d<T> stem_;
    BatchNorm2d<T> stem_bn_;
    std::vector<std::unique_ptr<ResidualBlock<T>>> blocks_;
    int feature_dim_ = 0;
};

}  // namespace starpix::engine
