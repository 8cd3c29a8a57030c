#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "starpix/engine/nn.hpp"

namespace starpix::optim {

// SGD with classical momentum:
//   v <- mu * v + g
//   p <- p - lr * v
struct SgdConfig {
    double lr = 0.01;
    double momentum = 0.0;
};

// Adam with bias correction; epsilon is added to the *square root* of the
// corrected second moment, not inside it:
//   m <- b1 * m + (1 - b1) * g
//   v <- b2 * v + (1 - b2) * g^2
//   m_hat = m / (1 - b1^t),  v_hat = v / (1 - b2^t)
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

namespace detail {

template <typename T>
void validate_params(const std::vector<engine::Parameter<T>*>& params) {
    if (params.empty()) throw std::invalid_argument("optimizer: empty parameter list");
    for (auto* p : params)
        if (p == nullptr) throw std::invalid_argument("optimizer: null parameter");
}

}  // namespace detail

template <typename T>
class SgdMomentum {
public:
    SgdMomentum(std::vector<engine::Parameter<T>*> params, SgdConfig config)
        : params_(std::move(params)), config_(config) {
        detail::validate_params(params_);
        velocity_.reserve(params_.size());
        for (auto* p : params_) velocity_.push_back(engine::TensorT<T>::zeros(p->tensor().shape));
    }

    void set_lr(double lr) { config_.lr = lr; }
    double lr() const { return config_.lr; }
    std::uint64_t step_count() const { return t_; }

    void step() {
        ++t_;
        const T lr = static_cast<T>(config_.lr);
        const T mu = static_cast<T>(config_.momentum);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            if (!p.trainable() || p.grad() == nullptr) continue;
            auto& value = p.tensor();
            const auto& grad = *p.grad();
            auto& vel = velocity_[i];
            for (std::size_t j = 0; j < value.numel(); ++j) {
                vel.data[j] = mu * vel.data[j] + grad.data[j];
                value.data[j] -= lr * vel.data[j];
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->clear_grad();
    }

    // Optimizer state as named tensors, for checkpointing.
    std::vector<engine::NamedTensorRef<T>> state_tensors() {
        std::vector<engine::NamedTensorRef<T>> out;
        for (std::size_t i = 0; i < params_.size(); ++i)
            out.push_back({params_[i]->name + ".velocity", &velocity_[i]});
        return out;
    }

private:
    std::vector<engine::Parameter<T>*> params_;
    SgdConfig config_;
    std::vector<engine::TensorT<T>> velocity_;
    std::uint64_t t_ = 0;
};

template <typename T>
class Adam {
public:
    Adam(std::vector<engine::Parameter<T>*> params, AdamConfig config)
        : params_(std::move(params)), config_(config) {
        detail::validate_params(params_);
        if (config_.beta1 < 0 || config_.beta1 >= 1 || config_.beta2 < 0 || config_.beta2 >= 1)
            throw std::invalid_argument("Adam: betas must lie in [0,1)");
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (auto* p : params_) {
            m_.push_back(engine::TensorT<T>::zeros(p->tensor().shape));
            v_.push_back(engine::TensorT<T>::zeros(p->tensor().shape));
        }
    }

    void set_lr(double lr) { config_.lr = lr; }
    double lr() const { return config_.lr; }
    std::uint64_t step_count() const { return t_; }

    void step() {
        ++t_;
        const T lr = static_cast<T>(config_.lr);
        const T b1 = static_cast<T>(config_.beta1);
        const T b2 = static_cast<T>(config_.beta2);
        const T eps = static_cast<T>(config_.eps);
        const T bc1 = T(1) - static_cast<T>(std::pow(config_.beta1, static_cast<double>(t_)));
        const T bc2 = T(1) - static_cast<T>(std::pow(config_.beta2, static_cast<double>(t_)));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            if (!p.trainable() || p.grad() == nullptr) continue;
            auto& value = p.tensor();
            const auto& grad = *p.grad();
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t j = 0; j < value.numel(); ++j) {
                const T g = grad.data[j];
                m.data[j] = b1 * m.data[j] + (T(1) - b1) * g;
                v.data[j] = b2 * v.data[j] + (T(1) - b2) * g * g;
                const T m_hat = m.data[j] / bc1;
                const T v_hat = v.data[j] / bc2;
                value.data[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->clear_grad();
    }

    std::vector<engine::NamedTensorRef<T>> state_tensors() {
        std::vector<engine::NamedTensorRef<T>> out;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            out.push_back({params_[i]->name + ".adam_m", &m_[i]});
            out.push_back({params_[i]->name + ".adam_v", &v_[i]});
        }
        return out;
    }

private:
    std::vector<engine::Parameter<T>*> params_;
    AdamConfig config_;
    std::vector<engine::TensorT<T>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace starpix::optim
