#pragma once

#include <memory>

#include "starpix/common/rng.hpp"
#include "starpix/engine/nn.hpp"
#include "starpix/engine/weights.hpp"
#include "starpix/trainer/config.hpp"

namespace starpix::trainer {

inline int head_output_dim(Head head) {
    switch (head) {
        case Head::NineClass: return 9;
        case Head::ThreeBucket: return 3;
        case Head::Regression: return 1;
    }
    return 0;
}

// Shared residual backbone plus a task head: 9 logits, 3 logits, or a single
// regression unit, depending on the configured head.
class StarModel : public engine::Module<float> {
public:
    StarModel(const TrainConfig& config, Rng& rng)
        : backbone_({3, config.base_channels, config.stage_blocks}, rng),
          head_("head.fc", backbone_.feature_dim(), head_output_dim(config.head), rng),
          head_kind_(config.head) {}

    engine::Var<float> forward(const engine::Var<float>& images, bool training) {
        return head_.forward(backbone_.forward(images, training));
    }

    Head head_kind() const { return head_kind_; }
    engine::ResNetBackbone<float>& backbone() { return backbone_; }
    engine::Linear<float>& head() { return head_; }

    void collect_parameters(std::vector<engine::Parameter<float>*>& out) override {
        backbone_.collect_parameters(out);
        head_.collect_parameters(out);
    }
    void collect_state(std::vector<engine::NamedTensorRef<float>>& out) override {
        backbone_.collect_state(out);
        head_.collect_state(out);
    }

private:
    engine::ResNetBackbone<float> backbone_;
    engine::Linear<float> head_;
    Head head_kind_;
};

// Builds the model for a validated config: seeds the init from `rng`,
// freezes the backbone under feature extraction, and optionally warm-starts
// from a YWTS file (by-name; shape clashes abort with the offending names).
inline std::unique_ptr<StarModel> build_model(const TrainConfig& config, Rng& rng) {
    validate(config);
    auto model = std::make_unique<StarModel>(config, rng);
    if (config.regime == Regime::FeatureExtract) {
        for (auto* p : model->backbone().parameters()) p->set_trainable(false);
    }
    if (!config.init_weights.empty()) {
        const auto loaded = engine::load_weights(config.init_weights);
        engine::assign_weights(model->state_tensors(), loaded, /*require_all=*/false);
    }
    return model;
}

}  // namespace starpix::trainer
