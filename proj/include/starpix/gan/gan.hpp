#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "starpix/common/rng.hpp"
#include "starpix/engine/nn.hpp"
#include "starpix/imageprep/image.hpp"
#include "starpix/imageprep/store.hpp"
#include "starpix/optim/optimizers.hpp"

namespace starpix::gan {

// DCGAN-shaped pair: transposed-conv generator, strided-conv discriminator.
// Three 2x stages on each side, so both image extents must divide by 8.
struct GanArch {
    int z_dim = 64;
    int base_channels = 32;
    int height = 48;  // 144x200 training images downscaled ~3x by default
    int width = 64;

    void check() const;
};

template <typename T>
class Generator : public engine::Module<T> {
public:
    // kInitStd follows the usual DCGAN recipe: every weight from N(0, 0.02).
    // Fan-in scaled inits leave the nets too loud and too confident for
    // adversarial training to settle.
    static constexpr double kInitStd = 0.02;

    Generator(const GanArch& arch, Rng& rng)
        : arch_(arch),
          fc_("G.fc", arch.z_dim, 4 * arch.base_channels * (arch.height / 8) * (arch.width / 8),
              rng, kInitStd),
          bn0_("G.bn0", 4 * arch.base_channels),
          up1_("G.up1", 4 * arch.base_channels, 2 * arch.base_channels, 4, 2, 1, rng, false,
               kInitStd),
          bn1_("G.bn1", 2 * arch.base_channels),
          up2_("G.up2", 2 * arch.base_channels, arch.base_channels, 4, 2, 1, rng, false,
               kInitStd),
          bn2_("G.bn2", arch.base_channels),
          up3_("G.up3", arch.base_channels, 3, 4, 2, 1, rng, true, kInitStd) {
        arch.check();
    }

    // (N, z_dim) -> (N, 3, H, W) in [-1, 1]
    engine::Var<T> forward(const engine::Var<T>& z, bool training) {
        using namespace engine;
        Var<T> x = fc_.forward(z);
        x = reshape(x, {x.value().dim(0), 4 * arch_.base_channels, arch_.height / 8,
                        arch_.width / 8});
        x = relu(bn0_.forward(x, training));
        x = relu(bn1_.forward(up1_.forward(x), training));
        x = relu(bn2_.forward(up2_.forward(x), training));
        return tanh_op(up3_.forward(x));
    }

    void collect_parameters(std::vector<engine::Parameter<T>*>& out) override {
        fc_.collect_parameters(out);
        bn0_.collect_parameters(out);
        up1_.collect_parameters(out);
        bn1_.collect_parameters(out);
        up2_.collect_parameters(out);
        bn2_.collect_parameters(out);
        up3_.collect_parameters(out);
    }
    void collect_state(std::vector<engine::NamedTensorRef<T>>& out) override {
        fc_.collect_state(out);
        bn0_.collect_state(out);
        up1_.collect_state(out);
        bn1_.collect_state(out);
        up2_.collect_state(out);
        bn2_.collect_state(out);
        up3_.collect_state(out);
    }

private:
    GanArch arch_;
    engine::Linear<T> fc_;
    engine::BatchNorm2d<T> bn0_;
    engine::ConvTranspose2d<T> up1_;
    engine::BatchNorm2d<T> bn1_;
    engine::ConvTranspose2d<T> up2_;
    engine::BatchNorm2d<T> bn2_;
    engine::ConvTranspose2d<T> up3_;
};

template <typename T>
class Discriminator : public engine::Module<T> {
public:
    Discriminator(const GanArch& arch, Rng& rng)
        : conv1_("D.conv1", 3, arch.base_channels, 4, 2, 1, rng, true, Generator<T>::kInitStd),
          conv2_("D.conv2", arch.base_channels, 2 * arch.base_channels, 4, 2, 1, rng, false,
                 Generator<T>::kInitStd),
          bn2_("D.bn2", 2 * arch.base_channels),
          conv3_("D.conv3", 2 * arch.base_channels, 4 * arch.base_channels, 4, 2, 1, rng, false,
                 Generator<T>::kInitStd),
          bn3_("D.bn3", 4 * arch.base_channels),
          fc_("D.fc", 4 * arch.base_channels * (arch.height / 8) * (arch.width / 8), 1, rng,
              Generator<T>::kInitStd) {
        arch.check();
    }

    // (N, 3, H, W) -> (N, 1) logits; probability = sigmoid(logit)
    engine::Var<T> forward(const engine::Var<T>& images, bool training) {
        using namespace engine;
        Var<T> x = leaky_relu(conv1_.forward(images), T(0.2));
        x = leaky_relu(bn2_.forward(conv2_.forward(x), training), T(0.2));
        x = leaky_relu(bn3_.forward(conv3_.forward(x), training), T(0.2));
        return fc_.forward(flatten(x));
    }

    void collect_parameters(std::vector<engine::Parameter<T>*>& out) override {
        conv1_.collect_parameters(out);
        conv2_.collect_parameters(out);
        bn2_.collect_parameters(out);
        conv3_.collect_parameters(out);
        bn3_.collect_parameters(out);
        fc_.collect_parameters(out);
    }
    void collect_state(std::vector<engine::NamedTensorRef<T>>& out) override {
        conv1_.collect_state(out);
        conv2_.collect_state(out);
        bn2_.collect_state(out);
        conv3_.collect_state(out);
        bn3_.collect_state(out);
        fc_.collect_state(out);
    }

private:
    engine::Conv2d<T> conv1_;
    engine::Conv2d<T> conv2_;
    engine::BatchNorm2d<T> bn2_;
    engine::Conv2d<T> conv3_;
    engine::BatchNorm2d<T> bn3_;
    engine::Linear<T> fc_;
};

// d_loss = E[softplus(-D(x))] + E[softplus(D(G(z)))], the negated printed
// objective in a form that stays finite for any logit. At D = 1/2 it equals
// 2 ln 2.
template <typename T>
engine::Var<T> discriminator_loss(const engine::Var<T>& real_logits,
                                  const engine::Var<T>& fake_logits) {
    using namespace engine;
    return add(mean_all(softplus(neg(real_logits))), mean_all(softplus(fake_logits)));
}

// Non-saturating form: g_loss = E[softplus(-D(G(z)))] (= ln 2 at D = 1/2).
template <typename T>
engine::Var<T> generator_loss(const engine::Var<T>& fake_logits) {
    using namespace engine;
    return mean_all(softplus(neg(fake_logits)));
}

// (count, z_dim) standard normal draws.
engine::Tensor noise_batch(int count, int z_dim, Rng& rng);

// One descent step on d_loss over a detached fake batch; G parameters are
// never touched. Returns the loss; non-finite aborts with step context.
double discriminator_step(Generator<float>& g, Discriminator<float>& d,
                          optim::Adam<float>& d_opt, const engine::Tensor& real_batch,
                          const engine::Tensor& noise);

// One descent step on the non-saturating g_loss through a frozen-in-place D.
double generator_step(Generator<float>& g, Discriminator<float>& d, optim::Adam<float>& g_opt,
                      const engine::Tensor& noise);

struct GanConfig {
    GanArch arch;
    int batch_size = 16;
    double lr = 2e-4;
    double beta1 = 0.5;  // standard for small GANs
    double beta2 = 0.999;
    double eps = 1e-8;
    int steps = 2000;
    int checkpoint_every = 500;
    std::uint64_t seed = 0;
};

struct GanCheckpointInfo {
    int serial = 0;
    int step = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    std::string dir;
};

struct StepLosses {
    double d = 0.0;
    double g = 0.0;
};

struct GanTrainResult {
    std::vector<GanCheckpointInfo> checkpoints;
    std::vector<StepLosses> losses;  // one entry per alternation step
    std::unique_ptr<Generator<float>> g;
    std::unique_ptr<Discriminator<float>> d;
};

// Alternating 1:1 D/G training over a YIMG store (records are resized to the
// training resolution). Checkpoints land in numbered subdirectories of
// out_dir, each with G+D weights, a metadata file and an 8x8 sample grid.
GanTrainResult train_gan(const std::string& store_path, const GanConfig& config,
                         const std::string& out_dir);

// Store records mapped to (N, 3, H, W) floats in [-1,1] at the target size.
engine::Tensor store_to_real_bank(const imageprep::ImageStore& store, int height, int width);

void save_gan_checkpoint(const std::string& dir, Generator<float>& g, Discriminator<float>& d,
                         const GanArch& arch, const GanCheckpointInfo& info,
                         std::uint64_t sample_seed);

struct LoadedGan {
    GanArch arch;
    std::unique_ptr<Generator<float>> g;
    std::unique_ptr<Discriminator<float>> d;
    GanCheckpointInfo info;
};

// Accepts the checkpoint directory or any file inside it.
LoadedGan load_gan_checkpoint(const std::string& path);

// `count` eval-mode samples from Rng(seed) noise, tiled row-major into a
// near-square grid (count 64 -> exactly 8x8); unused cells stay black.
imageprep::RgbImage sample_grid(Generator<float>& g, const GanArch& arch, int count,
                                std::uint64_t seed);

}  // namespace starpix::gan
