#include "starpix/gan/gan.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "starpix/common/log.hpp"
#include "starpix/engine/weights.hpp"
#include "starpix/plot/chart.hpp"

namespace fs = std::filesystem;

namespace starpix::gan {
namespace {

void clear_all_grads(Generator<float>& g, Discriminator<float>& d) {
    for (auto* p : g.parameters()) p->clear_grad();
    for (auto* p : d.parameters()) p->clear_grad();
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::map<std::string, std::string> parse_kv_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto trim = [](std::string& s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
        };
        trim(key);
        trim(value);
        out[key] = value;
    }
    return out;
}

// Half-pixel-center bilinear resample of one int8 channel plane into floats
// scaled by 1/128.
void resize_plane(const std::int8_t* src, int sh, int sw, float* dst, int dh, int dw) {
    const double ry = static_cast<double>(sh) / dh;
    const double rx = static_cast<double>(sw) / dw;
    for (int oy = 0; oy < dh; ++oy) {
        double fy = (oy + 0.5) * ry - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(sh - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, sh - 1);
        const double wy = fy - y0;
        for (int ox = 0; ox < dw; ++ox) {
            double fx = (ox + 0.5) * rx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(sw - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, sw - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * src[y0 * sw + x0] + wx * src[y0 * sw + x1];
            const double bottom = (1.0 - wx) * src[y1 * sw + x0] + wx * src[y1 * sw + x1];
            dst[oy * dw + ox] =
                static_cast<float>(((1.0 - wy) * top + wy * bottom) / 128.0);
        }
    }
}

}  // namespace

void GanArch::check() const {
    if (z_dim < 1) throw std::invalid_argument("gan: z_dim must be >= 1");
    if (base_channels < 1) throw std::invalid_argument("gan: base_channels must be >= 1");
    if (height < 8 || width < 8 || height % 8 != 0 || width % 8 != 0) {
        throw std::invalid_argument("gan: image extents must be multiples of 8, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
}

engine::Tensor noise_batch(int count, int z_dim, Rng& rng) {
    engine::Tensor z = engine::Tensor::zeros({count, z_dim});
    for (auto& v : z.data) v = static_cast<float>(rng.normal());
    return z;
}

double discriminator_step(Generator<float>& g, Discriminator<float>& d,
                          optim::Adam<float>& d_opt, const engine::Tensor& real_batch,
                          const engine::Tensor& noise) {
    if (real_batch.dim(0) != noise.dim(0)) {
        throw std::invalid_argument("discriminator_step: real batch holds " +
                                    std::to_string(real_batch.dim(0)) + " images but noise holds " +
                                    std::to_string(noise.dim(0)) + " vectors");
    }
    const auto z = engine::Var<float>::leaf(noise);
    const auto fake = g.forward(z, /*training=*/true);
    // Detach: this step scores the fakes, it must never push gradient into G.
    const auto fake_detached = engine::Var<float>::leaf(fake.value());
    const auto real = engine::Var<float>::leaf(real_batch);
    const auto loss =
        discriminator_loss(d.forward(real, true), d.forward(fake_detached, true));
    const double value = loss.value().data[0];
    if (!std::isfinite(value)) {
        throw std::runtime_error("discriminator_step: non-finite loss");
    }
    engine::backward(loss);
    d_opt.step();
    clear_all_grads(g, d);
    return value;
}

double generator_step(Generator<float>& g, Discriminator<float>& d, optim::Adam<float>& g_opt,
                      const engine::Tensor& noise) {
    const auto z = engine::Var<float>::leaf(noise);
    const auto fake = g.forward(z, /*training=*/true);
    const auto loss = generator_loss(d.forward(fake, true));
    const double value = loss.value().data[0];
    if (!std::isfinite(value)) {
        throw std::runtime_error("generator_step: non-finite loss");
    }
    engine::backward(loss);
    g_opt.step();  // gradients reached D's parameters too; only G moves
    clear_all_grads(g, d);
    return value;
}

engine::Tensor store_to_real_bank(const imageprep::ImageStore& store, int height, int width) {
    const int n = static_cast<int>(store.size());
    const int sh = static_cast<int>(store.dims.height);
    const int sw = static_cast<int>(store.dims.width);
    const int channels = static_cast<int>(store.dims.channels);
    engine::Tensor bank = engine::Tensor::zeros({n, channels, height, width});
    const std::size_t plane_in = static_cast<std::size_t>(sh) * sw;
    const std::size_t plane_out = static_cast<std::size_t>(height) * width;
    for (int i = 0; i < n; ++i) {
        const std::int8_t* rec = store.record(i);
        float* dst = bank.ptr() + static_cast<std::size_t>(i) * channels * plane_out;
        for (int c = 0; c < channels; ++c) {
            resize_plane(rec + c * plane_in, sh, sw, dst + c * plane_out, height, width);
        }
    }
    return bank;
}

void save_gan_checkpoint(const std::string& dir, Generator<float>& g, Discriminator<float>& d,
                         const GanArch& arch, const GanCheckpointInfo& info,
                         std::uint64_t sample_seed) {
    fs::create_directories(dir);
    auto state = g.state_tensors();
    const auto d_state = d.state_tensors();
    state.insert(state.end(), d_state.begin(), d_state.end());
    engine::save_weights(dir + "/gan.ywts", state);

    std::ofstream meta(dir + "/meta.txt", std::ios::trunc);
    meta << "serial = " << info.serial << '\n'
         << "step = " << info.step << '\n'
         << "d_loss = " << fmt17(info.d_loss) << '\n'
         << "g_loss = " << fmt17(info.g_loss) << '\n'
         << "z_dim = " << arch.z_dim << '\n'
         << "base_channels = " << arch.base_channels << '\n'
         << "height = " << arch.height << '\n'
         << "width = " << arch.width << '\n';
    if (!meta) throw std::runtime_error("cannot write " + dir + "/meta.txt");
    meta.close();

    imageprep::write_png_rgb(dir + "/samples.png", sample_grid(g, arch, 64, sample_seed));
}

LoadedGan load_gan_checkpoint(const std::string& path) {
    fs::path dir(path);
    if (!fs::is_directory(dir)) {
        if (!fs::exists(dir)) throw std::runtime_error("checkpoint path does not exist: " + path);
        dir = dir.parent_path();
    }
    const auto kv = parse_kv_file(dir / "meta.txt");
    const auto need = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw std::runtime_error("gan checkpoint meta.txt is missing key '" +
                                     std::string(key) + "'");
        }
        return it->second;
    };
    LoadedGan out;
    out.arch.z_dim = std::stoi(need("z_dim"));
    out.arch.base_channels = std::stoi(need("base_channels"));
    out.arch.height = std::stoi(need("height"));
    out.arch.width = std::stoi(need("width"));
    out.arch.check();
    out.info.serial = std::stoi(need("serial"));
    out.info.step = std::stoi(need("step"));
    out.info.d_loss = std::stod(need("d_loss"));
    out.info.g_loss = std::stod(need("g_loss"));
    out.info.dir = dir.string();

    Rng rng(1);
    out.g = std::make_unique<Generator<float>>(out.arch, rng);
    out.d = std::make_unique<Discriminator<float>>(out.arch, rng);
    auto state = out.g->state_tensors();
    const auto d_state = out.d->state_tensors();
    state.insert(state.end(), d_state.begin(), d_state.end());
    engine::assign_weights(state, engine::load_weights((dir / "gan.ywts").string()),
                           /*require_all=*/true);
    return out;
}

imageprep::RgbImage sample_grid(Generator<float>& g, const GanArch& arch, int count,
                                std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    const int rows = (count + cols - 1) / cols;
    auto grid = imageprep::RgbImage::filled(rows * arch.height, cols * arch.width, 0, 0, 0);

    Rng rng(seed);
    constexpr int kChunk = 16;
    const std::size_t plane = static_cast<std::size_t>(arch.height) * arch.width;
    for (int done = 0; done < count; done += kChunk) {
        const int n = std::min(kChunk, count - done);
        const auto z = engine::Var<float>::leaf(noise_batch(n, arch.z_dim, rng));
        const auto out = g.forward(z, /*training=*/false);
        const float* data = out.value().data.data();
        for (int i = 0; i < n; ++i) {
            const int cell = done + i;
            const int r = cell / cols;
            const int c = cell % cols;
            for (int ch = 0; ch < 3; ++ch) {
                const float* src = data + (static_cast<std::size_t>(i) * 3 + ch) * plane;
                for (int y = 0; y < arch.height; ++y) {
                    for (int x = 0; x < arch.width; ++x) {
                        const double v = (src[y * arch.width + x] + 1.0) * 127.5;
                        grid.at(r * arch.height + y, c * arch.width + x)[ch] =
                            static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
                    }
                }
            }
        }
    }
    return grid;
}

GanTrainResult train_gan(const std::string& store_path, const GanConfig& config,
                         const std::string& out_dir) {
    config.arch.check();
    if (config.batch_size < 1) throw std::invalid_argument("gan-train: batch_size must be >= 1");
    if (config.steps < 1) throw std::invalid_argument("gan-train: steps must be >= 1");
    if (config.checkpoint_every < 1) {
        throw std::invalid_argument("gan-train: checkpoint_every must be >= 1");
    }

    const imageprep::ImageStore store = imageprep::read_store(store_path);
    if (store.size() < static_cast<std::size_t>(config.batch_size)) {
        throw std::invalid_argument("gan-train: store holds " + std::to_string(store.size()) +
                                    " records; need at least one batch of " +
                                    std::to_string(config.batch_size));
    }
    const engine::Tensor bank = store_to_real_bank(store, config.arch.height, config.arch.width);
    const std::size_t n = store.size();
    const std::size_t sample_len = bank.numel() / n;

    Rng rng(config.seed);
    GanTrainResult result;
    result.g = std::make_unique<Generator<float>>(config.arch, rng);
    result.d = std::make_unique<Discriminator<float>>(config.arch, rng);
    optim::Adam<float> d_opt(result.d->parameters(),
                             {config.lr, config.beta1, config.beta2, config.eps});
    optim::Adam<float> g_opt(result.g->parameters(),
                             {config.lr, config.beta1, config.beta2, config.eps});
    fs::create_directories(out_dir);

    engine::Tensor real = engine::Tensor::zeros(
        {config.batch_size, 3, config.arch.height, config.arch.width});
    int serial = 0;
    for (int step = 1; step <= config.steps; ++step) {
        for (int i = 0; i < config.batch_size; ++i) {
            const std::size_t pick = rng.bounded(n);
            std::copy_n(bank.data.data() + pick * sample_len, sample_len,
                        real.ptr() + static_cast<std::size_t>(i) * sample_len);
        }
        const engine::Tensor zd = noise_batch(config.batch_size, config.arch.z_dim, rng);
        const double d_loss = discriminator_step(*result.g, *result.d, d_opt, real, zd);
        const engine::Tensor zg = noise_batch(config.batch_size, config.arch.z_dim, rng);
        const double g_loss = generator_step(*result.g, *result.d, g_opt, zg);
        result.losses.push_back({d_loss, g_loss});

        if (step % config.checkpoint_every == 0 || step == config.steps) {
            ++serial;
            char suffix[16];
            std::snprintf(suffix, sizeof(suffix), "%04d", serial);
            GanCheckpointInfo info{serial, step, d_loss, g_loss,
                                   out_dir + "/checkpoint_" + suffix};
            save_gan_checkpoint(info.dir, *result.g, *result.d, config.arch, info, config.seed);
            result.checkpoints.push_back(info);
            log::info("gan checkpoint ", serial, " at step ", step, " d_loss ", d_loss,
                      " g_loss ", g_loss);
        }
    }

    // Loss curves: the plateau-then-degrade pattern shows up here.
    {
        std::ofstream csv(out_dir + "/losses.csv", std::ios::trunc);
        csv << "step,d_loss,g_loss\n";
        for (std::size_t i = 0; i < result.losses.size(); ++i) {
            csv << (i + 1) << ',' << fmt17(result.losses[i].d) << ',' << fmt17(result.losses[i].g)
                << '\n';
        }
        if (!csv) throw std::runtime_error("cannot write " + out_dir + "/losses.csv");
        std::vector<double> dl, gl;
        for (const auto& l : result.losses) {
            dl.push_back(l.d);
            gl.push_back(l.g);
        }
        plot::ChartOptions options;
        options.title = "gan losses";
        options.x_label = "step";
        options.y_label = "loss";
        plot::line_chart(out_dir + "/losses.png", {{"d_loss", dl}, {"g_loss", gl}}, options);
    }
    return result;
}

}  // namespace starpix::gan
