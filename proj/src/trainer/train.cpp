#include "starpix/trainer/train.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "starpix/common/log.hpp"
#include "starpix/optim/loss.hpp"
#include "starpix/optim/optimizers.hpp"
#include "starpix/optim/schedule.hpp"
#include "starpix/plot/chart.hpp"
#include "starpix/trainer/data.hpp"

namespace fs = std::filesystem;

namespace starpix::trainer {
namespace {

// Uniform facade over the two optimizers so the epoch loop stays flat.
class OptimizerHandle {
public:
    OptimizerHandle(const TrainConfig& config, std::vector<engine::Parameter<float>*> params) {
        if (config.optimizer == OptimizerKind::SgdMomentum) {
            sgd_ = std::make_unique<optim::SgdMomentum<float>>(
                std::move(params), optim::SgdConfig{config.lr, config.momentum});
        } else {
            adam_ = std::make_unique<optim::Adam<float>>(
                std::move(params),
                optim::AdamConfig{config.lr, config.beta1, config.beta2, config.eps});
        }
    }

    void set_lr(double lr) { sgd_ ? sgd_->set_lr(lr) : adam_->set_lr(lr); }
    void step() { sgd_ ? sgd_->step() : adam_->step(); }
    void zero_grad() { sgd_ ? sgd_->zero_grad() : adam_->zero_grad(); }
    std::uint64_t step_count() const { return sgd_ ? sgd_->step_count() : adam_->step_count(); }
    std::vector<engine::NamedTensorRef<float>> state_tensors() {
        return sgd_ ? sgd_->state_tensors() : adam_->state_tensors();
    }

private:
    std::unique_ptr<optim::SgdMomentum<float>> sgd_;
    std::unique_ptr<optim::Adam<float>> adam_;
};

engine::Var<float> batch_loss(StarModel& model, const Batch& batch,
                              const engine::Var<float>& pred, const TrainConfig& config) {
    (void)model;
    if (config.loss == LossKind::CrossEntropy) {
        return optim::cross_entropy_loss(pred, batch.classes);
    }
    return optim::mse_loss(pred, batch.values);
}

// Correct predictions in a forward output, under the head's notion of a hit.
int count_correct(const engine::TensorT<float>& pred, const Batch& batch, Head head) {
    const int n = pred.dim(0);
    int correct = 0;
    if (head == Head::Regression) {
        for (int i = 0; i < n; ++i) {
            const int target = static_cast<int>(std::lround(batch.values.data[i]));
            if (round_to_scaled_star(pred.data[i]) == target) ++correct;
        }
        return correct;
    }
    const int classes = pred.dim(1);
    for (int i = 0; i < n; ++i) {
        if (argmax_row(pred.data.data() + static_cast<std::size_t>(i) * classes, classes) ==
            batch.classes[i]) {
            ++correct;
        }
    }
    return correct;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

fs::path resolve_checkpoint_dir(const std::string& path) {
    fs::path p(path);
    if (fs::is_directory(p)) return p;
    if (fs::exists(p)) return p.parent_path();
    throw std::runtime_error("checkpoint path does not exist: " + path);
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

}  // namespace

int argmax_row(const float* row, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i) {
        if (row[i] > row[best]) best = i;
    }
    return best;
}

int round_to_scaled_star(float prediction) {
    if (!std::isfinite(prediction)) return 2;
    const long r = std::lround(static_cast<double>(prediction));
    return static_cast<int>(std::clamp(r, 2l, 10l));
}

EvalResult evaluate(StarModel& model, const imageprep::ImageStore& store,
                    const TrainConfig& config) {
    const std::size_t n = store.size();
    if (n == 0) throw std::invalid_argument("evaluate: store is empty");
    double loss_sum = 0.0;
    std::size_t correct = 0;
    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
    std::vector<std::size_t> indices;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        indices.resize(end - start);
        std::iota(indices.begin(), indices.end(), start);
        const Batch batch = make_batch(store, indices, config.head);
        const auto images = engine::Var<float>::leaf(batch.images);
        const auto pred = model.forward(images, /*training=*/false);
        const auto loss = batch_loss(model, batch, pred, config);
        loss_sum += static_cast<double>(loss.value().data[0]) * static_cast<double>(end - start);
        correct += static_cast<std::size_t>(count_correct(pred.value(), batch, config.head));
    }
    return {loss_sum / static_cast<double>(n),
            static_cast<double>(correct) / static_cast<double>(n)};
}

void save_checkpoint(const std::string& dir, StarModel& model,
                     const std::vector<engine::NamedTensorRef<float>>& optimizer_state,
                     const TrainConfig& config, const CheckpointMeta& meta,
                     const std::vector<EpochMetrics>& history) {
    fs::create_directories(dir);
    engine::save_weights(dir + "/model.ywts", model.state_tensors());
    engine::save_weights(dir + "/optimizer.ywts", optimizer_state);
    {
        std::ofstream out(dir + "/config.txt", std::ios::trunc);
        out << config_to_string(config);
        if (!out) throw std::runtime_error("cannot write " + dir + "/config.txt");
    }
    {
        std::ofstream out(dir + "/meta.txt", std::ios::trunc);
        out << "epoch = " << meta.epoch << '\n'
            << "optimizer_steps = " << meta.optimizer_steps << '\n'
            << "config_hash = " << meta.config_hash << '\n'
            << "val_loss = " << fmt17(meta.val_loss) << '\n'
            << "val_top1 = " << fmt17(meta.val_top1) << '\n';
        if (!out) throw std::runtime_error("cannot write " + dir + "/meta.txt");
    }
    {
        std::ofstream out(dir + "/history.csv", std::ios::trunc);
        out << metrics_csv(history);
        if (!out) throw std::runtime_error("cannot write " + dir + "/history.csv");
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const fs::path dir = resolve_checkpoint_dir(path);
    LoadedCheckpoint out;
    out.config = load_train_config((dir / "config.txt").string());
    validate(out.config);

    const auto meta = parse_kv_file(dir / "meta.txt");
    const auto need = [&](const char* key) -> const std::string& {
        auto it = meta.find(key);
        if (it == meta.end()) {
            throw std::runtime_error("checkpoint meta.txt is missing key '" +
                                     std::string(key) + "'");
        }
        return it->second;
    };
    out.meta.epoch = std::stoi(need("epoch"));
    out.meta.optimizer_steps = std::stoull(need("optimizer_steps"));
    out.meta.config_hash = std::stoull(need("config_hash"));
    out.meta.val_loss = std::stod(need("val_loss"));
    out.meta.val_top1 = std::stod(need("val_top1"));

    const std::uint64_t expected = config_hash(out.config);
    if (expected != out.meta.config_hash) {
        throw std::runtime_error("checkpoint config hash mismatch: meta.txt says " +
                                 std::to_string(out.meta.config_hash) + ", config.txt hashes to " +
                                 std::to_string(expected));
    }

    Rng rng(out.config.seed);
    out.model = std::make_unique<StarModel>(out.config, rng);
    if (out.config.regime == Regime::FeatureExtract) {
        for (auto* p : out.model->backbone().parameters()) p->set_trainable(false);
    }
    const auto loaded = engine::load_weights((dir / "model.ywts").string());
    engine::assign_weights(out.model->state_tensors(), loaded, /*require_all=*/true);
    return out;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,train_top1,val_top1\n";
    for (const auto& m : history) {
        out << m.epoch << ',' << fmt17(m.train_loss) << ',' << fmt17(m.val_loss) << ','
            << fmt17(m.train_top1) << ',' << fmt17(m.val_top1) << '\n';
    }
    return out.str();
}

std::vector<EpochMetrics> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("metrics csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    const auto column = [&](const char* name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw std::runtime_error("metrics csv: missing column '" + std::string(name) + "'");
    };
    const std::size_t c_epoch = column("epoch");
    const std::size_t c_tl = column("train_loss");
    const std::size_t c_vl = column("val_loss");
    const std::size_t c_ta = column("train_top1");
    const std::size_t c_va = column("val_top1");

    std::vector<EpochMetrics> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        const std::size_t needed =
            std::max({c_epoch, c_tl, c_vl, c_ta, c_va}) + 1;
        if (cells.size() < needed) {
            throw std::runtime_error("metrics csv line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(needed) + " columns, got " +
                                     std::to_string(cells.size()));
        }
        try {
            EpochMetrics m;
            m.epoch = std::stoi(cells[c_epoch]);
            m.train_loss = std::stod(cells[c_tl]);
            m.val_loss = std::stod(cells[c_vl]);
            m.train_top1 = std::stod(cells[c_ta]);
            m.val_top1 = std::stod(cells[c_va]);
            out.push_back(m);
        } catch (const std::exception&) {
            throw std::runtime_error("metrics csv line " + std::to_string(line_no) +
                                     ": malformed numeric cell");
        }
    }
    return out;
}

void emit_curves(const std::vector<EpochMetrics>& history, const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir + "/metrics.csv", std::ios::trunc);
        out << metrics_csv(history);
        if (!out) throw std::runtime_error("cannot write " + dir + "/metrics.csv");
    }
    render_metric_charts(history, dir);
}

void render_metric_charts(const std::vector<EpochMetrics>& history, const std::string& dir) {
    fs::create_directories(dir);
    if (history.empty()) return;
    std::vector<double> tl, vl, ta, va;
    for (const auto& m : history) {
        tl.push_back(m.train_loss);
        vl.push_back(m.val_loss);
        ta.push_back(m.train_top1);
        va.push_back(m.val_top1);
    }
    plot::ChartOptions options;
    options.x_label = "epoch";
    options.title = "loss";
    options.y_label = "loss";
    plot::line_chart(dir + "/loss.png", {{"train", tl}, {"val", vl}}, options);
    options.title = "top-1 accuracy";
    options.y_label = "top-1";
    plot::line_chart(dir + "/accuracy.png", {{"train", ta}, {"val", va}}, options);
}

TrainResult train(const TrainConfig& config) {
    validate(config);
    if (config.train_store.empty() || config.val_store.empty()) {
        throw std::invalid_argument("train: train_store and val_store must be set");
    }
    log::info("resolved config\n", config_to_string(config));

    const imageprep::ImageStore train_store = imageprep::read_store(config.train_store);
    const imageprep::ImageStore val_store = imageprep::read_store(config.val_store);
    if (train_store.size() == 0) throw std::invalid_argument("train: training store is empty");
    if (val_store.size() == 0) throw std::invalid_argument("train: validation store is empty");

    Rng rng(config.seed);
    auto model = build_model(config, rng);
    OptimizerHandle optimizer(config, model->parameters());
    const std::uint64_t hash = config_hash(config);
    const std::string best_dir = config.out_dir + "/best";

    TrainResult result;
    result.checkpoint_dir = best_dir;

    // Snapshot of the initialization; replaced as soon as an epoch beats it.
    const EvalResult init_val = evaluate(*model, val_store, config);
    const bool maximize = config.head != Head::Regression;
    double best_key = maximize ? init_val.top1 : -init_val.loss;
    result.best_epoch = 0;
    result.best_val_loss = init_val.loss;
    result.best_val_top1 = init_val.top1;
    save_checkpoint(best_dir, *model, optimizer.state_tensors(), config,
                    {0, 0, hash, init_val.loss, init_val.top1}, result.history);

    const std::size_t n = train_store.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = optim::scheduled_lr(config.lr, config.schedule, epoch);
        optimizer.set_lr(lr);
        rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::vector<std::size_t> batch_idx;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_no) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
            batch_idx.assign(order.begin() + start, order.begin() + end);
            const Batch batch = make_batch(train_store, batch_idx, config.head);
            const auto images = engine::Var<float>::leaf(batch.images);
            const auto pred = model->forward(images, /*training=*/true);
            const auto loss = batch_loss(*model, batch, pred, config);
            const double loss_value = loss.value().data[0];
            if (!std::isfinite(loss_value)) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch + 1) + ", batch " +
                                         std::to_string(batch_no));
            }
            loss_sum += loss_value * static_cast<double>(end - start);
            correct += static_cast<std::size_t>(count_correct(pred.value(), batch, config.head));
            engine::backward(loss);
            optimizer.step();
            optimizer.zero_grad();
        }

        const EvalResult val = evaluate(*model, val_store, config);
        EpochMetrics metrics;
        metrics.epoch = epoch + 1;
        metrics.train_loss = loss_sum / static_cast<double>(n);
        metrics.train_top1 = static_cast<double>(correct) / static_cast<double>(n);
        metrics.val_loss = val.loss;
        metrics.val_top1 = val.top1;
        result.history.push_back(metrics);
        log::info("epoch ", metrics.epoch, "/", config.epochs, " lr ", lr, " train_loss ",
                  metrics.train_loss, " val_loss ", metrics.val_loss, " train_top1 ",
                  metrics.train_top1, " val_top1 ", metrics.val_top1);

        const double key = maximize ? val.top1 : -val.loss;
        if (key > best_key) {
            best_key = key;
            result.best_epoch = metrics.epoch;
            result.best_val_loss = val.loss;
            result.best_val_top1 = val.top1;
            save_checkpoint(best_dir, *model, optimizer.state_tensors(), config,
                            {metrics.epoch, optimizer.step_count(), hash, val.loss, val.top1},
                            result.history);
        }
    }

    result.optimizer_steps = optimizer.step_count();
    result.model = std::move(model);
    emit_curves(result.history, config.out_dir);
    log::info("best epoch ", result.best_epoch, " val_loss ", result.best_val_loss,
              " val_top1 ", result.best_val_top1, " -> ", best_dir);
    return result;
}

}  // namespace starpix::trainer
