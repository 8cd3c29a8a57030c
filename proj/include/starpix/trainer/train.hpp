#pragma once

#include <memory>
#include <string>
#include <vector>

#include "starpix/imageprep/store.hpp"
#include "starpix/trainer/model.hpp"

namespace starpix::trainer {

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_top1 = 0.0;
    double val_top1 = 0.0;
};

struct EvalResult {
    double loss = 0.0;
    double top1 = 0.0;
};

// Argmax with ties resolved to the lowest index.
int argmax_row(const float* row, int n);

// Nearest legal scaled star for a regression output, clamped to [2,10].
int round_to_scaled_star(float prediction);

// Full pass over a store in eval mode (batch norm uses running statistics),
// deterministic for fixed weights. Empty stores are an error.
EvalResult evaluate(StarModel& model, const imageprep::ImageStore& store,
                    const TrainConfig& config);

struct CheckpointMeta {
    int epoch = 0;
    std::uint64_t optimizer_steps = 0;
    std::uint64_t config_hash = 0;
    double val_loss = 0.0;
    double val_top1 = 0.0;
};

// Checkpoint directory layout:
//   model.ywts      all model state (weights + batch norm buffers)
//   optimizer.ywts  momentum / adam moment slots
//   config.txt      canonical config dump (rebuilds the architecture)
//   meta.txt        epoch, optimizer steps, config hash, best val metrics
//   history.csv     metrics recorded up to the checkpointed epoch
void save_checkpoint(const std::string& dir, StarModel& model,
                     const std::vector<engine::NamedTensorRef<float>>& optimizer_state,
                     const TrainConfig& config, const CheckpointMeta& meta,
                     const std::vector<EpochMetrics>& history);

struct LoadedCheckpoint {
    TrainConfig config;
    std::unique_ptr<StarModel> model;
    CheckpointMeta meta;
};

// Accepts the checkpoint directory or any file inside it.
LoadedCheckpoint load_checkpoint(const std::string& path);

// metrics.csv plus loss.png / accuracy.png rendered into `dir`.
void emit_curves(const std::vector<EpochMetrics>& history, const std::string& dir);

// Just the two charts, for rendering a CSV that already exists elsewhere.
void render_metric_charts(const std::vector<EpochMetrics>& history, const std::string& dir);
std::string metrics_csv(const std::vector<EpochMetrics>& history);
std::vector<EpochMetrics> parse_metrics_csv(const std::string& text);

struct TrainResult {
    std::vector<EpochMetrics> history;
    int best_epoch = 0;        // 1-based; 0 = the untrained snapshot
    double best_val_loss = 0.0;
    double best_val_top1 = 0.0;
    std::uint64_t optimizer_steps = 0;
    std::string checkpoint_dir;
    std::unique_ptr<StarModel> model;  // weights as of the final epoch
};

// Runs the configured job end to end: loads both stores, trains with the
// epochwise schedule, keeps the best checkpoint (highest val top-1, or lowest
// val loss for regression; earlier epoch wins ties) and writes curves.
TrainResult train(const TrainConfig& config);

}  // namespace starpix::trainer
