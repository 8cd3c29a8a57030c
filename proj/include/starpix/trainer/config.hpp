#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "starpix/ingest/records.hpp"
#include "starpix/optim/schedule.hpp"

namespace starpix::trainer {

enum class Head { NineClass, ThreeBucket, Regression };
enum class Regime { FineTune, FeatureExtract };
enum class LossKind { CrossEntropy, Mse };
enum class OptimizerKind { SgdMomentum, Adam };

const char* head_name(Head h);
const char* regime_name(Regime r);
const char* loss_name(LossKind l);
const char* optimizer_name(OptimizerKind o);

struct TrainConfig {
    ingest::Label dataset = ingest::Label::Food;
    Head head = Head::NineClass;
    Regime regime = Regime::FineTune;
    LossKind loss = LossKind::CrossEntropy;
    OptimizerKind optimizer = OptimizerKind::SgdMomentum;

    int batch_size = 16;
    int epochs = 25;
    double lr = 0.01;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    optim::LrSchedule schedule;  // step decay, gamma 0.1 every 7 epochs
    std::uint64_t seed = 0;

    int base_channels = 16;
    std::vector<int> stage_blocks = {1, 1, 1, 1};
    std::string init_weights;  // optional YWTS file for warm starts

    std::string train_store;
    std::string val_store;
    std::string out_dir = "runs/default";
};

// Throws std::invalid_argument when fields contradict each other
// (regression <-> mse pairing, non-positive sizes, ...).
void validate(const TrainConfig& config);

// Applies one `key = value` assignment; unknown keys throw.
void apply_config_entry(TrainConfig& config, const std::string& key,
                        const std::string& value);

// Plain-text config: one `key = value` per line, `#` comments, blank lines
// ignored. Starts from defaults.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);

// Canonical dump; every field in a fixed order, parseable by
// parse_train_config. Used for logging resolved configs and for hashing.
std::string config_to_string(const TrainConfig& config);

// FNV-1a over the canonical dump; stamped into checkpoints so a resumed
// run can detect it was handed weights from a different configuration.
std::uint64_t config_hash(const TrainConfig& config);

}  // namespace starpix::trainer
