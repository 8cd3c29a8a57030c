#include "starpix/trainer/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace starpix::trainer {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::invalid_argument("config: bad value '" + value + "' for key '" + key + "'");
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) bad_value(key, value);
        return v;
    } catch (const std::invalid_argument&) {
        bad_value(key, value);
    } catch (const std::out_of_range&) {
        bad_value(key, value);
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
    return v;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

const char* head_name(Head h) {
    switch (h) {
        case Head::NineClass: return "nine_class";
        case Head::ThreeBucket: return "three_bucket";
        case Head::Regression: return "regression";
    }
    return "?";
}

const char* regime_name(Regime r) {
    return r == Regime::FineTune ? "fine_tune" : "feature_extract";
}

const char* loss_name(LossKind l) {
    return l == LossKind::CrossEntropy ? "cross_entropy" : "mse";
}

const char* optimizer_name(OptimizerKind o) {
    return o == OptimizerKind::SgdMomentum ? "sgd_momentum" : "adam";
}

void validate(const TrainConfig& config) {
    if (config.head == Head::Regression && config.loss != LossKind::Mse) {
        throw std::invalid_argument("config: regression head requires mse loss");
    }
    if (config.head != Head::Regression && config.loss == LossKind::Mse) {
        throw std::invalid_argument("config: mse loss requires regression head");
    }
    if (config.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (config.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (!(config.lr >= 0.0)) throw std::invalid_argument("config: lr must be >= 0");
    if (config.momentum < 0.0) throw std::invalid_argument("config: momentum must be >= 0");
    if (config.base_channels < 1) {
        throw std::invalid_argument("config: base_channels must be >= 1");
    }
    if (config.stage_blocks.empty()) {
        throw std::invalid_argument("config: stage_blocks must not be empty");
    }
    for (int b : config.stage_blocks) {
        if (b < 1) throw std::invalid_argument("config: stage_blocks entries must be >= 1");
    }
    if (config.schedule.step_size < 1) {
        throw std::invalid_argument("config: lr_step_size must be >= 1");
    }
    if (!(config.schedule.gamma > 0.0)) {
        throw std::invalid_argument("config: lr_gamma must be positive");
    }
}

void apply_config_entry(TrainConfig& config, const std::string& key,
                        const std::string& value) {
    if (key == "dataset") {
        const auto label = ingest::parse_label(value);
        if (!label) bad_value(key, value);
        config.dataset = *label;
    } else if (key == "head") {
        if (value == "nine_class") config.head = Head::NineClass;
        else if (value == "three_bucket") config.head = Head::ThreeBucket;
        else if (value == "regression") config.head = Head::Regression;
        else bad_value(key, value);
    } else if (key == "regime") {
        if (value == "fine_tune") config.regime = Regime::FineTune;
        else if (value == "feature_extract") config.regime = Regime::FeatureExtract;
        else bad_value(key, value);
    } else if (key == "loss") {
        if (value == "cross_entropy") config.loss = LossKind::CrossEntropy;
        else if (value == "mse") config.loss = LossKind::Mse;
        else bad_value(key, value);
    } else if (key == "optimizer") {
        if (value == "sgd_momentum") config.optimizer = OptimizerKind::SgdMomentum;
        else if (value == "adam") config.optimizer = OptimizerKind::Adam;
        else bad_value(key, value);
    } else if (key == "batch_size") {
        config.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "epochs") {
        config.epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "lr") {
        config.lr = parse_double(key, value);
    } else if (key == "momentum") {
        config.momentum = parse_double(key, value);
    } else if (key == "beta1") {
        config.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
        config.beta2 = parse_double(key, value);
    } else if (key == "eps") {
        config.eps = parse_double(key, value);
    } else if (key == "lr_gamma") {
        config.schedule.gamma = parse_double(key, value);
    } else if (key == "lr_step_size") {
        config.schedule.step_size = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
        config.seed = parse_u64(key, value);
    } else if (key == "base_channels") {
        config.base_channels = static_cast<int>(parse_int(key, value));
    } else if (key == "stage_blocks") {
        std::vector<int> blocks;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) bad_value(key, value);
            blocks.push_back(static_cast<int>(parse_int(key, item)));
        }
        if (blocks.empty()) bad_value(key, value);
        config.stage_blocks = std::move(blocks);
    } else if (key == "init_weights") {
        config.init_weights = value;
    } else if (key == "train_store") {
        config.train_store = value;
    } else if (key == "val_store") {
        config.val_store = value;
    } else if (key == "out_dir") {
        config.out_dir = value;
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected 'key = value', got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": empty key");
        }
        try {
            apply_config_entry(config, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": " +
                                        e.what());
        }
    }
    return config;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_train_config(buf.str());
}

std::string config_to_string(const TrainConfig& config) {
    std::ostringstream out;
    out << "dataset = " << ingest::label_name(config.dataset) << '\n'
        << "head = " << head_name(config.head) << '\n'
        << "regime = " << regime_name(config.regime) << '\n'
        << "loss = " << loss_name(config.loss) << '\n'
        << "optimizer = " << optimizer_name(config.optimizer) << '\n'
        << "batch_size = " << config.batch_size << '\n'
        << "epochs = " << config.epochs << '\n'
        << "lr = " << fmt(config.lr) << '\n'
        << "momentum = " << fmt(config.momentum) << '\n'
        << "beta1 = " << fmt(config.beta1) << '\n'
        << "beta2 = " << fmt(config.beta2) << '\n'
        << "eps = " << fmt(config.eps) << '\n'
        << "lr_gamma = " << fmt(config.schedule.gamma) << '\n'
        << "lr_step_size = " << config.schedule.step_size << '\n'
        << "seed = " << config.seed << '\n'
        << "base_channels = " << config.base_channels << '\n';
    out << "stage_blocks = ";
    for (std::size_t i = 0; i < config.stage_blocks.size(); ++i) {
        if (i) out << ',';
        out << config.stage_blocks[i];
    }
    out << '\n';
    out << "init_weights = " << config.init_weights << '\n'
        << "train_store = " << config.train_store << '\n'
        << "val_store = " << config.val_store << '\n'
        << "out_dir = " << config.out_dir << '\n';
    return out.str();
}

std::uint64_t config_hash(const TrainConfig& config) {
    const std::string dump = config_to_string(config);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace starpix::trainer
