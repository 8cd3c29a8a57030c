#include "starpix/cli/cli.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "starpix/common/log.hpp"
#include "starpix/gan/gan.hpp"
#include "starpix/imageprep/gan_partition.hpp"
#include "starpix/imageprep/image.hpp"
#include "starpix/imageprep/normalize.hpp"
#include "starpix/imageprep/store.hpp"
#include "starpix/ingest/join.hpp"
#include "starpix/ingest/parse.hpp"
#include "starpix/ingest/split.hpp"
#include "starpix/optim/search.hpp"
#include "starpix/plot/chart.hpp"
#include "starpix/trainer/config.hpp"
#include "starpix/trainer/train.hpp"

namespace starpix::cli {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- ingest --

struct IngestArgs {
    std::string business;
    std::string photos;
    std::string out;
    std::uint64_t seed = 0;
};

void run_ingest(const IngestArgs& args) {
    log::info("ingest: business=", args.business, " photos=", args.photos, " out=", args.out,
              " seed=", args.seed);
    fs::create_directories(args.out);

    ingest::ParseStats business_stats, photo_stats;
    const auto businesses = ingest::parse_business_file(args.business, &business_stats);
    const auto photos = ingest::parse_photo_file(args.photos, &photo_stats);
    log::info("ingest: ", businesses.size(), " businesses (", business_stats.malformed,
              " malformed, ", business_stats.dropped, " dropped, ", business_stats.duplicates,
              " duplicate ids), ", photos.size(), " photos (", photo_stats.malformed,
              " malformed, ", photo_stats.dropped, " dropped)");

    ingest::JoinStats join_stats;
    const auto joined = ingest::join_photo_stars(photos, businesses, &join_stats);
    log::info("ingest: joined ", join_stats.matched, " photos, dropped ",
              join_stats.dropped_unmatched, " without a matching business");

    const auto by_label = ingest::partition_by_label(joined);
    const auto histograms = ingest::star_histogram(joined);

    {
        std::ofstream csv(args.out + "/star_histograms.csv", std::ios::trunc);
        csv << "label,stars,count\n";
        for (const auto& [label, bins] : histograms) {
            for (int index = 0; index < 9; ++index) {
                csv << ingest::label_name(label) << ','
                    << ingest::format_stars(ingest::star_class_from_index(index).raw) << ','
                    << bins[static_cast<std::size_t>(index)] << '\n';
            }
        }
        if (!csv) throw std::runtime_error("cannot write " + args.out + "/star_histograms.csv");
    }

    for (const auto& [label, bins] : histograms) {
        std::vector<std::string> ticks;
        std::vector<double> counts;
        for (int index = 0; index < 9; ++index) {
            ticks.push_back(ingest::format_stars(ingest::star_class_from_index(index).raw));
            counts.push_back(static_cast<double>(bins[static_cast<std::size_t>(index)]));
        }
        plot::ChartOptions options;
        options.title = std::string(ingest::label_name(label)) + " star ratings";
        options.x_label = "stars";
        options.y_label = "photos";
        plot::bar_chart(args.out + "/" + ingest::label_name(label) + "_stars.png", ticks, counts,
                        options);
    }

    for (const auto& [label, items] : by_label) {
        if (items.size() < 3) {
            log::warn("ingest: label ", ingest::label_name(label), " has ", items.size(),
                      " photos; skipping split (needs at least 3)");
            continue;
        }
        std::vector<ingest::SplitItem> split_items;
        split_items.reserve(items.size());
        for (const auto& item : items) split_items.push_back({item.photo.photo_id, item.stars});
        const auto manifest = ingest::split_dataset(label, std::move(split_items), args.seed);
        const std::string path = args.out + "/" + ingest::label_name(label) + ".manifest";
        ingest::write_manifest(path, manifest);
        log::info("ingest: ", ingest::label_name(label), ": ", manifest.train.size(), " train / ",
                  manifest.val.size(), " val / ", manifest.test.size(), " test -> ", path);
    }
}

// ------------------------------------------------------------ preprocess --

struct PreprocessArgs {
    std::string manifest;
    std::string images;
    std::string out;
    bool gan_partition = false;
};

std::string find_image(const std::string& dir, const std::string& photo_id) {
    for (const char* ext : {".jpg", ".jpeg", ".png"}) {
        std::string candidate = dir + "/" + photo_id + ext;
        if (fs::exists(candidate)) return candidate;
    }
    return {};
}

void run_preprocess(const PreprocessArgs& args) {
    log::info("preprocess: manifest=", args.manifest, " images=", args.images, " out=", args.out,
              " gan_partition=", args.gan_partition ? "true" : "false");
    const auto manifest = ingest::read_manifest(args.manifest);
    fs::create_directories(args.out);

    const imageprep::StoreDims dims;  // (3, 144, 200)
    const std::string label = ingest::label_name(manifest.label);
    std::size_t decoded = 0, missing = 0;

    std::unique_ptr<imageprep::GanPartitioner> partitioner;
    if (args.gan_partition) {
        partitioner = std::make_unique<imageprep::GanPartitioner>(args.out + "/gan",
                                                                  manifest.label, dims);
    }

    const std::array<std::pair<const char*, const std::vector<ingest::SplitItem>*>, 3> splits = {
        {{"train", &manifest.train}, {"val", &manifest.val}, {"test", &manifest.test}}};
    for (const auto& [split_name, items] : splits) {
        const std::string store_path = args.out + "/" + label + "_" + split_name + ".yimg";
        imageprep::StoreWriter writer(store_path, dims);
        for (const auto& item : *items) {
            const std::string path = find_image(args.images, item.photo_id);
            if (path.empty()) {
                ++missing;
                log::warn("preprocess: no image for photo ", item.photo_id, " under ",
                          args.images);
                continue;
            }
            const auto image = imageprep::decode_image(path);
            const auto pixels = imageprep::normalize_image(image);
            const auto star = static_cast<std::uint8_t>(ingest::scale_stars(item.stars).scaled);
            writer.append(pixels.data(), star);
            if (partitioner) partitioner->add(pixels.data(), item.stars);
            ++decoded;
        }
        writer.close();
        log::info("preprocess: ", writer.count(), " records -> ", store_path);
    }
    if (partitioner) {
        for (const auto& [path, count] : partitioner->close()) {
            log::info("preprocess: ", count, " records -> ", path);
        }
    }
    log::info("preprocess: decoded ", decoded, " images, ", missing, " missing");
    std::printf("decoded=%zu missing=%zu\n", decoded, missing);
}

// ----------------------------------------------------- trainer config I/O --

// Every config-file key doubles as a flag so the command line can override
// the file: flag beats file beats default.
class ConfigFlags {
public:
    void attach(CLI::App* cmd) {
        static constexpr std::array<std::pair<const char*, const char*>, 21> kKeys = {{
            {"dataset", "photo label the stores were built from"},
            {"head", "nine_class | three_bucket | regression"},
            {"regime", "fine_tune | feature_extract"},
            {"loss", "cross_entropy | mse"},
            {"optimizer", "sgd_momentum | adam"},
            {"batch_size", "minibatch size"},
            {"epochs", "training epochs"},
            {"lr", "base learning rate"},
            {"momentum", "SGD momentum"},
            {"beta1", "Adam first-moment decay"},
            {"beta2", "Adam second-moment decay"},
            {"eps", "Adam epsilon"},
            {"lr_gamma", "step-decay factor"},
            {"lr_step_size", "epochs between decays"},
            {"seed", "RNG seed for init and shuffling"},
            {"base_channels", "stem width of the backbone"},
            {"stage_blocks", "comma-separated blocks per stage"},
            {"init_weights", "warm-start YWTS weight file"},
            {"train_store", "training YIMG store"},
            {"val_store", "validation YIMG store"},
            {"out_dir", "run output directory"},
        }};
        values_.resize(kKeys.size());
        for (std::size_t i = 0; i < kKeys.size(); ++i) {
            std::string flag = "--" + std::string(kKeys[i].first);
            for (char& c : flag) {
                if (c == '_') c = '-';
            }
            options_.emplace_back(cmd->add_option(flag, values_[i], kKeys[i].second),
                                  kKeys[i].first);
        }
    }

    // Applies the flags the user actually passed. Bad values are usage
    // errors, unlike bad config-file contents.
    void apply(trainer::TrainConfig& config) const {
        for (std::size_t i = 0; i < options_.size(); ++i) {
            const auto& [option, key] = options_[i];
            if (option->count() == 0) continue;
            try {
                trainer::apply_config_entry(config, key, values_[i]);
            } catch (const std::exception& e) {
                throw CLI::ValidationError(e.what());
            }
        }
    }

private:
    std::vector<std::pair<CLI::Option*, const char*>> options_;
    std::vector<std::string> values_;
};

trainer::TrainConfig resolve_train_config(const std::string& config_path,
                                          const ConfigFlags& flags) {
    trainer::TrainConfig config;
    if (!config_path.empty()) config = trainer::load_train_config(config_path);
    flags.apply(config);
    return config;
}

// ----------------------------------------------------------------- train --

void run_train(const trainer::TrainConfig& config) {
    const auto result = trainer::train(config);
    std::printf("best_epoch=%d val_loss=%.17g val_top1=%.17g checkpoint=%s\n", result.best_epoch,
                result.best_val_loss, result.best_val_top1, result.checkpoint_dir.c_str());
}

// ------------------------------------------------------------------ eval --

struct EvalArgs {
    std::string checkpoint;
    std::string store;
};

void run_eval(const EvalArgs& args) {
    log::info("eval: checkpoint=", args.checkpoint, " store=", args.store);
    auto loaded = trainer::load_checkpoint(args.checkpoint);
    log::info("eval: resolved config\n", trainer::config_to_string(loaded.config));
    const auto store = imageprep::read_store(args.store);
    const auto result = trainer::evaluate(*loaded.model, store, loaded.config);
    std::printf("loss=%.17g top1=%.17g\n", result.loss, result.top1);
}

// -------------------------------------------------------------- hpsearch --

struct HpSearchArgs {
    std::string config_path;
    std::string out;
    std::size_t budget = 12;
    std::uint64_t seed = 0;
    int lr_exp_lo = -4;
    int lr_exp_hi = -1;
    bool tune_momentum = false;
};

void run_hpsearch(const HpSearchArgs& args, const trainer::TrainConfig& base) {
    log::info("hpsearch: out=", args.out, " budget=", args.budget, " seed=", args.seed,
              " lr decades 1e", args.lr_exp_lo, "..1e", args.lr_exp_hi,
              args.tune_momentum ? " + momentum" : "");
    fs::create_directories(args.out);

    optim::SearchSpace space;
    space.dims.push_back({"lr", args.lr_exp_lo, args.lr_exp_hi, true});
    if (args.tune_momentum) space.dims.push_back({"momentum", -1, 0, false});

    const bool regression = base.head == trainer::Head::Regression;
    std::size_t trial_counter = 0;
    const auto eval_fn = [&](const std::vector<double>& values) {
        trainer::TrainConfig config = base;
        config.lr = values[0];
        if (args.tune_momentum) config.momentum = values[1];
        char suffix[24];
        std::snprintf(suffix, sizeof suffix, "/trial_%03zu", trial_counter);
        config.out_dir = args.out + suffix;
        const auto result = trainer::train(config);
        // Rank classification by top-1 error so lower is better everywhere.
        const double metric = regression ? result.best_val_loss : 1.0 - result.best_val_top1;
        log::info("hpsearch: trial ", trial_counter, " lr=", values[0],
                  args.tune_momentum ? " momentum=" : "",
                  args.tune_momentum ? std::to_string(values[1]) : "", " metric=", metric);
        ++trial_counter;
        return metric;
    };

    const auto trials = optim::hp_search(space, args.budget, eval_fn, args.seed);
    optim::write_trials_csv(args.out + "/trials.csv", space, trials);

    const auto& best = trials.front();
    std::ostringstream line;
    line << "best_trial=" << best.index;
    for (std::size_t d = 0; d < space.dims.size(); ++d) {
        char value[40];
        std::snprintf(value, sizeof value, "%.17g", best.values[d]);
        line << ' ' << space.dims[d].name << '=' << value;
    }
    char metric[40];
    std::snprintf(metric, sizeof metric, "%.17g", best.metric);
    line << " metric=" << metric;
    std::printf("%s\n", line.str().c_str());
}

// ------------------------------------------------------------- gan-train --

struct GanTrainArgs {
    std::string store;
    std::string out;
    gan::GanConfig config;
};

void run_gan_train(const GanTrainArgs& args) {
    log::info("gan-train: store=", args.store, " out=", args.out, " z_dim=", args.config.arch.z_dim,
              " base_channels=", args.config.arch.base_channels, " size=",
              args.config.arch.height, "x", args.config.arch.width, " batch_size=",
              args.config.batch_size, " lr=", args.config.lr, " beta1=", args.config.beta1,
              " beta2=", args.config.beta2, " steps=", args.config.steps, " checkpoint_every=",
              args.config.checkpoint_every, " seed=", args.config.seed);
    const auto result = gan::train_gan(args.store, args.config, args.out);
    const auto& last = result.checkpoints.back();
    std::printf("checkpoints=%zu final_step=%llu d_loss=%.17g g_loss=%.17g\n",
                result.checkpoints.size(), static_cast<unsigned long long>(last.step),
                last.d_loss, last.g_loss);
}

// ------------------------------------------------------------ gan-sample --

struct GanSampleArgs {
    std::string checkpoint;
    std::string out = "samples.png";
    int count = 64;
    std::uint64_t seed = 0;
};

void run_gan_sample(const GanSampleArgs& args) {
    log::info("gan-sample: checkpoint=", args.checkpoint, " count=", args.count,
              " seed=", args.seed, " out=", args.out);
    auto loaded = gan::load_gan_checkpoint(args.checkpoint);
    const auto grid = gan::sample_grid(*loaded.g, loaded.arch, args.count, args.seed);
    const fs::path parent = fs::path(args.out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    imageprep::write_png_rgb(args.out, grid);
    log::info("gan-sample: wrote ", grid.width, "x", grid.height, " grid -> ", args.out);
}

// ------------------------------------------------------------------ plot --

struct PlotArgs {
    std::string metrics;
    std::string out;
};

void run_plot(const PlotArgs& args) {
    log::info("plot: metrics=", args.metrics, " out=", args.out);
    std::ifstream in(args.metrics, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + args.metrics);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const auto history = trainer::parse_metrics_csv(buffer.str());
    trainer::render_metric_charts(history, args.out);
    log::info("plot: ", history.size(), " epochs -> ", args.out, "/loss.png, ", args.out,
              "/accuracy.png");
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"starpix: Yelp photo star-rating pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "starpix 0.1.0");

    IngestArgs ingest_args;
    auto* ingest_cmd = app.add_subcommand(
        "ingest", "Join photos to business stars, write split manifests and histograms");
    ingest_cmd->add_option("--business", ingest_args.business, "business NDJSON file")
        ->required();
    ingest_cmd->add_option("--photos", ingest_args.photos, "photo NDJSON file")->required();
    ingest_cmd->add_option("--out", ingest_args.out, "output directory")->required();
    ingest_cmd->add_option("--seed", ingest_args.seed, "split shuffle seed");
    ingest_cmd->callback([&]() { run_ingest(ingest_args); });

    PreprocessArgs preprocess_args;
    auto* preprocess_cmd = app.add_subcommand(
        "preprocess", "Decode, normalize, and pack manifest photos into YIMG stores");
    preprocess_cmd->add_option("--manifest", preprocess_args.manifest, "split manifest file")
        ->required();
    preprocess_cmd->add_option("--images", preprocess_args.images, "directory of source photos")
        ->required();
    preprocess_cmd->add_option("--out", preprocess_args.out, "output directory")->required();
    preprocess_cmd->add_flag("--gan-partition", preprocess_args.gan_partition,
                             "also write one store per (label, star) pair");
    preprocess_cmd->callback([&]() { run_preprocess(preprocess_args); });

    std::string train_config_path;
    ConfigFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "Train a classifier on YIMG stores");
    train_cmd->add_option("--config", train_config_path, "key = value config file");
    train_flags.attach(train_cmd);
    train_cmd->callback([&]() { run_train(resolve_train_config(train_config_path, train_flags)); });

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a YIMG store");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint directory")
        ->required();
    eval_cmd->add_option("--store", eval_args.store, "YIMG store to score")->required();
    eval_cmd->callback([&]() { run_eval(eval_args); });

    HpSearchArgs hpsearch_args;
    std::string hpsearch_config_path;
    ConfigFlags hpsearch_flags;
    auto* hpsearch_cmd =
        app.add_subcommand("hpsearch", "Coarse-to-fine hyperparameter search over training runs");
    hpsearch_cmd->add_option("--config", hpsearch_config_path, "base key = value config file");
    hpsearch_cmd->add_option("--out", hpsearch_args.out, "output directory for trials")
        ->required();
    hpsearch_cmd->add_option("--budget", hpsearch_args.budget, "total training runs allowed");
    hpsearch_cmd->add_option("--search-seed", hpsearch_args.seed, "seed for the fine phase");
    hpsearch_cmd->add_option("--lr-exp-lo", hpsearch_args.lr_exp_lo,
                             "lowest learning-rate decade exponent");
    hpsearch_cmd->add_option("--lr-exp-hi", hpsearch_args.lr_exp_hi,
                             "highest learning-rate decade exponent");
    hpsearch_cmd->add_flag("--tune-momentum", hpsearch_args.tune_momentum,
                           "search momentum alongside the learning rate");
    hpsearch_flags.attach(hpsearch_cmd);
    hpsearch_cmd->callback([&]() {
        run_hpsearch(hpsearch_args, resolve_train_config(hpsearch_config_path, hpsearch_flags));
    });

    GanTrainArgs gan_train_args;
    auto* gan_train_cmd = app.add_subcommand("gan-train", "Train a GAN on one YIMG store");
    gan_train_cmd->add_option("--store", gan_train_args.store, "YIMG store of real images")
        ->required();
    gan_train_cmd->add_option("--out", gan_train_args.out, "output directory")->required();
    gan_train_cmd->add_option("--checkpoint-every", gan_train_args.config.checkpoint_every,
                              "steps between checkpoints");
    gan_train_cmd->add_option("--steps", gan_train_args.config.steps, "total optimizer steps");
    gan_train_cmd->add_option("--batch-size", gan_train_args.config.batch_size,
                              "minibatch size");
    gan_train_cmd->add_option("--lr", gan_train_args.config.lr, "Adam learning rate");
    gan_train_cmd->add_option("--beta1", gan_train_args.config.beta1, "Adam first-moment decay");
    gan_train_cmd->add_option("--beta2", gan_train_args.config.beta2,
                              "Adam second-moment decay");
    gan_train_cmd->add_option("--z-dim", gan_train_args.config.arch.z_dim, "noise dimension");
    gan_train_cmd->add_option("--base-channels", gan_train_args.config.arch.base_channels,
                              "channel width of the last upsampling stage");
    gan_train_cmd->add_option("--height", gan_train_args.config.arch.height,
                              "generated image height (multiple of 8)");
    gan_train_cmd->add_option("--width", gan_train_args.config.arch.width,
                              "generated image width (multiple of 8)");
    gan_train_cmd->add_option("--seed", gan_train_args.config.seed, "RNG seed");
    gan_train_cmd->callback([&]() { run_gan_train(gan_train_args); });

    GanSampleArgs gan_sample_args;
    auto* gan_sample_cmd =
        app.add_subcommand("gan-sample", "Render a sample grid from a GAN checkpoint");
    gan_sample_cmd->add_option("--checkpoint", gan_sample_args.checkpoint,
                               "checkpoint directory")
        ->required();
    gan_sample_cmd->add_option("--count", gan_sample_args.count, "number of samples");
    gan_sample_cmd->add_option("--seed", gan_sample_args.seed, "noise seed");
    gan_sample_cmd->add_option("--out", gan_sample_args.out, "output PNG path");
    gan_sample_cmd->callback([&]() { run_gan_sample(gan_sample_args); });

    PlotArgs plot_args;
    auto* plot_cmd = app.add_subcommand("plot", "Render loss/accuracy charts from a metrics CSV");
    plot_cmd->add_option("--metrics", plot_args.metrics, "metrics CSV file")->required();
    plot_cmd->add_option("--out", plot_args.out, "output directory")->required();
    plot_cmd->callback([&]() { run_plot(plot_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help / --version go to stdout, exit 0
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what();
        // A missing-requirement error can fire before the extras check, so
        // name any tokens that never matched (typoed flags or subcommands).
        const auto extras = app.remaining(true);
        if (!extras.empty()) {
            std::cerr << " (unrecognized:";
            for (const auto& token : extras) std::cerr << ' ' << token;
            std::cerr << ')';
        }
        std::cerr << "\n\n" << app.help();
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace starpix::cli
