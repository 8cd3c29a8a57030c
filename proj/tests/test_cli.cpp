#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "starpix/common/rng.hpp"
#include "starpix/imageprep/image.hpp"
#include "starpix/imageprep/normalize.hpp"
#include "starpix/imageprep/store.hpp"
#include "starpix/ingest/records.hpp"
#include "starpix/ingest/split.hpp"
#include "starpix/trainer/train.hpp"

using namespace starpix;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* stem) {
    static int counter = 0;
    const auto dir =
        fs::temp_directory_path() / (std::string("starpix_cli_") + stem + std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

bool is_png(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    unsigned char magic[4] = {};
    in.read(reinterpret_cast<char*>(magic), 4);
    return in.gcount() == 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' &&
           magic[3] == 'G';
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Runs the real binary out of process so exit codes and stream routing are
// tested exactly as a shell would see them.
RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const auto base = fs::temp_directory_path() / ("starpix_cli_io_" + std::to_string(counter++));
    const std::string out_path = base.string() + ".out";
    const std::string err_path = base.string() + ".err";
    const std::string command =
        std::string(STARPIX_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int raw = std::system(command.c_str());
    RunResult result;
    REQUIRE(raw != -1);
    result.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

// NDJSON + PNG fixture: 40 food photos over 8 businesses (ratings 2.5..5.0),
// 2 inside photos (too few to split), plus malformed/illegal/orphan lines.
struct IngestFixture {
    fs::path dir;
    fs::path business;
    fs::path photos;
    fs::path images;
    std::vector<double> food_stars;  // per joined food photo
};

IngestFixture make_ingest_fixture() {
    IngestFixture fx;
    fx.dir = temp_dir("fixture");
    fx.business = fx.dir / "business.ndjson";
    fx.photos = fx.dir / "photos.ndjson";
    fx.images = fx.dir / "images";
    fs::create_directories(fx.images);

    const double stars[8] = {3.0, 3.5, 4.0, 4.0, 4.5, 5.0, 2.5, 4.0};
    {
        std::ofstream out(fx.business);
        for (int i = 0; i < 8; ++i) {
            out << "{\"business_id\": \"b" << i << "\", \"stars\": " << stars[i]
                << ", \"city\": \"Tempe\"}\n";
        }
        out << "{\"business_id\": \"bX\", \"stars\": 0.5}\n";   // illegal rating
        out << "{\"business_id\": \"b0\", \"stars\": 3.0}\n";   // duplicate id
        out << "not json at all\n";                             // malformed
    }
    {
        std::ofstream out(fx.photos);
        Rng rng(3);
        int photo = 0;
        for (int i = 0; i < 40; ++i) {
            const int b = i % 8;
            const std::string id = "p" + std::to_string(photo++);
            out << "{\"photo_id\": \"" << id << "\", \"business_id\": \"b" << b
                << "\", \"label\": \"food\"}\n";
            fx.food_stars.push_back(stars[b]);
            const int h = 40 + static_cast<int>(rng.bounded(80));
            const int w = 40 + static_cast<int>(rng.bounded(100));
            const auto img = imageprep::RgbImage::filled(
                h, w, static_cast<std::uint8_t>(40 + 20 * b),
                static_cast<std::uint8_t>(200 - 15 * b), 90);
            imageprep::write_png_rgb((fx.images / (id + ".png")).string(), img);
        }
        for (int i = 0; i < 2; ++i) {
            const std::string id = "p" + std::to_string(photo++);
            out << "{\"photo_id\": \"" << id
                << "\", \"business_id\": \"b1\", \"label\": \"inside\"}\n";
            const auto img = imageprep::RgbImage::filled(30, 30, 10, 10, 200);
            imageprep::write_png_rgb((fx.images / (id + ".png")).string(), img);
        }
        out << "{\"photo_id\": \"pS\", \"business_id\": \"b1\", \"label\": \"selfie\"}\n";
        out << "{\"photo_id\": \"pO\", \"business_id\": \"nope\", \"label\": \"food\"}\n";
    }
    return fx;
}

// Tiny 16x16 class-separable stores so train/hpsearch runs stay fast.
std::string write_class_store(const char* stem,
                              const std::vector<std::pair<std::uint8_t, int>>& plan,
                              std::uint64_t seed) {
    const imageprep::StoreDims dims{3, 16, 16};
    imageprep::ImageStore store;
    store.dims = dims;
    Rng rng(seed);
    std::vector<std::int8_t> pixels(dims.pixel_count());
    for (const auto& [star, count] : plan) {
        const int level = (static_cast<int>(star) - 6) * 22;
        for (int i = 0; i < count; ++i) {
            for (auto& p : pixels) {
                const int jitter = static_cast<int>(rng.bounded(9)) - 4;
                p = static_cast<std::int8_t>(std::clamp(level + jitter, -127, 127));
            }
            store.append(pixels.data(), star);
        }
    }
    const auto path = temp_dir(stem) / "store.yimg";
    imageprep::write_store(path.string(), store);
    return path.string();
}

std::string write_train_config(const fs::path& dir, const std::string& train_store,
                               const std::string& val_store, const std::string& out_dir,
                               int epochs) {
    const auto path = dir / "train.cfg";
    std::ofstream out(path);
    out << "head = three_bucket\n"
        << "loss = cross_entropy\n"
        << "optimizer = sgd_momentum\n"
        << "batch_size = 8\n"
        << "epochs = " << epochs << "\n"
        << "lr = 0.01\n"
        << "seed = 4\n"
        << "base_channels = 4\n"
        << "stage_blocks = 1,1\n"
        << "train_store = " << train_store << "\n"
        << "val_store = " << val_store << "\n"
        << "out_dir = " << out_dir << "\n";
    return path.string();
}

std::string stdout_field(const std::string& out, const std::string& key) {
    const auto at = out.find(key + "=");
    REQUIRE(at != std::string::npos);
    const auto start = at + key.size() + 1;
    auto end = out.find_first_of(" \n", start);
    if (end == std::string::npos) end = out.size();
    return out.substr(start, end - start);
}

}  // namespace

TEST_CASE("--help lists all eight subcommands on stdout") {
    const auto result = run_cli("--help");
    CHECK(result.code == 0);
    CHECK(result.err.empty());
    for (const char* name : {"ingest", "preprocess", "train", "eval", "hpsearch", "gan-train",
                             "gan-sample", "plot"}) {
        CHECK_MESSAGE(result.out.find(name) != std::string::npos, "missing ", name);
    }
}

TEST_CASE("--version reports the tool name") {
    const auto result = run_cli("--version");
    CHECK(result.code == 0);
    CHECK(result.out.find("starpix") != std::string::npos);
}

TEST_CASE("unknown subcommand is a usage error with usage text on stderr") {
    const auto result = run_cli("frobnicate");
    CHECK(result.code == 1);
    CHECK(result.out.empty());
    CHECK(result.err.find("frobnicate") != std::string::npos);
    CHECK(result.err.find("Usage") != std::string::npos);
    CHECK(result.err.find("gan-sample") != std::string::npos);  // usage lists subcommands
}

TEST_CASE("unknown flags are named in the error") {
    const auto with_required = run_cli("ingest --business a --photos b --out c --bogus");
    CHECK(with_required.code == 1);
    CHECK(with_required.err.find("--bogus") != std::string::npos);

    const auto top_level = run_cli("--frobnicate");
    CHECK(top_level.code == 1);
    CHECK(top_level.err.find("--frobnicate") != std::string::npos);
}

TEST_CASE("ingest writes manifests and histograms and leaves inputs untouched") {
    const auto fx = make_ingest_fixture();
    const auto out = fx.dir / "ingested";
    const std::string business_before = slurp(fx.business);
    const std::string photos_before = slurp(fx.photos);

    const auto result = run_cli("ingest --business " + fx.business.string() + " --photos " +
                                fx.photos.string() + " --out " + out.string() + " --seed 11");
    CHECK(result.code == 0);

    // Inputs are never mutated.
    CHECK(slurp(fx.business) == business_before);
    CHECK(slurp(fx.photos) == photos_before);

    // The food manifest covers all 40 joined food photos, split 90/5/5.
    const auto manifest = ingest::read_manifest((out / "food.manifest").string());
    CHECK(manifest.label == ingest::Label::Food);
    CHECK(manifest.seed == 11);
    CHECK(manifest.total() == 40);
    const auto sizes = ingest::split_sizes(40);
    CHECK(manifest.train.size() == sizes.train);
    CHECK(manifest.val.size() == sizes.val);
    CHECK(manifest.test.size() == sizes.test);

    // Too-few-photos labels are skipped rather than fatal.
    CHECK_FALSE(fs::exists(out / "inside.manifest"));

    // Histogram CSV matches a hand count of the fixture (5 photos per
    // business, 8 businesses; b2, b3, b7 share 4.0 stars).
    const std::string csv = slurp(out / "star_histograms.csv");
    CHECK(csv.find("label,stars,count") == 0);
    CHECK(csv.find("food,4.0,15") != std::string::npos);
    CHECK(csv.find("food,2.5,5") != std::string::npos);
    CHECK(csv.find("food,5.0,5") != std::string::npos);
    CHECK(csv.find("food,1.0,0") != std::string::npos);
    CHECK(csv.find("inside,4.0,0") != std::string::npos);  // inside photos sit at 3.5
    CHECK(csv.find("inside,3.5,2") != std::string::npos);

    for (const char* label : {"food", "drink", "menu", "inside", "outside"}) {
        CHECK(is_png(out / (std::string(label) + "_stars.png")));
    }

    // Same seed, fresh run: byte-identical outputs.
    const auto out2 = fx.dir / "ingested2";
    const auto rerun = run_cli("ingest --business " + fx.business.string() + " --photos " +
                               fx.photos.string() + " --out " + out2.string() + " --seed 11");
    CHECK(rerun.code == 0);
    CHECK(slurp(out2 / "food.manifest") == slurp(out / "food.manifest"));
    CHECK(slurp(out2 / "star_histograms.csv") == csv);
}

TEST_CASE("preprocess packs manifest photos into stores and gan partitions") {
    const auto fx = make_ingest_fixture();
    const auto ingested = fx.dir / "ingested";
    REQUIRE(run_cli("ingest --business " + fx.business.string() + " --photos " +
                    fx.photos.string() + " --out " + ingested.string() + " --seed 11")
                .code == 0);
    const auto manifest = ingest::read_manifest((ingested / "food.manifest").string());

    // Drop one training photo's image file to exercise the missing path.
    const std::string missing_id = manifest.train.front().photo_id;
    fs::remove(fx.images / (missing_id + ".png"));

    const auto out = fx.dir / "prepped";
    const auto result =
        run_cli("preprocess --manifest " + (ingested / "food.manifest").string() + " --images " +
                fx.images.string() + " --out " + out.string() + " --gan-partition");
    CHECK(result.code == 0);
    CHECK(stdout_field(result.out, "decoded") == "39");
    CHECK(stdout_field(result.out, "missing") == "1");
    CHECK(result.err.find(missing_id) != std::string::npos);

    const auto train_store = imageprep::read_store((out / "food_train.yimg").string());
    const auto val_store = imageprep::read_store((out / "food_val.yimg").string());
    const auto test_store = imageprep::read_store((out / "food_test.yimg").string());
    CHECK(train_store.size() == manifest.train.size() - 1);
    CHECK(val_store.size() == manifest.val.size());
    CHECK(test_store.size() == manifest.test.size());
    CHECK(train_store.dims == imageprep::StoreDims{});

    // Spot-check one record bit-for-bit against the normalization pipeline.
    const auto& item = manifest.val.front();
    const auto decoded = imageprep::decode_image((fx.images / (item.photo_id + ".png")).string());
    const auto expected = imageprep::normalize_image(decoded);
    CHECK(std::equal(expected.begin(), expected.end(), val_store.record(0)));
    CHECK(val_store.stars_scaled[0] == ingest::scale_stars(item.stars).scaled);

    // GAN partition: per-star record counts match the manifest, minus the
    // one photo whose image file went missing.
    std::map<int, std::size_t> expected_counts;
    for (const auto* split : {&manifest.train, &manifest.val, &manifest.test}) {
        for (const auto& entry : *split) {
            if (entry.photo_id == missing_id) continue;
            ++expected_counts[ingest::scale_stars(entry.stars).scaled];
        }
    }
    std::size_t partitioned = 0;
    for (const auto& [scaled, count] : expected_counts) {
        const auto path = out / "gan" / "food" / (ingest::format_stars(scaled / 2.0) + ".yimg");
        CHECK_MESSAGE(fs::exists(path), path.string());
        const auto store = imageprep::read_store(path.string());
        CHECK(store.size() == count);
        partitioned += store.size();
    }
    CHECK(partitioned == 39);
}

TEST_CASE("train resolves flag over file over default and eval replays the checkpoint") {
    const auto dir = temp_dir("traincli");
    const auto train_store = write_class_store(
        "traincli_train", {{4, 10}, {8, 10}, {9, 10}}, 101);
    const auto val_store = write_class_store("traincli_val", {{4, 3}, {8, 3}, {9, 3}}, 102);
    const auto config =
        write_train_config(dir, train_store, val_store, (dir / "run").string(), 2);

    // File beats default: 2 epochs, not TrainConfig's 25.
    const auto trained = run_cli("train --config " + config);
    CHECK(trained.code == 0);
    const auto history =
        trainer::parse_metrics_csv(slurp(dir / "run" / "metrics.csv"));
    CHECK(history.size() == 2);
    for (const char* file : {"model.ywts", "optimizer.ywts", "config.txt", "meta.txt",
                             "history.csv"}) {
        CHECK(fs::exists(dir / "run" / "best" / file));
    }
    CHECK(is_png(dir / "run" / "loss.png"));
    CHECK(is_png(dir / "run" / "accuracy.png"));

    // Flag beats file: --epochs 1 --out-dir elsewhere.
    const auto overridden = run_cli("train --config " + config + " --epochs 1 --out-dir " +
                                    (dir / "run_flag").string());
    CHECK(overridden.code == 0);
    CHECK(trainer::parse_metrics_csv(slurp(dir / "run_flag" / "metrics.csv")).size() == 1);

    // eval on the val store reproduces the checkpoint's recorded metrics
    // exactly (both sides print %.17g, so string equality is bit equality).
    const auto evaluated =
        run_cli("eval --checkpoint " + (dir / "run" / "best").string() + " --store " + val_store);
    CHECK(evaluated.code == 0);
    CHECK(stdout_field(evaluated.out, "loss") == stdout_field(trained.out, "val_loss"));
    CHECK(stdout_field(evaluated.out, "top1") == stdout_field(trained.out, "val_top1"));

    const auto again =
        run_cli("eval --checkpoint " + (dir / "run" / "best").string() + " --store " + val_store);
    CHECK(again.out == evaluated.out);
}

TEST_CASE("train separates usage errors from runtime failures") {
    const auto dir = temp_dir("trainerr");
    const auto store = write_class_store("trainerr_store", {{4, 4}, {8, 4}}, 7);
    const auto config = write_train_config(dir, store, store, (dir / "run").string(), 1);

    // Malformed flag value: usage error.
    const auto bad_flag = run_cli("train --config " + config + " --epochs banana");
    CHECK(bad_flag.code == 1);
    CHECK(bad_flag.err.find("banana") != std::string::npos);

    // Malformed config file: runtime failure naming the line.
    const auto bad_file_path = dir / "bad.cfg";
    std::ofstream(bad_file_path) << "epochs = banana\n";
    const auto bad_file = run_cli("train --config " + bad_file_path.string());
    CHECK(bad_file.code == 2);
    CHECK(bad_file.err.find("config line 1") != std::string::npos);

    const auto unknown_key_path = dir / "unknown.cfg";
    std::ofstream(unknown_key_path) << "learning_speed = 1\n";
    const auto unknown_key = run_cli("train --config " + unknown_key_path.string());
    CHECK(unknown_key.code == 2);
    CHECK(unknown_key.err.find("unknown key") != std::string::npos);

    const auto missing_file = run_cli("train --config " + (dir / "nope.cfg").string());
    CHECK(missing_file.code == 2);

    const auto no_stores = run_cli("train --epochs 1");
    CHECK(no_stores.code == 2);
    CHECK(no_stores.err.find("train_store") != std::string::npos);
}

TEST_CASE("hpsearch writes ranked deterministic trials") {
    const auto dir = temp_dir("hpcli");
    const auto train_store = write_class_store("hpcli_train", {{4, 8}, {9, 8}}, 55);
    const auto val_store = write_class_store("hpcli_val", {{4, 2}, {9, 2}}, 56);
    const auto config = write_train_config(dir, train_store, val_store, "unused", 1);

    const std::string args = "hpsearch --config " + config +
                             " --budget 3 --lr-exp-lo -3 --lr-exp-hi -2 --search-seed 9 --out ";
    const auto result = run_cli(args + (dir / "search").string());
    CHECK(result.code == 0);

    const std::string csv = slurp(dir / "search" / "trials.csv");
    std::istringstream lines(csv);
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "trial,phase,lr,val_metric");
    std::vector<double> metrics;
    while (std::getline(lines, line)) {
        const auto last_comma = line.rfind(',');
        metrics.push_back(std::stod(line.substr(last_comma + 1)));
    }
    REQUIRE(metrics.size() == 3);  // 2 coarse decades + 1 fine sample
    CHECK(std::is_sorted(metrics.begin(), metrics.end()));

    // Best-trial stdout line agrees with the CSV's top row.
    const auto best_metric = stdout_field(result.out, "metric");
    CHECK(std::stod(best_metric) == doctest::Approx(metrics.front()).epsilon(1e-12));

    // Same seeds, fresh directory: byte-identical ranking.
    const auto rerun = run_cli(args + (dir / "search2").string());
    CHECK(rerun.code == 0);
    CHECK(slurp(dir / "search2" / "trials.csv") == csv);

    // Every trial trained into its own run directory.
    CHECK(fs::exists(dir / "search" / "trial_000" / "metrics.csv"));
    CHECK(fs::exists(dir / "search" / "trial_002" / "metrics.csv"));
}

TEST_CASE("gan-train checkpoints on schedule and gan-sample replays deterministically") {
    const auto dir = temp_dir("gancli");
    const auto store = write_class_store("gancli_store", {{4, 8}, {8, 8}}, 77);

    const std::string common = "gan-train --store " + store +
                               " --steps 4 --checkpoint-every 2 --batch-size 8 --z-dim 8"
                               " --base-channels 4 --height 16 --width 16 --seed 2 --out ";
    const auto result = run_cli(common + (dir / "gan").string());
    CHECK(result.code == 0);
    CHECK(stdout_field(result.out, "checkpoints") == "2");
    CHECK(stdout_field(result.out, "final_step") == "4");
    for (const char* serial : {"checkpoint_0001", "checkpoint_0002"}) {
        CHECK(fs::exists(dir / "gan" / serial / "gan.ywts"));
        CHECK(fs::exists(dir / "gan" / serial / "meta.txt"));
        CHECK(is_png(dir / "gan" / serial / "samples.png"));
    }
    const std::string losses = slurp(dir / "gan" / "losses.csv");
    CHECK(losses.find("step,d_loss,g_loss") == 0);
    CHECK(std::count(losses.begin(), losses.end(), '\n') == 5);  // header + 4 steps
    CHECK(is_png(dir / "gan" / "losses.png"));

    // Input store untouched; reruns are bit-reproducible.
    const std::string store_bytes = slurp(store);
    const auto rerun = run_cli(common + (dir / "gan2").string());
    CHECK(rerun.code == 0);
    CHECK(slurp(store) == store_bytes);
    CHECK(slurp(dir / "gan2" / "losses.csv") == losses);
    CHECK(slurp(dir / "gan2" / "checkpoint_0002" / "gan.ywts") ==
          slurp(dir / "gan" / "checkpoint_0002" / "gan.ywts"));

    const std::string sample_args = "gan-sample --checkpoint " +
                                    (dir / "gan" / "checkpoint_0002").string() +
                                    " --count 9 --seed 7 --out ";
    const auto sampled = run_cli(sample_args + (dir / "grid.png").string());
    CHECK(sampled.code == 0);
    CHECK(is_png(dir / "grid.png"));
    const auto resampled = run_cli(sample_args + (dir / "grid2.png").string());
    CHECK(resampled.code == 0);
    CHECK(slurp(dir / "grid2.png") == slurp(dir / "grid.png"));

    CHECK(run_cli("gan-sample --checkpoint " + (dir / "nope").string() + " --count 1").code == 2);

    // Store smaller than one batch: runtime failure.
    const auto starved = run_cli("gan-train --store " + store + " --batch-size 64 --steps 1" +
                                 " --z-dim 8 --base-channels 4 --height 16 --width 16 --out " +
                                 (dir / "gan3").string());
    CHECK(starved.code == 2);
    CHECK(starved.err.find("at least one batch") != std::string::npos);
}

TEST_CASE("plot renders charts, stays deterministic, and names missing columns") {
    const auto dir = temp_dir("plotcli");
    std::vector<trainer::EpochMetrics> history;
    for (int epoch = 1; epoch <= 3; ++epoch) {
        history.push_back({epoch, 1.0 / epoch, 1.2 / epoch, 0.2 * epoch, 0.15 * epoch});
    }
    const auto csv_path = dir / "metrics.csv";
    std::ofstream(csv_path) << trainer::metrics_csv(history);
    const std::string csv_before = slurp(csv_path);

    const std::string args =
        "plot --metrics " + csv_path.string() + " --out " + (dir / "figs").string();
    const auto result = run_cli(args);
    CHECK(result.code == 0);
    CHECK(is_png(dir / "figs" / "loss.png"));
    CHECK(is_png(dir / "figs" / "accuracy.png"));
    CHECK(slurp(csv_path) == csv_before);  // input untouched

    // Rasterization has no randomness: a second pass produces the same bytes.
    const auto loss_bytes = slurp(dir / "figs" / "loss.png");
    CHECK(run_cli(args).code == 0);
    CHECK(slurp(dir / "figs" / "loss.png") == loss_bytes);

    // Single-row CSV still renders (flat-line charts).
    const auto single_path = dir / "single.csv";
    std::ofstream(single_path) << trainer::metrics_csv({history.front()});
    CHECK(run_cli("plot --metrics " + single_path.string() + " --out " +
                  (dir / "figs_single").string())
              .code == 0);
    CHECK(is_png(dir / "figs_single" / "loss.png"));

    // Schema mismatch: exit 2 naming the missing column.
    const auto broken_path = dir / "broken.csv";
    std::ofstream(broken_path) << "epoch,train_loss,train_top1,val_top1\n1,0.5,0.5,0.5\n";
    const auto broken = run_cli("plot --metrics " + broken_path.string() + " --out " +
                                (dir / "figs_broken").string());
    CHECK(broken.code == 2);
    CHECK(broken.err.find("val_loss") != std::string::npos);

    const auto empty_path = dir / "empty.csv";
    std::ofstream(empty_path) << "";
    CHECK(run_cli("plot --metrics " + empty_path.string() + " --out " +
                  (dir / "figs_empty").string())
              .code == 2);
}
