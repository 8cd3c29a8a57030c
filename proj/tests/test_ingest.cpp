#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "starpix/common/log.hpp"
#include "starpix/common/rng.hpp"
#include "starpix/ingest/join.hpp"
#include "starpix/ingest/parse.hpp"
#include "starpix/ingest/records.hpp"
#include "starpix/ingest/split.hpp"

using namespace starpix;
using namespace starpix::ingest;

namespace {

std::filesystem::path temp_path(const char* stem) {
    static int counter = 0;
    return std::filesystem::temp_directory_path() /
           (std::string(stem) + std::to_string(counter++) + ".tmp");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string business_line(const std::string& id, double stars) {
    nlohmann::json j{{"business_id", id}, {"stars", stars}, {"city", "Phoenix"}};
    return j.dump();
}

std::string photo_line(const std::string& photo, const std::string& business,
                       const std::string& label) {
    nlohmann::json j{{"photo_id", photo}, {"business_id", business}, {"label", label}};
    return j.dump();
}

}  // namespace

TEST_CASE("scale_stars doubles ratings into whole-number classes") {
    CHECK(scale_stars(5.0).scaled == 10);
    CHECK(scale_stars(5.0).index == 8);
    CHECK(scale_stars(1.0).scaled == 2);
    CHECK(scale_stars(1.0).index == 0);
    CHECK(scale_stars(3.5).scaled == 7);
    CHECK(scale_stars(3.5).index == 5);
    CHECK_THROWS_AS(scale_stars(0.5), std::invalid_argument);
    CHECK_THROWS_AS(scale_stars(4.7), std::invalid_argument);
    CHECK_THROWS_AS(scale_stars(5.5), std::invalid_argument);
}

TEST_CASE("bucketize follows the three-bucket boundaries") {
    CHECK(bucketize(3.5) == Bucket::BelowAverage);
    CHECK(bucketize(4.0) == Bucket::Average);
    CHECK(bucketize(4.5) == Bucket::AboveAverage);
    CHECK_THROWS_AS(bucketize(0.0), std::invalid_argument);
}

TEST_CASE("bucketize and scale_stars agree on all nine legal ratings") {
    for (int scaled = 2; scaled <= 10; ++scaled) {
        const double raw = scaled / 2.0;
        const StarClass sc = scale_stars(raw);
        CHECK(sc.scaled == scaled);
        CHECK(sc.index == scaled - 2);
        const Bucket bucket = bucketize(raw);
        if (sc.index <= 5) CHECK(bucket == Bucket::BelowAverage);
        if (sc.index == 6) CHECK(bucket == Bucket::Average);
        if (sc.index >= 7) CHECK(bucket == Bucket::AboveAverage);
    }
}

TEST_CASE("parse_business_file reads one record per valid line") {
    const auto path = temp_path("biz");
    write_text(path, business_line("a", 4.0) + "\n" + business_line("b", 3.5) + "\n" +
                         business_line("c", 5.0) + "\n");
    ParseStats stats;
    auto map = parse_business_file(path.string(), &stats);
    CHECK(map.size() == 3);
    CHECK(stats.lines == 3);
    CHECK(stats.malformed == 0);
    CHECK(map.at("b").stars == 3.5);
    std::filesystem::remove(path);
}

TEST_CASE("parse_business_file drops illegal ratings and counts them") {
    const auto path = temp_path("biz_drop");
    write_text(path, business_line("a", 0.5) + "\n" + business_line("b", 4.0) + "\n");
    ParseStats stats;
    auto map = parse_business_file(path.string(), &stats);
    CHECK(map.size() == 1);
    CHECK(stats.dropped == 1);
    std::filesystem::remove(path);
}

TEST_CASE("parse_business_file skips malformed lines and keeps the last duplicate") {
    const auto path = temp_path("biz_bad");
    log::set_threshold(log::Level::Error);
    write_text(path, "this is not json\n" + business_line("dup", 2.0) + "\n" +
                         "{\"business_id\": 17, \"stars\": 3.0}\n" + business_line("dup", 4.5) +
                         "\n");
    ParseStats stats;
    auto map = parse_business_file(path.string(), &stats);
    log::set_threshold(log::Level::Info);
    CHECK(map.size() == 1);
    CHECK(map.at("dup").stars == 4.5);
    CHECK(stats.malformed == 2);  // non-JSON line + ill-typed business_id
    CHECK(stats.duplicates == 1);
    std::filesystem::remove(path);
}

TEST_CASE("parse_business_file fails loudly on a missing file") {
    CHECK_THROWS_AS(parse_business_file("/nonexistent/businesses.json"), std::runtime_error);
}

TEST_CASE("parse_photo_file maps labels and drops unknown ones") {
    const auto path = temp_path("photos");
    write_text(path, photo_line("p1", "b1", "food") + "\n" + photo_line("p2", "b1", "selfie") +
                         "\n" + photo_line("p3", "b2", "menu") + "\n");
    ParseStats stats;
    auto photos = parse_photo_file(path.string(), &stats);
    REQUIRE(photos.size() == 2);
    CHECK(photos[0].label == Label::Food);
    CHECK(photos[1].label == Label::Menu);
    CHECK(stats.dropped == 1);
    std::filesystem::remove(path);
}

TEST_CASE("streaming parse agrees with a whole-file reference parse on a large fixture") {
    // Build a 10,000-line synthetic file with sprinkled garbage, duplicates,
    // and out-of-range ratings, then compare against a naive reference that
    // re-parses the full text in one pass.
    Rng rng(2023);
    std::ostringstream file;
    std::vector<std::string> lines;
    for (int i = 0; i < 10000; ++i) {
        const int kind = static_cast<int>(rng.bounded(20));
        std::string line;
        if (kind == 0) {
            line = "not json line " + std::to_string(i);
        } else if (kind == 1) {
            line = business_line("biz" + std::to_string(rng.bounded(50)), 3.0);  // duplicates
        } else if (kind == 2) {
            line = business_line("bad" + std::to_string(i), 0.5 + 6.0 * rng.uniform());
        } else {
            const double stars = (2 + static_cast<int>(rng.bounded(9))) / 2.0;
            line = business_line("biz" + std::to_string(i + 1000), stars);
        }
        lines.push_back(line);
        file << line << '\n';
    }
    const auto path = temp_path("biz_large");
    write_text(path, file.str());

    log::set_threshold(log::Level::Error);
    auto streamed = parse_business_file(path.string());
    log::set_threshold(log::Level::Info);

    // Reference: same drop rules, implemented against the in-memory lines.
    std::map<std::string, double> reference;
    for (const auto& line : lines) {
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        if (!j.contains("business_id") || !j["business_id"].is_string()) continue;
        if (!j.contains("stars") || !j["stars"].is_number()) continue;
        const double stars = j["stars"].get<double>();
        if (!is_legal_stars(stars)) continue;
        reference[j["business_id"].get<std::string>()] = stars;
    }

    REQUIRE(streamed.size() == reference.size());
    for (const auto& [id, stars] : reference) {
        REQUIRE(streamed.count(id) == 1);
        CHECK(streamed.at(id).stars == stars);
    }
    std::filesystem::remove(path);
}

TEST_CASE("per-label counts of a mixed photo fixture match a reference parser") {
    Rng rng(11);
    const char* names[] = {"food", "drink", "menu", "inside", "outside", "pet", ""};
    std::ostringstream file;
    std::map<std::string, int> expected;
    for (int i = 0; i < 500; ++i) {
        const auto* label = names[rng.bounded(7)];
        file << photo_line("p" + std::to_string(i), "b" + std::to_string(i % 37), label) << '\n';
        if (parse_label(label)) ++expected[label];
    }
    const auto path = temp_path("photos_mixed");
    write_text(path, file.str());

    auto photos = parse_photo_file(path.string());
    std::map<std::string, int> got;
    for (const auto& p : photos) ++got[label_name(p.label)];
    CHECK(got == expected);
    std::filesystem::remove(path);
}

TEST_CASE("join broadcasts a business's stars to all its photos") {
    std::unordered_map<std::string, BusinessRecord> businesses{
        {"b1", {"b1", 4.5}},
    };
    std::vector<PhotoRecord> photos{
        {"p1", "b1", Label::Food},
        {"p2", "b1", Label::Inside},
        {"p3", "ghost", Label::Food},
    };
    JoinStats stats;
    auto joined = join_photo_stars(photos, businesses, &stats);
    REQUIRE(joined.size() == 2);
    CHECK(joined[0].stars == 4.5);
    CHECK(joined[1].stars == 4.5);
    CHECK(stats.matched == 2);
    CHECK(stats.dropped_unmatched == 1);
    CHECK(joined.size() + stats.dropped_unmatched == photos.size());
}

TEST_CASE("join equals a nested-loop join on a random fixture") {
    Rng rng(101);
    std::unordered_map<std::string, BusinessRecord> businesses;
    for (int i = 0; i < 80; ++i) {
        const std::string id = "b" + std::to_string(i);
        businesses[id] = {id, (2 + static_cast<int>(rng.bounded(9))) / 2.0};
    }
    std::vector<PhotoRecord> photos;
    for (int i = 0; i < 1000; ++i)
        photos.push_back({"p" + std::to_string(i), "b" + std::to_string(rng.bounded(120)),
                          kAllLabels[rng.bounded(5)]});

    auto joined = join_photo_stars(photos, businesses);

    std::vector<JoinedPhoto> brute;
    for (const auto& p : photos)
        for (const auto& [id, biz] : businesses)
            if (p.business_id == id) brute.push_back({p, biz.stars});

    REQUIRE(joined.size() == brute.size());
    std::multiset<std::pair<std::string, double>> a, b;
    for (const auto& j : joined) a.insert({j.photo.photo_id, j.stars});
    for (const auto& j : brute) b.insert({j.photo.photo_id, j.stars});
    CHECK(a == b);
}

TEST_CASE("partition_by_label always yields five lists that cover the input") {
    std::vector<JoinedPhoto> one{{{"p", "b", Label::Food}, 4.0}};
    auto parts = partition_by_label(one);
    REQUIRE(parts.size() == 5);
    CHECK(parts.at(Label::Food).size() == 1);
    CHECK(parts.at(Label::Drink).empty());

    auto empty_parts = partition_by_label({});
    REQUIRE(empty_parts.size() == 5);
    for (const auto& [label, list] : empty_parts) CHECK(list.empty());
}

TEST_CASE("partition sizes match a counting oracle and conserve the input") {
    Rng rng(55);
    std::vector<JoinedPhoto> joined;
    std::map<Label, std::size_t> expected;
    for (int i = 0; i < 333; ++i) {
        const Label label = kAllLabels[rng.bounded(5)];
        joined.push_back({{"p" + std::to_string(i), "b", label},
                          (2 + static_cast<int>(rng.bounded(9))) / 2.0});
        ++expected[label];
    }
    auto parts = partition_by_label(joined);
    std::size_t total = 0;
    for (const auto& [label, list] : parts) {
        CHECK(list.size() == expected[label]);
        total += list.size();
    }
    CHECK(total == joined.size());
}

TEST_CASE("star_histogram counts ratings per label") {
    std::vector<JoinedPhoto> one{{{"p", "b", Label::Food}, 4.0}};
    auto hists = star_histogram(one);
    int nonzero = 0;
    for (auto count : hists.at(Label::Food))
        if (count > 0) ++nonzero;
    CHECK(nonzero == 1);
    CHECK(hists.at(Label::Food)[scale_stars(4.0).index] == 1);

    auto empty_hists = star_histogram({});
    for (const auto& [label, hist] : empty_hists)
        for (auto count : hist) CHECK(count == 0);
}

TEST_CASE("a 4.0-skewed fixture puts the histogram mode at 4.0") {
    Rng rng(77);
    std::vector<JoinedPhoto> joined;
    std::array<std::uint64_t, 9> oracle{};
    for (int i = 0; i < 400; ++i) {
        const double raw =
            rng.uniform() < 0.55 ? 4.0 : (2 + static_cast<int>(rng.bounded(9))) / 2.0;
        joined.push_back({{"p" + std::to_string(i), "b", Label::Drink}, raw});
        ++oracle[static_cast<std::size_t>(scale_stars(raw).index)];
    }
    auto hist = star_histogram(joined).at(Label::Drink);
    std::uint64_t total = 0;
    for (int i = 0; i < 9; ++i) {
        CHECK(hist[static_cast<std::size_t>(i)] == oracle[static_cast<std::size_t>(i)]);
        total += hist[static_cast<std::size_t>(i)];
    }
    CHECK(total == joined.size());
    const auto mode = std::max_element(hist.begin(), hist.end()) - hist.begin();
    CHECK(mode == scale_stars(4.0).index);
}

TEST_CASE("split sizes reproduce the reference food-label proportions") {
    const auto sizes = split_sizes(118597);
    CHECK(sizes.train == 106737);
    CHECK(sizes.val == 5929);
    CHECK(sizes.test == 5931);
    CHECK(sizes.train + sizes.val + sizes.test == 118597);
}

TEST_CASE("split arithmetic on small counts") {
    const auto s20 = split_sizes(20);
    CHECK(s20.train == 18);
    CHECK(s20.val == 1);
    CHECK(s20.test == 1);

    const auto s3 = split_sizes(3);
    CHECK(s3.train == 1);
    CHECK(s3.val == 1);
    CHECK(s3.test == 1);

    CHECK_THROWS_AS(split_sizes(2), std::invalid_argument);

    for (std::size_t n : {3ul, 19ul, 40ul, 97ul, 1000ul, 118597ul}) {
        const auto s = split_sizes(n);
        CHECK(s.train + s.val + s.test == n);
        CHECK(s.train >= 1);
        CHECK(s.val >= 1);
        CHECK(s.test >= 1);
    }
}

TEST_CASE("split_dataset partitions without loss or overlap") {
    Rng rng(31);
    std::vector<SplitItem> items;
    for (int i = 0; i < 197; ++i)
        items.push_back({"p" + std::to_string(i), (2 + static_cast<int>(rng.bounded(9))) / 2.0});

    auto manifest = split_dataset(Label::Menu, items, 7);
    CHECK(manifest.total() == items.size());

    std::set<std::string> seen;
    auto absorb = [&](const std::vector<SplitItem>& list) {
        for (const auto& item : list) CHECK(seen.insert(item.photo_id).second);
    };
    absorb(manifest.train);
    absorb(manifest.val);
    absorb(manifest.test);
    CHECK(seen.size() == items.size());
}

TEST_CASE("same seed gives byte-identical manifests, different seed does not") {
    std::vector<SplitItem> items;
    for (int i = 0; i < 64; ++i) items.push_back({"p" + std::to_string(i), 3.0});

    const auto path_a = temp_path("manifest_a");
    const auto path_b = temp_path("manifest_b");
    write_manifest(path_a.string(), split_dataset(Label::Food, items, 42));
    write_manifest(path_b.string(), split_dataset(Label::Food, items, 42));
    CHECK(read_bytes(path_a) == read_bytes(path_b));

    write_manifest(path_b.string(), split_dataset(Label::Food, items, 43));
    CHECK(read_bytes(path_a) != read_bytes(path_b));
    std::filesystem::remove(path_a);
    std::filesystem::remove(path_b);
}

TEST_CASE("manifests survive a write/read round trip") {
    std::vector<SplitItem> items;
    for (int i = 0; i < 25; ++i)
        items.push_back({"photo_" + std::to_string(i), (2 + i % 9) / 2.0});
    auto manifest = split_dataset(Label::Outside, items, 1234);

    const auto path = temp_path("manifest_rt");
    write_manifest(path.string(), manifest);
    auto loaded = read_manifest(path.string());

    CHECK(loaded.label == manifest.label);
    CHECK(loaded.seed == manifest.seed);
    CHECK(loaded.train == manifest.train);
    CHECK(loaded.val == manifest.val);
    CHECK(loaded.test == manifest.test);
    std::filesystem::remove(path);
}

TEST_CASE("manifest reader rejects corrupt input") {
    const auto path = temp_path("manifest_bad");
    write_text(path, "label=food seed=1\nphoto\t4.0\tlunch\n");
    CHECK_THROWS_AS(read_manifest(path.string()), std::runtime_error);
    write_text(path, "not a header\n");
    CHECK_THROWS_AS(read_manifest(path.string()), std::runtime_error);
    write_text(path, "label=food seed=1\nphoto\t7.5\ttrain\n");
    CHECK_THROWS_AS(read_manifest(path.string()), std::runtime_error);
    std::filesystem::remove(path);
}
