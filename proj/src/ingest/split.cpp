#include "starpix/ingest/split.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "starpix/common/rng.hpp"

namespace starpix::ingest {

SplitSizes split_sizes(std::size_t n) {
    if (n < 3)
        throw std::invalid_argument("split_sizes: need at least 3 items, got " +
                                    std::to_string(n));
    const std::size_t holdout = (n + 5) / 10;  // n/10 rounded to nearest, half up
    SplitSizes sizes;
    sizes.val = std::max<std::size_t>(1, n / 20);
    sizes.test = std::max<std::size_t>(1, holdout > sizes.val ? holdout - sizes.val : 0);
    sizes.train = n - sizes.val - sizes.test;
    return sizes;
}

SplitManifest split_dataset(Label label, std::vector<SplitItem> items, std::uint64_t seed) {
    const SplitSizes sizes = split_sizes(items.size());
    Rng rng(seed);
    rng.shuffle(items);

    SplitManifest manifest;
    manifest.label = label;
    manifest.seed = seed;
    auto it = items.begin();
    manifest.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
    it += static_cast<std::ptrdiff_t>(sizes.train);
    manifest.val.assign(it, it + static_cast<std::ptrdiff_t>(sizes.val));
    it += static_cast<std::ptrdiff_t>(sizes.val);
    manifest.test.assign(it, items.end());
    return manifest;
}

void write_manifest(const std::string& path, const SplitManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "label=" << label_name(manifest.label) << " seed=" << manifest.seed << '\n';
    auto emit = [&](const std::vector<SplitItem>& items, const char* split) {
        for (const auto& item : items)
            out << item.photo_id << '\t' << format_stars(item.stars) << '\t' << split << '\n';
    };
    emit(manifest.train, "train");
    emit(manifest.val, "val");
    emit(manifest.test, "test");
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

SplitManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");

    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("manifest '" + path + "': missing header");
    SplitManifest manifest;
    {
        std::istringstream hs(header);
        std::string label_field, seed_field;
        if (!(hs >> label_field >> seed_field) || label_field.rfind("label=", 0) != 0 ||
            seed_field.rfind("seed=", 0) != 0)
            throw std::runtime_error("manifest '" + path + "': bad header '" + header + "'");
        const auto label = parse_label(label_field.substr(6));
        if (!label)
            throw std::runtime_error("manifest '" + path + "': unknown label in '" + header +
                                     "'");
        manifest.label = *label;
        const std::string seed_text = seed_field.substr(5);
        auto [ptr, ec] = std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(),
                                         manifest.seed);
        if (ec != std::errc() || ptr != seed_text.data() + seed_text.size())
            throw std::runtime_error("manifest '" + path + "': bad seed in '" + header + "'");
    }

    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos)
            throw std::runtime_error("manifest '" + path + "' line " + std::to_string(line_no) +
                                     ": expected photo_id<TAB>stars<TAB>split");
        SplitItem item;
        item.photo_id = line.substr(0, tab1);
        const std::string stars_text = line.substr(tab1 + 1, tab2 - tab1 - 1);
        try {
            item.stars = std::stod(stars_text);
        } catch (const std::exception&) {
            throw std::runtime_error("manifest '" + path + "' line " + std::to_string(line_no) +
                                     ": bad stars '" + stars_text + "'");
        }
        if (!is_legal_stars(item.stars))
            throw std::runtime_error("manifest '" + path + "' line " + std::to_string(line_no) +
                                     ": illegal stars '" + stars_text + "'");
        const std::string split = line.substr(tab2 + 1);
        if (split == "train")
            manifest.train.push_back(std::move(item));
        else if (split == "val")
            manifest.val.push_back(std::move(item));
        else if (split == "test")
            manifest.test.push_back(std::move(item));
        else
            throw std::runtime_error("manifest '" + path + "' line " + std::to_string(line_no) +
                                     ": unknown split '" + split + "'");
    }
    if (in.bad()) throw std::runtime_error("read error on '" + path + "'");
    return manifest;
}

}  // namespace starpix::ingest
