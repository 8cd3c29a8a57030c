#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "starpix/ingest/records.hpp"

namespace starpix::ingest {

struct SplitItem {
    std::string photo_id;
    double stars = 0.0;

    bool operator==(const SplitItem&) const = default;
};

// A label's photo set cut into train/val/test. The three lists are disjoint
// and together cover the input exactly.
struct SplitManifest {
    Label label = Label::Food;
    std::uint64_t seed = 0;
    std::vector<SplitItem> train, val, test;

    std::size_t total() const { return train.size() + val.size() + test.size(); }
};

// Sizes for the 90/5/5 cut of n items: the held-out pool is n/10 rounded to
// nearest, val gets floor(n/20) of it and test the rest, train the remainder.
// Each held-out split gets at least one item, which is why n >= 3 is required.
struct SplitSizes {
    std::size_t train = 0, val = 0, test = 0;
};
SplitSizes split_sizes(std::size_t n);

// Deterministic shuffle by seed, then cut per split_sizes. Throws when n < 3.
SplitManifest split_dataset(Label label, std::vector<SplitItem> items, std::uint64_t seed);

// Text form: header `label=<name> seed=<u64>`, then one
// `photo_id<TAB>stars<TAB>split` line per item (train lines, then val, then
// test). Identical (items, seed) inputs produce identical bytes.
void write_manifest(const std::string& path, const SplitManifest& manifest);
SplitManifest read_manifest(const std::string& path);

}  // namespace starpix::ingest
