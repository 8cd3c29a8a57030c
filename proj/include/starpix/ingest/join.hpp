#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "starpix/ingest/records.hpp"

namespace starpix::ingest {

struct JoinStats {
    std::size_t matched = 0;
    std::size_t dropped_unmatched = 0;
};

// Pair each photo with its business's stars, broadcasting one rating to all
// of the business's photos. Photos with no matching business are dropped and
// counted; input order is preserved for the survivors.
std::vector<JoinedPhoto> join_photo_stars(
    const std::vector<PhotoRecord>& photos,
    const std::unordered_map<std::string, BusinessRecord>& businesses,
    JoinStats* stats = nullptr);

// One list per category, all five keys always present.
std::map<Label, std::vector<JoinedPhoto>> partition_by_label(
    const std::vector<JoinedPhoto>& joined);

// Counts over the 9 star classes, indexed by StarClass::index.
using StarHistogram = std::array<std::uint64_t, 9>;

std::map<Label, StarHistogram> star_histogram(const std::vector<JoinedPhoto>& joined);

}  // namespace starpix::ingest
