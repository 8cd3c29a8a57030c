#include "starpix/ingest/join.hpp"

namespace starpix::ingest {

std::vector<JoinedPhoto> join_photo_stars(
    const std::vector<PhotoRecord>& photos,
    const std::unordered_map<std::string, BusinessRecord>& businesses, JoinStats* stats) {
    JoinStats local;
    JoinStats& s = stats ? *stats : local;
    std::vector<JoinedPhoto> out;
    out.reserve(photos.size());
    for (const auto& photo : photos) {
        auto it = businesses.find(photo.business_id);
        if (it == businesses.end()) {
            ++s.dropped_unmatched;
            continue;
        }
        out.push_back(JoinedPhoto{photo, it->second.stars});
        ++s.matched;
    }
    return out;
}

std::map<Label, std::vector<JoinedPhoto>> partition_by_label(
    const std::vector<JoinedPhoto>& joined) {
    std::map<Label, std::vector<JoinedPhoto>> out;
    for (Label label : kAllLabels) out[label];
    for (const auto& item : joined) out[item.photo.label].push_back(item);
    return out;
}

std::map<Label, StarHistogram> star_histogram(const std::vector<JoinedPhoto>& joined) {
    std::map<Label, StarHistogram> out;
    for (Label label : kAllLabels) out[label] = StarHistogram{};
    for (const auto& item : joined)
        ++out[item.photo.label][static_cast<std::size_t>(scale_stars(item.stars).index)];
    return out;
}

}  // namespace starpix::ingest
