#include "starpix/ingest/parse.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "starpix/common/log.hpp"

namespace starpix::ingest {

namespace {

using json = nlohmann::json;

// Runs `handle(line_no, parsed)` per JSON line; counts and logs bad lines.
template <typename Fn>
void for_each_json_line(const std::string& path, ParseStats& stats, Fn&& handle) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++stats.lines;
        json parsed = json::parse(line, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) {
            ++stats.malformed;
            log::warn(path, ":", line_no, ": skipping malformed line");
            continue;
        }
        handle(line_no, parsed);
    }
    if (in.bad()) throw std::runtime_error("read error on '" + path + "'");
}

const std::string* get_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return nullptr;
    return it->get_ptr<const std::string*>();
}

}  // namespace

std::unordered_map<std::string, BusinessRecord> parse_business_file(const std::string& path,
                                                                    ParseStats* stats) {
    ParseStats local;
    ParseStats& s = stats ? *stats : local;
    std::unordered_map<std::string, BusinessRecord> out;
    for_each_json_line(path, s, [&](std::size_t line_no, const json& obj) {
        const std::string* id = get_string(obj, "business_id");
        auto stars_it = obj.find("stars");
        if (!id || id->empty() || stars_it == obj.end() || !stars_it->is_number()) {
            ++s.malformed;
            log::warn(path, ":", line_no, ": business line missing business_id/stars");
            return;
        }
        const double stars = stars_it->get<double>();
        if (!is_legal_stars(stars)) {
            ++s.dropped;
            return;
        }
        auto [it, inserted] = out.insert_or_assign(*id, BusinessRecord{*id, stars});
        if (!inserted) {
            ++s.duplicates;
            log::warn(path, ":", line_no, ": duplicate business_id '", *id, "', keeping last");
        }
    });
    return out;
}

std::vector<PhotoRecord> parse_photo_file(const std::string& path, ParseStats* stats) {
    ParseStats local;
    ParseStats& s = stats ? *stats : local;
    std::vector<PhotoRecord> out;
    for_each_json_line(path, s, [&](std::size_t line_no, const json& obj) {
        const std::string* photo_id = get_string(obj, "photo_id");
        const std::string* business_id = get_string(obj, "business_id");
        const std::string* label_text = get_string(obj, "label");
        if (!photo_id || photo_id->empty() || !business_id || business_id->empty() ||
            !label_text) {
            ++s.malformed;
            log::warn(path, ":", line_no, ": photo line missing photo_id/business_id/label");
            return;
        }
        const auto label = parse_label(*label_text);
        if (!label) {
            ++s.dropped;
            return;
        }
        out.push_back(PhotoRecord{*photo_id, *business_id, *label});
    });
    return out;
}

}  // namespace starpix::ingest
