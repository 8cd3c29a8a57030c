#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "starpix/ingest/records.hpp"

namespace starpix::ingest {

struct ParseStats {
    std::size_t lines = 0;      // non-empty lines seen
    std::size_t malformed = 0;  // unparseable JSON or missing/ill-typed fields
    std::size_t dropped = 0;    // well-formed but illegal stars / unknown label
    std::size_t duplicates = 0; // repeated business_id (last one wins)
};

// Both parsers stream the file line by line (one JSON object per line) and
// never hold more than one line of text in memory. Malformed lines are
// skipped and logged with their line number. An unreadable file throws.
std::unordered_map<std::string, BusinessRecord> parse_business_file(const std::string& path,
                                                                    ParseStats* stats = nullptr);

std::vector<PhotoRecord> parse_photo_file(const std::string& path, ParseStats* stats = nullptr);

}  // namespace starpix::ingest
