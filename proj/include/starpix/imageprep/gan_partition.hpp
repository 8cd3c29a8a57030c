#pragma once

#include <map>
#include <memory>
#include <string>

#include "starpix/imageprep/store.hpp"
#include "starpix/ingest/records.hpp"

namespace starpix::imageprep {

// Routes normalized images into one store per observed star value, laid out
// as <out_dir>/<label>/<stars>.yimg (e.g. food/5.0.yimg). Stores are created
// lazily, so a star value that never occurs produces no file.
class GanPartitioner {
public:
    GanPartitioner(std::string out_dir, ingest::Label label, StoreDims dims);

    void add(const std::int8_t* pixels, double raw_stars);

    // Finalizes all stores and returns path -> record count.
    std::map<std::string, std::uint64_t> close();

private:
    std::string dir_;
    StoreDims dims_;
    std::map<int, std::unique_ptr<StoreWriter>> writers_;  // keyed by scaled star
};

}  // namespace starpix::imageprep
