#include "starpix/imageprep/gan_partition.hpp"

#include <filesystem>

namespace starpix::imageprep {

GanPartitioner::GanPartitioner(std::string out_dir, ingest::Label label, StoreDims dims)
    : dims_(dims) {
    namespace fs = std::filesystem;
    dir_ = (fs::path(out_dir) / ingest::label_name(label)).string();
    fs::create_directories(dir_);
}

void GanPartitioner::add(const std::int8_t* pixels, double raw_stars) {
    const ingest::StarClass sc = ingest::scale_stars(raw_stars);
    auto& writer = writers_[sc.scaled];
    if (!writer) {
        const std::string path =
            (std::filesystem::path(dir_) / (ingest::format_stars(sc.raw) + ".yimg")).string();
        writer = std::make_unique<StoreWriter>(path, dims_);
    }
    writer->append(pixels, static_cast<std::uint8_t>(sc.scaled));
}

std::map<std::string, std::uint64_t> GanPartitioner::close() {
    std::map<std::string, std::uint64_t> counts;
    for (auto& [scaled, writer] : writers_) {
        if (!writer) continue;
        const std::string path =
            (std::filesystem::path(dir_) /
             (ingest::format_stars(scaled / 2.0) + ".yimg")).string();
        writer->close();
        counts[path] = writer->count();
    }
    writers_.clear();
    return counts;
}

}  // namespace starpix::imageprep
