#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace starpix::imageprep {

// YIMG tensor store, little-endian throughout:
//   magic   "YIMG"            4 bytes
//   version u32               currently 1
//   count   u64               number of records
//   dims    u32 x 3           channels, height, width
// followed by `count` records of channels*height*width int8 pixel bytes
// (CHW order) plus one star byte holding the scaled rating 2..10.
struct StoreDims {
    std::uint32_t channels = 3;
    std::uint32_t height = 144;
    std::uint32_t width = 200;

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(channels) * height * width;
    }
    bool operator==(const StoreDims&) const = default;
};

inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderSize = 4 + 4 + 8 + 12;

// Whole store in memory: records are laid out back to back in `pixels`.
struct ImageStore {
    StoreDims dims;
    std::vector<std::int8_t> pixels;        // size() * dims.pixel_count()
    std::vector<std::uint8_t> stars_scaled; // one 2..10 value per record

    std::size_t size() const { return stars_scaled.size(); }
    const std::int8_t* record(std::size_t i) const {
        return pixels.data() + i * dims.pixel_count();
    }
    std::int8_t* record(std::size_t i) { return pixels.data() + i * dims.pixel_count(); }
    void append(const std::int8_t* record_pixels, std::uint8_t star_scaled);
};

// Incremental writer: header goes out first with a zero count, records are
// appended, and close() (or the destructor) patches the count in place.
class StoreWriter {
public:
    StoreWriter(const std::string& path, StoreDims dims);
    ~StoreWriter();
    StoreWriter(const StoreWriter&) = delete;
    StoreWriter& operator=(const StoreWriter&) = delete;

    void append(const std::int8_t* pixels, std::uint8_t star_scaled);
    std::uint64_t count() const { return count_; }
    const StoreDims& dims() const { return dims_; }
    void close();

private:
    std::string path_;
    StoreDims dims_;
    std::ofstream out_;
    std::uint64_t count_ = 0;
    bool open_ = false;
};

// Streaming reader; records can be consumed one at a time without loading
// the file. Truncated files trip an error naming expected vs actual size.
class StoreReader {
public:
    explicit StoreReader(const std::string& path);

    const StoreDims& dims() const { return dims_; }
    std::uint64_t record_count() const { return record_count_; }

    // False once all records were read.
    bool next(std::vector<std::int8_t>& pixels, std::uint8_t& star_scaled);

private:
    std::string path_;
    std::ifstream in_;
    StoreDims dims_;
    std::uint64_t record_count_ = 0;
    std::uint64_t consumed_ = 0;
};

void write_store(const std::string& path, const ImageStore& store);
ImageStore read_store(const std::string& path);

}  // namespace starpix::imageprep
