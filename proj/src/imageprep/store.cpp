#include "starpix/imageprep/store.hpp"

#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "starpix/common/log.hpp"

namespace starpix::imageprep {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

void validate_dims(const StoreDims& dims) {
    if (dims.channels == 0 || dims.height == 0 || dims.width == 0)
        throw std::invalid_argument("store: zero dimension in (" + std::to_string(dims.channels) +
                                    "," + std::to_string(dims.height) + "," +
                                    std::to_string(dims.width) + ")");
}

void validate_star(std::uint8_t star_scaled) {
    if (star_scaled < 2 || star_scaled > 10)
        throw std::invalid_argument("store: star byte " + std::to_string(int(star_scaled)) +
                                    " outside 2..10");
}

void write_header(std::ostream& out, const StoreDims& dims, std::uint64_t count) {
    out.write("YIMG", 4);
    put_u32(out, kStoreVersion);
    put_u64(out, count);
    put_u32(out, dims.channels);
    put_u32(out, dims.height);
    put_u32(out, dims.width);
}

}  // namespace

void ImageStore::append(const std::int8_t* record_pixels, std::uint8_t star_scaled) {
    validate_star(star_scaled);
    pixels.insert(pixels.end(), record_pixels, record_pixels + dims.pixel_count());
    stars_scaled.push_back(star_scaled);
}

StoreWriter::StoreWriter(const std::string& path, StoreDims dims) : path_(path), dims_(dims) {
    validate_dims(dims_);
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_header(out_, dims_, 0);
    if (!out_) throw std::runtime_error("failed writing header of '" + path + "'");
    open_ = true;
}

StoreWriter::~StoreWriter() {
    try {
        close();
    } catch (const std::exception& e) {
        log::error("store writer for '", path_, "': ", e.what());
    }
}

void StoreWriter::append(const std::int8_t* pixels, std::uint8_t star_scaled) {
    if (!open_) throw std::logic_error("store writer for '" + path_ + "' already closed");
    validate_star(star_scaled);
    out_.write(reinterpret_cast<const char*>(pixels),
               static_cast<std::streamsize>(dims_.pixel_count()));
    out_.put(static_cast<char>(star_scaled));
    if (!out_) throw std::runtime_error("failed writing record to '" + path_ + "'");
    ++count_;
}

void StoreWriter::close() {
    if (!open_) return;
    open_ = false;
    out_.seekp(8);  // count field sits after magic + version
    put_u64(out_, count_);
    out_.flush();
    if (!out_) throw std::runtime_error("failed finalizing '" + path_ + "'");
    out_.close();
}

StoreReader::StoreReader(const std::string& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw std::runtime_error("cannot open '" + path + "' for reading");

    char magic[4];
    in_.read(magic, 4);
    if (!in_ || std::memcmp(magic, "YIMG", 4) != 0)
        throw std::runtime_error("'" + path + "' is not a YIMG store (bad magic)");
    const std::uint32_t version = get_u32(in_);
    if (version != kStoreVersion)
        throw std::runtime_error("'" + path + "': unsupported YIMG version " +
                                 std::to_string(version));
    record_count_ = get_u64(in_);
    dims_.channels = get_u32(in_);
    dims_.height = get_u32(in_);
    dims_.width = get_u32(in_);
    if (!in_) throw std::runtime_error("'" + path + "': truncated header");
    validate_dims(dims_);

    const std::uint64_t expected =
        kStoreHeaderSize + record_count_ * (dims_.pixel_count() + 1);
    const auto actual = std::filesystem::file_size(path);
    if (actual != expected)
        throw std::runtime_error("'" + path + "': expected " + std::to_string(expected) +
                                 " bytes for " + std::to_string(record_count_) +
                                 " records, file has " + std::to_string(actual));
}

bool StoreReader::next(std::vector<std::int8_t>& pixels, std::uint8_t& star_scaled) {
    if (consumed_ >= record_count_) return false;
    pixels.resize(dims_.pixel_count());
    in_.read(reinterpret_cast<char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));
    const int star = in_.get();
    if (!in_ || star == std::char_traits<char>::eof())
        throw std::runtime_error("'" + path_ + "': truncated record " +
                                 std::to_string(consumed_));
    star_scaled = static_cast<std::uint8_t>(star);
    validate_star(star_scaled);
    ++consumed_;
    return true;
}

void write_store(const std::string& path, const ImageStore& store) {
    validate_dims(store.dims);
    if (store.pixels.size() != store.size() * store.dims.pixel_count())
        throw std::invalid_argument(
            "write_store: pixel buffer holds " + std::to_string(store.pixels.size()) +
            " bytes, expected " + std::to_string(store.size() * store.dims.pixel_count()));
    for (std::uint8_t star : store.stars_scaled) validate_star(star);

    StoreWriter writer(path, store.dims);
    for (std::size_t i = 0; i < store.size(); ++i)
        writer.append(store.record(i), store.stars_scaled[i]);
    writer.close();
}

ImageStore read_store(const std::string& path) {
    StoreReader reader(path);
    ImageStore store;
    store.dims = reader.dims();
    store.pixels.reserve(reader.record_count() * store.dims.pixel_count());
    store.stars_scaled.reserve(reader.record_count());
    std::vector<std::int8_t> record;
    std::uint8_t star = 0;
    while (reader.next(record, star)) {
        store.pixels.insert(store.pixels.end(), record.begin(), record.end());
        store.stars_scaled.push_back(star);
    }
    return store;
}

}  // namespace starpix::imageprep
