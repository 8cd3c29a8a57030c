#include "starpix/engine/weights.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace starpix::engine {

namespace {

constexpr char kMagic[4] = {'Y', 'W', 'T', 'S'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

float get_f32(std::istream& is) {
    const std::uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void save_weights(const std::string& path, const std::vector<NamedTensorRef<float>>& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open weight file for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u64(os, tensors.size());
    for (const auto& entry : tensors) {
        put_u32(os, static_cast<std::uint32_t>(entry.name.size()));
        os.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
        put_u32(os, static_cast<std::uint32_t>(entry.tensor->shape.size()));
        for (int extent : entry.tensor->shape) put_u32(os, static_cast<std::uint32_t>(extent));
        for (float v : entry.tensor->data) put_f32(os, v);
    }
    if (!os) throw std::runtime_error("write failure on weight file: " + path);
}

std::vector<std::pair<std::string, Tensor>> load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open weight file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a YWTS weight file: " + path);
    const std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw std::runtime_error("unsupported YWTS version " + std::to_string(version) + " in " +
                                 path);
    const std::uint64_t count = get_u64(is);
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = get_u32(is);
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(get_u32(is));
        Tensor tensor(shape);
        for (auto& v : tensor.data) v = get_f32(is);
        if (!is)
            throw std::runtime_error("truncated YWTS file " + path + " at tensor " +
                                     std::to_string(i));
        out.emplace_back(std::move(name), std::move(tensor));
    }
    return out;
}

void assign_weights(const std::vector<NamedTensorRef<float>>& state,
                    const std::vector<std::pair<std::string, Tensor>>& loaded, bool require_all) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, tensor] : loaded) by_name[name] = &tensor;

    std::string problems;
    for (const auto& slot : state) {
        auto it = by_name.find(slot.name);
        if (it == by_name.end()) {
            if (require_all) problems += "\n  missing: " + slot.name;
            continue;
        }
        if (!same_shape(it->second->shape, slot.tensor->shape)) {
            problems += "\n  shape mismatch: " + slot.name + " file " +
                        shape_str(it->second->shape) + " vs model " + shape_str(slot.tensor->shape);
            continue;
        }
        slot.tensor->data = it->second->data;
    }
    if (!problems.empty()) throw std::runtime_error("weight assignment failed:" + problems);
}

}  // namespace starpix::engine
