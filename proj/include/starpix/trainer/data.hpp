#pragma once

#include <cstddef>
#include <vector>

#include "starpix/engine/tensor.hpp"
#include "starpix/imageprep/store.hpp"
#include "starpix/ingest/records.hpp"
#include "starpix/trainer/config.hpp"

namespace starpix::trainer {

// Class index for one record under the given head. Nine-way uses the dense
// star index directly; three-way buckets it. Regression has no class target.
inline int target_class(std::uint8_t star_scaled, Head head) {
    const ingest::StarClass sc = ingest::star_class_from_index(static_cast<int>(star_scaled) - 2);
    if (head == Head::NineClass) return sc.index;
    if (head == Head::ThreeBucket) return static_cast<int>(ingest::bucketize(sc.raw));
    throw std::invalid_argument("target_class: regression head has no class target");
}

struct Batch {
    engine::Tensor images;           // (N,C,H,W), int8 pixels scaled by 1/128
    std::vector<int> classes;        // classification heads
    engine::Tensor values;           // (N,1) scaled stars, regression head
};

// Gathers the given records into a training batch. Pixels map to
// [-1, 0.9921875] via x/128; regression targets are the scaled 2..10 stars.
inline Batch make_batch(const imageprep::ImageStore& store,
                        const std::vector<std::size_t>& indices, Head head) {
    const int n = static_cast<int>(indices.size());
    const auto& d = store.dims;
    Batch batch;
    batch.images = engine::Tensor::zeros({n, static_cast<int>(d.channels),
                                          static_cast<int>(d.height), static_cast<int>(d.width)});
    float* out = batch.images.ptr();
    const std::size_t pixel_count = d.pixel_count();
    for (int i = 0; i < n; ++i) {
        const std::int8_t* rec = store.record(indices[i]);
        float* dst = out + static_cast<std::size_t>(i) * pixel_count;
        for (std::size_t p = 0; p < pixel_count; ++p) {
            dst[p] = static_cast<float>(rec[p]) / 128.0f;
        }
    }
    if (head == Head::Regression) {
        batch.values = engine::Tensor::zeros({n, 1});
        for (int i = 0; i < n; ++i) {
            batch.values.data[i] = static_cast<float>(store.stars_scaled[indices[i]]);
        }
    } else {
        batch.classes.reserve(indices.size());
        for (std::size_t idx : indices) {
            batch.classes.push_back(target_class(store.stars_scaled[idx], head));
        }
    }
    return batch;
}

}  // namespace starpix::trainer
