#pragma once

#include <cstdint>
#include <vector>

#include "starpix/imageprep/image.hpp"
#include "starpix/ingest/records.hpp"

namespace starpix::imageprep {

// Canonical tensor dimensions for every stored image.
inline constexpr int kChannels = 3;
inline constexpr int kHeight = 144;
inline constexpr int kWidth = 200;
inline constexpr std::size_t kPixelCount =
    static_cast<std::size_t>(kChannels) * kHeight * kWidth;

// One normalized photo joined with its rating and category.
struct LabeledImage {
    std::vector<std::int8_t> pixels;  // (3, 144, 200), CHW, signed
    double stars = 0.0;
    ingest::Label label = ingest::Label::Food;
};

// Content-region size after aspect-preserving scaling by
// s = min(kWidth/W, kHeight/H): the binding dimension lands exactly on its
// target, the other is rounded to nearest (clamped to stay >= 1).
struct ScaledExtent {
    int height = 0;
    int width = 0;
};
ScaledExtent scaled_extent(int height, int width);

// Bilinear scale (half-pixel centers, double-precision accumulation),
// symmetric mid-gray padding (extra pixel on the right/bottom when odd),
// then a shift from [0,255] to signed range by subtracting 128. Output is
// CHW with channels R, G, B. Bit-reproducible across platforms.
std::vector<std::int8_t> normalize_image(const RgbImage& decoded);

}  // namespace starpix::imageprep
