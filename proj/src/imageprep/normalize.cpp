#include "starpix/imageprep/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace starpix::imageprep {

ScaledExtent scaled_extent(int height, int width) {
    if (height < 1 || width < 1)
        throw std::invalid_argument("scaled_extent: empty image " + std::to_string(height) + "x" +
                                    std::to_string(width));
    const double sh = static_cast<double>(kHeight) / height;
    const double sw = static_cast<double>(kWidth) / width;
    ScaledExtent out;
    if (sw <= sh) {  // width binds (ties give an exact fit on both axes)
        out.width = kWidth;
        out.height = static_cast<int>(
            std::clamp<long>(std::lround(height * sw), 1, kHeight));
    } else {
        out.height = kHeight;
        out.width = static_cast<int>(std::clamp<long>(std::lround(width * sh), 1, kWidth));
    }
    return out;
}

std::vector<std::int8_t> normalize_image(const RgbImage& decoded) {
    const int h = decoded.height, w = decoded.width;
    if (h < 1 || w < 1)
        throw std::invalid_argument("normalize_image: empty image " + std::to_string(h) + "x" +
                                    std::to_string(w));
    const std::size_t expected = static_cast<std::size_t>(h) * w * 3;
    if (decoded.pixels.size() != expected)
        throw std::invalid_argument("normalize_image: pixel buffer holds " +
                                    std::to_string(decoded.pixels.size()) + " bytes, expected " +
                                    std::to_string(expected));

    const ScaledExtent scaled = scaled_extent(h, w);
    const int pad_top = (kHeight - scaled.height) / 2;
    const int pad_left = (kWidth - scaled.width) / 2;

    std::vector<std::int8_t> out(kPixelCount, 0);  // 0 = mid-gray in signed space
    const double y_ratio = static_cast<double>(h) / scaled.height;
    const double x_ratio = static_cast<double>(w) / scaled.width;

    for (int oy = 0; oy < scaled.height; ++oy) {
        const double sy = std::clamp((oy + 0.5) * y_ratio - 0.5, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - y0;
        for (int ox = 0; ox < scaled.width; ++ox) {
            const double sx =
                std::clamp((ox + 0.5) * x_ratio - 0.5, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - x0;

            const std::uint8_t* p00 = decoded.at(y0, x0);
            const std::uint8_t* p01 = decoded.at(y0, x1);
            const std::uint8_t* p10 = decoded.at(y1, x0);
            const std::uint8_t* p11 = decoded.at(y1, x1);
            for (int c = 0; c < kChannels; ++c) {
                const double top = p00[c] + (p01[c] - p00[c]) * fx;
                const double bottom = p10[c] + (p11[c] - p10[c]) * fx;
                const long value = std::lround(top + (bottom - top) * fy);
                const int byte = static_cast<int>(std::clamp<long>(value, 0, 255));
                out[static_cast<std::size_t>(c) * kHeight * kWidth +
                    static_cast<std::size_t>(pad_top + oy) * kWidth + (pad_left + ox)] =
                    static_cast<std::int8_t>(byte - 128);
            }
        }
    }
    return out;
}

}  // namespace starpix::imageprep
