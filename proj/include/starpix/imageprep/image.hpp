#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace starpix::imageprep {

// Decoded 8-bit image, rows top to bottom, RGB interleaved.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3

    static RgbImage filled(int height, int width, std::uint8_t r, std::uint8_t g,
                           std::uint8_t b);
    std::uint8_t* at(int y, int x) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int y, int x) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
};

// Sniffs the magic bytes and decodes baseline JPEG or PNG to 8-bit RGB
// (grayscale and palette images are expanded, alpha is stripped). Any other
// format is rejected with an error naming what was found.
RgbImage decode_image(const std::string& path);
RgbImage decode_image_bytes(const std::uint8_t* data, std::size_t size, const std::string& origin);

void write_png_rgb(const std::string& path, const RgbImage& image);
void write_jpeg_rgb(const std::string& path, const RgbImage& image, int quality = 90);

}  // namespace starpix::imageprep
