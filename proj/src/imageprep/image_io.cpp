#include "starpix/imageprep/image.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <jpeglib.h>
#include <png.h>

namespace starpix::imageprep {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw std::runtime_error("read error on '" + path + "'");
    return bytes;
}

bool looks_jpeg(const std::uint8_t* data, std::size_t size) {
    return size >= 3 && data[0] == 0xFF && data[1] == 0xD8 && data[2] == 0xFF;
}

bool looks_png(const std::uint8_t* data, std::size_t size) {
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return size >= 8 && std::memcmp(data, sig, 8) == 0;
}

// libjpeg reports errors through a callback; we longjmp back out and rethrow.
struct JpegErrorTrap {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX] = "unknown libjpeg error";

    static void on_error(j_common_ptr cinfo) {
        auto* trap = reinterpret_cast<JpegErrorTrap*>(cinfo->err);
        (*cinfo->err->format_message)(cinfo, trap->message);
        std::longjmp(trap->jump, 1);
    }
};

RgbImage decode_jpeg(const std::uint8_t* data, std::size_t size, const std::string& origin) {
    jpeg_decompress_struct cinfo;
    JpegErrorTrap trap;
    cinfo.err = jpeg_std_error(&trap.mgr);
    trap.mgr.error_exit = JpegErrorTrap::on_error;

    RgbImage image;
    if (setjmp(trap.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("JPEG decode failed for '" + origin + "': " + trap.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    image.height = static_cast<int>(cinfo.output_height);
    image.width = static_cast<int>(cinfo.output_width);
    image.pixels.resize(static_cast<std::size_t>(image.height) * image.width * 3);
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = image.pixels.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return image;
}

struct PngByteSource {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t offset;
};

void png_read_bytes(png_structp png, png_bytep out, png_size_t n) {
    auto* src = static_cast<PngByteSource*>(png_get_io_ptr(png));
    if (src->offset + n > src->size) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, src->data + src->offset, n);
    src->offset += n;
}

RgbImage decode_png(const std::uint8_t* data, std::size_t size, const std::string& origin) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    RgbImage image;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("PNG decode failed for '" + origin + "'");
    }
    PngByteSource src{data, size, 0};
    png_set_read_fn(png, &src, png_read_bytes);
    png_read_info(png, info);

    // Normalize every PNG variant to 8-bit RGB.
    png_set_expand(png);          // palette -> rgb, low-bit gray -> 8-bit, tRNS -> alpha
    png_set_strip_16(png);
    png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    if (png_get_channels(png, info) != 3 || png_get_bit_depth(png, info) != 8)
        png_error(png, "not reducible to 8-bit RGB");

    image.height = static_cast<int>(png_get_image_height(png, info));
    image.width = static_cast<int>(png_get_image_width(png, info));
    image.pixels.resize(static_cast<std::size_t>(image.height) * image.width * 3);
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    rows.resize(static_cast<std::size_t>(image.height));
    for (int y = 0; y < image.height; ++y) rows[static_cast<std::size_t>(y)] = image.pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void validate_for_encode(const RgbImage& image) {
    if (image.height < 1 || image.width < 1)
        throw std::invalid_argument("image encode: empty image " + std::to_string(image.height) +
                                    "x" + std::to_string(image.width));
    const std::size_t expected = static_cast<std::size_t>(image.height) * image.width * 3;
    if (image.pixels.size() != expected)
        throw std::invalid_argument("image encode: pixel buffer holds " +
                                    std::to_string(image.pixels.size()) + " bytes, expected " +
                                    std::to_string(expected));
}

}  // namespace

RgbImage RgbImage::filled(int height, int width, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    RgbImage image;
    image.height = height;
    image.width = width;
    image.pixels.resize(static_cast<std::size_t>(height) * width * 3);
    for (std::size_t i = 0; i < image.pixels.size(); i += 3) {
        image.pixels[i] = r;
        image.pixels[i + 1] = g;
        image.pixels[i + 2] = b;
    }
    return image;
}

RgbImage decode_image_bytes(const std::uint8_t* data, std::size_t size,
                            const std::string& origin) {
    if (looks_jpeg(data, size)) return decode_jpeg(data, size, origin);
    if (looks_png(data, size)) return decode_png(data, size, origin);
    char head[32] = {0};
    std::snprintf(head, sizeof head, "%02x %02x %02x %02x", size > 0 ? data[0] : 0,
                  size > 1 ? data[1] : 0, size > 2 ? data[2] : 0, size > 3 ? data[3] : 0);
    throw std::runtime_error("'" + origin + "' is neither JPEG nor PNG (leading bytes " + head +
                             ")");
}

RgbImage decode_image(const std::string& path) {
    const auto bytes = read_file(path);
    return decode_image_bytes(bytes.data(), bytes.size(), path);
}

void write_png_rgb(const std::string& path, const RgbImage& image) {
    validate_for_encode(image);
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("libpng writer initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("PNG encode failed for '" + path + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    for (int y = 0; y < image.height; ++y)
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0) throw std::runtime_error("failed writing '" + path + "'");
}

void write_jpeg_rgb(const std::string& path, const RgbImage& image, int quality) {
    validate_for_encode(image);
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open '" + path + "' for writing");

    jpeg_compress_struct cinfo;
    JpegErrorTrap trap;
    cinfo.err = jpeg_std_error(&trap.mgr);
    trap.mgr.error_exit = JpegErrorTrap::on_error;
    if (setjmp(trap.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::fclose(fp);
        throw std::runtime_error("JPEG encode failed for '" + path + "': " + trap.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, fp);
    cinfo.image_width = static_cast<JDIMENSION>(image.width);
    cinfo.image_height = static_cast<JDIMENSION>(image.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(image.pixels.data() + cinfo.next_scanline * stride);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    if (std::fclose(fp) != 0) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace starpix::imageprep
