#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "starpix/imageprep/image.hpp"

namespace starpix::plot {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

// Minimal raster canvas backing the chart renderers; no plotting library
// behind it, just pixels and Bresenham.
class Canvas {
public:
    Canvas(int width, int height, Rgb background = {255, 255, 255});

    int width() const { return image_.width; }
    int height() const { return image_.height; }

    void set(int x, int y, Rgb color);
    void line(int x0, int y0, int x1, int y1, Rgb color);
    void fill_rect(int x0, int y0, int x1, int y1, Rgb color);
    // 5x7 bitmap font, rendered at integer scale. Lowercases its input;
    // glyphs outside the set render as blanks.
    void text(int x, int y, const std::string& s, Rgb color, int scale = 1);
    static int text_width(const std::string& s, int scale = 1);

    void save_png(const std::string& path) const;
    const imageprep::RgbImage& image() const { return image_; }

private:
    imageprep::RgbImage image_;
};

struct Series {
    std::string name;
    std::vector<double> ys;  // x is the index (epoch number)
};

struct ChartOptions {
    int width = 720;
    int height = 480;
    std::string title;
    std::string x_label;
    std::string y_label;
};

// Multi-series line chart with axes, ticks and a legend, written as PNG.
void line_chart(const std::string& path, const std::vector<Series>& series,
                const ChartOptions& options);

// Labeled vertical bars (star-rating histograms).
void bar_chart(const std::string& path, const std::vector<std::string>& labels,
               const std::vector<double>& values, const ChartOptions& options);

}  // namespace starpix::plot
