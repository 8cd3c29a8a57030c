#include "starpix/plot/chart.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace starpix::plot {
namespace {

// 5x7 bitmap glyphs, one byte per row, low five bits used (bit 4 = left
// column). Enough coverage for axis labels, legends and numbers.
struct Glyph {
    char ch;
    std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {' ', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000}},
    {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
    {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
    {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
    {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
    {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
    {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
    {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
    {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
    {'a', {0b00000, 0b00000, 0b01110, 0b00001, 0b01111, 0b10001, 0b01111}},
    {'b', {0b10000, 0b10000, 0b11110, 0b10001, 0b10001, 0b10001, 0b11110}},
    {'c', {0b00000, 0b00000, 0b01110, 0b10000, 0b10000, 0b10001, 0b01110}},
    {'d', {0b00001, 0b00001, 0b01111, 0b10001, 0b10001, 0b10001, 0b01111}},
    {'e', {0b00000, 0b00000, 0b01110, 0b10001, 0b11111, 0b10000, 0b01110}},
    {'f', {0b00110, 0b01001, 0b01000, 0b11100, 0b01000, 0b01000, 0b01000}},
    {'g', {0b00000, 0b01111, 0b10001, 0b10001, 0b01111, 0b00001, 0b01110}},
    {'h', {0b10000, 0b10000, 0b11110, 0b10001, 0b10001, 0b10001, 0b10001}},
    {'i', {0b00100, 0b00000, 0b01100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'j', {0b00010, 0b00000, 0b00110, 0b00010, 0b00010, 0b10010, 0b01100}},
    {'k', {0b10000, 0b10000, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010}},
    {'l', {0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'m', {0b00000, 0b00000, 0b11010, 0b10101, 0b10101, 0b10101, 0b10101}},
    {'n', {0b00000, 0b00000, 0b11110, 0b10001, 0b10001, 0b10001, 0b10001}},
    {'o', {0b00000, 0b00000, 0b01110, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'p', {0b00000, 0b00000, 0b11110, 0b10001, 0b11110, 0b10000, 0b10000}},
    {'q', {0b00000, 0b00000, 0b01111, 0b10001, 0b01111, 0b00001, 0b00001}},
    {'r', {0b00000, 0b00000, 0b10110, 0b11001, 0b10000, 0b10000, 0b10000}},
    {'s', {0b00000, 0b00000, 0b01111, 0b10000, 0b01110, 0b00001, 0b11110}},
    {'t', {0b01000, 0b01000, 0b11100, 0b01000, 0b01000, 0b01001, 0b00110}},
    {'u', {0b00000, 0b00000, 0b10001, 0b10001, 0b10001, 0b10011, 0b01101}},
    {'v', {0b00000, 0b00000, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
    {'w', {0b00000, 0b00000, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010}},
    {'x', {0b00000, 0b00000, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001}},
    {'y', {0b00000, 0b00000, 0b10001, 0b10001, 0b01111, 0b00001, 0b01110}},
    {'z', {0b00000, 0b00000, 0b11111, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'.', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100}},
    {',', {0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b00100, 0b01000}},
    {'-', {0b00000, 0b00000, 0b00000, 0b11111, 0b00000, 0b00000, 0b00000}},
    {'+', {0b00000, 0b00100, 0b00100, 0b11111, 0b00100, 0b00100, 0b00000}},
    {'_', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b11111}},
    {':', {0b00000, 0b01100, 0b01100, 0b00000, 0b01100, 0b01100, 0b00000}},
    {'/', {0b00001, 0b00010, 0b00010, 0b00100, 0b01000, 0b01000, 0b10000}},
    {'%', {0b11000, 0b11001, 0b00010, 0b00100, 0b01000, 0b10011, 0b00011}},
    {'(', {0b00010, 0b00100, 0b01000, 0b01000, 0b01000, 0b00100, 0b00010}},
    {')', {0b01000, 0b00100, 0b00010, 0b00010, 0b00010, 0b00100, 0b01000}},
    {'=', {0b00000, 0b00000, 0b11111, 0b00000, 0b11111, 0b00000, 0b00000}},
};

const Glyph* find_glyph(char c) {
    const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const auto& g : kFont) {
        if (g.ch == lower) return &g;
    }
    return nullptr;
}

constexpr int kGlyphW = 5;
constexpr int kGlyphH = 7;
constexpr int kGlyphAdvance = 6;

const Rgb kPalette[] = {
    {31, 119, 180},   // blue
    {255, 127, 14},   // orange
    {44, 160, 44},    // green
    {214, 39, 40},    // red
    {148, 103, 189},  // purple
    {140, 86, 75},    // brown
};

const Rgb kAxis{60, 60, 60};
const Rgb kGrid{225, 225, 225};
const Rgb kText{30, 30, 30};

std::string format_tick(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

Range padded_range(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
    if (lo > hi) std::swap(lo, hi);
    if (lo == hi) {
        const double pad = (lo == 0.0) ? 1.0 : std::abs(lo) * 0.1;
        return {lo - pad, hi + pad};
    }
    const double pad = (hi - lo) * 0.05;
    return {lo - pad, hi + pad};
}

}  // namespace

Canvas::Canvas(int width, int height, Rgb background)
    : image_(imageprep::RgbImage::filled(height, width, background.r, background.g,
                                         background.b)) {
    if (width < 16 || height < 16) throw std::invalid_argument("canvas too small");
}

void Canvas::set(int x, int y, Rgb color) {
    if (x < 0 || y < 0 || x >= width() || y >= height()) return;
    std::uint8_t* p = image_.at(y, x);
    p[0] = color.r;
    p[1] = color.g;
    p[2] = color.b;
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb color) {
    // Bresenham, integer-only.
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        set(x0, y0, color);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb color) {
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) set(x, y, color);
    }
}

void Canvas::text(int x, int y, const std::string& s, Rgb color, int scale) {
    if (scale < 1) scale = 1;
    int cx = x;
    for (char c : s) {
        if (const Glyph* g = find_glyph(c)) {
            for (int row = 0; row < kGlyphH; ++row) {
                for (int col = 0; col < kGlyphW; ++col) {
                    if (!(g->rows[row] & (1u << (kGlyphW - 1 - col)))) continue;
                    fill_rect(cx + col * scale, y + row * scale, cx + col * scale + scale - 1,
                              y + row * scale + scale - 1, color);
                }
            }
        }
        cx += kGlyphAdvance * scale;
    }
}

int Canvas::text_width(const std::string& s, int scale) {
    if (s.empty()) return 0;
    return static_cast<int>(s.size()) * kGlyphAdvance * scale - scale;
}

void Canvas::save_png(const std::string& path) const {
    imageprep::write_png_rgb(path, image_);
}

void line_chart(const std::string& path, const std::vector<Series>& series,
                const ChartOptions& options) {
    if (series.empty()) throw std::invalid_argument("line_chart: no series");
    std::size_t n = 0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : series) {
        n = std::max(n, s.ys.size());
        for (double v : s.ys) {
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (n == 0) throw std::invalid_argument("line_chart: all series empty");
    const Range yr = padded_range(lo, hi);

    Canvas canvas(options.width, options.height);
    const int left = 70, right = options.width - 20;
    const int top = 34, bottom = options.height - 46;
    const double xmax = n > 1 ? static_cast<double>(n - 1) : 1.0;
    const auto px = [&](double x) {
        return left + static_cast<int>(std::lround((x / xmax) * (right - left)));
    };
    const auto py = [&](double y) {
        const double t = (y - yr.lo) / (yr.hi - yr.lo);
        return bottom - static_cast<int>(std::lround(t * (bottom - top)));
    };

    // Grid + ticks.
    constexpr int kTicks = 5;
    for (int i = 0; i <= kTicks; ++i) {
        const double ty = yr.lo + (yr.hi - yr.lo) * i / kTicks;
        const int y = py(ty);
        canvas.line(left, y, right, y, kGrid);
        const std::string label = format_tick(ty);
        canvas.text(left - 6 - Canvas::text_width(label), y - 3, label, kText);
    }
    const int x_tick_count = static_cast<int>(std::min<std::size_t>(n, 6));
    for (int i = 0; i < x_tick_count; ++i) {
        const double tx = xmax * i / std::max(1, x_tick_count - 1);
        const int x = px(tx);
        canvas.line(x, bottom, x, bottom + 4, kAxis);
        const std::string label = format_tick(std::round(tx));
        canvas.text(x - Canvas::text_width(label) / 2, bottom + 8, label, kText);
    }

    canvas.line(left, top, left, bottom, kAxis);
    canvas.line(left, bottom, right, bottom, kAxis);

    if (!options.title.empty()) {
        canvas.text((options.width - Canvas::text_width(options.title)) / 2, 10,
                    options.title, kText);
    }
    if (!options.x_label.empty()) {
        canvas.text((left + right - Canvas::text_width(options.x_label)) / 2,
                    options.height - 14, options.x_label, kText);
    }
    if (!options.y_label.empty()) {
        canvas.text(8, top - 14, options.y_label, kText);
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const Rgb color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        int prev_x = 0, prev_y = 0;
        bool have_prev = false;
        for (std::size_t i = 0; i < s.ys.size(); ++i) {
            if (!std::isfinite(s.ys[i])) {
                have_prev = false;
                continue;
            }
            const int x = px(static_cast<double>(i));
            const int y = py(s.ys[i]);
            if (have_prev) canvas.line(prev_x, prev_y, x, y, color);
            canvas.fill_rect(x - 1, y - 1, x + 1, y + 1, color);
            prev_x = x;
            prev_y = y;
            have_prev = true;
        }
        // Legend entry, top-right corner of the plot area.
        const int ly = top + 6 + static_cast<int>(si) * 12;
        const int lx = right - 120;
        canvas.line(lx, ly + 3, lx + 16, ly + 3, color);
        canvas.text(lx + 22, ly, s.name, kText);
    }

    canvas.save_png(path);
}

void bar_chart(const std::string& path, const std::vector<std::string>& labels,
               const std::vector<double>& values, const ChartOptions& options) {
    if (values.empty()) throw std::invalid_argument("bar_chart: no values");
    if (labels.size() != values.size()) {
        throw std::invalid_argument("bar_chart: labels/values size mismatch");
    }
    double hi = 0.0;
    double lo = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("bar_chart: non-finite value");
        hi = std::max(hi, v);
        lo = std::min(lo, v);
    }
    const Range yr = padded_range(lo, hi == lo ? lo + 1.0 : hi);

    Canvas canvas(options.width, options.height);
    const int left = 70, right = options.width - 20;
    const int top = 34, bottom = options.height - 46;
    const auto py = [&](double y) {
        const double t = (y - yr.lo) / (yr.hi - yr.lo);
        return bottom - static_cast<int>(std::lround(t * (bottom - top)));
    };

    constexpr int kTicks = 5;
    for (int i = 0; i <= kTicks; ++i) {
        const double ty = yr.lo + (yr.hi - yr.lo) * i / kTicks;
        const int y = py(ty);
        canvas.line(left, y, right, y, kGrid);
        const std::string label = format_tick(ty);
        canvas.text(left - 6 - Canvas::text_width(label), y - 3, label, kText);
    }

    const int count = static_cast<int>(values.size());
    const double slot = static_cast<double>(right - left) / count;
    const int bar_half = std::max(1, static_cast<int>(slot * 0.35));
    const int zero_y = py(std::max(0.0, yr.lo));
    const Rgb bar_color = kPalette[0];
    const int label_step = std::max(1, (count + 11) / 12);
    for (int i = 0; i < count; ++i) {
        const int cx = left + static_cast<int>(std::lround(slot * (i + 0.5)));
        const int y = py(values[i]);
        canvas.fill_rect(cx - bar_half, std::min(y, zero_y), cx + bar_half,
                         std::max(y, zero_y), bar_color);
        if (i % label_step == 0) {
            canvas.text(cx - Canvas::text_width(labels[i]) / 2, bottom + 8, labels[i],
                        kText);
        }
    }

    canvas.line(left, top, left, bottom, kAxis);
    canvas.line(left, bottom, right, bottom, kAxis);
    if (!options.title.empty()) {
        canvas.text((options.width - Canvas::text_width(options.title)) / 2, 10,
                    options.title, kText);
    }
    if (!options.x_label.empty()) {
        canvas.text((left + right - Canvas::text_width(options.x_label)) / 2,
                    options.height - 14, options.x_label, kText);
    }
    if (!options.y_label.empty()) {
        canvas.text(8, top - 14, options.y_label, kText);
    }

    canvas.save_png(path);
}

}  // namespace starpix::plot
