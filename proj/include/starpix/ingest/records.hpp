#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace starpix::ingest {

// The five photo categories shipped in the Yelp photo file.
enum class Label { Food, Drink, Menu, Inside, Outside };

inline constexpr std::array<Label, 5> kAllLabels = {Label::Food, Label::Drink, Label::Menu,
                                                    Label::Inside, Label::Outside};

inline const char* label_name(Label label) {
    switch (label) {
        case Label::Food: return "food";
        case Label::Drink: return "drink";
        case Label::Menu: return "menu";
        case Label::Inside: return "inside";
        case Label::Outside: return "outside";
    }
    throw std::invalid_argument("label_name: bad enum value");
}

inline std::optional<Label> parse_label(std::string_view text) {
    for (Label label : kAllLabels)
        if (text == label_name(label)) return label;
    return std::nullopt;
}

struct BusinessRecord {
    std::string business_id;
    double stars = 0.0;
};

struct PhotoRecord {
    std::string photo_id;
    std::string business_id;
    Label label = Label::Food;
};

// A photo joined with its business's star rating.
struct JoinedPhoto {
    PhotoRecord photo;
    double stars = 0.0;
};

// Ratings come in half-star steps 1.0 .. 5.0; anything else (including the
// 0-star oddities in the wild) is rejected. Comparison tolerates tiny
// parse noise although half-stars are exactly representable.
inline bool is_legal_stars(double raw) {
    if (!(raw >= 1.0 - 1e-9 && raw <= 5.0 + 1e-9)) return false;
    const double doubled = raw * 2.0;
    return std::fabs(doubled - std::round(doubled)) <= 2e-9;
}

// Class view of a rating: doubling makes every class value a whole number,
// giving scaled in {2..10} and a 0-based index in [0,8].
struct StarClass {
    double raw = 0.0;
    int scaled = 0;
    int index = 0;
};

inline StarClass scale_stars(double raw) {
    if (!is_legal_stars(raw))
        throw std::invalid_argument("scale_stars: illegal rating " + std::to_string(raw));
    StarClass out;
    out.scaled = static_cast<int>(std::lround(raw * 2.0));
    out.raw = out.scaled / 2.0;
    out.index = out.scaled - 2;
    return out;
}

inline StarClass star_class_from_index(int index) {
    if (index < 0 || index > 8)
        throw std::invalid_argument("star_class_from_index: index " + std::to_string(index) +
                                    " outside [0,8]");
    return scale_stars((index + 2) / 2.0);
}

enum class Bucket { BelowAverage, Average, AboveAverage };

inline const char* bucket_name(Bucket bucket) {
    switch (bucket) {
        case Bucket::BelowAverage: return "below_average";
        case Bucket::Average: return "average";
        case Bucket::AboveAverage: return "above_average";
    }
    throw std::invalid_argument("bucket_name: bad enum value");
}

// Ratings up to 3.5 count as below average, exactly 4.0 as average, and
// 4.5 or 5.0 as above average.
inline Bucket bucketize(double raw) {
    const StarClass sc = scale_stars(raw);
    if (sc.scaled <= 7) return Bucket::BelowAverage;
    if (sc.scaled == 8) return Bucket::Average;
    return Bucket::AboveAverage;
}

// Half-star ratings rendered with exactly one decimal, e.g. "4.0", "3.5".
inline std::string format_stars(double raw) {
    const StarClass sc = scale_stars(raw);
    return std::to_string(sc.scaled / 2) + (sc.scaled % 2 ? ".5" : ".0");
}

}  // namespace starpix::ingest
