#include "lensdeg/plot.hpp"

#include "lensdeg/error.hpp"
#include "lensdeg/image.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>

namespace fs = std::filesystem;

namespace lensdeg {

namespace {

struct Color {
    float r, g, b;
};
constexpr Color kBlack{0, 0, 0}, kGrey{0.6f, 0.6f, 0.6f}, kWhite{1, 1, 1};
constexpr std::array<Color, 6> kPalette{{{0.84f, 0.15f, 0.16f},
                                         {0.17f, 0.63f, 0.17f},
                                         {0.12f, 0.47f, 0.71f},
                                         {1.0f, 0.5f, 0.05f},
                                         {0.58f, 0.4f, 0.74f},
                                         {0.55f, 0.34f, 0.29f}}};

// clang-format off
// 5×7 glyphs for ' ' … 'Z', column-major, bit 0 = top row. Lowercase renders as uppercase.
constexpr unsigned char kFont[][5] = {
    {0x00,0x00,0x00,0x00,0x00}, {0x00,0x00,0x5F,0x00,0x00}, {0x00,0x07,0x00,0x07,0x00}, {0x14,0x7F,0x14,0x7F,0x14},
    {0x24,0x2A,0x7F,0x2A,0x12}, {0x23,0x13,0x08,0x64,0x62}, {0x36,0x49,0x56,0x20,0x50}, {0x00,0x05,0x03,0x00,0x00},
    {0x00,0x1C,0x22,0x41,0x00}, {0x00,0x41,0x22,0x1C,0x00}, {0x2A,0x1C,0x7F,0x1C,0x2A}, {0x08,0x08,0x3E,0x08,0x08},
    {0x00,0x50,0x30,0x00,0x00}, {0x08,0x08,0x08,0x08,0x08}, {0x00,0x60,0x60,0x00,0x00}, {0x20,0x10,0x08,0x04,0x02},
    {0x3E,0x51,0x49,0x45,0x3E}, {0x00,0x42,0x7F,0x40,0x00}, {0x42,0x61,0x51,0x49,0x46}, {0x21,0x41,0x45,0x4B,0x31},
    {0x18,0x14,0x12,0x7F,0x10}, {0x27,0x45,0x45,0x45,0x39}, {0x3C,0x4A,0x49,0x49,0x30}, {0x01,0x71,0x09,0x05,0x03},
    {0x36,0x49,0x49,0x49,0x36}, {0x06,0x49,0x49,0x29,0x1E}, {0x00,0x36,0x36,0x00,0x00}, {0x00,0x56,0x36,0x00,0x00},
    {0x08,0x14,0x22,0x41,0x00}, {0x14,0x14,0x14,0x14,0x14}, {0x00,0x41,0x22,0x14,0x08}, {0x02,0x01,0x51,0x09,0x06},
    {0x32,0x49,0x79,0x41,0x3E}, {0x7E,0x11,0x11,0x11,0x7E}, {0x7F,0x49,0x49,0x49,0x36}, {0x3E,0x41,0x41,0x41,0x22},
    {0x7F,0x41,0x41,0x22,0x1C}, {0x7F,0x49,0x49,0x49,0x41}, {0x7F,0x09,0x09,0x09,0x01}, {0x3E,0x41,0x49,0x49,0x7A},
    {0x7F,0x08,0x08,0x08,0x7F}, {0x00,0x41,0x7F,0x41,0x00}, {0x20,0x40,0x41,0x3F,0x01}, {0x7F,0x08,0x14,0x22,0x41},
    {0x7F,0x40,0x40,0x40,0x40}, {0x7F,0x02,0x0C,0x02,0x7F}, {0x7F,0x04,0x08,0x10,0x7F}, {0x3E,0x41,0x41,0x41,0x3E},
    {0x7F,0x09,0x09,0x09,0x06}, {0x3E,0x41,0x51,0x21,0x5E}, {0x7F,0x09,0x19,0x29,0x46}, {0x46,0x49,0x49,0x49,0x31},
    {0x01,0x01,0x7F,0x01,0x01}, {0x3F,0x40,0x40,0x40,0x3F}, {0x1F,0x20,0x40,0x20,0x1F}, {0x3F,0x40,0x38,0x40,0x3F},
    {0x63,0x14,0x08,0x14,0x63}, {0x07,0x08,0x70,0x08,0x07}, {0x61,0x51,0x49,0x45,0x43},
};
// clang-format on

enum class Anchor { start, middle, end };

struct Line {
    double x0, y0, x1, y1;
    Color color;
    double width;
    bool dashed;
};
struct Rect {
    double x, y, w, h;
    Color fill;
};
struct Text {
    double x, y;  // baseline point
    std::string text;
    Anchor anchor;
    int scale;    // raster glyph scale; SVG font size = 8·scale
    Color color;
};
struct Dot {
    double x, y, r;
    Color color;
};
struct Picture {
    double x, y;
    RasterImage image;
};
using Item = std::variant<Line, Rect, Text, Dot, Picture>;

struct Figure {
    int width, height;
    std::vector<Item> items;

    void line(double x0, double y0, double x1, double y1, Color c, double w = 1.0, bool dashed = false) {
        items.emplace_back(Line{x0, y0, x1, y1, c, w, dashed});
    }
    void rect(double x, double y, double w, double h, Color c) { items.emplace_back(Rect{x, y, w, h, c}); }
    void text(double x, double y, std::string s, Anchor a = Anchor::start, int scale = 2, Color c = kBlack) {
        items.emplace_back(Text{x, y, std::move(s), a, scale, c});
    }
    void dot(double x, double y, double r, Color c) { items.emplace_back(Dot{x, y, r, c}); }
};

std::string svg_color(Color c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(c.r * 255)),
                  static_cast<int>(std::lround(c.g * 255)), static_cast<int>(std::lround(c.b * 255)));
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string base64(const std::vector<unsigned char>& in) {
    static constexpr char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    for (std::size_t i = 0; i < in.size(); i += 3) {
        const unsigned v = in[i] << 16 | (i + 1 < in.size() ? in[i + 1] << 8 : 0) | (i + 2 < in.size() ? in[i + 2] : 0);
        out += tbl[v >> 18 & 63];
        out += tbl[v >> 12 & 63];
        out += i + 1 < in.size() ? tbl[v >> 6 & 63] : '=';
        out += i + 2 < in.size() ? tbl[v & 63] : '=';
    }
    return out;
}

std::string render_svg(const Figure& f) {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
       << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    for (const Item& item : f.items) {
        if (auto* l = std::get_if<Line>(&item)) {
            os << "<line x1=\"" << l->x0 << "\" y1=\"" << l->y0 << "\" x2=\"" << l->x1 << "\" y2=\"" << l->y1
               << "\" stroke=\"" << svg_color(l->color) << "\" stroke-width=\"" << l->width << '"'
               << (l->dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        } else if (auto* r = std::get_if<Rect>(&item)) {
            os << "<rect x=\"" << r->x << "\" y=\"" << r->y << "\" width=\"" << r->w << "\" height=\"" << r->h
               << "\" fill=\"" << svg_color(r->fill) << "\"/>\n";
        } else if (auto* t = std::get_if<Text>(&item)) {
            const char* anchor = t->anchor == Anchor::start ? "start" : t->anchor == Anchor::middle ? "middle" : "end";
            os << "<text x=\"" << t->x << "\" y=\"" << t->y << "\" font-family=\"sans-serif\" font-size=\""
               << 7 * t->scale << "\" text-anchor=\"" << anchor << "\" fill=\"" << svg_color(t->color) << "\">"
               << xml_escape(t->text) << "</text>\n";
        } else if (auto* d = std::get_if<Dot>(&item)) {
            os << "<circle cx=\"" << d->x << "\" cy=\"" << d->y << "\" r=\"" << d->r << "\" fill=\""
               << svg_color(d->color) << "\"/>\n";
        } else if (auto* p = std::get_if<Picture>(&item)) {
            os << "<image x=\"" << p->x << "\" y=\"" << p->y << "\" width=\"" << p->image.width << "\" height=\""
               << p->image.height << "\" href=\"data:image/png;base64," << base64(encode_png(p->image)) << "\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

struct Canvas {
    RasterImage img;
    explicit Canvas(int w, int h) : img(w, h, 1.0f) {}

    void put(int x, int y, Color c) {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
        img.at(x, y, 0) = c.r;
        img.at(x, y, 1) = c.g;
        img.at(x, y, 2) = c.b;
    }
    void fill(double x, double y, double w, double h, Color c) {
        const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
        const int x1 = static_cast<int>(std::ceil(x + w)), y1 = static_cast<int>(std::ceil(y + h));
        for (int yy = y0; yy < y1; ++yy) {
            for (int xx = x0; xx < x1; ++xx) put(xx, yy, c);
        }
    }
    void line(const Line& l) {
        const double len = std::hypot(l.x1 - l.x0, l.y1 - l.y0);
        const int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
        const int half = std::max(0, static_cast<int>(std::lround(l.width)) / 2);
        for (int i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) / steps;
            if (l.dashed && std::fmod(t * len, 10.0) > 6.0) continue;
            const int x = static_cast<int>(std::lround(l.x0 + t * (l.x1 - l.x0)));
            const int y = static_cast<int>(std::lround(l.y0 + t * (l.y1 - l.y0)));
            for (int dy = -half; dy <= half; ++dy) {
                for (int dx = -half; dx <= half; ++dx) put(x + dx, y + dy, l.color);
            }
        }
    }
    void text(const Text& t) {
        const int advance = 6 * t.scale;
        const double w = advance * static_cast<double>(t.text.size()) - t.scale;
        double x = t.anchor == Anchor::start ? t.x : t.anchor == Anchor::middle ? t.x - 0.5 * w : t.x - w;
        const int top = static_cast<int>(std::lround(t.y)) - 7 * t.scale;
        for (char ch : t.text) {
            int code = static_cast<unsigned char>(ch);
            if (code >= 'a' && code <= 'z') code -= 32;
            if (code < 32 || code > 'Z') code = '?';
            const auto& glyph = kFont[code - 32];
            for (int col = 0; col < 5; ++col) {
                for (int row = 0; row < 7; ++row) {
                    if (glyph[col] >> row & 1) {
                        fill(x + col * t.scale, top + row * t.scale, t.scale, t.scale, t.color);
                    }
                }
            }
            x += advance;
        }
    }
};

RasterImage render_raster(const Figure& f) {
    Canvas cv(f.width, f.height);
    for (const Item& item : f.items) {
        if (auto* l = std::get_if<Line>(&item)) {
            cv.line(*l);
        } else if (auto* r = std::get_if<Rect>(&item)) {
            cv.fill(r->x, r->y, r->w, r->h, r->fill);
        } else if (auto* t = std::get_if<Text>(&item)) {
            cv.text(*t);
        } else if (auto* d = std::get_if<Dot>(&item)) {
            const int rr = static_cast<int>(std::ceil(d->r));
            for (int dy = -rr; dy <= rr; ++dy) {
                for (int dx = -rr; dx <= rr; ++dx) {
                    if (dx * dx + dy * dy <= d->r * d->r) {
                        cv.put(static_cast<int>(std::lround(d->x)) + dx, static_cast<int>(std::lround(d->y)) + dy, d->color);
                    }
                }
            }
        } else if (auto* p = std::get_if<Picture>(&item)) {
            for (int y = 0; y < p->image.height; ++y) {
                for (int x = 0; x < p->image.width; ++x) {
                    cv.put(static_cast<int>(p->x) + x, static_cast<int>(p->y) + y,
                           {p->image.at(x, y, 0), p->image.at(x, y, 1), p->image.at(x, y, 2)});
                }
            }
        }
    }
    return cv.img;
}

void save(const Figure& f, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (path.extension() == ".svg") {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        out << render_svg(f);
        return;
    }
    write_png(path.string(), render_raster(f), 8);
}

std::string fmt(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Plot area with linear axes; maps data to figure pixels.
struct Axes {
    double left = 70, top = 40, right = 20, bottom = 60;
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    int width = 0, height = 0;

    double px(double x) const { return left + (x - x_min) / (x_max - x_min) * (width - left - right); }
    double py(double y) const { return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom); }

    void draw(Figure& f, const std::string& title, const std::string& xlabel, const std::string& ylabel,
              int xticks, int yticks, bool x_numbers = true) const {
        f.line(px(x_min), py(y_min), px(x_max), py(y_min), kBlack, 1);
        f.line(px(x_min), py(y_min), px(x_min), py(y_max), kBlack, 1);
        for (int i = 0; i <= xticks && x_numbers; ++i) {
            const double x = x_min + (x_max - x_min) * i / xticks;
            f.line(px(x), py(y_min), px(x), py(y_min) + 5, kBlack, 1);
            f.text(px(x), py(y_min) + 20, fmt(x, 2), Anchor::middle, 1);
        }
        for (int i = 0; i <= yticks; ++i) {
            const double y = y_min + (y_max - y_min) * i / yticks;
            f.line(px(x_min) - 5, py(y), px(x_min), py(y), kBlack, 1);
            f.text(px(x_min) - 8, py(y) + 4, fmt(y, 2), Anchor::end, 1);
        }
        f.text(0.5 * width, 25, title, Anchor::middle, 2);
        f.text(0.5 * (px(x_min) + px(x_max)), height - 15, xlabel, Anchor::middle, 2);
        f.text(8, top - 10, ylabel, Anchor::start, 1);
    }
};

}  // namespace

void plot_sfr(const fs::path& path, std::span<const LabeledCurve> curves) {
    Figure f{720, 480, {}};
    Axes ax;
    ax.width = f.width;
    ax.height = f.height;
    ax.x_max = 0.5;
    for (const auto& c : curves) {
        if (!c.curve.frequencies.empty()) ax.x_max = std::max(ax.x_max, std::min(1.0, c.curve.frequencies.back()));
    }
    ax.y_max = 1.05;
    ax.draw(f, "SFR", "FREQUENCY (CY/PX)", "RESPONSE", 10, 7);
    f.line(ax.px(0), ax.py(0.5), ax.px(ax.x_max), ax.py(0.5), kGrey, 1, true);
    if (curves.empty()) f.text(ax.px(0.5 * ax.x_max), ax.py(0.6), "NO CURVES", Anchor::middle, 2, kPalette[0]);

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const Color col = kPalette[i % kPalette.size()];
        const SFRCurve& c = curves[i].curve;
        for (std::size_t k = 1; k < c.frequencies.size() && c.frequencies[k] <= ax.x_max; ++k) {
            f.line(ax.px(c.frequencies[k - 1]), ax.py(std::clamp(c.response[k - 1], 0.0, ax.y_max)),
                   ax.px(c.frequencies[k]), ax.py(std::clamp(c.response[k], 0.0, ax.y_max)), col, 2);
        }
        std::string label = curves[i].label;
        try {
            const double m = mtf50(c);
            f.dot(ax.px(m), ax.py(0.5), 4, col);
            label += " MTF50 " + fmt(m, 3);
        } catch (const Error&) {
            label += " MTF50 N/A";
        }
        const double ly = ax.top + 20 + 18 * static_cast<double>(i);
        f.line(f.width - 260, ly - 4, f.width - 240, ly - 4, col, 2);
        f.text(f.width - 232, ly, label, Anchor::start, 1);
    }
    save(f, path);
}

void plot_region_bars(const fs::path& path, const MTFReport& report) {
    Figure f{640, 420, {}};
    Axes ax;
    ax.width = f.width;
    ax.height = f.height;
    double ymax = 0.0;
    for (const ZoneSummary& z : report.zones) ymax = std::max({ymax, z.mean_before, z.mean_after});
    ax.y_max = ymax > 0 ? std::ceil(ymax * 1.15 * 20.0) / 20.0 : 0.5;
    ax.x_max = 3.0;
    ax.draw(f, "MEAN MTF50 BY REGION", "REGION", "MTF50 (CY/PX)", 3, 5, false);

    const bool empty = std::none_of(report.zones.begin(), report.zones.end(), [](const ZoneSummary& z) { return z.count > 0; });
    if (empty) {
        f.text(0.5 * f.width, 0.5 * f.height, "WARNING: NO VALID MEASUREMENTS", Anchor::middle, 2, kPalette[0]);
    }
    for (std::size_t i = 0; i < report.zones.size(); ++i) {
        const ZoneSummary& z = report.zones[i];
        const double x = static_cast<double>(i);
        f.text(ax.px(x + 0.5), ax.py(0) + 20, to_string(z.zone), Anchor::middle, 2);
        if (z.count == 0) continue;
        const double bw = (ax.px(1) - ax.px(0)) * 0.3;
        const double xb = ax.px(x + 0.5) - bw, xa = ax.px(x + 0.5);
        f.rect(xb, ax.py(z.mean_before), bw, ax.py(0) - ax.py(z.mean_before), kPalette[2]);
        f.rect(xa, ax.py(z.mean_after), bw, ax.py(0) - ax.py(z.mean_after), kPalette[0]);
        f.text(ax.px(x + 0.5), ax.py(std::max(z.mean_before, z.mean_after)) - 8, fmt(z.delta(), 3), Anchor::middle, 1);
    }
    f.rect(f.width - 170, 45, 12, 12, kPalette[2]);
    f.text(f.width - 152, 56, "BEFORE", Anchor::start, 1);
    f.rect(f.width - 170, 63, 12, 12, kPalette[0]);
    f.text(f.width - 152, 74, "AFTER", Anchor::start, 1);
    save(f, path);
}

void plot_psf_panel(const fs::path& path, std::span<const PSF> psfs, double gamma) {
    const int pad = 20;
    // Common crop around the reference pixel holding everything above 1e-4 of each peak.
    int half = 8;
    for (const PSF& p : psfs) {
        const double peak = p.intensity.empty() ? 0.0 : *std::max_element(p.intensity.begin(), p.intensity.end());
        for (int r = 0; r < p.size; ++r) {
            for (int c = 0; c < p.size; ++c) {
                if (p.at(r, c) > 1e-4 * peak) half = std::max({half, std::abs(r - p.size / 2) + 1, std::abs(c - p.size / 2) + 1});
            }
        }
    }
    int crop = 1;
    for (const PSF& p : psfs) crop = std::max(crop, std::min(p.size, 2 * half));
    const int scale = std::max(1, 256 / crop);
    const int side = crop * scale;
    Figure f{static_cast<int>(psfs.size()) * (side + pad) + pad, side + 2 * pad + 30, {}};
    if (psfs.empty()) {
        f.width = 300;
        f.text(150, f.height / 2.0, "NO PSF", Anchor::middle, 2, kPalette[0]);
    }
    for (std::size_t i = 0; i < psfs.size(); ++i) {
        const PSF& p = psfs[i];
        const double peak = p.intensity.empty() ? 0.0 : *std::max_element(p.intensity.begin(), p.intensity.end());
        const int off = p.size / 2 - crop / 2;
        RasterImage tile(side, side);
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                const int r = off + y / scale, c = off + x / scale;
                const double raw = (r >= 0 && c >= 0 && r < p.size && c < p.size && peak > 0) ? p.at(r, c) / peak : 0.0;
                for (int ch = 0; ch < 3; ++ch) tile.at(x, y, ch) = static_cast<float>(std::pow(std::max(0.0, raw), gamma));
            }
        }
        const double x0 = pad + static_cast<double>(i) * (side + pad);
        f.items.emplace_back(Picture{x0, static_cast<double>(pad), std::move(tile)});
        f.text(x0 + 0.5 * side, side + pad + 22.0, fmt(p.wavelength_nm, 0) + " NM", Anchor::middle, 2);
    }
    save(f, path);
}

MTFReport load_report(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report '" + path.string() + "'");
    MTFReport r;
    try {
        const auto j = nlohmann::json::parse(in);
        for (Zone z : {Zone::center, Zone::middle, Zone::edge}) {
            ZoneSummary s;
            s.zone = z;
            for (const auto& e : j.at("regions")) {
                if (e.at("region") != to_string(z)) continue;
                s.count = e.at("count").get<int>();
                s.mean_before = e.at("mean_mtf50_before").get<double>();
                s.mean_after = e.at("mean_mtf50_after").get<double>();
            }
            r.zones.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed report '" + path.string() + "': " + e.what());
    }
    return r;
}

}  // namespace lensdeg
