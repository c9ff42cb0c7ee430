#include "lensdeg/metrology.hpp"

#include "lensdeg/error.hpp"
#include "lensdeg/parallel.hpp"
#include "lensdeg/vec3.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

using nlohmann::json;

namespace lensdeg {

// ---- PSF agreement ----

Normalization parse_normalization(const std::string& s) {
    if (s == "peak") return Normalization::peak;
    if (s == "sum") return Normalization::sum;
    throw ValidationError("unknown normalization '" + s + "' (peak or sum)");
}

double rmse(std::span<const double> a, std::span<const double> b, Normalization norm) {
    if (a.size() != b.size()) throw ValidationError("rmse: arrays differ in size");
    if (a.empty()) throw ValidationError("rmse: empty arrays");
    auto scale = [norm](std::span<const double> v) {
        const double s = norm == Normalization::peak ? *std::max_element(v.begin(), v.end())
                                                     : std::accumulate(v.begin(), v.end(), 0.0);
        return s != 0.0 ? 1.0 / s : 0.0;
    };
    const double sa = scale(a), sb = scale(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] * sa - b[i] * sb;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

double rmse(const PSF& a, const PSF& b, Normalization norm) {
    if (a.size != b.size) {
        throw ValidationError("rmse: PSF sizes differ (" + std::to_string(a.size) + " vs " + std::to_string(b.size) + ")");
    }
    return rmse(std::span<const double>(a.intensity), std::span<const double>(b.intensity), norm);
}

// ---- slanted edge ----

namespace {

double hamming(double offset, double half_width) {
    if (half_width <= 0.0) return 1.0;
    const double t = std::clamp(offset / half_width, -1.0, 1.0);
    return 0.54 + 0.46 * std::cos(kPi * t);
}

/// Centroid of the windowed central-difference derivative of one line.
double line_centroid(std::span<const double> line, double centre) {
    const int n = static_cast<int>(line.size());
    double num = 0.0, den = 0.0;
    for (int x = 1; x + 1 < n; ++x) {
        const double d = 0.5 * (line[x + 1] - line[x - 1]);
        const double w = hamming(x - centre, 0.5 * n);
        num += x * d * w;
        den += d * w;
    }
    if (den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return num / den;
}

struct LineFit {
    double a = 0.0;  // location at line 0
    double b = 0.0;  // px per line
};

LineFit fit_line(const std::vector<double>& loc) {
    double sl = 0, sx = 0, sll = 0, slx = 0;
    int n = 0;
    for (std::size_t l = 0; l < loc.size(); ++l) {
        if (!std::isfinite(loc[l])) continue;
        sl += l;
        sx += loc[l];
        sll += static_cast<double>(l) * l;
        slx += l * loc[l];
        ++n;
    }
    if (n < 3) throw NumericError("no edge found: too few lines with an edge response");
    const double den = n * sll - sl * sl;
    LineFit f;
    f.b = (n * slx - sl * sx) / den;
    f.a = (sx - f.b * sl) / n;
    return f;
}

}  // namespace

SFRCurve esfr(std::span<const float> plane, int width, int height, const EdgeROI& roi, const EsfrOptions& options) {
    if (roi.width < 8 || roi.height < 8) throw ValidationError("ROI must be at least 8x8 px");
    if (roi.x < 0 || roi.y < 0 || roi.x + roi.width > width || roi.y + roi.height > height) {
        throw ValidationError("ROI lies outside the image");
    }
    if (options.oversample < 1) throw ValidationError("oversample must be >= 1");

    // Gradient energy decides whether lines run along rows (near-vertical edge) or columns.
    auto px = [&](int x, int y) -> double {
        return plane[static_cast<std::size_t>(roi.y + y) * width + (roi.x + x)];
    };
    double gx = 0.0, gy = 0.0;
    for (int y = 0; y + 1 < roi.height; ++y) {
        for (int x = 0; x + 1 < roi.width; ++x) {
            gx += std::abs(px(x + 1, y) - px(x, y));
            gy += std::abs(px(x, y + 1) - px(x, y));
        }
    }
    SFRCurve curve;
    curve.vertical_edge = gx >= gy;
    const int lines = curve.vertical_edge ? roi.height : roi.width;
    const int len = curve.vertical_edge ? roi.width : roi.height;
    std::vector<double> data(static_cast<std::size_t>(lines) * len);
    for (int l = 0; l < lines; ++l) {
        for (int i = 0; i < len; ++i) data[static_cast<std::size_t>(l) * len + i] = curve.vertical_edge ? px(i, l) : px(l, i);
    }

    // Orient every edge as rising and check its amplitude.
    const int tail = std::max(2, len / 10);
    double lo = 0.0, hi = 0.0;
    for (int l = 0; l < lines; ++l) {
        for (int i = 0; i < tail; ++i) {
            lo += data[static_cast<std::size_t>(l) * len + i];
            hi += data[static_cast<std::size_t>(l) * len + len - 1 - i];
        }
    }
    lo /= lines * tail;
    hi /= lines * tail;
    const double amplitude = std::abs(hi - lo);
    const double vmax = *std::max_element(data.begin(), data.end());
    const double vmin = *std::min_element(data.begin(), data.end());
    if (vmax - vmin <= 1e-9 || amplitude <= 1e-9) throw NumericError("no edge found in ROI");
    if (amplitude < options.min_contrast) {
        throw NumericError("insufficient edge contrast (" + std::to_string(amplitude) + " < " +
                           std::to_string(options.min_contrast) + ")");
    }
    if (hi < lo) {
        for (double& v : data) v = -v;
    }

    // Edge location per line, refined once with windows centered on the first fit.
    std::vector<double> loc(lines);
    for (int l = 0; l < lines; ++l) loc[l] = line_centroid({&data[static_cast<std::size_t>(l) * len], static_cast<std::size_t>(len)}, 0.5 * (len - 1));
    LineFit fit = fit_line(loc);
    for (int l = 0; l < lines; ++l) {
        loc[l] = line_centroid({&data[static_cast<std::size_t>(l) * len], static_cast<std::size_t>(len)}, fit.a + fit.b * l);
    }
    fit = fit_line(loc);
    curve.edge_angle_deg = rad_to_deg(std::atan(std::abs(fit.b)));
    if (curve.edge_angle_deg < options.min_angle_deg - 1e-9 || curve.edge_angle_deg > options.max_angle_deg + 1e-9) {
        throw NumericError("edge angle " + std::to_string(curve.edge_angle_deg) + " deg outside [" +
                           std::to_string(options.min_angle_deg) + ", " + std::to_string(options.max_angle_deg) + "]");
    }

    // Supersampled ESF along the edge normal.
    const double cos_t = 1.0 / std::sqrt(1.0 + fit.b * fit.b);
    const int os = options.oversample;
    const int half = static_cast<int>(std::ceil((len + std::abs(fit.b) * lines) * os)) + 2;
    const int nbins = 2 * half + 1;
    std::vector<double> sum(nbins, 0.0);
    std::vector<int> count(nbins, 0);
    for (int l = 0; l < lines; ++l) {
        const double edge = fit.a + fit.b * l;
        for (int i = 0; i < len; ++i) {
            const double d = (i - edge) * cos_t;
            const int k = static_cast<int>(std::lround(d * os)) + half;
            sum[k] += data[static_cast<std::size_t>(l) * len + i];
            ++count[k];
        }
    }
    int first = 0, last = nbins - 1;
    while (first < nbins && count[first] == 0) ++first;
    while (last > first && count[last] == 0) --last;
    const int n = last - first + 1;
    if (n < 8) throw NumericError("no edge found: ESF record too short");
    std::vector<double> esf(n);
    std::vector<bool> filled(n);
    for (int i = 0; i < n; ++i) {
        filled[i] = count[first + i] > 0;
        esf[i] = filled[i] ? sum[first + i] / count[first + i] : 0.0;
    }
    for (int i = 0; i < n; ++i) {
        if (filled[i]) continue;
        int a = i - 1, b = i + 1;
        while (b < n && !filled[b]) ++b;
        // a >= 0 and b < n hold because the record starts and ends on filled bins.
        const double t = static_cast<double>(i - a) / (b - a);
        esf[i] = esf[a] + t * (esf[b] - esf[a]);
    }

    std::vector<double> lsf(n, 0.0);
    for (int i = 1; i + 1 < n; ++i) lsf[i] = 0.5 * (esf[i + 1] - esf[i - 1]);
    lsf[0] = lsf[1];
    lsf[n - 1] = lsf[n - 2];
    const int peak = static_cast<int>(std::max_element(lsf.begin(), lsf.end()) - lsf.begin());
    const double hw = std::max(peak, n - 1 - peak);
    for (int i = 0; i < n; ++i) lsf[i] *= hamming(i - peak, hw);

    const double step = 1.0 / 512.0;
    const int nf = static_cast<int>(std::floor(options.max_frequency / step + 1e-9)) + 1;
    curve.frequencies.resize(nf);
    curve.response.resize(nf);
    const double delta = 1.0 / os;
    double dc = 0.0;
    for (double v : lsf) dc += v;
    if (!(dc > 0.0)) throw NumericError("no edge found: LSF has no energy");
    for (int k = 0; k < nf; ++k) {
        const double f = k * step;
        std::complex<double> acc = 0.0;
        const double w = -2.0 * kPi * f * delta;
        for (int i = 0; i < n; ++i) acc += lsf[i] * std::polar(1.0, w * (i - peak));
        double r = std::abs(acc) / dc;
        if (k > 0) {
            const double arg = 2.0 * kPi * f * delta;
            r /= std::max(std::sin(arg) / arg, 0.1);
        }
        curve.frequencies[k] = f;
        curve.response[k] = k == 0 ? 1.0 : r;
    }
    return curve;
}

double mtf50(const SFRCurve& curve) {
    const auto& f = curve.frequencies;
    const auto& r = curve.response;
    if (f.size() != r.size() || f.empty()) throw ValidationError("malformed SFR curve");
    for (std::size_t i = 1; i < r.size(); ++i) {
        if (r[i] < 0.5 && r[i - 1] >= 0.5) {
            const double t = (r[i - 1] - 0.5) / (r[i - 1] - r[i]);
            return f[i - 1] + t * (f[i] - f[i - 1]);
        }
    }
    throw NumericError("SFR does not fall to 0.5 below " + std::to_string(f.back()) + " cy/px");
}

// ---- radial annuli ----

std::string to_string(Zone z) {
    switch (z) {
        case Zone::center: return "center";
        case Zone::middle: return "middle";
        case Zone::edge: return "edge";
    }
    return "?";
}

AnnulusPartition AnnulusPartition::for_image(int width, int height, double f1, double f2) {
    const double r = 0.5 * std::hypot(width, height);
    AnnulusPartition p{0.5 * width, 0.5 * height, f1 * r, f2 * r};
    p.validate();
    return p;
}

void AnnulusPartition::validate() const {
    if (!(r1 > 0.0 && r1 < r2)) throw ValidationError("annulus radii must satisfy 0 < r1 < r2");
}

Zone AnnulusPartition::classify(double x, double y) const {
    const double d = std::hypot(x - center_x, y - center_y);
    if (d <= r1) return Zone::center;
    if (d <= r2) return Zone::middle;
    return Zone::edge;
}

std::vector<LabeledROI> partition_rois(std::span<const EdgeROI> rois, const AnnulusPartition& part) {
    part.validate();
    std::vector<LabeledROI> out;
    out.reserve(rois.size());
    for (const EdgeROI& r : rois) out.push_back({r, part.classify(r.centroid_x(), r.centroid_y())});
    return out;
}

// ---- before/after report ----

MTFReport region_report(const RasterImage& before, const RasterImage& after, std::span<const EdgeROI> rois,
                        const AnnulusPartition& part, const EsfrOptions& options) {
    if (before.width != after.width || before.height != after.height) {
        throw ValidationError("before/after images differ in size");
    }
    const auto labeled = partition_rois(rois, part);
    const auto yb = before.luminance(), ya = after.luminance();

    MTFReport report;
    report.partition = part;
    report.rois.resize(labeled.size());
    parallel_for(labeled.size(), [&](std::size_t i) {
        RoiMeasurement& m = report.rois[i];
        m.roi = labeled[i].roi;
        m.zone = labeled[i].zone;
        auto measure = [&](const std::vector<float>& plane, std::optional<double>& slot, const char* which) {
            try {
                slot = mtf50(esfr(plane, before.width, before.height, m.roi, options));
                if (*slot > 0.5) m.beyond_nyquist = true;
            } catch (const Error& e) {
                if (m.error.empty()) m.error = std::string(which) + ": " + e.what();
            }
        };
        measure(yb, m.mtf50_before, "before");
        measure(ya, m.mtf50_after, "after");
    });

    for (Zone z : {Zone::center, Zone::middle, Zone::edge}) {
        ZoneSummary s;
        s.zone = z;
        for (const RoiMeasurement& m : report.rois) {
            if (m.zone != z || !m.mtf50_before || !m.mtf50_after) continue;
            s.mean_before += *m.mtf50_before;
            s.mean_after += *m.mtf50_after;
            ++s.count;
        }
        if (s.count > 0) {
            s.mean_before /= s.count;
            s.mean_after /= s.count;
        }
        report.zones.push_back(s);
    }
    return report;
}

std::string MTFReport::to_json() const {
    json j;
    j["annuli"] = {{"center_x", partition.center_x},
                   {"center_y", partition.center_y},
                   {"r1", partition.r1},
                   {"r2", partition.r2}};
    json rj = json::array();
    for (std::size_t i = 0; i < rois.size(); ++i) {
        const RoiMeasurement& m = rois[i];
        json e = {{"index", i},
                  {"x", m.roi.x},
                  {"y", m.roi.y},
                  {"w", m.roi.width},
                  {"h", m.roi.height},
                  {"region", to_string(m.zone)}};
        e["mtf50_before"] = m.mtf50_before ? json(*m.mtf50_before) : json(nullptr);
        e["mtf50_after"] = m.mtf50_after ? json(*m.mtf50_after) : json(nullptr);
        e["delta"] = (m.mtf50_before && m.mtf50_after) ? json(*m.mtf50_after - *m.mtf50_before) : json(nullptr);
        if (m.beyond_nyquist) e["beyond_nyquist"] = true;
        if (!m.error.empty()) e["error"] = m.error;
        rj.push_back(e);
    }
    j["rois"] = rj;
    json zj = json::array();
    for (const ZoneSummary& s : zones) {
        zj.push_back({{"region", to_string(s.zone)},
                      {"count", s.count},
                      {"mean_mtf50_before", s.mean_before},
                      {"mean_mtf50_after", s.mean_after},
                      {"delta", s.delta()}});
    }
    j["regions"] = zj;
    return j.dump(2) + "\n";
}

std::string MTFReport::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "index,x,y,w,h,region,mtf50_before,mtf50_after,delta,error\n";
    for (std::size_t i = 0; i < rois.size(); ++i) {
        const RoiMeasurement& m = rois[i];
        os << i << ',' << m.roi.x << ',' << m.roi.y << ',' << m.roi.width << ',' << m.roi.height << ','
           << to_string(m.zone) << ',';
        if (m.mtf50_before) os << *m.mtf50_before;
        os << ',';
        if (m.mtf50_after) os << *m.mtf50_after;
        os << ',';
        if (m.mtf50_before && m.mtf50_after) os << *m.mtf50_after - *m.mtf50_before;
        std::string err = m.error;
        std::replace(err.begin(), err.end(), ',', ';');
        os << ',' << err << '\n';
    }
    return os.str();
}

std::vector<EdgeROI> load_rois(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ROI file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("ROI file '" + path + "' is not valid JSON: " + e.what());
    }
    if (j.is_object() && j.contains("rois")) j = j["rois"];
    if (!j.is_array()) throw ValidationError("ROI file must hold a JSON list of {x, y, w, h}");
    std::vector<EdgeROI> rois;
    for (const json& e : j) {
        try {
            EdgeROI r{e.at("x").get<int>(), e.at("y").get<int>(), e.at("w").get<int>(), e.at("h").get<int>()};
            if (e.contains("polarity")) r.polarity = e["polarity"] == "falling" ? Polarity::falling : Polarity::rising;
            rois.push_back(r);
        } catch (const json::exception&) {
            throw ValidationError("ROI entry " + std::to_string(rois.size()) + " needs integer x, y, w, h");
        }
    }
    return rois;
}

std::string rois_to_json(std::span<const EdgeROI> rois) {
    json j = json::array();
    for (const EdgeROI& r : rois) {
        j.push_back({{"x", r.x},
                     {"y", r.y},
                     {"w", r.width},
                     {"h", r.height},
                     {"polarity", r.polarity == Polarity::rising ? "rising" : "falling"}});
    }
    return j.dump(2) + "\n";
}

// ---- synthetic chart ----

TestChart make_test_chart(int width, int height, std::span<const ChartEdge> edges, const ChartOptions& o) {
    if (width <= 0 || height <= 0) throw ValidationError("chart dimensions must be positive");
    if (o.roi_px > o.patch_px || o.roi_px < 8) throw ValidationError("ROI must fit inside the patch and be >= 8 px");
    const double half = 0.5 * o.patch_px;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const ChartEdge& e = edges[i];
        if (e.center_x - half < 0 || e.center_y - half < 0 || e.center_x + half > width || e.center_y + half > height) {
            throw ValidationError("edge patch " + std::to_string(i) + " extends outside the chart");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (std::abs(e.center_x - edges[j].center_x) < o.patch_px &&
                std::abs(e.center_y - edges[j].center_y) < o.patch_px) {
                throw ValidationError("edge patches " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
            }
        }
    }

    TestChart chart;
    chart.image = RasterImage(width, height, o.background);
    constexpr int kSuper = 8;
    for (const ChartEdge& e : edges) {
        const double a = deg_to_rad(e.angle_deg);
        const double nx = -std::sin(a), ny = std::cos(a);
        const float lo = e.polarity == Polarity::rising ? o.dark : o.light;
        const float hi = e.polarity == Polarity::rising ? o.light : o.dark;
        const int x0 = static_cast<int>(std::ceil(e.center_x - half - 0.5));
        const int y0 = static_cast<int>(std::ceil(e.center_y - half - 0.5));
        for (int y = y0; y < y0 + o.patch_px; ++y) {
            for (int x = x0; x < x0 + o.patch_px; ++x) {
                double frac;
                if (o.blur_sigma_px > 0.0) {
                    const double d = (x + 0.5 - e.center_x) * nx + (y + 0.5 - e.center_y) * ny;
                    frac = 0.5 * std::erfc(-d / (o.blur_sigma_px * std::sqrt(2.0)));
                } else {
                    int inside = 0;
                    for (int sy = 0; sy < kSuper; ++sy) {
                        for (int sx = 0; sx < kSuper; ++sx) {
                            const double d = (x + (sx + 0.5) / kSuper - e.center_x) * nx +
                                             (y + (sy + 0.5) / kSuper - e.center_y) * ny;
                            inside += d > 0.0;
                        }
                    }
                    frac = static_cast<double>(inside) / (kSuper * kSuper);
                }
                const float v = static_cast<float>(lo + (hi - lo) * frac);
                for (int ch = 0; ch < 3; ++ch) chart.image.at(x, y, ch) = v;
            }
        }
        EdgeROI roi;
        roi.x = static_cast<int>(std::lround(e.center_x - 0.5 * o.roi_px));
        roi.y = static_cast<int>(std::lround(e.center_y - 0.5 * o.roi_px));
        roi.width = roi.height = o.roi_px;
        roi.polarity = e.polarity;
        chart.rois.push_back(roi);
    }
    return chart;
}

std::vector<ChartEdge> standard_chart_layout(int width, int height) {
    std::vector<ChartEdge> edges;
    int k = 0;
    for (int j : {1, 3, 5}) {
        for (int i : {1, 3, 5, 7, 9}) {
            ChartEdge e;
            e.center_x = width * i / 10.0;
            e.center_y = height * j / 6.0;
            e.angle_deg = k % 2 == 0 ? 5.0 : 95.0;
            e.polarity = (k / 2) % 2 == 0 ? Polarity::rising : Polarity::falling;
            edges.push_back(e);
            ++k;
        }
    }
    return edges;
}

}  // namespace lensdeg
