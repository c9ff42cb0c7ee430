#include "lensdeg/prescription.hpp"

#include "lensdeg/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lensdeg {

std::string_view to_string(SurfaceKind kind) {
    switch (kind) {
        case SurfaceKind::object: return "object";
        case SurfaceKind::refracting: return "refracting";
        case SurfaceKind::stop: return "stop";
        case SurfaceKind::image: return "image";
    }
    return "unknown";
}

std::vector<double> axial_positions(std::span<const Surface> surfaces) {
    std::vector<double> z(surfaces.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        z[i] = acc;
        acc += surfaces[i].thickness_mm;
    }
    return z;
}

LensPrescription::LensPrescription(std::vector<Surface> surfaces, std::vector<double> wavelengths_nm,
                                   std::vector<double> field_angles_deg,
                                   double reference_wavelength_nm)
    : surfaces_(std::move(surfaces)),
      wavelengths_nm_(std::move(wavelengths_nm)),
      field_angles_deg_(std::move(field_angles_deg)),
      reference_wavelength_nm_(reference_wavelength_nm) {
    if (surfaces_.size() < 2) {
        throw ValidationError("a prescription needs at least an object and an image surface");
    }
    if (surfaces_.front().kind != SurfaceKind::object) {
        throw ValidationError("first surface must be the object plane");
    }
    if (surfaces_.back().kind != SurfaceKind::image) {
        throw ValidationError("last surface must be the image plane");
    }
    const auto stops = std::ranges::count(surfaces_, SurfaceKind::stop, &Surface::kind);
    if (stops != 1) {
        throw ValidationError("exactly one stop surface required, found " + std::to_string(stops));
    }
    for (std::size_t i = 0; i < surfaces_.size(); ++i) {
        const auto& s = surfaces_[i];
        const bool last = i + 1 == surfaces_.size();
        if (s.index != static_cast<int>(i)) {
            throw ValidationError("surface " + std::to_string(i) + " carries index " +
                                  std::to_string(s.index));
        }
        if (i > 0 && !last && s.kind == SurfaceKind::object) {
            throw ValidationError("object surface must be first");
        }
        if (!last && s.kind == SurfaceKind::image) throw ValidationError("image surface must be last");
        if (!(s.thickness_mm >= 0.0) || !std::isfinite(s.thickness_mm)) {
            throw ValidationError("surface " + std::to_string(i) + ": thickness must be >= 0");
        }
        if (last && s.thickness_mm != 0.0) {
            throw ValidationError("image surface thickness must be 0");
        }
        if (!last && s.thickness_mm == 0.0) {
            throw ValidationError("surface " + std::to_string(i) +
                                  ": axial positions must be strictly increasing");
        }
        if (!(s.semi_diameter_mm > 0.0) || !std::isfinite(s.semi_diameter_mm)) {
            throw ValidationError("surface " + std::to_string(i) + ": semi-diameter must be > 0");
        }
        if (!std::isfinite(s.radius_mm)) {
            throw ValidationError("surface " + std::to_string(i) + ": radius must be finite");
        }
        validate_material(s.material_after);
    }
    for (double wl : wavelengths_nm_) {
        if (!(wl >= kMinWavelengthNm && wl <= kMaxWavelengthNm)) {
            throw ValidationError("wavelength " + std::to_string(wl) + " nm outside [300, 1100]");
        }
    }
    if (!(reference_wavelength_nm_ >= kMinWavelengthNm &&
          reference_wavelength_nm_ <= kMaxWavelengthNm)) {
        throw ValidationError("reference wavelength outside [300, 1100] nm");
    }
    vertex_z_ = axial_positions(surfaces_);
    stop_index_ = static_cast<std::size_t>(
        std::ranges::find(surfaces_, SurfaceKind::stop, &Surface::kind) - surfaces_.begin());
}

double LensPrescription::index_after(std::size_t i, double wavelength_nm) const {
    return refractive_index(surfaces_.at(i).material_after, wavelength_nm);
}

LensPrescription LensPrescription::with_image_shift(double delta_mm) const {
    auto s = surfaces_;
    s[s.size() - 2].thickness_mm += delta_mm;
    return {std::move(s), wavelengths_nm_, field_angles_deg_, reference_wavelength_nm_};
}

LensPrescription LensPrescription::with_semi_diameter(std::size_t i, double semi_diameter_mm) const {
    auto s = surfaces_;
    s.at(i).semi_diameter_mm = semi_diameter_mm;
    return {std::move(s), wavelengths_nm_, field_angles_deg_, reference_wavelength_nm_};
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::ranges::transform(out, out.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return out;
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> tokens;
    std::istringstream in{std::string(line)};
    for (std::string t; in >> t;) tokens.push_back(std::move(t));
    return tokens;
}

double to_double(const std::string& token, int line) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (!token.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw ParseError(line, "expected a number, got '" + token + "'");
    }
    return v;
}

int to_int(const std::string& token, int line) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw ParseError(line, "expected an integer surface index, got '" + token + "'");
    }
    return v;
}

bool names_stop(std::string_view name) {
    const auto n = lower(name);
    return n == "sto" || n.find("stop") != std::string::npos;
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct RawRow {
    int line;
    int index;
    std::string name;
    std::string material;
    double thickness;
    double diameter;
    double radius;
};

}  // namespace

LensPrescription parse_prescription(std::string_view text) {
    GlassCatalog catalog;
    std::vector<double> wavelengths;
    std::vector<double> fields;
    double reference = LensPrescription::kDefaultReferenceWavelengthNm;
    std::vector<RawRow> rows;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto tokens = split_ws(line);
        if (tokens.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto key = lower(tokens[0]);
        if (key == "wavelengths" || key == "fields") {
            if (tokens.size() < 2) throw ParseError(line_no, key + " needs at least one value");
            auto& dst = key == "wavelengths" ? wavelengths : fields;
            for (std::size_t i = 1; i < tokens.size(); ++i) dst.push_back(to_double(tokens[i], line_no));
        } else if (key == "reference") {
            if (tokens.size() != 2) throw ParseError(line_no, "reference takes one wavelength");
            reference = to_double(tokens[1], line_no);
        } else if (key == "glass") {
            if (tokens.size() < 3) throw ParseError(line_no, "glass needs a name and a model");
            const auto model = lower(tokens[2]);
            Material m{tokens[1], ConstantIndex{}};
            if (model == "constant") {
                if (tokens.size() != 4) throw ParseError(line_no, "constant glass takes one index");
                m.model = ConstantIndex{to_double(tokens[3], line_no)};
            } else if (model == "sellmeier") {
                if (tokens.size() != 9) {
                    throw ParseError(line_no, "sellmeier glass takes B1 B2 B3 C1 C2 C3");
                }
                Sellmeier s;
                for (int i = 0; i < 3; ++i) {
                    s.b[i] = to_double(tokens[3 + i], line_no);
                    s.c_um2[i] = to_double(tokens[6 + i], line_no);
                }
                m.model = s;
            } else {
                throw ParseError(line_no, "unknown glass model '" + tokens[2] + "'");
            }
            try {
                catalog.add(std::move(m));
            } catch (const ValidationError& e) {
                throw ParseError(line_no, e.what());
            }
        } else if (std::isdigit(static_cast<unsigned char>(tokens[0][0])) || tokens[0][0] == '-') {
            if (tokens.size() != 6) {
                throw ParseError(line_no,
                                 "surface row needs 6 columns: index name material thickness "
                                 "diameter radius");
            }
            rows.push_back({line_no, to_int(tokens[0], line_no), tokens[1], tokens[2],
                            to_double(tokens[3], line_no), to_double(tokens[4], line_no),
                            to_double(tokens[5], line_no)});
        } else {
            throw ParseError(line_no, "unknown directive '" + tokens[0] + "'");
        }
        if (end == text.size()) break;
    }

    if (rows.empty()) throw ParseError(line_no, "no surface rows");

    std::vector<Surface> surfaces;
    surfaces.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        auto material = catalog.find(r.material);
        if (!material) throw ParseError(r.line, "material '" + r.material + "' is not resolvable");
        Surface s;
        s.index = r.index;
        s.name = r.name;
        s.material_after = *material;
        s.thickness_mm = r.thickness;
        s.semi_diameter_mm = r.diameter / 2.0;
        s.radius_mm = r.radius;
        if (i == 0) {
            s.kind = SurfaceKind::object;
        } else if (i + 1 == rows.size()) {
            s.kind = SurfaceKind::image;
        } else if (names_stop(r.name)) {
            s.kind = SurfaceKind::stop;
        }
        surfaces.push_back(std::move(s));
    }
    return LensPrescription(std::move(surfaces), std::move(wavelengths), std::move(fields), reference);
}

std::string serialize_prescription(const LensPrescription& p) {
    const GlassCatalog builtin;
    std::ostringstream out;
    if (!p.wavelengths_nm().empty()) {
        out << "wavelengths";
        for (double w : p.wavelengths_nm()) out << ' ' << fmt(w);
        out << '\n';
    }
    if (!p.field_angles_deg().empty()) {
        out << "fields";
        for (double f : p.field_angles_deg()) out << ' ' << fmt(f);
        out << '\n';
    }
    out << "reference " << fmt(p.reference_wavelength_nm()) << '\n';

    std::vector<std::string> written;
    for (const auto& s : p.surfaces()) {
        const auto& m = s.material_after;
        if (builtin.find(m.name) == m || std::ranges::find(written, m.name) != written.end()) continue;
        written.push_back(m.name);
        out << "glass " << m.name;
        if (const auto* c = std::get_if<ConstantIndex>(&m.model)) {
            out << " constant " << fmt(c->n);
        } else {
            const auto& sm = std::get<Sellmeier>(m.model);
            out << " sellmeier";
            for (double b : sm.b) out << ' ' << fmt(b);
            for (double c : sm.c_um2) out << ' ' << fmt(c);
        }
        out << '\n';
    }
    for (const auto& s : p.surfaces()) {
        out << s.index << ' ' << s.name << ' ' << s.material_after.name << ' ' << fmt(s.thickness_mm)
            << ' ' << fmt(2.0 * s.semi_diameter_mm) << ' ' << fmt(s.radius_mm) << '\n';
    }
    return out.str();
}

LensPrescription load_prescription(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open prescription file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_prescription(buf.str());
}

}  // namespace lensdeg
