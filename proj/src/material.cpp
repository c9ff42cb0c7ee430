#include "lensdeg/material.hpp"

#include "lensdeg/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace lensdeg {

namespace {

std::string upper(std::string s) {
    std::ranges::transform(s, s.begin(), [](unsigned char ch) { return std::toupper(ch); });
    return s;
}

}  // namespace

double refractive_index(const Material& m, double wavelength_nm) {
    if (!(wavelength_nm >= kMinWavelengthNm && wavelength_nm <= kMaxWavelengthNm)) {
        throw ValidationError("wavelength " + std::to_string(wavelength_nm) +
                              " nm outside supported band [300, 1100] nm");
    }
    if (const auto* constant = std::get_if<ConstantIndex>(&m.model)) return constant->n;

    const auto& s = std::get<Sellmeier>(m.model);
    const double l2 = (wavelength_nm * 1e-3) * (wavelength_nm * 1e-3);
    double n2 = 1.0;
    for (int i = 0; i < 3; ++i) n2 += s.b[i] * l2 / (l2 - s.c_um2[i]);
    if (!(n2 > 1.0) || !std::isfinite(n2)) {
        throw NumericError("Sellmeier model of " + m.name + " has no real index at " +
                           std::to_string(wavelength_nm) + " nm");
    }
    return std::sqrt(n2);
}

void validate_material(const Material& m) {
    if (const auto* constant = std::get_if<ConstantIndex>(&m.model)) {
        if (!(constant->n >= 1.0)) {
            throw ValidationError("material " + m.name + ": constant index must be >= 1.0");
        }
        return;
    }
    for (double wl = 400.0; wl <= 700.0; wl += 10.0) {
        double n = 0.0;
        try {
            n = refractive_index(m, wl);
        } catch (const NumericError&) {
            n = 0.0;
        }
        if (!(n > 1.0 && n < 2.5)) {
            throw ValidationError("material " + m.name +
                                  ": Sellmeier index must lie in (1.0, 2.5) over 400-700 nm");
        }
    }
}

Material air() { return {"AIR", ConstantIndex{1.0}}; }

Material schott_bk7() {
    return {"BK7", Sellmeier{{1.03961212, 0.231792344, 1.01046945},
                             {0.00600069867, 0.0200179144, 103.560653}}};
}

Material schott_f2() {
    return {"F2", Sellmeier{{1.34533359, 0.209073176, 0.937357162},
                            {0.00997743871, 0.0470450767, 111.886764}}};
}

GlassCatalog::GlassCatalog() {
    for (auto m : {air(), schott_bk7(), schott_f2()}) materials_.emplace(m.name, std::move(m));
}

void GlassCatalog::add(Material m) {
    validate_material(m);
    m.name = upper(m.name);
    materials_.insert_or_assign(m.name, std::move(m));
}

std::optional<Material> GlassCatalog::find(const std::string& name) const {
    auto it = materials_.find(upper(name));
    if (it == materials_.end()) return std::nullopt;
    return it->second;
}

}  // namespace lensdeg
