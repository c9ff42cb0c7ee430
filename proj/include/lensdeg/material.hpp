#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <variant>

namespace lensdeg {

struct ConstantIndex {
    double n = 1.0;
};

/// n^2(λ) = 1 + Σ B_i λ² / (λ² − C_i), λ in μm, C_i in μm².
struct Sellmeier {
    std::array<double, 3> b{};
    std::array<double, 3> c_um2{};
};

struct Material {
    std::string name;
    std::variant<ConstantIndex, Sellmeier> model;

    bool operator==(const Material&) const = default;
};

inline bool operator==(const ConstantIndex& a, const ConstantIndex& b) { return a.n == b.n; }
inline bool operator==(const Sellmeier& a, const Sellmeier& b) {
    return a.b == b.b && a.c_um2 == b.c_um2;
}

inline constexpr double kMinWavelengthNm = 300.0;
inline constexpr double kMaxWavelengthNm = 1100.0;

/// Refractive index at `wavelength_nm`. Throws ValidationError outside [300, 1100] nm.
double refractive_index(const Material& m, double wavelength_nm);

/// Checks the material invariants (constant n >= 1, visible-band Sellmeier index in (1, 2.5)).
void validate_material(const Material& m);

/// Name-keyed set of materials. Starts with AIR (n = 1 exactly), BK7 and F2 (Schott catalog).
class GlassCatalog {
public:
    GlassCatalog();

    void add(Material m);
    std::optional<Material> find(const std::string& name) const;

private:
    std::map<std::string, Material> materials_;
};

Material air();
Material schott_bk7();
Material schott_f2();

}  // namespace lensdeg
