#pragma once

#include "lensdeg/material.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lensdeg {

enum class SurfaceKind { object, refracting, stop, image };

std::string_view to_string(SurfaceKind kind);

/// One row of a sequential prescription. A radius of 0 encodes a plane.
struct Surface {
    int index = 0;
    std::string name;
    SurfaceKind kind = SurfaceKind::refracting;
    double radius_mm = 0.0;
    double thickness_mm = 0.0;  // axial gap to the next surface
    double semi_diameter_mm = 0.0;
    Material material_after;

    bool is_plane() const { return radius_mm == 0.0; }
    double curvature() const { return radius_mm == 0.0 ? 0.0 : 1.0 / radius_mm; }

    bool operator==(const Surface&) const = default;
};

/// position[i] = sum of thickness[0..i-1]. No validation.
std::vector<double> axial_positions(std::span<const Surface> surfaces);

/// Validated, immutable sequential lens description.
class LensPrescription {
public:
    static constexpr double kDefaultReferenceWavelengthNm = 588.0;

    /// Throws ValidationError naming the first violated invariant.
    LensPrescription(std::vector<Surface> surfaces, std::vector<double> wavelengths_nm,
                     std::vector<double> field_angles_deg,
                     double reference_wavelength_nm = kDefaultReferenceWavelengthNm);

    std::span<const Surface> surfaces() const { return surfaces_; }
    const Surface& surface(std::size_t i) const { return surfaces_.at(i); }
    std::size_t size() const { return surfaces_.size(); }

    std::span<const double> wavelengths_nm() const { return wavelengths_nm_; }
    std::span<const double> field_angles_deg() const { return field_angles_deg_; }
    double reference_wavelength_nm() const { return reference_wavelength_nm_; }

    /// Vertex z of every surface, object plane at 0.
    std::span<const double> vertex_z() const { return vertex_z_; }
    std::size_t stop_index() const { return stop_index_; }
    std::size_t image_index() const { return surfaces_.size() - 1; }

    /// Index of the medium following surface i at the given wavelength.
    double index_after(std::size_t i, double wavelength_nm) const;

    /// Copy with the image plane moved by `delta_mm` along the axis (positive = away from the lens).
    LensPrescription with_image_shift(double delta_mm) const;
    /// Copy with surface i's semi-diameter replaced.
    LensPrescription with_semi_diameter(std::size_t i, double semi_diameter_mm) const;

    bool operator==(const LensPrescription& other) const {
        return surfaces_ == other.surfaces_ && wavelengths_nm_ == other.wavelengths_nm_ &&
               field_angles_deg_ == other.field_angles_deg_ &&
               reference_wavelength_nm_ == other.reference_wavelength_nm_;
    }

private:
    std::vector<Surface> surfaces_;
    std::vector<double> wavelengths_nm_;
    std::vector<double> field_angles_deg_;
    double reference_wavelength_nm_;
    std::vector<double> vertex_z_;
    std::size_t stop_index_ = 0;
};

/// Parses the plain-text prescription format:
///
///     # comment
///     wavelengths 656 531 486
///     fields -2 0 2
///     reference 588                       (optional)
///     glass NAME sellmeier B1 B2 B3 C1 C2 C3
///     glass NAME constant N
///     <index> <name> <material> <thickness_mm> <diameter_mm> <radius_mm>
///
/// The first surface row is the object plane, the last the image plane, and the one row
/// whose name contains "stop" (or is "STO") the aperture stop.
/// Throws ParseError (with line number) or ValidationError.
LensPrescription parse_prescription(std::string_view text);

/// Inverse of parse_prescription; parse(serialize(p)) == p.
std::string serialize_prescription(const LensPrescription& p);

LensPrescription load_prescription(const std::string& path);

}  // namespace lensdeg
