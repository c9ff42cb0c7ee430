#pragma once

#include "lensdeg/metrology.hpp"
#include "lensdeg/psf.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lensdeg {

// Plot writers pick the format from the extension: ".svg" writes vector output, anything
// else a PNG raster.

struct LabeledCurve {
    std::string label;
    SFRCurve curve;
};

/// SFR curves with the 0.5 reference line and each MTF50 crossing marked.
void plot_sfr(const std::filesystem::path& path, std::span<const LabeledCurve> curves);

/// Grouped before/after bars of the per-region mean MTF50. An empty report draws empty axes
/// with a warning annotation.
void plot_region_bars(const std::filesystem::path& path, const MTFReport& report);

/// Side-by-side peak-normalized PSF maps (display gamma applied), one panel per PSF.
void plot_psf_panel(const std::filesystem::path& path, std::span<const PSF> psfs, double gamma = 0.5);

/// Region summaries read back from a report written by MTFReport::to_json.
MTFReport load_report(const std::filesystem::path& path);

}  // namespace lensdeg
