#pragma once

#include "lensdeg/psf.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lensdeg {

/// Writes <stem>.bin (little-endian float64, row-major), <stem>.json (dims, pitch, λ, θ)
/// and a peak-normalized 16-bit <stem>.png preview. Returns the three paths.
std::vector<std::filesystem::path> export_psf(const PSF& psf, const std::filesystem::path& stem);

/// Accepts the .bin payload, the .json sidecar or the bare stem.
PSF load_reference_psf(const std::filesystem::path& path);

/// Directory with one exported PSF per cell plus manifest.json. Returns every file written.
std::vector<std::filesystem::path> save_psf_grid(const PSFGrid& grid, const std::filesystem::path& dir);
PSFGrid load_psf_grid(const std::filesystem::path& dir);

}  // namespace lensdeg
