#pragma once

#include "lensdeg/degrade.hpp"
#include "lensdeg/metrology.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lensdeg {

struct PipelineConfig {
    std::filesystem::path prescription;
    std::vector<double> wavelengths_nm;  // empty: prescription wavelengths
    double fov_deg = 2.0;
    int psf_rows = 8;                    // rendered grid
    int psf_cols = 8;
    int grid_rows = 6;                   // degradation grid (resized from the rendered one)
    int grid_cols = 8;
    int cell_px = 160;
    int pupil_samples = 128;
    int pad_factor = 4;
    std::optional<double> pixel_pitch_um;
    bool refocus = true;
    /// Input images; when empty a synthetic slanted-edge chart of chart_width×chart_height is used.
    std::vector<std::filesystem::path> images;
    int chart_width = 1280;
    int chart_height = 960;
    double chart_blur_sigma_px = 0.8;
    std::optional<std::filesystem::path> rois;  // ROI file for user images
    /// Annulus radii in px. Mandatory: either explicit values or `annuli_default` = true.
    std::optional<std::pair<double, double>> annuli;
    bool annuli_default = false;
    BoundaryPolicy boundary = BoundaryPolicy::mirror;
    BlendPolicy blend;
    bool assume_linear = true;
    int bit_depth = 8;
    std::filesystem::path output_dir = "out";

    /// Checks the invariants that do not need the images (dims, ranges, files exist).
    void validate() const;
};

/// JSON config. Relative paths are resolved against the config file's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct ManifestEntry {
    std::string path;  // relative to the output directory, '/' separated
    std::string kind;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::string summary_json;  // stage results (focus shift, pitch, region means)
    std::string to_json() const;
};

/// Runs every stage and writes <output_dir>/manifest.json. A failing stage aborts with an
/// error of the same category whose message names the stage.
Manifest run_pipeline(const PipelineConfig& cfg);

std::string sha256_hex(const std::filesystem::path& file);

}  // namespace lensdeg
