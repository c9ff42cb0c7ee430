#pragma once

#include "lensdeg/image.hpp"
#include "lensdeg/psf.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lensdeg {

// ---- PSF agreement ----

enum class Normalization { peak, sum };
Normalization parse_normalization(const std::string& s);

/// Both arrays scaled to unit peak (or unit sum), then sqrt(mean((a − b)²)). An all-zero
/// array stays zero under either convention.
double rmse(std::span<const double> a, std::span<const double> b, Normalization norm = Normalization::peak);
double rmse(const PSF& a, const PSF& b, Normalization norm = Normalization::peak);

// ---- slanted edge ----

enum class Polarity { rising, falling };

struct EdgeROI {
    int x = 0;  // top-left corner, px
    int y = 0;
    int width = 0;
    int height = 0;
    Polarity polarity = Polarity::rising;

    double centroid_x() const { return x + 0.5 * width; }
    double centroid_y() const { return y + 0.5 * height; }
};

struct SFRCurve {
    std::vector<double> frequencies;  // cy/px, 0 … max step 1/512
    std::vector<double> response;     // 1 at DC
    double edge_angle_deg = 0.0;      // deviation from the nearest image axis
    bool vertical_edge = true;        // false when the edge runs close to horizontal
};

struct EsfrOptions {
    int oversample = 4;
    double min_contrast = 0.05;  // edge amplitude in signal units
    double min_angle_deg = 2.0;
    double max_angle_deg = 10.0;
    double max_frequency = 1.0;
};

/// Slanted-edge SFR of one ROI of a single-channel plane (row-major, width×height).
SFRCurve esfr(std::span<const float> plane, int width, int height, const EdgeROI& roi,
              const EsfrOptions& options = {});

/// First frequency where the response falls to 0.5, linearly interpolated.
double mtf50(const SFRCurve& curve);

// ---- radial annuli ----

enum class Zone { center, middle, edge };
std::string to_string(Zone z);

struct AnnulusPartition {
    double center_x = 0.0;
    double center_y = 0.0;
    double r1 = 0.0;  // d ≤ r1 → center
    double r2 = 0.0;  // r1 < d ≤ r2 → middle, beyond → edge

    /// Centered on the image with r1 = 0.35·R and r2 = 0.72·R, R = half-diagonal.
    static AnnulusPartition for_image(int width, int height, double f1 = 0.35, double f2 = 0.72);
    Zone classify(double x, double y) const;
    void validate() const;
};

struct LabeledROI {
    EdgeROI roi;
    Zone zone = Zone::center;
};
std::vector<LabeledROI> partition_rois(std::span<const EdgeROI> rois, const AnnulusPartition& part);

// ---- before/after report ----

struct RoiMeasurement {
    EdgeROI roi;
    Zone zone = Zone::center;
    std::optional<double> mtf50_before;
    std::optional<double> mtf50_after;
    std::string error;              // first failure, empty when both measurements succeeded
    bool beyond_nyquist = false;    // an MTF50 above 0.5 cy/px
};

struct ZoneSummary {
    Zone zone = Zone::center;
    int count = 0;  // ROIs with both measurements
    double mean_before = 0.0;
    double mean_after = 0.0;
    double delta() const { return mean_after - mean_before; }
};

struct MTFReport {
    std::vector<RoiMeasurement> rois;
    std::vector<ZoneSummary> zones;  // center, middle, edge
    AnnulusPartition partition;

    const ZoneSummary& zone(Zone z) const { return zones[static_cast<int>(z)]; }
    std::string to_json() const;
    std::string to_csv() const;
};

/// Measures every ROI on the Rec. 709 luma of both images. ROI failures are recorded, not thrown.
MTFReport region_report(const RasterImage& before, const RasterImage& after, std::span<const EdgeROI> rois,
                        const AnnulusPartition& part, const EsfrOptions& options = {});

/// ROI list file: JSON array of {x, y, w, h[, polarity]}.
std::vector<EdgeROI> load_rois(const std::string& path);
std::string rois_to_json(std::span<const EdgeROI> rois);

// ---- synthetic chart ----

struct ChartEdge {
    double center_x = 0.0;
    double center_y = 0.0;
    double angle_deg = 5.0;  // edge line direction from the +x axis
    Polarity polarity = Polarity::rising;
};

struct ChartOptions {
    int patch_px = 96;            // square patch per edge
    int roi_px = 56;              // measurement ROI centered on the edge
    double blur_sigma_px = 0.0;   // Gaussian pre-blur rendered analytically; 0 = area-sampled step
    float dark = 0.2f;
    float light = 0.8f;
    float background = 0.5f;
};

struct TestChart {
    RasterImage image;
    std::vector<EdgeROI> rois;
};

/// Gray chart of slanted-edge patches. Rising edges are dark on the side the edge normal
/// (−sin a, cos a) points away from. Overlapping or out-of-image patches are rejected.
TestChart make_test_chart(int width, int height, std::span<const ChartEdge> edges, const ChartOptions& options = {});

/// 5×3 edges at x = {1,3,5,7,9}·W/10 and y = {1,3,5}·H/6, alternating near-horizontal and
/// near-vertical 5° slants and alternating polarity.
std::vector<ChartEdge> standard_chart_layout(int width, int height);

}  // namespace lensdeg
