#include "lensdeg/psf_io.hpp"

#include "lensdeg/error.hpp"
#include "lensdeg/image.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace lensdeg {

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

fs::path with_ext(fs::path stem, const char* ext) { return stem.replace_extension(ext); }

template <typename T>
T field(const json& j, const char* key, const fs::path& path) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw IoError("'" + path.string() + "' lacks a valid '" + key + "' entry");
    }
}

}  // namespace

std::vector<fs::path> export_psf(const PSF& psf, const fs::path& stem) {
    const std::size_t n = static_cast<std::size_t>(psf.size) * psf.size;
    if (psf.size <= 0 || psf.intensity.size() != n) throw ValidationError("PSF array does not match its size");
    if (stem.has_parent_path()) fs::create_directories(stem.parent_path());

    const fs::path bin = with_ext(stem, ".bin"), meta = with_ext(stem, ".json"), png = with_ext(stem, ".png");
    {
        std::string bytes(n * 8, '\0');
        for (std::size_t i = 0; i < n; ++i) {
            auto u = std::bit_cast<std::uint64_t>(psf.intensity[i]);
            for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<char>((u >> (8 * b)) & 0xff);
        }
        write_text(bin, bytes);
    }
    json j = {{"format", "lensdeg-psf"},
              {"rows", psf.size},
              {"cols", psf.size},
              {"dtype", "float64-le"},
              {"pixel_pitch_um", psf.pixel_pitch_um},
              {"wavelength_nm", psf.wavelength_nm},
              {"theta_x_deg", psf.field.theta_x_deg},
              {"theta_y_deg", psf.field.theta_y_deg},
              {"payload", bin.filename().string()}};
    write_text(meta, j.dump(2) + "\n");

    const double peak = *std::max_element(psf.intensity.begin(), psf.intensity.end());
    std::vector<double> preview(n, 0.0);
    if (peak > 0.0) {
        for (std::size_t i = 0; i < n; ++i) preview[i] = psf.intensity[i] / peak;
    }
    write_gray_png(png.string(), psf.size, psf.size, preview, 16);
    return {bin, meta, png};
}

PSF load_reference_psf(const fs::path& path) {
    const fs::path meta = with_ext(path, ".json");
    if (!fs::exists(meta)) throw IoError("missing PSF sidecar '" + meta.string() + "'");
    const json j = read_json(meta);
    const int rows = field<int>(j, "rows", meta), cols = field<int>(j, "cols", meta);
    if (rows <= 0 || rows != cols) throw IoError("'" + meta.string() + "': PSF must be square with positive size");
    if (j.contains("dtype") && j["dtype"] != "float64-le") throw IoError("'" + meta.string() + "': unsupported dtype");

    fs::path bin = with_ext(path, ".bin");
    if (j.contains("payload") && j["payload"].is_string()) bin = meta.parent_path() / j["payload"].get<std::string>();
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw IoError("cannot open PSF payload '" + bin.string() + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    if (bytes.size() != n * 8) {
        throw IoError("'" + bin.string() + "' holds " + std::to_string(bytes.size() / 8) + " samples, sidecar says " +
                      std::to_string(n));
    }
    PSF psf;
    psf.size = rows;
    psf.intensity.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
        psf.intensity[i] = std::bit_cast<double>(u);
    }
    psf.pixel_pitch_um = field<double>(j, "pixel_pitch_um", meta);
    psf.wavelength_nm = field<double>(j, "wavelength_nm", meta);
    psf.field.theta_x_deg = j.value("theta_x_deg", 0.0);
    psf.field.theta_y_deg = j.value("theta_y_deg", 0.0);
    return psf;
}

std::vector<fs::path> save_psf_grid(const PSFGrid& grid, const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<fs::path> written;
    json cells = json::array();
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            const std::string stem = "cell_r" + std::to_string(r) + "_c" + std::to_string(c);
            auto files = export_psf(grid.at(r, c), dir / stem);
            written.insert(written.end(), files.begin(), files.end());
            cells.push_back({{"row", r}, {"col", c}, {"file", stem + ".bin"}});
        }
    }
    json manifest = {{"format", "lensdeg-psf-grid"},
                     {"rows", grid.rows},
                     {"cols", grid.cols},
                     {"cell_size_px", grid.cell_size_px},
                     {"wavelength_nm", grid.wavelength_nm},
                     {"fov_deg", grid.fov_deg},
                     {"cells", cells}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    written.push_back(dir / "manifest.json");
    return written;
}

PSFGrid load_psf_grid(const fs::path& dir) {
    const fs::path mpath = dir / "manifest.json";
    if (!fs::exists(mpath)) throw IoError("no PSF grid manifest in '" + dir.string() + "'");
    const json m = read_json(mpath);
    PSFGrid g;
    g.rows = field<int>(m, "rows", mpath);
    g.cols = field<int>(m, "cols", mpath);
    g.cell_size_px = field<int>(m, "cell_size_px", mpath);
    g.wavelength_nm = field<double>(m, "wavelength_nm", mpath);
    g.fov_deg = m.value("fov_deg", 0.0);
    if (g.rows <= 0 || g.cols <= 0) throw IoError("'" + mpath.string() + "': bad grid dimensions");
    g.cells.resize(static_cast<std::size_t>(g.rows) * g.cols);
    std::vector<bool> seen(g.cells.size(), false);
    const json& cells = m.at("cells");
    for (const json& cell : cells) {
        const int r = field<int>(cell, "row", mpath), c = field<int>(cell, "col", mpath);
        if (r < 0 || r >= g.rows || c < 0 || c >= g.cols) throw IoError("'" + mpath.string() + "': cell index out of range");
        PSF psf = load_reference_psf(dir / field<std::string>(cell, "file", mpath));
        if (psf.size != g.cell_size_px) throw IoError("cell size disagrees with the grid manifest");
        g.at(r, c) = std::move(psf);
        seen[static_cast<std::size_t>(r) * g.cols + c] = true;
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
        throw IoError("'" + mpath.string() + "' does not list every cell");
    }
    return g;
}

}  // namespace lensdeg
