#pragma once

#include "lensdeg/prescription.hpp"

#include <filesystem>
#include <string>

#include <unistd.h>

inline std::string data_path(const std::string& name) { return std::string(LENSDEG_DATA_DIR) + "/" + name; }

inline const lensdeg::LensPrescription& doublet() {
    static const lensdeg::LensPrescription p = lensdeg::load_prescription(data_path("doublet.lens"));
    return p;
}

/// Object plane, one refracting surface into constant-index glass, plane stop, image.
inline lensdeg::LensPrescription single_surface(double n, double radius, double image_gap = 150.0) {
    return lensdeg::parse_prescription(
        "wavelengths 550\nfields 0\nreference 550\nglass G constant " + std::to_string(n) +
        "\n0 obj AIR 10 40 0\n1 s1 G 1 40 " + std::to_string(radius) + "\n2 stop G " +
        std::to_string(image_gap - 1) + " 10 0\n3 img G 0 40 0\n");
}

/// Fresh per-process directory under the system temp dir.
inline std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("lensdeg_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}
