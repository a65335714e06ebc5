#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace dnpu {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

enum class ElectrodeRole { input_left, input_right, control, output };

std::string to_string(ElectrodeRole role);
ElectrodeRole electrode_role_from_string(const std::string& s);

struct ElectrodeArc {
    int index = 0;  // 1..8
    ElectrodeRole role = ElectrodeRole::control;
    double center_angle_rad = 0.0;
    double angular_width_rad = 0.2;
};

struct MaterialParams {
    double hopping_distance_nm = 5.0;  // wave-function decay length a
    double temperature_k = 77.0;
    double relative_permittivity = 12.0;
    double attempt_frequency_hz = 1e12;  // nu0
    double disorder_sigma_ev = 0.1;
};

// Default layout: 8 arcs with centers every pi/4 starting at angle 0 for
// index 1, each 0.2 rad wide. Roles: U2/U3 are the right/left inputs, U8 is
// the grounded output, the rest are controls.
std::vector<ElectrodeArc> default_electrode_layout(double angular_width_rad = 0.2);

struct DeviceConfig {
    double radius_nm = 75.0;
    int dopant_count = 200;
    int counterdopant_count = 3;
    double min_spacing_nm = 0.5;
    int max_attempts_per_point = 100000;
    MaterialParams material;
    std::vector<ElectrodeArc> electrodes = default_electrode_layout();
};

struct DeviceGeometry {
    double radius_nm = 0.0;
    std::vector<Point2> dopants;
    std::vector<Point2> counterdopants;
    std::vector<double> disorder_ev;  // one entry per dopant
    std::vector<ElectrodeArc> electrodes;
    MaterialParams material;
    double min_spacing_nm = 0.5;

    int n_electrodes() const { return static_cast<int>(electrodes.size()); }
};

// Uniform placement on the open disc by rejection sampling from the
// circumscribing square, with a minimum spacing between all placed points
// enforced by resampling. Disorder energies are independent Gaussian(0,
// sigma). Deterministic: the same (seed, config) reproduces the identical
// geometry.
DeviceGeometry generate_device(std::uint64_t seed, const DeviceConfig& config);

// Reports every invariant violation; an empty report means the device is
// valid.
std::vector<std::string> validate_device(const DeviceGeometry& geometry);

// Point on the boundary circle at the arc's center angle; reference point
// for electrode-dopant hop distances.
Point2 electrode_anchor(const DeviceGeometry& geometry, int electrode_index);

const ElectrodeArc& electrode_by_index(const DeviceGeometry& geometry, int electrode_index);
int electrode_position(const DeviceGeometry& geometry, ElectrodeRole role);  // position in list

nlohmann::json device_to_json(const DeviceGeometry& geometry);
DeviceGeometry device_from_json(const nlohmann::json& j);
void save_device(const DeviceGeometry& geometry, const std::string& path);
DeviceGeometry load_device(const std::string& path);

// FNV-1a over the canonical JSON serialization; used to key basis caches
// and to detect device/dataset mismatches.
std::string geometry_hash(const DeviceGeometry& geometry);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace dnpu
