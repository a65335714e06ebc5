#include "dnpu/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dnpu/errors.hpp"
#include "dnpu/rng.hpp"

namespace dnpu {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

// Shortest angular distance between two angles.
double angular_distance(double a, double b) {
    double d = std::fabs(wrap_angle(a) - wrap_angle(b));
    return std::min(d, kTwoPi - d);
}

bool spacing_ok(const Point2& p, const std::vector<Point2>& placed, std::size_t count,
                double min_spacing) {
    for (std::size_t i = 0; i < count; ++i) {
        if (distance(p, placed[i]) < min_spacing) return false;
    }
    return true;
}

}  // namespace

std::string to_string(ElectrodeRole role) {
    switch (role) {
        case ElectrodeRole::input_left: return "input_left";
        case ElectrodeRole::input_right: return "input_right";
        case ElectrodeRole::control: return "control";
        case ElectrodeRole::output: return "output";
    }
    throw ConfigError("unknown electrode role");
}

ElectrodeRole electrode_role_from_string(const std::string& s) {
    if (s == "input_left") return ElectrodeRole::input_left;
    if (s == "input_right") return ElectrodeRole::input_right;
    if (s == "control") return ElectrodeRole::control;
    if (s == "output") return ElectrodeRole::output;
    throw ConfigError("unknown electrode role '" + s + "'");
}

std::vector<ElectrodeArc> default_electrode_layout(double angular_width_rad) {
    std::vector<ElectrodeArc> arcs(8);
    for (int k = 0; k < 8; ++k) {
        arcs[k].index = k + 1;
        arcs[k].center_angle_rad = k * (kTwoPi / 8.0);
        arcs[k].angular_width_rad = angular_width_rad;
        arcs[k].role = ElectrodeRole::control;
    }
    arcs[1].role = ElectrodeRole::input_right;  // U2
    arcs[2].role = ElectrodeRole::input_left;   // U3
    arcs[7].role = ElectrodeRole::output;       // U8, grounded
    return arcs;
}

DeviceGeometry generate_device(std::uint64_t seed, const DeviceConfig& config) {
    if (config.radius_nm <= 0.0) throw ConfigError("device radius must be positive");
    if (config.dopant_count < 1) throw ConfigError("need at least one dopant");
    if (config.counterdopant_count < 1)
        throw ConfigError("need at least one counterdopant: the neutral system has as many carriers as counterdopants");
    const MaterialParams& m = config.material;
    if (m.hopping_distance_nm <= 0.0 || m.temperature_k <= 0.0 || m.relative_permittivity <= 0.0 ||
        m.attempt_frequency_hz <= 0.0 || m.disorder_sigma_ev <= 0.0)
        throw ConfigError("material parameters must all be strictly positive");

    DeviceGeometry geom;
    geom.radius_nm = config.radius_nm;
    geom.electrodes = config.electrodes;
    geom.material = config.material;
    geom.min_spacing_nm = config.min_spacing_nm;

    const int total = config.dopant_count + config.counterdopant_count;
    std::vector<Point2> placed;
    placed.reserve(static_cast<std::size_t>(total));

    Xoshiro256pp place_rng(derive_seed(seed, SeedTag::device_placement));
    const double r2 = config.radius_nm * config.radius_nm;
    for (int i = 0; i < total; ++i) {
        bool accepted = false;
        for (int attempt = 0; attempt < config.max_attempts_per_point; ++attempt) {
            Point2 p;
            p.x = place_rng.uniform(-config.radius_nm, config.radius_nm);
            p.y = place_rng.uniform(-config.radius_nm, config.radius_nm);
            if (p.x * p.x + p.y * p.y >= r2) continue;
            if (!spacing_ok(p, placed, placed.size(), config.min_spacing_nm)) continue;
            placed.push_back(p);
            accepted = true;
            break;
        }
        if (!accepted)
            throw ConfigError("could not satisfy the minimum spacing of " +
                              std::to_string(config.min_spacing_nm) + " nm after " +
                              std::to_string(config.max_attempts_per_point) + " attempts");
    }
    geom.dopants.assign(placed.begin(), placed.begin() + config.dopant_count);
    geom.counterdopants.assign(placed.begin() + config.dopant_count, placed.end());

    Xoshiro256pp disorder_rng(derive_seed(seed, SeedTag::device_disorder));
    geom.disorder_ev.resize(static_cast<std::size_t>(config.dopant_count));
    for (double& e : geom.disorder_ev) e = disorder_rng.gaussian() * m.disorder_sigma_ev;

    return geom;
}

std::vector<std::string> validate_device(const DeviceGeometry& geom) {
    std::vector<std::string> issues;
    auto report = [&issues](const std::string& s) { issues.push_back(s); };

    if (geom.radius_nm <= 0.0) report("radius must be positive");

    const double r2 = geom.radius_nm * geom.radius_nm;
    auto check_inside = [&](const std::vector<Point2>& pts, const char* kind) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (pts[i].x * pts[i].x + pts[i].y * pts[i].y >= r2) {
                std::ostringstream os;
                os << kind << " " << i << " outside domain (r=" << distance(pts[i], Point2{})
                   << " nm, radius " << geom.radius_nm << " nm)";
                report(os.str());
            }
        }
    };
    check_inside(geom.dopants, "dopant");
    check_inside(geom.counterdopants, "counterdopant");

    if (geom.disorder_ev.size() != geom.dopants.size())
        report("disorder list has " + std::to_string(geom.disorder_ev.size()) + " entries for " +
               std::to_string(geom.dopants.size()) + " dopants");

    // Electrode roles and indices.
    int outputs = 0, inputs = 0, controls = 0;
    std::vector<int> seen;
    for (const ElectrodeArc& arc : geom.electrodes) {
        switch (arc.role) {
            case ElectrodeRole::output: ++outputs; break;
            case ElectrodeRole::input_left:
            case ElectrodeRole::input_right: ++inputs; break;
            case ElectrodeRole::control: ++controls; break;
        }
        if (arc.index < 1 || arc.index > 8) report("electrode index " + std::to_string(arc.index) + " out of 1..8");
        if (std::find(seen.begin(), seen.end(), arc.index) != seen.end())
            report("electrode index " + std::to_string(arc.index) + " used twice");
        seen.push_back(arc.index);
        if (arc.angular_width_rad <= 0.0 || arc.angular_width_rad >= kTwoPi)
            report("electrode " + std::to_string(arc.index) + " has invalid width");
    }
    if (geom.electrodes.size() != 8) report("expected 8 electrodes, got " + std::to_string(geom.electrodes.size()));
    if (outputs != 1) report("expected exactly one output electrode, got " + std::to_string(outputs));
    if (inputs != 2) report("expected exactly two input electrodes, got " + std::to_string(inputs));
    if (controls != 5) report("expected exactly five control electrodes, got " + std::to_string(controls));

    // Pairwise arc overlap on the boundary circle.
    for (std::size_t a = 0; a < geom.electrodes.size(); ++a) {
        for (std::size_t b = a + 1; b < geom.electrodes.size(); ++b) {
            const ElectrodeArc& ea = geom.electrodes[a];
            const ElectrodeArc& eb = geom.electrodes[b];
            const double gap = angular_distance(ea.center_angle_rad, eb.center_angle_rad);
            if (gap < 0.5 * (ea.angular_width_rad + eb.angular_width_rad)) {
                report("electrode overlap between indices " + std::to_string(ea.index) + " and " +
                       std::to_string(eb.index));
            }
        }
    }

    // Minimum spacing over all placed points.
    std::vector<Point2> all = geom.dopants;
    all.insert(all.end(), geom.counterdopants.begin(), geom.counterdopants.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            if (distance(all[i], all[j]) < geom.min_spacing_nm) {
                std::ostringstream os;
                os << "points " << i << " and " << j << " closer than the minimum spacing ("
                   << distance(all[i], all[j]) << " < " << geom.min_spacing_nm << " nm)";
                report(os.str());
            }
        }
    }

    return issues;
}

const ElectrodeArc& electrode_by_index(const DeviceGeometry& geom, int electrode_index) {
    for (const ElectrodeArc& arc : geom.electrodes) {
        if (arc.index == electrode_index) return arc;
    }
    throw ConfigError("unknown electrode index " + std::to_string(electrode_index));
}

int electrode_position(const DeviceGeometry& geom, ElectrodeRole role) {
    for (std::size_t i = 0; i < geom.electrodes.size(); ++i) {
        if (geom.electrodes[i].role == role) return static_cast<int>(i);
    }
    throw ConfigError("no electrode with role " + to_string(role));
}

Point2 electrode_anchor(const DeviceGeometry& geom, int electrode_index) {
    const ElectrodeArc& arc = electrode_by_index(geom, electrode_index);
    return Point2{geom.radius_nm * std::cos(arc.center_angle_rad),
                  geom.radius_nm * std::sin(arc.center_angle_rad)};
}

nlohmann::json device_to_json(const DeviceGeometry& geom) {
    nlohmann::json j;
    j["radius_nm"] = geom.radius_nm;
    auto points = [](const std::vector<Point2>& pts) {
        nlohmann::json arr = nlohmann::json::array();
        for (const Point2& p : pts) arr.push_back({p.x, p.y});
        return arr;
    };
    j["dopants"] = points(geom.dopants);
    j["counterdopants"] = points(geom.counterdopants);
    j["disorder_eV"] = geom.disorder_ev;
    nlohmann::json electrodes = nlohmann::json::array();
    for (const ElectrodeArc& arc : geom.electrodes) {
        electrodes.push_back({{"index", arc.index},
                              {"role", to_string(arc.role)},
                              {"center_angle_rad", arc.center_angle_rad},
                              {"width_rad", arc.angular_width_rad}});
    }
    j["electrodes"] = electrodes;
    j["material"] = {{"a_nm", geom.material.hopping_distance_nm},
                     {"T_K", geom.material.temperature_k},
                     {"eps_r", geom.material.relative_permittivity},
                     {"nu0_per_s", geom.material.attempt_frequency_hz},
                     {"sigma_eV", geom.material.disorder_sigma_ev}};
    j["min_spacing_nm"] = geom.min_spacing_nm;
    return j;
}

DeviceGeometry device_from_json(const nlohmann::json& j) {
    DeviceGeometry geom;
    try {
        geom.radius_nm = j.at("radius_nm").get<double>();
        auto points = [](const nlohmann::json& arr) {
            std::vector<Point2> pts;
            pts.reserve(arr.size());
            for (const auto& p : arr) pts.push_back(Point2{p.at(0).get<double>(), p.at(1).get<double>()});
            return pts;
        };
        geom.dopants = points(j.at("dopants"));
        geom.counterdopants = points(j.at("counterdopants"));
        geom.disorder_ev = j.at("disorder_eV").get<std::vector<double>>();
        for (const auto& e : j.at("electrodes")) {
            ElectrodeArc arc;
            arc.index = e.at("index").get<int>();
            arc.role = electrode_role_from_string(e.at("role").get<std::string>());
            arc.center_angle_rad = e.at("center_angle_rad").get<double>();
            arc.angular_width_rad = e.at("width_rad").get<double>();
            geom.electrodes.push_back(arc);
        }
        nlohmann::json m = j.at("material");
        geom.material.hopping_distance_nm = m.at("a_nm").get<double>();
        geom.material.temperature_k = m.at("T_K").get<double>();
        geom.material.relative_permittivity = m.at("eps_r").get<double>();
        geom.material.attempt_frequency_hz = m.at("nu0_per_s").get<double>();
        geom.material.disorder_sigma_ev = m.at("sigma_eV").get<double>();
        geom.min_spacing_nm = j.value("min_spacing_nm", 0.5);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed device file: ") + e.what());
    }
    return geom;
}

void save_device(const DeviceGeometry& geom, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << device_to_json(geom).dump(2) << "\n";
}

DeviceGeometry load_device(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open device file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("cannot parse device file: ") + e.what());
    }
    return device_from_json(j);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string geometry_hash(const DeviceGeometry& geom) {
    const std::uint64_t h = fnv1a64(device_to_json(geom).dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace dnpu
