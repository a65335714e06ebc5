#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dnpu/errors.hpp"
#include "dnpu/geometry.hpp"

using namespace dnpu;

TEST_CASE("default generation puts every point strictly inside the disc") {
    DeviceConfig config;  // 200 dopants, 3 counterdopants, radius 75 nm
    const DeviceGeometry geom = generate_device(1, config);
    CHECK(geom.dopants.size() == 200);
    CHECK(geom.counterdopants.size() == 3);
    CHECK(geom.disorder_ev.size() == 200);
    auto inside = [&](const Point2& p) { return p.x * p.x + p.y * p.y < 75.0 * 75.0; };
    for (const Point2& p : geom.dopants) CHECK(inside(p));
    for (const Point2& p : geom.counterdopants) CHECK(inside(p));
    CHECK(validate_device(geom).empty());
}

TEST_CASE("zero counterdopants is a configuration error") {
    DeviceConfig config;
    config.counterdopant_count = 0;
    CHECK_THROWS_AS(generate_device(42, config), ConfigError);
}

TEST_CASE("generation is deterministic in seed and config") {
    DeviceConfig config;
    const DeviceGeometry a = generate_device(1, config);
    const DeviceGeometry b = generate_device(1, config);
    REQUIRE(a.dopants.size() == b.dopants.size());
    for (std::size_t i = 0; i < a.dopants.size(); ++i) {
        CHECK(a.dopants[i].x == b.dopants[i].x);
        CHECK(a.dopants[i].y == b.dopants[i].y);
    }
    for (std::size_t i = 0; i < a.disorder_ev.size(); ++i) CHECK(a.disorder_ev[i] == b.disorder_ev[i]);
    CHECK(device_to_json(a).dump() == device_to_json(b).dump());
    CHECK(geometry_hash(a) == geometry_hash(b));

    const DeviceGeometry c = generate_device(2, config);
    CHECK(geometry_hash(a) != geometry_hash(c));
}

TEST_CASE("validation reports out-of-domain points and electrode overlap") {
    DeviceConfig config;
    config.dopant_count = 10;
    DeviceGeometry geom = generate_device(3, config);

    DeviceGeometry outside = geom;
    outside.dopants[0] = Point2{76.0, 0.0};
    auto issues = validate_device(outside);
    REQUIRE(!issues.empty());
    CHECK(issues.front().find("outside domain") != std::string::npos);

    DeviceGeometry overlap = geom;
    overlap.electrodes[1].center_angle_rad = overlap.electrodes[0].center_angle_rad + 0.05;
    issues = validate_device(overlap);
    bool found = false;
    for (const std::string& s : issues) found = found || s.find("electrode overlap") != std::string::npos;
    CHECK(found);
}

TEST_CASE("validation checks roles, disorder size and spacing") {
    DeviceConfig config;
    config.dopant_count = 8;
    DeviceGeometry geom = generate_device(4, config);

    DeviceGeometry bad_roles = geom;
    bad_roles.electrodes[7].role = ElectrodeRole::control;  // no output left
    auto issues = validate_device(bad_roles);
    bool found = false;
    for (const std::string& s : issues) found = found || s.find("output") != std::string::npos;
    CHECK(found);

    DeviceGeometry bad_disorder = geom;
    bad_disorder.disorder_ev.pop_back();
    CHECK(!validate_device(bad_disorder).empty());

    DeviceGeometry close_pair = geom;
    close_pair.dopants[1] = Point2{close_pair.dopants[0].x + 0.1, close_pair.dopants[0].y};
    issues = validate_device(close_pair);
    found = false;
    for (const std::string& s : issues) found = found || s.find("minimum spacing") != std::string::npos;
    CHECK(found);
}

TEST_CASE("unsatisfiable spacing fails with a config error") {
    DeviceConfig config;
    config.radius_nm = 2.0;
    config.dopant_count = 500;  // cannot fit 500 points 0.5 nm apart in a 2 nm disc
    config.max_attempts_per_point = 200;
    CHECK_THROWS_AS(generate_device(1, config), ConfigError);
}

TEST_CASE("electrode anchors sit on the boundary circle") {
    DeviceConfig config;
    config.dopant_count = 5;
    DeviceGeometry geom = generate_device(5, config);
    geom.electrodes[0].center_angle_rad = 0.0;
    geom.electrodes[1].center_angle_rad = 1.5707963267948966;  // pi/2
    geom.electrodes[2].center_angle_rad = 3.14159265358979323846;

    const Point2 a = electrode_anchor(geom, geom.electrodes[0].index);
    CHECK(a.x == doctest::Approx(75.0).epsilon(1e-14));
    CHECK(a.y == doctest::Approx(0.0).scale(75.0).epsilon(1e-14));
    const Point2 b = electrode_anchor(geom, geom.electrodes[1].index);
    CHECK(b.x == doctest::Approx(0.0).scale(75.0).epsilon(1e-14));
    CHECK(b.y == doctest::Approx(75.0).epsilon(1e-14));
    const Point2 c = electrode_anchor(geom, geom.electrodes[2].index);
    CHECK(c.x == doctest::Approx(-75.0).epsilon(1e-14));
    CHECK(c.y == doctest::Approx(0.0).scale(75.0).epsilon(1e-14));

    CHECK_THROWS_AS(electrode_anchor(geom, 99), ConfigError);
}

TEST_CASE("json round trip preserves the geometry exactly") {
    DeviceConfig config;
    config.dopant_count = 17;
    const DeviceGeometry geom = generate_device(11, config);
    const DeviceGeometry back = device_from_json(device_to_json(geom));
    REQUIRE(back.dopants.size() == geom.dopants.size());
    for (std::size_t i = 0; i < geom.dopants.size(); ++i) {
        CHECK(back.dopants[i].x == geom.dopants[i].x);
        CHECK(back.dopants[i].y == geom.dopants[i].y);
    }
    CHECK(back.disorder_ev == geom.disorder_ev);
    CHECK(back.material.temperature_k == geom.material.temperature_k);
    CHECK(geometry_hash(back) == geometry_hash(geom));
}

TEST_CASE("dopant density is uniform over equal-area annuli") {
    // 1e5 points from 500 devices; chi-square over 20 equal-area bins at the
    // 1% level (critical value 36.191 for 19 degrees of freedom).
    DeviceConfig config;
    const int devices = 500;
    const int bins = 20;
    std::array<std::int64_t, 20> counts{};
    std::int64_t total = 0;
    for (int d = 0; d < devices; ++d) {
        const DeviceGeometry geom = generate_device(1000 + d, config);
        for (const Point2& p : geom.dopants) {
            const double frac = (p.x * p.x + p.y * p.y) / (75.0 * 75.0);
            int bin = static_cast<int>(frac * bins);
            if (bin >= bins) bin = bins - 1;
            ++counts[bin];
            ++total;
        }
    }
    const double expected = static_cast<double>(total) / bins;
    double chi2 = 0.0;
    for (std::int64_t c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 36.191);
}

TEST_CASE("disorder energies look Gaussian with the configured sigma") {
    DeviceConfig config;
    const double sigma = config.material.disorder_sigma_ev;
    const int devices = 500;
    double sum = 0.0, sum2 = 0.0;
    std::int64_t n = 0;
    for (int d = 0; d < devices; ++d) {
        const DeviceGeometry geom = generate_device(20000 + d, config);
        for (double e : geom.disorder_ev) {
            sum += e;
            sum2 += e * e;
            ++n;
        }
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::fabs(mean) < 4.0 * sigma / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(var - sigma * sigma) < 0.1 * sigma * sigma);
}
