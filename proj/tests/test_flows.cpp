#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "effdiff/errors.hpp"
#include "effdiff/flow.hpp"

using namespace effdiff;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("zero flow is zero") {
    const Flow f = make_flow("zero", {{"dim", 3}});
    const double x[3] = {0.3, -1.2, 5.0};
    double v[3];
    f.velocity(2.5, x, v);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
    CHECK(v[2] == 0.0);
    CHECK(f.dim == 3);
    CHECK(f.time_period() == 0.0);
}

TEST_CASE("shear2d formula") {
    const Flow f = make_flow("shear2d", {{"a", 2.0}, {"k", 3.0}});
    const double x[2] = {7.0, 0.4};
    CHECK(f.component(0, 1.0, x) == doctest::Approx(2.0 * std::sin(1.2)).epsilon(1e-15));
    CHECK(f.component(1, 1.0, x) == 0.0);
    CHECK(f.spatial_period(1) == doctest::Approx(2.0 * kPi / 3.0));
}

TEST_CASE("chaotic2d point value") {
    // v1 = sin(4 x2 + 1 + s) exp(cos(...)), v2 = cos(2 x1 + s) exp(sin(...)),
    // s = sin(2 pi t). At t = 1/4, x = 0: s = 1, so
    // v1 = sin(2) e^{cos 2}, v2 = cos(1) e^{sin 1}.
    const Flow f = make_flow("chaotic2d");
    const double x[2] = {0.0, 0.0};
    CHECK(f.component(0, 0.25, x) == doctest::Approx(0.5997574996927533).epsilon(1e-14));
    CHECK(f.component(1, 0.25, x) == doctest::Approx(1.2533807674934468).epsilon(1e-14));
    CHECK(f.spatial_period(0) == doctest::Approx(kPi));
    CHECK(f.spatial_period(1) == doctest::Approx(kPi / 2.0));
    CHECK(f.time_period() == 1.0);
}

TEST_CASE("kolmogorov3d point values") {
    const Flow f = make_flow("kolmogorov3d", {{"eps", 0.0}});
    const double x[3] = {kPi / 2.0, 0.0, 0.0};
    double v[3];
    f.velocity(0.0, x, v);
    CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v[2] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(f.time_period() == 0.0);  // eps = 0 makes it autonomous

    const Flow g = make_flow("kolmogorov3d", {{"eps", 0.5}});
    // At t with sin(2 pi t) = 1 the phase is eps.
    const double y[3] = {0.0, 0.0, 0.0};
    CHECK(g.component(0, 0.25, y) == doctest::Approx(std::sin(0.5)).epsilon(1e-14));
    CHECK(g.time_period() == 1.0);
}

TEST_CASE("abc3d point values") {
    const Flow f = make_flow("abc3d", {{"A", 1.0}, {"B", 1.0}, {"C", 1.0}, {"eps", 0.3}});
    const double x[3] = {0.0, 0.0, 0.0};
    double v[3];
    f.velocity(0.0, x, v);  // phase = 0 at t = 0
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v[2] == doctest::Approx(1.0).epsilon(1e-15));

    // Distinct coefficients route to the right terms:
    // v1 = A sin(x3+e) + C cos(x2+e).
    const Flow g = make_flow("abc3d", {{"A", 2.0}, {"B", 5.0}, {"C", 7.0}, {"eps", 0.0}});
    const double y[3] = {0.1, 0.2, 0.3};
    CHECK(g.component(0, 0.0, y) ==
          doctest::Approx(2.0 * std::sin(0.3) + 7.0 * std::cos(0.2)).epsilon(1e-14));
    CHECK(g.component(1, 0.0, y) ==
          doctest::Approx(5.0 * std::sin(0.1) + 2.0 * std::cos(0.3)).epsilon(1e-14));
    CHECK(g.component(2, 0.0, y) ==
          doctest::Approx(7.0 * std::sin(0.2) + 5.0 * std::cos(0.1)).epsilon(1e-14));
}

TEST_CASE("abc3d_omega phase and period") {
    const Flow f = make_flow("abc3d_omega", {{"omega", 0.5}});
    CHECK(f.time_period() == doctest::Approx(4.0 * kPi));
    // phase = sin(omega t); at t = pi, phase = sin(pi/2) = 1
    const double x[3] = {0.0, 0.0, 0.0};
    CHECK(f.component(0, kPi, x) == doctest::Approx(std::sin(1.0) + std::cos(1.0)).epsilon(1e-14));
}

TEST_CASE("spatial and temporal periodicity") {
    const auto flows = {make_flow("shear2d", {{"a", 1.5}, {"k", 2.0}}), make_flow("chaotic2d"),
                        make_flow("kolmogorov3d", {{"eps", 0.4}}),
                        make_flow("abc3d", {{"A", 1.0}, {"B", 0.7}, {"C", 0.3}, {"eps", 0.2}}),
                        make_flow("abc3d_omega", {{"omega", 0.25}})};
    for (const Flow& f : flows) {
        CAPTURE(f.name);
        const double t = 0.37;
        double x[3] = {0.31, -0.77, 1.9};
        double v0[3], v1[3];
        f.velocity(t, x, v0);
        for (int j = 0; j < f.dim; ++j) {
            double xs[3] = {x[0], x[1], x[2]};
            xs[j] += f.spatial_period(j);
            f.velocity(t, xs, v1);
            for (int i = 0; i < f.dim; ++i) CHECK(v1[i] == doctest::Approx(v0[i]).epsilon(1e-12));
        }
        if (f.time_period() > 0.0) {
            f.velocity(t + f.time_period(), x, v1);
            for (int i = 0; i < f.dim; ++i) CHECK(v1[i] == doctest::Approx(v0[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("catalog flows pass the structure checks") {
    const auto flows = {make_flow("zero"), make_flow("shear2d", {{"a", 1.0}, {"k", 2.0 * kPi}}),
                        make_flow("chaotic2d"), make_flow("kolmogorov3d", {{"eps", 0.1}}),
                        make_flow("abc3d", {{"eps", 0.1}}),
                        make_flow("abc3d_omega", {{"omega", 0.1}})};
    for (const Flow& f : flows) {
        CAPTURE(f.name);
        const StructureReport rep = check_structure(f, 100, 1e-4);
        CHECK(rep.max_abs_divergence < 1e-6);
        CHECK(rep.max_abs_diag_jacobian < 1e-6);
        CHECK(rep.max_abs_mean < 1e-8);
    }
}

TEST_CASE("structure checks catch violations") {
    Flow lin;
    lin.kind = FlowKind::test_linear;
    lin.dim = 2;
    lin.name = "test_linear";
    const StructureReport rep = check_structure(lin, 100, 1e-4);
    CHECK(rep.max_abs_divergence == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.max_abs_diag_jacobian == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.max_abs_mean > 0.1);

    Flow cst;
    cst.kind = FlowKind::test_constant;
    cst.dim = 3;
    cst.name = "test_constant";
    cst.A = 0.25;
    cst.B = 0.0;
    cst.C = 0.0;
    const StructureReport rep2 = check_structure(cst, 50, 1e-4);
    CHECK(rep2.max_abs_divergence < 1e-9);
    CHECK(rep2.max_abs_mean == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("make_flow rejects bad input") {
    CHECK_THROWS_AS(make_flow("vortex"), ConfigError);
    CHECK_THROWS_AS(make_flow("zero", {{"dim", 4}}), ConfigError);
    CHECK_THROWS_AS(make_flow("chaotic2d", {{"eps", 0.1}}), ConfigError);
    CHECK_THROWS_AS(make_flow("shear2d", {{"k", -1.0}}), ConfigError);
    CHECK_THROWS_AS(make_flow("shear2d", {{"omega", 1.0}}), ConfigError);
    CHECK_THROWS_AS(make_flow("abc3d", {{"omega", 1.0}}), ConfigError);
    CHECK_THROWS_AS(make_flow("abc3d_omega", {{"eps", 1.0}}), ConfigError);
    CHECK_THROWS_AS(make_flow("abc3d_omega", {{"omega", -2.0}}), ConfigError);
}
