#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stringflow/monitors.hpp"
#include "stringflow/flows.hpp"
#include "stringflow/oracles.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace sf;

namespace {
const double TAU = 2.0 * M_PI;

ScalarField cos_mode(GridPtr g, int d, int k, double amp) {
    ScalarField f(g, true);
    std::vector<int> idx;
    for (std::size_t pt = 0; pt < g->npoints; ++pt) {
        g->unflatten(pt, idx);
        double x = g->coord(idx, d) / g->periods[d];
        f.v[pt] = amp * std::cos(TAU * k * x);
    }
    return f;
}
} // namespace

TEST_CASE("conserved_volume of flat and scaled metrics") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    double v0 = conserved_volume(id);
    CHECK(v0 == doctest::Approx(g->volume() / std::sqrt(6.0)));

    MetricField lam = id;
    lam *= 1.9;
    // omega^{m-1} scales by lambda^2, ||Omega|| by lambda^{-3/2}
    CHECK(conserved_volume(lam) == doctest::Approx(std::sqrt(1.9) * v0));
}

TEST_CASE("class_pairing input validation and reference values") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);

    FormField flat = flat_kahler_form(g);
    CHECK(class_pairing(id, flat) == doctest::Approx(conserved_volume(id)));

    // constant off-diagonal (1,1) direction pairs to zero against a
    // diagonal metric
    FormField gamma(g, 1, 1);
    for (std::size_t pt = 0; pt < g->npoints; ++pt) {
        gamma.at(0 * 3 + 1, pt) = cplx(0.0, 0.7);
        gamma.at(1 * 3 + 0, pt) = cplx(0.0, 0.7);
    }
    CHECK(std::abs(class_pairing(id, gamma)) < 1e-13);

    std::mt19937_64 rng(3);
    ScalarField u = random_bandlimited_scalar(g, rng, 0.2);
    MetricField fy = fu_yau_metric(g, u);
    CHECK(std::abs(class_pairing(fy, gamma)) < 1e-12);

    // non-constant gamma is rejected
    FormField wob = flat_kahler_form(g);
    wob.at(0, 5) += 0.1;
    CHECK_THROWS_AS(class_pairing(id, wob), grid_error);

    // wrong degree is rejected
    FormField two(g, 2, 2);
    CHECK_THROWS_AS(class_pairing(id, two), grid_error);
}

TEST_CASE("class_pairing is a flow invariant on the Fu-Yau family") {
    // the pairing depends only on the mean of e^u (it is a cohomology
    // pairing); perturbing u at fixed mean leaves it unchanged
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    ScalarField u1 = cos_mode(g, 0, 1, 0.3);
    ScalarField u2 = cos_mode(g, 2, 1, 0.5);
    ScalarField e1(g, true), e2(g, true);
    // rescale so that mean(e^{u}) agree
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t pt = 0; pt < g->npoints; ++pt) {
        m1 += std::exp(u1.v[pt].real());
        m2 += std::exp(u2.v[pt].real());
    }
    ScalarField u2s(g, true);
    double shift = std::log(m1 / m2);
    for (std::size_t pt = 0; pt < g->npoints; ++pt)
        u2s.v[pt] = u2.v[pt].real() + shift;
    FormField flat = flat_kahler_form(g);
    double p1 = class_pairing(fu_yau_metric(g, u1), flat);
    double p2 = class_pairing(fu_yau_metric(g, u2s), flat);
    CHECK(p1 == doctest::Approx(p2).epsilon(1e-12));
}

TEST_CASE("fu_yau_bounds on reference data") {
    auto g = make_grid(2, 8, {0, 1, 2, 3});
    ScalarField u(g, true);
    for (auto& z : u.v) z = std::log(2.5);
    MetricField gu = MetricField::conformal(u);
    FuYauBounds b = fu_yau_bounds(u, gu, 0.0);
    CHECK(b.sup_eu == doctest::Approx(2.5));
    CHECK(b.inf_eu == doctest::Approx(2.5));
    CHECK(b.sup_t2 < 1e-12);
    CHECK(b.sup_alpha_ric < 1e-10);

    // single small mode: torsion bound scales like eps^2
    double sup_prev = 0.0;
    for (double eps : {0.2, 0.1}) {
        ScalarField ue = cos_mode(g, 0, 1, eps);
        MetricField ge = MetricField::conformal(ue);
        FuYauBounds be = fu_yau_bounds(ue, ge, 0.0);
        CHECK(be.sup_eu <= std::exp(eps) * (1 + 1e-12));
        if (sup_prev > 0.0)
            CHECK(sup_prev / be.sup_t2 == doctest::Approx(4.0).epsilon(0.15));
        sup_prev = be.sup_t2;
    }
}

TEST_CASE("parabolicity floor") {
    auto g = make_grid(2, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    auto [f0, ok0] = parabolicity(id, 0.37, nullptr);
    CHECK(ok0);
    CHECK(f0 == doctest::Approx(1.0)); // flat: F = g^{-1}

    // alpha' = 0: floor is the min eigenvalue of g^{-1}
    ScalarField u = cos_mode(g, 0, 1, 0.4);
    MetricField gu = MetricField::conformal(u);
    auto [f1, ok1] = parabolicity(gu, 0.0, nullptr);
    CHECK(ok1);
    double umax = 0.0;
    for (const cplx& z : u.v) umax = std::max(umax, z.real());
    CHECK(f1 == doctest::Approx(std::exp(-umax)));
}

TEST_CASE("test_function_ma reference values and gauge invariance") {
    auto g = make_grid(2, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    ScalarField zero(g, true);
    ScalarField G0 = test_function_ma(zero, id, 1.0, 1.0);
    for (const cplx& z : G0.v)
        CHECK(std::abs(z - (std::log(2.0) + 1.0)) < 1e-12);

    std::mt19937_64 rng(7);
    ScalarField phi = random_bandlimited_scalar(g, rng, 0.004);
    ScalarField Ga = test_function_ma(phi, id, 1.3, 0.4);
    ScalarField shifted = phi;
    for (auto& z : shifted.v) z += 0.77;
    ScalarField Gb = test_function_ma(shifted, id, 1.3, 0.4);
    for (std::size_t pt = 0; pt < g->npoints; ++pt)
        CHECK(std::abs(Ga.v[pt] - Gb.v[pt]) < 1e-11);
}

TEST_CASE("test_function_fu_yau is affine in the offsets") {
    auto g = make_grid(2, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    ScalarField flat = test_function_fu_yau(id, 0.01, 1.0, 1.0);
    for (const cplx& z : flat.v) CHECK(std::abs(z) < 1e-12);

    ScalarField u = cos_mode(g, 0, 1, 0.2);
    MetricField gu = MetricField::conformal(u);
    ScalarField g00 = test_function_fu_yau(gu, 0.05, 0.0, 0.0);
    ScalarField g10 = test_function_fu_yau(gu, 0.05, 1.0, 0.0);
    ScalarField g01 = test_function_fu_yau(gu, 0.05, 0.0, 1.0);
    ScalarField g11 = test_function_fu_yau(gu, 0.05, 1.0, 1.0);
    double sup = 0.0;
    for (const cplx& z : g11.v) sup = std::max(sup, std::abs(z));
    CHECK(sup > 0.0); // non-flat data actually registers
    for (std::size_t pt = 0; pt < g->npoints; pt += 17) {
        cplx lin = g10.v[pt] + g01.v[pt] - g00.v[pt];
        CHECK(std::abs(lin - g11.v[pt]) < 1e-11);
    }
}

TEST_CASE("breach_line format") {
    std::string s = breach_line("balanced", 0.25, 3.5e-5, 1e-6);
    CHECK(s.find("MONITOR balanced BREACH") == 0);
    CHECK(s.find("t=0.25") != std::string::npos);
    CHECK(s.find("threshold=") != std::string::npos);
}

TEST_CASE("monitors recompute identically after a dump/load round trip") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    std::mt19937_64 rng(9);
    ScalarField u = random_bandlimited_scalar(g, rng, 0.2);
    MetricField fy = fu_yau_metric(g, u);
    double v = conserved_volume(fy);
    double b = balanced_residual(fy);

    std::stringstream ss;
    dump_field(ss, fy.to_form(), true);
    FormField back = load_form(ss);
    MetricField g2(back.grid);
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
            for (std::size_t pt = 0; pt < back.grid->npoints; ++pt)
                g2.at(k, j, pt) = back.at(j * 3 + k, pt) / cplx(0.0, 1.0);
    CHECK(conserved_volume(g2) == v);
    CHECK(balanced_residual(g2) == b);
}
