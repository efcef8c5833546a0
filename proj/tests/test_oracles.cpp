#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stringflow/oracles.hpp"
#include "stringflow/flows.hpp"

#include <cmath>
#include <random>

using namespace sf;

namespace {
const double TAU = 2.0 * M_PI;

ScalarField sin_mode(GridPtr g, int d, int k, double amp) {
    ScalarField f(g, true);
    std::vector<int> idx;
    for (std::size_t pt = 0; pt < g->npoints; ++pt) {
        g->unflatten(pt, idx);
        double x = g->coord(idx, d) / g->periods[d];
        f.v[pt] = amp * std::sin(TAU * k * x);
    }
    return f;
}
} // namespace

TEST_CASE("brute_contract basics") {
    DenseTensor a({2, 2}), b({2, 2});
    a.at({0, 0}) = 1.0;
    a.at({0, 1}) = 2.0;
    a.at({1, 0}) = 3.0;
    a.at({1, 1}) = 4.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) b.at({i, j}) = (i == j) ? 1.0 : 0.0;

    // matrix product against the identity
    DenseTensor ab = brute_contract("ij,jk->ik", {&a, &b});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(ab.at({i, j}) == a.at({i, j}));

    // trace
    DenseTensor tr = brute_contract("ii->", {&a});
    CHECK(tr.at({}) == cplx(5.0));

    // transpose via relabeling
    DenseTensor at = brute_contract("ij->ji", {&a});
    CHECK(at.at({0, 1}) == cplx(3.0));
    CHECK(at.at({1, 0}) == cplx(2.0));

    // g^{jk} g_{kj} = m for an inverse pair
    DenseTensor g({2, 2}), gi({2, 2});
    g.at({0, 0}) = 2.0;
    g.at({1, 1}) = 5.0;
    g.at({0, 1}) = cplx(0.0, 1.0);
    g.at({1, 0}) = cplx(0.0, -1.0);
    cplx det = g.at({0, 0}) * g.at({1, 1}) - g.at({0, 1}) * g.at({1, 0});
    gi.at({0, 0}) = g.at({1, 1}) / det;
    gi.at({1, 1}) = g.at({0, 0}) / det;
    gi.at({0, 1}) = -g.at({0, 1}) / det;
    gi.at({1, 0}) = -g.at({1, 0}) / det;
    DenseTensor m = brute_contract("jk,kj->", {&gi, &g});
    CHECK(std::abs(m.at({}) - cplx(2.0)) < 1e-14);
}

TEST_CASE("brute_contract rejects malformed specs") {
    DenseTensor a({2, 2});
    CHECK_THROWS_AS(brute_contract("ij,jk->ik", {&a}), grid_error);
    DenseTensor b({3});
    CHECK_THROWS_AS(brute_contract("ij,j->i", {&a, &b}), grid_error);
    CHECK_THROWS_AS(brute_contract("i->i", {&a}), grid_error);
}

TEST_CASE("fd_derivative basics") {
    auto g = make_grid(1, 32, {0});
    ScalarField c(g, true);
    for (auto& z : c.v) z = -2.5;
    ScalarField dc = fd_derivative(c, 0);
    for (const cplx& z : dc.v) CHECK(std::abs(z) < 1e-14);

    // inactive dimension: derivative is zero
    ScalarField f = sin_mode(g, 0, 1, 1.0);
    ScalarField dy = fd_derivative(f, 1);
    for (const cplx& z : dy.v) CHECK(std::abs(z) < 1e-15);

    // convergence order 2 against the analytic derivative
    std::vector<double> errs;
    std::vector<int> idx;
    for (int cells : {4, 2, 1}) {
        ScalarField fd = fd_derivative(f, 0, cells);
        double e = 0.0;
        for (std::size_t pt = 0; pt < g->npoints; ++pt) {
            g->unflatten(pt, idx);
            double x = g->coord(idx, 0);
            e = std::max(e, std::abs(fd.v[pt] - TAU * std::cos(TAU * x)));
        }
        errs.push_back(e);
    }
    CHECK(std::log2(errs[0] / errs[1]) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(std::log2(errs[1] / errs[2]) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("newton_ma trivial and constant data") {
    auto g = make_grid(2, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    ScalarField zero(g, true);
    NewtonMaResult r = newton_ma(id, zero, 1e-12);
    CHECK(r.converged);
    CHECK(r.c == doctest::Approx(1.0));
    for (const cplx& z : r.phi.v) CHECK(std::abs(z) < 1e-11);

    // constant f: phi = 0, c = e^{-f}
    ScalarField fc(g, true);
    for (auto& z : fc.v) z = 0.8;
    NewtonMaResult r2 = newton_ma(id, fc, 1e-12);
    CHECK(r2.converged);
    CHECK(r2.c == doctest::Approx(std::exp(-0.8)));
    for (const cplx& z : r2.phi.v) CHECK(std::abs(z) < 1e-10);
}

TEST_CASE("newton_ma solves a single-mode source") {
    auto g = make_grid(2, 16, {0, 1});
    MetricField id = MetricField::identity(g);
    ScalarField f = sin_mode(g, 0, 1, 0.2);
    NewtonMaResult r = newton_ma(id, f, 1e-11);
    REQUIRE(r.converged);
    CHECK(r.residual < 1e-10);
    CHECK(std::abs(integrate(r.phi)) < 1e-10); // mean-zero gauge

    // the solution satisfies the equation: det(chi)/det(chi_hat) = c e^f
    MetricField chi = hessian_metric(id, r.phi);
    ScalarField d = det_field(chi);
    for (std::size_t pt = 0; pt < g->npoints; pt += 7)
        CHECK(std::abs(d.v[pt].real() -
                       r.c * std::exp(f.v[pt].real())) < 1e-9);
}

TEST_CASE("random data helpers produce admissible inputs") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    std::mt19937_64 rng(99);
    ScalarField s = random_bandlimited_scalar(g, rng, 0.5);
    CHECK(s.max_abs_imag() == 0.0);
    CHECK(max_abs(s) <= 0.5 * 9.0 + 1e-12); // bounded by amplitude * mode count

    MetricField gm = random_metric(g, rng, 0.1);
    MetricCheckResult chk = check_metric(gm);
    CHECK(chk.hermitian);
    CHECK(chk.positive());

    ScalarField u = random_bandlimited_scalar(g, rng, 0.2);
    MetricField fy = fu_yau_metric(g, u);
    CHECK(balanced_residual(fy) < 1e-12);
    for (std::size_t pt = 0; pt < g->npoints; pt += 31) {
        CHECK(std::abs(fy.at(2, 2, pt) - 1.0) < 1e-14);
        CHECK(std::abs(fy.at(0, 0, pt) - std::exp(u.v[pt].real())) < 1e-13);
        CHECK(std::abs(fy.at(0, 1, pt)) < 1e-14);
    }

    // determinism: the same seed reproduces the same draw
    std::mt19937_64 rng2(99);
    ScalarField s2 = random_bandlimited_scalar(g, rng2, 0.5);
    for (std::size_t pt = 0; pt < g->npoints; ++pt)
        CHECK(s2.v[pt] == s.v[pt]);
}

TEST_CASE("the verification registry passes end to end") {
    auto reports = run_verification(20260824, 10);
    REQUIRE(reports.size() >= 8);
    for (const auto& r : reports) {
        INFO(r.name, " max_dev=", r.max_dev, " order=", r.order);
        CHECK(r.pass);
    }
}
