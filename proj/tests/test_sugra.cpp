#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stringflow/sugra.hpp"
#include "stringflow/oracles.hpp"

#include <cmath>
#include <random>

using namespace sf;

TEST_CASE("membrane ODE right-hand side at reference points") {
    CHECK(membrane_ode_rhs({0.0, 2.0, 0.0, 0.0}) == 0.0);
    CHECK(membrane_ode_rhs({0.0, -2.0, 0.0, 0.0}) == 0.0);
    CHECK(membrane_ode_rhs({0.0, std::sqrt(6.0), 0.0, 0.0}) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(membrane_ode_rhs({0.0, 0.0, 0.0, 0.0}) == -288.0);

    auto sp = stationary_points();
    REQUIRE(sp.size() == 4);
    CHECK(sp[0] == doctest::Approx(-std::sqrt(6.0)));
    CHECK(sp[1] == -2.0);
    CHECK(sp[2] == 2.0);
    CHECK(sp[3] == doctest::Approx(std::sqrt(6.0)));
    for (double v : sp)
        CHECK(std::abs(membrane_ode_rhs({0.0, v, 0.0, 0.0})) < 1e-12);
}

TEST_CASE("stationary starts remain constant to round-off over [0,10]") {
    for (double v : stationary_points()) {
        OdeTrajectory tr = integrate_ode({0.0, v, 0.0, 0.0}, 10.0, 1e-10);
        REQUIRE(!tr.rows.empty());
        CHECK_FALSE(tr.blew_up);
        for (const auto& row : tr.rows) {
            CHECK(std::abs(row[1] - v) < 1e-12);
            CHECK(std::abs(row[2]) < 1e-12);
            CHECK(std::abs(row[3]) < 1e-12);
        }
        CHECK(tr.rows.back()[0] == doctest::Approx(10.0));
    }
}

TEST_CASE("fixed-step integration converges at fourth order") {
    const OdeState s0{0.0, 0.0, 0.0, 0.0};
    const double t_end = 0.25;
    auto final_v = [&](double dt) {
        OdeTrajectory tr = integrate_ode(s0, t_end, 1e-12, dt);
        REQUIRE(!tr.rows.empty());
        return tr.rows.back()[1];
    };
    double ref = final_v(1.0 / 16384.0);
    double e1 = std::abs(final_v(1.0 / 256.0) - ref);
    double e2 = std::abs(final_v(1.0 / 512.0) - ref);
    double e3 = std::abs(final_v(1.0 / 1024.0) - ref);
    double o1 = std::log2(e1 / e2);
    double o2 = std::log2(e2 / e3);
    CHECK(o1 == doctest::Approx(4.0).epsilon(0.05));
    CHECK(o2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("blow-up is detected and bracketed") {
    // a far-from-equilibrium start drives v to the magnitude guard
    OdeTrajectory tr = integrate_ode({0.0, -20.0, 0.0, 0.0}, 50.0, 1e-8);
    CHECK(tr.blew_up);
    CHECK(tr.blowup_hi > tr.blowup_lo);
    CHECK(tr.blowup_hi <= 50.0);
}

TEST_CASE("freund_rubin_residual closed form") {
    auto [a, b] = freund_rubin_residual(-4.0 / 3.0, 2.0 / 3.0, 2.0);
    CHECK(std::abs(a) < 1e-15);
    CHECK(std::abs(b) < 1e-15);
    auto [c, d] = freund_rubin_residual(0.0, 0.0, 3.0);
    CHECK(c == doctest::Approx(3.0));
    CHECK(d == doctest::Approx(-1.5));
}

TEST_CASE("Form4 antisymmetry bookkeeping") {
    Form4 F(5);
    F.set(0, 1, 2, 3, 2.5);
    CHECK(F.get(0, 1, 2, 3) == 2.5);
    CHECK(F.get(1, 0, 2, 3) == -2.5);
    CHECK(F.get(2, 3, 0, 1) == 2.5);
    CHECK(F.get(3, 1, 2, 0) == -2.5);
    CHECK(F.get(0, 1, 2, 4) == 0.0);
}

TEST_CASE("f_squared on a unit four-form block") {
    const int n = 11;
    Form4 F(n);
    F.set(0, 1, 2, 3, 1.0);
    std::vector<double> G(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) G[std::size_t(i) * n + i] = 1.0;
    double fn2 = 0.0;
    std::vector<double> f2 = f_squared(F, G, &fn2);
    CHECK(fn2 == doctest::Approx(1.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double expect = (i == j && i < 4) ? 1.0 : 0.0;
            CHECK(f2[std::size_t(i) * n + j] == doctest::Approx(expect));
        }
    // trace identity tr(F^2) = 4 |F|^2
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += f2[std::size_t(i) * n + i];
    CHECK(tr == doctest::Approx(4.0 * fn2));
}

TEST_CASE("f_squared against a brute-force einsum with a diagonal metric") {
    const int n = 5;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<> unif(-1.0, 1.0);
    Form4 F(n);
    const auto& c4 = combos(n, 4);
    for (const auto& c : c4) F.set(c[0], c[1], c[2], c[3], unif(rng));
    std::vector<double> G(std::size_t(n) * n, 0.0), Gi(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double d = 1.0 + 0.5 * unif(rng);
        G[std::size_t(i) * n + i] = d;
        Gi[std::size_t(i) * n + i] = 1.0 / d;
    }
    double fn2 = 0.0;
    std::vector<double> f2 = f_squared(F, G, &fn2);

    DenseTensor Ft({n, n, n, n}), Git({n, n});
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            Git.at({i, k}) = Gi[std::size_t(i) * n + k];
            for (int l = 0; l < n; ++l)
                for (int m = 0; m < n; ++m)
                    Ft.at({i, k, l, m}) = F.get(i, k, l, m);
        }
    DenseTensor ref =
        brute_contract("iklm,jabc,ka,lb,mc->ij", {&Ft, &Ft, &Git, &Git, &Git});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            CHECK(std::abs(f2[std::size_t(i) * n + j] -
                           ref.at({i, j}).real() / 6.0) < 1e-12);
    DenseTensor tr = brute_contract("iklm,jabc,ij,ka,lb,mc->",
                                    {&Ft, &Ft, &Git, &Git, &Git, &Git});
    CHECK(std::abs(fn2 - tr.at({}).real() / 24.0) < 1e-12);
}

TEST_CASE("warped ansatz: trivial data passes every field-equation check") {
    WarpedAnsatz a = duff_stelle_data(8, 0.0);
    auto [ein, flux] = sugra_field_residual(a);
    CHECK(ein < 1e-12);
    CHECK(flux < 1e-12);
    DuffStelleReport rep = duff_stelle_check(a, 1e-9);
    CHECK(rep.flat_g3);
    CHECK(rep.flat_gbar8);
    CHECK(rep.c_pass);
    CHECK(rep.d_pass);
}

TEST_CASE("warped ansatz: tiny-amplitude harmonic data is exact") {
    WarpedAnsatz a = duff_stelle_data(8, 1e-12);
    DuffStelleReport rep = duff_stelle_check(a, 1e-9);
    CHECK(rep.c_pass);
    CHECK(rep.d_pass);
    CHECK(rep.c_residual < 1e-9);
    CHECK(rep.d_residual < 1e-12);
}

TEST_CASE("warped ansatz: breaking f = e^{3A} is caught by check (d)") {
    WarpedAnsatz a = duff_stelle_data(8, 1e-12);
    std::vector<int> idx;
    const double TAU = 2.0 * M_PI;
    for (std::size_t pt = 0; pt < a.grid->npoints; ++pt) {
        a.grid->unflatten(pt, idx);
        double x = a.grid->coord(idx, 0) / a.grid->periods[0];
        a.f.v[pt] += 0.1 * std::sin(TAU * x);
    }
    DuffStelleReport rep = duff_stelle_check(a, 1e-9);
    CHECK(rep.c_pass);
    CHECK_FALSE(rep.d_pass);
}

TEST_CASE("field-equation residuals shrink at second order") {
    WarpedAnsatz a8 = duff_stelle_data(8, 1e-3, 8);
    WarpedAnsatz a16 = duff_stelle_data(16, 1e-3, 8);
    auto [e8, f8] = sugra_field_residual(a8);
    auto [e16, f16] = sugra_field_residual(a16);
    CHECK(std::log2(e8 / e16) == doctest::Approx(2.0).epsilon(0.2));
    CHECK(std::log2(f8 / f16) == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("homogeneous flow: zero flux is stationary") {
    HomogeneousState s;
    s.G.assign(11 * 11, 0.0);
    for (int i = 0; i < 11; ++i) s.G[std::size_t(i) * 11 + i] = 1.0;
    s.beta.assign(8, 0.0);
    s.Psi = Form4(8);
    HomogeneousRates r = homogeneous_flow_rhs(s);
    for (double v : r.Gdot) CHECK(v == 0.0);
    CHECK(r.f_norm2 == 0.0);
    CHECK(r.dstar_ff_norm == 0.0);
    CHECK(homogeneous_blowup_norm(s) == 1.0);
}

TEST_CASE("homogeneous flow: single transverse four-form component") {
    HomogeneousState s;
    s.G.assign(11 * 11, 0.0);
    for (int i = 0; i < 11; ++i) s.G[std::size_t(i) * 11 + i] = 1.0;
    s.beta.assign(8, 0.0);
    s.Psi = Form4(8);
    const double p = 0.7;
    s.Psi.set(0, 1, 2, 3, p); // transverse coords 3..6 of the 11d frame
    HomogeneousRates r = homogeneous_flow_rhs(s);
    CHECK(r.f_norm2 == doctest::Approx(p * p));
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            double expect = 0.0;
            if (i == j) expect = (i >= 3 && i <= 6) ? 2.0 * p * p / 3.0
                                                    : -p * p / 3.0;
            CHECK(r.Gdot[std::size_t(i) * 11 + j] == doctest::Approx(expect));
        }
    CHECK(r.dstar_ff_norm == 0.0);
}

TEST_CASE("homogeneous flow: worldvolume flux block") {
    HomogeneousState s;
    s.G.assign(11 * 11, 0.0);
    for (int i = 0; i < 11; ++i) s.G[std::size_t(i) * 11 + i] = 1.0;
    s.beta.assign(8, 0.0);
    s.Psi = Form4(8);
    const double b = 0.4;
    s.beta[1] = b; // F = Vol3 ^ b dx^{transverse 1} = b dx^{0123...} at coord 4
    HomogeneousRates r = homogeneous_flow_rhs(s);
    CHECK(r.f_norm2 == doctest::Approx(b * b));
    for (int i = 0; i < 11; ++i) {
        double expect = (i < 3 || i == 4) ? 2.0 * b * b / 3.0 : -b * b / 3.0;
        CHECK(r.Gdot[std::size_t(i) * 11 + i] == doctest::Approx(expect));
    }
    // off-diagonal rates vanish for this single-component flux
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j)
            if (i != j) CHECK(r.Gdot[std::size_t(i) * 11 + j] == 0.0);
    CHECK(homogeneous_blowup_norm(s) == 1.0);
}

TEST_CASE("homogeneous flow input validation") {
    HomogeneousState s;
    s.G.assign(11 * 11, 0.0);
    for (int i = 0; i < 11; ++i) s.G[std::size_t(i) * 11 + i] = 1.0;
    s.G[0 * 11 + 5] = 0.2; // couples worldvolume and transverse blocks
    s.beta.assign(8, 0.0);
    s.Psi = Form4(8);
    CHECK_THROWS_AS(homogeneous_flow_rhs(s), grid_error);
}
