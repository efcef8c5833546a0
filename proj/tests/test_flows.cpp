#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

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

MetricField kahler_hess_metric(GridPtr g, const ScalarField& phi) {
    MetricField out = MetricField::identity(g);
    for (int k = 0; k < g->m; ++k)
        for (int j = 0; j < g->m; ++j) {
            ScalarField h = partial_zbar(partial_z(phi, j), k);
            for (std::size_t pt = 0; pt < g->npoints; ++pt)
                out.at(k, j, pt) += h.v[pt];
        }
    return out;
}

double max_abs(const HermTensorField& t) {
    double s = 0.0;
    for (const cplx& z : t.a) s = std::max(s, std::abs(z));
    return s;
}

double max_abs_diff(const HermTensorField& a, const HermTensorField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.a.size(); ++i)
        s = std::max(s, std::abs(a.a[i] - b.a[i]));
    return s;
}
} // namespace

TEST_CASE("anomaly_rate_22 vanishes on flat and Kahler metrics") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    FormField r0 = anomaly_rate_22(id, 0.0, nullptr);
    for (const cplx& z : r0.data) CHECK(std::abs(z) < 1e-13);

    std::mt19937_64 rng(7);
    ScalarField phi = random_bandlimited_scalar(g, rng, 0.01);
    MetricField kah = kahler_hess_metric(g, phi);
    FormField rk = anomaly_rate_22(kah, 0.0, nullptr);
    for (const cplx& z : rk.data) CHECK(std::abs(z) < 1e-10);
}

TEST_CASE("anomaly_rate_22 rejects a non-closed Phi") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    std::mt19937_64 rng(11);
    FormField bad(g, 2, 2);
    for (int c = 0; c < bad.ncomp; ++c)
        for (std::size_t pt = 0; pt < g->npoints; ++pt)
            bad.at(c, pt) = random_bandlimited_scalar(g, rng, 1.0).v[pt];
    CHECK_THROWS_AS(anomaly_rate_22(id, 0.01, &bad), grid_error);
}

TEST_CASE("invert_rate_map round trip") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    std::mt19937_64 rng(13);
    MetricField gm = random_metric(g, rng, 0.05);

    // zero rate inverts to zero
    FormField zero(g, 2, 2);
    HermTensorField x0 = invert_rate_map(gm, zero);
    CHECK(max_abs(x0) < 1e-12);

    // forward-then-invert recovers a random Hermitian perturbation
    HermTensorField gd(g);
    for (std::size_t pt = 0; pt < g->npoints; ++pt)
        for (int k = 0; k < 3; ++k)
            for (int j = k; j < 3; ++j) {
                cplx z(std::uniform_real_distribution<>(-1, 1)(rng),
                       k == j ? 0.0 : std::uniform_real_distribution<>(-1, 1)(rng));
                gd.at(k, j, pt) = z;
                gd.at(j, k, pt) = std::conj(z);
            }
    FormField fwd = rate_map_forward(gm, gd);
    HermTensorField back = invert_rate_map(gm, fwd);
    CHECK(max_abs_diff(back, gd) < 1e-10);
}

TEST_CASE("the (1,1) and (2,2) anomaly formulations agree") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    std::mt19937_64 rng(5);
    for (int it = 0; it < 3; ++it) {
        ScalarField u = random_bandlimited_scalar(g, rng, 0.15);
        MetricField gm = fu_yau_metric(g, u);
        REQUIRE(balanced_residual(gm) < 1e-10);
        HermTensorField r22 =
            invert_rate_map(gm, anomaly_rate_22(gm, 0.0, nullptr));
        HermTensorField r11 = anomaly_rhs_11(gm);
        HermTensorField rs = anomaly_rhs_11_simple(gm);
        double scale = max_abs(r22);
        CHECK(scale > 1e-3); // non-trivial data
        CHECK(max_abs_diff(r11, r22) < 1e-9);
        CHECK(max_abs_diff(rs, r11) < 1e-9);
    }
}

TEST_CASE("anomaly_rhs_11 on flat and Kahler metrics") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    CHECK(max_abs(anomaly_rhs_11(id)) < 1e-13);

    // Kahler: torsion terms drop, leaving -Rt / ((m-1)||Omega||)
    std::mt19937_64 rng(19);
    ScalarField phi = random_bandlimited_scalar(g, rng, 0.01);
    MetricField kah = kahler_hess_metric(g, phi);
    HermTensorField rhs = anomaly_rhs_11(kah);
    HermTensorField ric = chern_ricci_tilde(kah);
    ScalarField n = norm_omega(kah);
    for (std::size_t pt = 0; pt < g->npoints; pt += 97)
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) {
                cplx expect = -ric.at(k, j, pt) / (2.0 * n.v[pt].real());
                CHECK(std::abs(rhs.at(k, j, pt) - expect) < 1e-8);
            }
}

TEST_CASE("eta_rhs reference values") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    CHECK(max_abs(eta_rhs(id)) < 1e-13);

    // Kahler eta: -Rt / (m-1), no ||Omega|| prefactor
    std::mt19937_64 rng(23);
    ScalarField phi = random_bandlimited_scalar(g, rng, 0.01);
    MetricField kah = kahler_hess_metric(g, phi);
    HermTensorField rhs = eta_rhs(kah);
    HermTensorField ric = chern_ricci_tilde(kah);
    for (std::size_t pt = 0; pt < g->npoints; pt += 97)
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j)
                CHECK(std::abs(rhs.at(k, j, pt) + ric.at(k, j, pt) / 2.0) < 1e-9);

    // general metric: manual contraction of the torsion-square term
    MetricField gm = random_metric(g, rng, 0.05);
    HermTensorField r2 = eta_rhs(gm);
    HermTensorField ric2 = chern_ricci_tilde(gm);
    InverseMetricField gi = inverse(gm);
    FormField T = torsion(gm);
    for (std::size_t pt = 0; pt < g->npoints; pt += 211)
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) {
                cplx tt = 0.0;
                for (int p = 0; p < 3; ++p)
                    for (int q = 0; q < 3; ++q)
                        for (int a = 0; a < 3; ++a)
                            for (int b = 0; b < 3; ++b)
                                tt += torsion_coeff(T, k, p, q, pt) *
                                      std::conj(torsion_coeff(T, j, a, b, pt)) *
                                      gi.at(p, a, pt) * gi.at(q, b, pt);
                cplx expect = -(ric2.at(k, j, pt) + 0.5 * tt) / 2.0;
                CHECK(std::abs(r2.at(k, j, pt) - expect) < 1e-11);
            }
}

TEST_CASE("ma_flow_rhs pointwise values") {
    auto g = make_grid(2, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    ScalarField zero(g, true);
    MaRhsResult r = ma_flow_rhs(zero, id, zero);
    CHECK(r.positive);
    for (const cplx& z : r.rate.v) CHECK(std::abs(z - 1.0) < 1e-13);

    // constant phi, arbitrary f: rate = e^{-f}
    ScalarField f = cos_mode(g, 1, 1, 0.4);
    MaRhsResult r2 = ma_flow_rhs(zero, id, f);
    for (std::size_t pt = 0; pt < g->npoints; ++pt)
        CHECK(std::abs(r2.rate.v[pt] - std::exp(-f.v[pt].real())) < 1e-12);

    // single-mode phi against a pointwise 2x2 determinant oracle
    ScalarField phi = cos_mode(g, 0, 1, 0.02);
    MaRhsResult r3 = ma_flow_rhs(phi, id, zero);
    std::vector<ScalarField> hess;
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j) hess.push_back(partial_zbar(partial_z(phi, j), k));
    for (std::size_t pt = 0; pt < g->npoints; pt += 31) {
        cplx a = 1.0 + hess[0].v[pt], b = hess[1].v[pt];
        cplx c = hess[2].v[pt], d = 1.0 + hess[3].v[pt];
        CHECK(std::abs(r3.rate.v[pt] - (a * d - b * c)) < 1e-12);
    }

    // positivity loss is reported, not thrown
    ScalarField big = cos_mode(g, 0, 1, 1.0);
    MaRhsResult r4 = ma_flow_rhs(big, id, zero);
    CHECK_FALSE(r4.positive);
    CHECK(r4.min_eig < 0.0);
}

TEST_CASE("fu_yau_rhs matches the general anomaly flow on the ansatz") {
    auto g3 = make_grid(3, 8, {0, 1, 2, 3});
    auto g2 = make_grid(2, 8, {0, 1, 2, 3});
    std::mt19937_64 rng(5);
    ScalarField u3 = random_bandlimited_scalar(g3, rng, 0.15);
    ScalarField u2(g2, true);
    for (std::size_t pt = 0; pt < g2->npoints; ++pt) u2.v[pt] = u3.v[pt];

    MetricField gm = fu_yau_metric(g3, u3);
    HermTensorField r22 = invert_rate_map(gm, anomaly_rate_22(gm, 0.0, nullptr));
    FuYauData data;
    data.chi_hat = MetricField::identity(g2);
    double integ = 1.0;
    ScalarField udot = fu_yau_rhs(u2, data, &integ);
    for (std::size_t pt = 0; pt < g2->npoints; ++pt) {
        // d/dt (e^u chi_hat) = udot e^u chi_hat on the base block
        cplx lhs = r22.at(0, 0, pt) * std::exp(-u3.v[pt].real());
        CHECK(std::abs(lhs - udot.v[pt]) < 1e-11);
        CHECK(std::abs(r22.at(2, 2, pt)) < 1e-11); // fiber is frozen
        CHECK(std::abs(r22.at(0, 1, pt)) < 1e-11);
    }
    // the diagnostic is the integral of the bracket = -2 ||Omega|| * rate
    ScalarField prod(g2, true);
    for (std::size_t pt = 0; pt < g2->npoints; ++pt)
        prod.v[pt] = -2.0 * std::exp(-u2.v[pt].real()) / std::sqrt(6.0) *
                     udot.v[pt].real();
    CHECK(std::abs(integ - integrate(prod).real()) < 1e-10);

    ScalarField uc(g2, true);
    for (auto& z : uc.v) z = 0.37;
    ScalarField rc = fu_yau_rhs(uc, data);
    for (const cplx& z : rc.v) CHECK(std::abs(z) < 1e-13);
}

TEST_CASE("sigma2 of a diagonal tensor") {
    auto g = make_grid(2, 4, {0, 1});
    MetricField id = MetricField::identity(g);
    HermTensorField a(g);
    for (std::size_t pt = 0; pt < g->npoints; ++pt) {
        a.at(0, 0, pt) = 3.0;
        a.at(1, 1, pt) = 5.0;
    }
    ScalarField s = sigma2(id, a);
    for (const cplx& z : s.v) CHECK(std::abs(z - 15.0) < 1e-13);
}

TEST_CASE("iib_rhs reference values") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    FormField zero(g, 2, 2);
    FormField r0 = iib_rhs(id, zero);
    for (const cplx& z : r0.data) CHECK(std::abs(z) < 1e-13);

    // flat eta with a manufactured closed source: rate = -rho_B
    std::mt19937_64 rng(29);
    ScalarField u = random_bandlimited_scalar(g, rng, 0.1);
    MetricField target = fu_yau_metric(g, u);
    FormField rho(g, 2, 2);
    {
        FormField ddb = del(delbar(target.to_form()));
        for (std::size_t i = 0; i < rho.data.size(); ++i)
            rho.data[i] = cplx(0.0, 1.0) * ddb.data[i];
    }
    REQUIRE(d_closedness(rho) < 1e-11);
    FormField r1 = iib_rhs(id, rho);
    for (std::size_t i = 0; i < r1.data.size(); ++i)
        CHECK(std::abs(r1.data[i] + rho.data[i]) < 1e-12);

    // the manufactured target itself is stationary
    FormField r2 = iib_rhs(target, rho);
    for (const cplx& z : r2.data) CHECK(std::abs(z) < 1e-11);
}

TEST_CASE("hessian_metric produces a d-closed Kahler form") {
    auto g = make_grid(2, 8, {0, 1, 2, 3});
    std::mt19937_64 rng(31);
    ScalarField phi = random_bandlimited_scalar(g, rng, 0.02);
    MetricField chi = hessian_metric(MetricField::identity(g), phi);
    CHECK(d_closedness(chi.to_form()) < 1e-12);
    CHECK(check_metric(chi).positive());
}

TEST_CASE("run_flow: flat anomaly data is already stationary") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    MetricField id = MetricField::identity(g);
    FlowConfig cfg;
    cfg.kind = FlowKind::Anomaly;
    cfg.t_end = 0.5;
    cfg.stop_tol = 1e-10;
    FlowResult res = run_flow(cfg, &id, nullptr);
    CHECK(res.reason == FlowTermination::Converged);
    CHECK(res.steps <= 1);
    CHECK(res.final_rhs_norm < 1e-10);
}

TEST_CASE("run_flow: MA with f = 0 stays at phi = 0 via the mean gauge") {
    auto g = make_grid(2, 8, {0, 1});
    MetricField id = MetricField::identity(g);
    ScalarField f0(g, true), phi0(g, true);
    FlowConfig cfg;
    cfg.kind = FlowKind::MA;
    cfg.chi_hat = &id;
    cfg.f = &f0;
    cfg.t_end = 0.2;
    cfg.stop_tol = 1e-10;
    FlowResult res = run_flow(cfg, nullptr, &phi0);
    CHECK(res.reason == FlowTermination::Converged);
    for (const cplx& z : res.scalar.v) CHECK(std::abs(z) < 1e-10);
}

TEST_CASE("run_flow: small anomaly run preserves the balanced condition") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    std::mt19937_64 rng(37);
    ScalarField u = random_bandlimited_scalar(g, rng, 0.1);
    MetricField gm = fu_yau_metric(g, u);
    double b0 = balanced_residual(gm);
    REQUIRE(b0 < 1e-10);

    FlowConfig cfg;
    cfg.kind = FlowKind::Anomaly;
    cfg.use_direct_11 = true;
    cfg.t_end = 0.02;
    cfg.stop_tol = 0.0; // run to t_end
    cfg.monitor_every = 2;
    std::ostringstream csv;
    cfg.trajectory_csv = &csv;
    FlowResult res = run_flow(cfg, &gm, nullptr);
    CHECK(res.reason == FlowTermination::TimeEnd);
    CHECK(res.max_balanced < 1e-8);
    CHECK(res.max_volume_drift < 1e-8 * res.volume_initial);
    CHECK(res.min_eig_seen > 0.0);
    // CSV header plus at least one monitor row
    std::string s = csv.str();
    CHECK(s.find("step,t,dt,rhs_norm") != std::string::npos);
    CHECK(std::count(s.begin(), s.end(), '\n') >= 2);
}

TEST_CASE("run_flow rejects an unbalanced anomaly start") {
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    std::mt19937_64 rng(41);
    ScalarField u = random_bandlimited_scalar(g, rng, 0.3);
    MetricField gc = MetricField::conformal(u); // not conformally balanced
    FlowConfig cfg;
    cfg.kind = FlowKind::Anomaly;
    cfg.balanced_tol = 1e-6;
    CHECK_THROWS_AS(run_flow(cfg, &gc, nullptr), grid_error);
}
