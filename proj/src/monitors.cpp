#include "stringflow/monitors.hpp"
#include "stringflow/flows.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace sf {

FormField flat_kahler_form(GridPtr g) {
    FormField w(g, 1, 1);
    const int m = g->m;
    const cplx iu(0.0, 1.0);
    for (int j = 0; j < m; ++j) {
        cplx* c = w.comp(j * m + j);
        for (std::size_t pt = 0; pt < w.npoints(); ++pt) c[pt] = iu;
    }
    return w;
}

double class_pairing(const MetricField& g, const FormField& gamma) {
    const int m = g.m;
    if (gamma.p != 1 || gamma.q != 1)
        throw grid_error("class_pairing: gamma must be a (1,1)-form");
    for (int c = 0; c < gamma.ncomp; ++c) {
        const cplx v0 = gamma.at(c, 0);
        for (std::size_t pt = 1; pt < gamma.npoints(); ++pt)
            if (std::abs(gamma.at(c, pt) - v0) > 1e-12)
                throw grid_error("class_pairing: gamma must have constant coefficients");
    }
    ScalarField n = norm_omega(g);
    FormField w = omega_power(g, m - 1);
    for (int c = 0; c < w.ncomp; ++c) {
        cplx* dst = w.comp(c);
        for (std::size_t pt = 0; pt < w.npoints(); ++pt) dst[pt] *= n.v[pt].real();
    }
    FormField top = wedge(w, gamma);
    double mfact2m = 1.0;
    for (int i = 2; i <= m; ++i) mfact2m *= i;
    mfact2m *= std::pow(2.0, m);
    return integrate(top).real() / mfact2m;
}

double conserved_volume(const MetricField& g) {
    return class_pairing(g, flat_kahler_form(g.grid));
}

FuYauBounds fu_yau_bounds(const ScalarField& u, const MetricField& g,
                          double alpha_prime) {
    FuYauBounds b;
    b.sup_eu = -1e300;
    b.inf_eu = 1e300;
    for (const cplx& z : u.v) {
        double e = std::exp(z.real());
        b.sup_eu = std::max(b.sup_eu, e);
        b.inf_eu = std::min(b.inf_eu, e);
    }
    ScalarField t2 = torsion_norm2(g);
    b.sup_t2 = max_abs(t2);
    InverseMetricField gi = inverse(g);
    ScalarField rn = herm_tensor_norm2(chern_ricci_tilde(g), gi);
    double sup = 0.0;
    for (const cplx& z : rn.v)
        sup = std::max(sup, std::sqrt(std::max(0.0, z.real())));
    b.sup_alpha_ric = std::abs(alpha_prime) * sup;
    return b;
}

std::pair<double, bool> parabolicity(const MetricField& g, double alpha_prime,
                                     const FormField* rho) {
    const int m = g.m;
    InverseMetricField gi = inverse(g);
    ScalarField n = norm_omega(g);
    HermTensorField ric = chern_ricci_tilde(g);
    ScalarField R = scalar_curvature(ric, gi);
    double floor_ = 1e300;
    Eigen::MatrixXcd F(m, m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
    const cplx iu(0.0, 1.0);
    for (std::size_t pt = 0; pt < g.npoints(); ++pt) {
        for (int p = 0; p < m; ++p)
            for (int q = 0; q < m; ++q) {
                cplx v = gi.at(p, q, pt);
                // R^{p qbar} = g^{p kbar} Rt_{kbar j} g^{j qbar}
                cplx rup = 0.0;
                for (int k = 0; k < m; ++k)
                    for (int j = 0; j < m; ++j)
                        rup += gi.at(p, k, pt) * ric.at(k, j, pt) * gi.at(j, q, pt);
                v -= 0.5 * alpha_prime * (R.v[pt].real() * gi.at(p, q, pt) - rup);
                if (rho) {
                    cplx rhoup = 0.0;
                    for (int k = 0; k < m; ++k)
                        for (int j = 0; j < m; ++j)
                            rhoup += gi.at(p, k, pt) * (rho->at(j * m + k, pt) / iu) *
                                     gi.at(j, q, pt);
                    double nn = n.v[pt].real();
                    v += alpha_prime * nn * nn * nn * rhoup;
                }
                F(p, q) = v;
            }
        es.compute(0.5 * (F + F.adjoint()), Eigen::EigenvaluesOnly);
        floor_ = std::min(floor_, es.eigenvalues().minCoeff());
    }
    return {floor_, floor_ > 0.0};
}

ScalarField test_function_ma(const ScalarField& phi, const MetricField& chi_hat,
                             double A, double B) {
    const int m = chi_hat.m;
    MetricField chi = hessian_metric(chi_hat, phi);
    MetricCheckResult chk = check_metric(chi);
    if (!(chk.min_eigenvalue > 0))
        throw grid_error("test_function_ma: chi lost positivity");
    ScalarField dhat = det_field(chi_hat);
    ScalarField d = det_field(chi);
    // chi_hat^n-weighted mean of phi
    double wsum = 0.0, psum = 0.0;
    for (std::size_t pt = 0; pt < phi.size(); ++pt) {
        double w = dhat.v[pt].real();
        wsum += w;
        psum += w * phi.v[pt].real();
    }
    double mean = psum / wsum;
    InverseMetricField gih = inverse(chi_hat);
    ScalarField out(phi.grid, true);
    for (std::size_t pt = 0; pt < phi.size(); ++pt) {
        cplx trh = 0.0;
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                trh += gih.at(j, k, pt) * chi.at(k, j, pt);
        double ratio = d.v[pt].real() / dhat.v[pt].real();
        out.v[pt] = std::log(trh.real()) - A * (phi.v[pt].real() - mean) +
                    B * ratio * ratio;
    }
    return out;
}

namespace {

// |grad X|^2 for a Hermitian tensor: both (1,0) and (0,1) spectral
// derivatives of each component, all indices contracted with g.
ScalarField grad_herm_norm2(const HermTensorField& x, const MetricField& g,
                            const InverseMetricField& gi) {
    const int m = g.m;
    const std::size_t np = g.npoints();
    std::vector<HermTensorField> dz(m, HermTensorField(g.grid));
    std::vector<HermTensorField> dzb(m, HermTensorField(g.grid));
    for (int s = 0; s < m; ++s)
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j) {
                ScalarField comp(g.grid);
                for (std::size_t pt = 0; pt < np; ++pt)
                    comp.v[pt] = x.at(k, j, pt);
                ScalarField a = partial_z(comp, s);
                ScalarField b = partial_zbar(comp, s);
                for (std::size_t pt = 0; pt < np; ++pt) {
                    dz[s].at(k, j, pt) = a.v[pt];
                    dzb[s].at(k, j, pt) = b.v[pt];
                }
            }
    ScalarField out(g.grid, true);
    for (std::size_t pt = 0; pt < np; ++pt) {
        cplx acc = 0.0;
        for (int s = 0; s < m; ++s)
            for (int t = 0; t < m; ++t) {
                cplx w = gi.at(s, t, pt);
                cplx h1 = 0.0, h2 = 0.0;
                for (int j = 0; j < m; ++j)
                    for (int k = 0; k < m; ++k)
                        for (int a = 0; a < m; ++a)
                            for (int b = 0; b < m; ++b) {
                                cplx pair = gi.at(j, b, pt) * gi.at(a, k, pt);
                                h1 += pair * dz[s].at(k, j, pt) *
                                      std::conj(dz[t].at(b, a, pt));
                                h2 += pair * dzb[s].at(k, j, pt) *
                                      std::conj(dzb[t].at(b, a, pt));
                            }
                acc += w * (h1 + h2);
            }
        out.v[pt] = acc.real();
    }
    return out;
}

ScalarField grad_torsion_norm2(const FormField& T, const MetricField& g,
                               const InverseMetricField& gi) {
    const int m = g.m;
    const std::size_t np = g.npoints();
    std::vector<FormField> dz, dzb;
    for (int s = 0; s < m; ++s) {
        dz.push_back(partial_z(T, s));
        dzb.push_back(partial_zbar(T, s));
    }
    ScalarField out(g.grid, true);
    for (std::size_t pt = 0; pt < np; ++pt) {
        cplx acc = 0.0;
        for (int s = 0; s < m; ++s)
            for (int t = 0; t < m; ++t) {
                cplx w = gi.at(s, t, pt);
                cplx h = 0.0;
                for (int k = 0; k < m; ++k)
                    for (int j = 0; j < m; ++j)
                        for (int mm = 0; mm < m; ++mm)
                            for (int l = 0; l < m; ++l)
                                for (int p = 0; p < m; ++p)
                                    for (int q = 0; q < m; ++q) {
                                        cplx a = torsion_coeff(dz[s], k, j, mm, pt);
                                        cplx b = torsion_coeff(dz[t], l, p, q, pt);
                                        cplx c = torsion_coeff(dzb[s], k, j, mm, pt);
                                        cplx d = torsion_coeff(dzb[t], l, p, q, pt);
                                        cplx met = gi.at(l, k, pt) * gi.at(j, p, pt) *
                                                   gi.at(mm, q, pt);
                                        h += 0.5 * met *
                                             (a * std::conj(b) + c * std::conj(d));
                                    }
                acc += w * h;
            }
        out.v[pt] = acc.real();
    }
    return out;
}

} // namespace

ScalarField test_function_fu_yau(const MetricField& g, double alpha_prime,
                                 double tau1, double tau2) {
    InverseMetricField gi = inverse(g);
    HermTensorField ric = chern_ricci_tilde(g);
    FormField T = torsion(g);
    ScalarField ric_norm2 = herm_tensor_norm2(ric, gi);
    ScalarField t2 = torsion_norm2(T, gi);
    ScalarField grad_ric = grad_herm_norm2(ric, g, gi);
    ScalarField grad_t = grad_torsion_norm2(T, g, gi);
    ScalarField out(g.grid, true);
    for (std::size_t pt = 0; pt < g.npoints(); ++pt) {
        double aric = std::abs(alpha_prime) *
                      std::sqrt(std::max(0.0, ric_norm2.v[pt].real()));
        out.v[pt] = (aric + tau1) * grad_ric.v[pt].real() +
                    (t2.v[pt].real() + tau2) * grad_t.v[pt].real();
    }
    return out;
}

std::string breach_line(const std::string& name, double t, double value,
                        double threshold) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "MONITOR %s BREACH t=%.17g value=%.17g threshold=%.17g",
                  name.c_str(), t, value, threshold);
    return buf;
}

} // namespace sf
