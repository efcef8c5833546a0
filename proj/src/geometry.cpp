#include "stringflow/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace sf {

namespace {

using Mat = Eigen::MatrixXcd;

Mat point_matrix(const MetricField& g, std::size_t pt) {
    Mat M(g.m, g.m);
    for (int k = 0; k < g.m; ++k)
        for (int j = 0; j < g.m; ++j) M(k, j) = g.at(k, j, pt);
    return M;
}

} // namespace

MetricField MetricField::identity(GridPtr g) {
    MetricField out(std::move(g));
    for (int j = 0; j < out.m; ++j) {
        cplx* c = out.a.data() + (std::size_t(j) * out.m + j) * out.npoints();
        for (std::size_t i = 0; i < out.npoints(); ++i) c[i] = 1.0;
    }
    return out;
}

MetricField MetricField::conformal(const ScalarField& u) {
    MetricField out(u.grid);
    for (int j = 0; j < out.m; ++j) {
        cplx* c = out.a.data() + (std::size_t(j) * out.m + j) * out.npoints();
        for (std::size_t i = 0; i < out.npoints(); ++i) c[i] = std::exp(u.v[i].real());
    }
    return out;
}

FormField MetricField::to_form() const {
    FormField w(grid, 1, 1);
    const cplx iu(0.0, 1.0);
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < m; ++j) {
            // component (J={j}, K={k}) has rank j*m + k
            cplx* dst = w.comp(j * m + k);
            const cplx* src = a.data() + (std::size_t(k) * m + j) * npoints();
            for (std::size_t i = 0; i < npoints(); ++i) dst[i] = iu * src[i];
        }
    return w;
}

MetricField& MetricField::operator+=(const MetricField& o) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
    return *this;
}
MetricField& MetricField::operator-=(const MetricField& o) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= o.a[i];
    return *this;
}
MetricField& MetricField::operator*=(double s) {
    for (auto& z : a) z *= s;
    return *this;
}

MetricCheckResult check_metric(const MetricField& g, double herm_tol) {
    MetricCheckResult r;
    r.min_eigenvalue = std::numeric_limits<double>::infinity();
    double dev = 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es;
    for (std::size_t pt = 0; pt < g.npoints(); ++pt) {
        Mat M = point_matrix(g, pt);
        double d = (M - M.adjoint()).cwiseAbs().maxCoeff();
        if (d > dev) dev = d;
        es.compute(0.5 * (M + M.adjoint()), Eigen::EigenvaluesOnly);
        double lo = es.eigenvalues().minCoeff();
        if (lo < r.min_eigenvalue) {
            r.min_eigenvalue = lo;
            r.worst_point = pt;
        }
    }
    r.max_hermiticity_dev = dev;
    r.hermitian = dev <= herm_tol;
    return r;
}

InverseMetricField inverse(const MetricField& g) {
    InverseMetricField out;
    out.grid = g.grid;
    out.m = g.m;
    out.a.assign(g.a.size(), cplx(0.0));
    for (std::size_t pt = 0; pt < g.npoints(); ++pt) {
        Mat Mi = point_matrix(g, pt).inverse();
        for (int j = 0; j < g.m; ++j)
            for (int k = 0; k < g.m; ++k) out.at(j, k, pt) = Mi(j, k);
    }
    return out;
}

ScalarField det_field(const MetricField& g) {
    ScalarField out(g.grid, true);
    for (std::size_t pt = 0; pt < g.npoints(); ++pt)
        out.v[pt] = point_matrix(g, pt).determinant();
    return out;
}

ScalarField norm_omega(const MetricField& g) {
    ScalarField d = det_field(g);
    double mfact = 1.0;
    for (int i = 2; i <= g.m; ++i) mfact *= i;
    ScalarField out(g.grid, true);
    for (std::size_t i = 0; i < d.size(); ++i) {
        double dd = d.v[i].real();
        if (!(dd > 0)) throw grid_error("norm_omega: non-positive determinant");
        out.v[i] = 1.0 / std::sqrt(mfact * dd);
    }
    return out;
}

FormField omega_power(const MetricField& g, int k) {
    if (k < 0 || k > g.m) throw grid_error("omega_power: bad exponent");
    if (k == 0) {
        FormField one(g.grid, 0, 0);
        cplx* c = one.comp(0);
        for (std::size_t i = 0; i < one.npoints(); ++i) c[i] = 1.0;
        return one;
    }
    FormField w = g.to_form();
    FormField out = w;
    for (int i = 1; i < k; ++i) out = wedge(out, w);
    return out;
}

FormField torsion(const MetricField& g) {
    FormField T = del(g.to_form());
    T *= cplx(0.0, 1.0);
    return T;
}

cplx torsion_coeff(const FormField& T, int k, int j, int mm, std::size_t pt) {
    if (j == mm) return cplx(0.0);
    const int m = T.grid->m;
    int lo = std::min(j, mm), hi = std::max(j, mm);
    int rank = combo_rank(m, {lo, hi});
    cplx c = T.at(rank * m + k, pt);
    return (j < mm) ? c : -c;
}

FormField tau(const FormField& T, const InverseMetricField& gi) {
    const int m = T.grid->m;
    FormField out(T.grid, 1, 0);
    for (std::size_t pt = 0; pt < T.npoints(); ++pt)
        for (int l = 0; l < m; ++l) {
            cplx s = 0.0;
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k)
                    s += gi.at(j, k, pt) * torsion_coeff(T, k, j, l, pt);
            out.at(l, pt) = s;
        }
    return out;
}

FormField tau(const MetricField& g) { return tau(torsion(g), inverse(g)); }

// Shared pipeline: the curvature is assembled pointwise from the 2-jet of the
// metric (g, d_p g, d_qbar d_p g). Only metric entries are differentiated on
// the grid; products are expanded analytically first. This keeps algebraic
// identities between different curvature contractions exact to round-off,
// instead of holding only up to the band-limit of the sampled products.
namespace {

// d_p g_{kbar j}: m^2 component blocks, block index k*m+j.
std::vector<cplx> metric_deriv(const MetricField& g, int p) {
    const int m = g.m;
    const std::size_t np = g.npoints();
    std::vector<cplx> dg(g.a);
    for (int c = 0; c < m * m; ++c) {
        std::vector<cplx> tmp(dg.begin() + std::size_t(c) * np,
                              dg.begin() + std::size_t(c + 1) * np);
        std::vector<cplx> tmpy = tmp;
        spectral_partial_real(*g.grid, tmp.data(), 2 * p);
        spectral_partial_real(*g.grid, tmpy.data(), 2 * p + 1);
        cplx* dst = dg.data() + std::size_t(c) * np;
        for (std::size_t i = 0; i < np; ++i)
            dst[i] = 0.5 * (tmp[i] - cplx(0, 1) * tmpy[i]);
    }
    return dg;
}

std::vector<cplx> dbar_blocks(const LatticeGrid& grid, const std::vector<cplx>& E,
                              int ncomp, int q) {
    const std::size_t np = grid.npoints;
    std::vector<cplx> D(E.size());
    for (int c = 0; c < ncomp; ++c) {
        std::vector<cplx> tx(E.begin() + std::size_t(c) * np,
                             E.begin() + std::size_t(c + 1) * np);
        std::vector<cplx> ty = tx;
        spectral_partial_real(grid, tx.data(), 2 * q);
        spectral_partial_real(grid, ty.data(), 2 * q + 1);
        cplx* dst = D.data() + std::size_t(c) * np;
        for (std::size_t i = 0; i < np; ++i)
            dst[i] = 0.5 * (tx[i] + cplx(0, 1) * ty[i]);
    }
    return D;
}

} // namespace

CurvatureField chern_curvature(const MetricField& g) {
    const int m = g.m;
    const std::size_t np = g.npoints();
    InverseMetricField gi = inverse(g);
    std::vector<std::vector<cplx>> dg(m);
    for (int p = 0; p < m; ++p) dg[p] = metric_deriv(g, p);
    CurvatureField R;
    R.grid = g.grid;
    R.m = m;
    R.a.assign(std::size_t(m) * m * m * m * np, cplx(0.0));
    Mat Gi(m, m), DGp(m, m), DbGq(m, m), DD(m, m), A(m, m);
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q) {
            std::vector<cplx> dd = dbar_blocks(*g.grid, dg[p], m * m, q);
            for (std::size_t pt = 0; pt < np; ++pt) {
                for (int k = 0; k < m; ++k)
                    for (int j = 0; j < m; ++j) {
                        Gi(k, j) = gi.at(k, j, pt);
                        DGp(k, j) = dg[p][(std::size_t(k) * m + j) * np + pt];
                        // d_qbar g_{kbar j} = conj(d_q g_{jbar k})
                        DbGq(k, j) = std::conj(dg[q][(std::size_t(j) * m + k) * np + pt]);
                        DD(k, j) = dd[(std::size_t(k) * m + j) * np + pt];
                    }
                // -d_qbar(g^{-1} d_p g) expanded pointwise in the jet
                A = Gi * (DD - DbGq * Gi * DGp);
                for (int aa = 0; aa < m; ++aa)
                    for (int b = 0; b < m; ++b) R.at(q, p, aa, b, pt) = -A(aa, b);
            }
        }
    return R;
}

FormField CurvatureField::entry_form(int al, int be) const {
    FormField w(grid, 1, 1);
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q) {
            cplx* dst = w.comp(p * m + q); // (J={p},K={q})
            for (std::size_t pt = 0; pt < npoints(); ++pt)
                dst[pt] = at(q, p, al, be, pt);
        }
    return w;
}

HermTensorField chern_ricci_tilde(const MetricField& g) {
    const int m = g.m;
    const std::size_t np = g.npoints();
    InverseMetricField gi = inverse(g);
    std::vector<std::vector<cplx>> dg(m);
    for (int p = 0; p < m; ++p) dg[p] = metric_deriv(g, p);
    HermTensorField out(g.grid);
    Mat Gi(m, m), DGp(m, m), DbGq(m, m), DD(m, m), A(m, m);
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q) {
            std::vector<cplx> dd = dbar_blocks(*g.grid, dg[p], m * m, q);
            for (std::size_t pt = 0; pt < np; ++pt) {
                cplx w = gi.at(p, q, pt);
                for (int k = 0; k < m; ++k)
                    for (int j = 0; j < m; ++j) {
                        Gi(k, j) = gi.at(k, j, pt);
                        DGp(k, j) = dg[p][(std::size_t(k) * m + j) * np + pt];
                        DbGq(k, j) = std::conj(dg[q][(std::size_t(j) * m + k) * np + pt]);
                        DD(k, j) = dd[(std::size_t(k) * m + j) * np + pt];
                    }
                // -g^{p qbar} g_{kbar m} d_qbar (g^{m lbar} d_p g_{lbar j}),
                // the g g^{-1} pair cancelled analytically
                A = DD - DbGq * Gi * DGp;
                for (int k = 0; k < m; ++k)
                    for (int j = 0; j < m; ++j) out.at(k, j, pt) -= w * A(k, j);
            }
        }
    return out;
}

ScalarField scalar_curvature(const HermTensorField& ricci, const InverseMetricField& gi) {
    ScalarField out(ricci.grid, true);
    for (std::size_t pt = 0; pt < ricci.npoints(); ++pt) {
        cplx s = 0.0;
        for (int j = 0; j < ricci.m; ++j)
            for (int k = 0; k < ricci.m; ++k)
                s += gi.at(j, k, pt) * ricci.at(k, j, pt);
        out.v[pt] = s.real();
    }
    return out;
}

ScalarField scalar_curvature(const MetricField& g) {
    return scalar_curvature(chern_ricci_tilde(g), inverse(g));
}

ScalarField torsion_norm2(const FormField& T, const InverseMetricField& gi) {
    const int m = T.grid->m;
    ScalarField out(T.grid, true);
    for (std::size_t pt = 0; pt < T.npoints(); ++pt) {
        cplx s = 0.0;
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j)
                for (int mm = 0; mm < m; ++mm) {
                    cplx t = torsion_coeff(T, k, j, mm, pt);
                    if (t == cplx(0.0)) continue;
                    for (int l = 0; l < m; ++l)
                        for (int p = 0; p < m; ++p)
                            for (int q = 0; q < m; ++q)
                                s += 0.5 * t * std::conj(torsion_coeff(T, l, p, q, pt)) *
                                     gi.at(l, k, pt) * gi.at(j, p, pt) * gi.at(mm, q, pt);
                }
        out.v[pt] = s.real();
    }
    return out;
}

ScalarField torsion_norm2(const MetricField& g) {
    return torsion_norm2(torsion(g), inverse(g));
}

ScalarField tau_norm2(const FormField& tau1, const InverseMetricField& gi) {
    const int m = tau1.grid->m;
    ScalarField out(tau1.grid, true);
    for (std::size_t pt = 0; pt < tau1.npoints(); ++pt) {
        cplx s = 0.0;
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                s += gi.at(j, k, pt) * tau1.at(j, pt) * std::conj(tau1.at(k, pt));
        out.v[pt] = s.real();
    }
    return out;
}

ScalarField herm_tensor_norm2(const HermTensorField& t, const InverseMetricField& gi) {
    const int m = t.m;
    ScalarField out(t.grid, true);
    for (std::size_t pt = 0; pt < t.npoints(); ++pt) {
        // tr((G^{-1} T)^2) with row/col conventions matching g_{kbar j}
        cplx s = 0.0;
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                for (int p = 0; p < m; ++p)
                    for (int q = 0; q < m; ++q)
                        s += gi.at(j, k, pt) * t.at(k, p, pt) * gi.at(p, q, pt) *
                             t.at(q, j, pt);
        out.v[pt] = s.real();
    }
    return out;
}

FormField tr_rm_wedge_rm(const CurvatureField& R) {
    FormField out(R.grid, 2, 2);
    for (int aa = 0; aa < R.m; ++aa)
        for (int b = 0; b < R.m; ++b) {
            FormField term = wedge(R.entry_form(aa, b), R.entry_form(b, aa));
            out += term;
        }
    return out;
}

double d_closedness(const FormField& f) {
    double a = l2_norm(del(f));
    double b = l2_norm(delbar(f));
    return std::sqrt(a * a + b * b);
}

double balanced_residual(const MetricField& g) {
    ScalarField n = norm_omega(g);
    FormField w = omega_power(g, g.m - 1);
    for (int c = 0; c < w.ncomp; ++c) {
        cplx* dst = w.comp(c);
        for (std::size_t i = 0; i < w.npoints(); ++i) dst[i] *= n.v[i].real();
    }
    return d_closedness(w);
}

double balanced_residual_sq(const MetricField& g) {
    ScalarField n = norm_omega(g);
    FormField w = omega_power(g, g.m - 1);
    for (int c = 0; c < w.ncomp; ++c) {
        cplx* dst = w.comp(c);
        for (std::size_t i = 0; i < w.npoints(); ++i) {
            double nn = n.v[i].real();
            dst[i] *= nn * nn;
        }
    }
    return d_closedness(w);
}

std::pair<double, double> hs_residual(const MetricField& g, double alpha_prime,
                                      const FormField* Phi) {
    const int m = g.m;
    FormField r = del(delbar(g.to_form()));
    r *= cplx(0.0, 1.0);
    if (alpha_prime != 0.0) {
        if (m != 3)
            throw grid_error("hs_residual: alpha' curvature term requires m = 3");
        FormField rr = tr_rm_wedge_rm(chern_curvature(g));
        rr *= cplx(-alpha_prime / 4.0, 0.0);
        r += rr;
    }
    if (Phi) {
        if (Phi->p != m - 1 || Phi->q != m - 1)
            throw grid_error("hs_residual: Phi must be an (m-1,m-1)-form");
        double cd = d_closedness(*Phi);
        if (cd > 1e-6 * (1.0 + l2_norm(*Phi)))
            throw grid_error("hs_residual: Phi is not closed");
        r += *Phi;
    }
    return {l2_norm(r), balanced_residual(g)};
}

} // namespace sf
