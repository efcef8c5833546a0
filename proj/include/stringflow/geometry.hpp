#ifndef STRINGFLOW_GEOMETRY_HPP
#define STRINGFLOW_GEOMETRY_HPP

#include "stringflow/grid.hpp"

#include <optional>
#include <utility>

namespace sf {

/// Hermitian m x m matrix g_{kbar j} per lattice point (row index kbar
/// antiholomorphic, column j holomorphic). Storage is component-major like
/// FormField: component index k*m + j.
class MetricField {
  public:
    GridPtr grid;
    int m = 0;
    std::vector<cplx> a; // component-major, comp = k*m + j

    MetricField() = default;
    explicit MetricField(GridPtr g)
        : grid(std::move(g)), m(grid->m),
          a(std::size_t(m) * m * grid->npoints, cplx(0.0)) {}

    static MetricField identity(GridPtr g);
    /// e^u * identity (u real scalar field).
    static MetricField conformal(const ScalarField& u);

    std::size_t npoints() const { return grid->npoints; }
    cplx& at(int k, int j, std::size_t pt) {
        return a[(std::size_t(k) * m + j) * npoints() + pt];
    }
    const cplx& at(int k, int j, std::size_t pt) const {
        return a[(std::size_t(k) * m + j) * npoints() + pt];
    }

    /// omega = i g_{kbar j} dz^j ^ dzbar^k as a (1,1)-form.
    FormField to_form() const;

    MetricField& operator+=(const MetricField& o);
    MetricField& operator-=(const MetricField& o);
    MetricField& operator*=(double s);
};

/// Same storage as MetricField but no positivity requirement; used for
/// Hermitian tensors (Chern-Ricci, flow rates).
using HermTensorField = MetricField;

struct MetricCheckResult {
    bool hermitian = false;
    double max_hermiticity_dev = 0.0;
    double min_eigenvalue = 0.0;
    std::size_t worst_point = 0;
    bool positive(double floor_ = 1e-10) const {
        return hermitian && min_eigenvalue > floor_;
    }
};
MetricCheckResult check_metric(const MetricField& g, double herm_tol = 1e-9);

/// Pointwise inverse g^{j kbar}, stored with comp index j*m + k.
class InverseMetricField {
  public:
    GridPtr grid;
    int m = 0;
    std::vector<cplx> a;
    std::size_t npoints() const { return grid->npoints; }
    cplx& at(int j, int k, std::size_t pt) {
        return a[(std::size_t(j) * m + k) * npoints() + pt];
    }
    const cplx& at(int j, int k, std::size_t pt) const {
        return a[(std::size_t(j) * m + k) * npoints() + pt];
    }
};
InverseMetricField inverse(const MetricField& g);

ScalarField det_field(const MetricField& g);

/// ||Omega||_omega for Omega = dz^1 ^ ... ^ dz^m, i.e. (m! det g)^{-1/2}
/// under the convention i^{m^2} Omega ^ conj(Omega) = ||Omega||^2 omega^m.
ScalarField norm_omega(const MetricField& g);

/// omega^k by repeated wedge.
FormField omega_power(const MetricField& g, int k);

/// Torsion T = i del omega as a (2,1)-form. The coefficient of
/// dz^j ^ dz^m ^ dzbar^k (j<m) is T_{kbar j m} = d_m g_{kbar j} - d_j g_{kbar m}.
FormField torsion(const MetricField& g);

/// Accessor into a (2,1) torsion form with antisymmetry implied.
cplx torsion_coeff(const FormField& T, int k, int j, int mm, std::size_t pt);

/// tau_l = g^{j kbar} T_{kbar j l}, a (1,0)-form.
FormField tau(const MetricField& g);
FormField tau(const FormField& T, const InverseMetricField& gi);

/// Chern curvature R_{qbar p}{}^a{}_b = -d_qbar( g^{a lbar} d_p g_{lbar b} ).
class CurvatureField {
  public:
    GridPtr grid;
    int m = 0;
    std::vector<cplx> a; // comp index ((q*m+p)*m+alpha)*m+beta
    std::size_t npoints() const { return grid->npoints; }
    cplx& at(int q, int p, int al, int be, std::size_t pt) {
        return a[((std::size_t(q) * m + p) * m + std::size_t(al)) * m * npoints() +
                 std::size_t(be) * npoints() + pt];
    }
    const cplx& at(int q, int p, int al, int be, std::size_t pt) const {
        return a[((std::size_t(q) * m + p) * m + std::size_t(al)) * m * npoints() +
                 std::size_t(be) * npoints() + pt];
    }
    /// The endomorphism entry (a,b) as a (1,1)-form R^a{}_b.
    FormField entry_form(int al, int be) const;
};
CurvatureField chern_curvature(const MetricField& g);

/// Chern-Ricci tensor Rt_{kbar j} = g^{p qbar} R_{qbar p kbar j}, computed
/// directly (not through chern_curvature).
HermTensorField chern_ricci_tilde(const MetricField& g);

/// Scalar Chern curvature R = g^{j kbar} Rt_{kbar j} (real).
ScalarField scalar_curvature(const MetricField& g);
ScalarField scalar_curvature(const HermTensorField& ricci, const InverseMetricField& gi);

/// |T|^2 = (1/2) sum T_{kbar j m} conj(T_{lbar p q}) g^{l kbar} g^{j pbar} g^{m qbar}.
ScalarField torsion_norm2(const MetricField& g);
ScalarField torsion_norm2(const FormField& T, const InverseMetricField& gi);
/// |tau|^2 = g^{j kbar} tau_j conj(tau_k).
ScalarField tau_norm2(const FormField& tau1, const InverseMetricField& gi);

/// Full contraction norm |Rt|^2 = g^{j bbar} g^{a kbar} Rt_{kbar j} conj(Rt_{bbar a}).
ScalarField herm_tensor_norm2(const HermTensorField& t, const InverseMetricField& gi);

/// Tr(Rm ^ Rm) = sum_{a,b} R^a{}_b ^ R^b{}_a, a (2,2)-form (m = 3 only in
/// the alpha' terms of the flows, but defined for any m).
FormField tr_rm_wedge_rm(const CurvatureField& R);

/// L2 norm of d( ||Omega||_omega omega^{m-1} ).
double balanced_residual(const MetricField& g);
/// Variant with the squared norm, d( ||Omega||^2 omega^{m-1} ).
double balanced_residual_sq(const MetricField& g);

/// Metric-sector residuals of the coupled system: L2 norm of
/// i del delbar omega - (alpha'/4) Tr(Rm ^ Rm) + Phi, and the
/// conformally-balanced residual. Phi may be null (treated as zero) and must
/// be a closed (m-1,m-1)-form.
std::pair<double, double> hs_residual(const MetricField& g, double alpha_prime,
                                      const FormField* Phi);

/// d-closedness defect of a (p,q)-form: sqrt(|del f|^2 + |delbar f|^2) in L2.
double d_closedness(const FormField& f);

} // namespace sf

#endif
