#ifndef STRINGFLOW_SUGRA_HPP
#define STRINGFLOW_SUGRA_HPP

#include "stringflow/grid.hpp"

#include <array>
#include <utility>
#include <vector>

namespace sf {

// ---------------------------------------------------------------------------
// Membrane ODE

struct OdeState {
    double t = 0.0, v = 0.0, v1 = 0.0, v2 = 0.0;
};

/// v''' = -[ 7 v'' v + 14 (v')^2 + 2 v' (17 v^2 - 60) + 12 (v^2-4)(v^2-6) ].
double membrane_ode_rhs(const OdeState& s);

/// Constant solutions { -sqrt(6), -2, 2, sqrt(6) }.
std::vector<double> stationary_points();

struct OdeTrajectory {
    // rows: t, v, v', v'', per-step error estimate
    std::vector<std::array<double, 5>> rows;
    bool blew_up = false;
    double blowup_lo = 0.0, blowup_hi = 0.0;
    bool dt_underflow = false;
};

/// Adaptive RK4 with step-doubling (fixed_dt > 0 switches to fixed-step
/// mode for order studies). Aborts with a time bracket once |v| > 1e8.
OdeTrajectory integrate_ode(const OdeState& initial, double t_end, double tol,
                            double fixed_dt = 0.0);

// ---------------------------------------------------------------------------
// Algebra of the 11d field equations

/// (lambda_4 + c^2/3, lambda_7 - c^2/6) for Einstein constants Ric = lambda g.
std::pair<double, double> freund_rubin_residual(double l4, double l7, double c);

/// Dense antisymmetric 4-form at a point, dimension n.
class Form4 {
  public:
    int n = 0;
    std::vector<double> v; // full n^4 storage, antisymmetry maintained by set()
    explicit Form4(int n_ = 0) : n(n_), v(std::size_t(n_) * n_ * n_ * n_, 0.0) {}
    double get(int i, int k, int l, int m) const {
        return v[((std::size_t(i) * n + k) * n + l) * n + m];
    }
    /// Writes all 24 index permutations with the appropriate signs.
    void set(int i, int k, int l, int m, double value);
};

/// (F^2)_{ij} = (1/6) F_{iklm} F_j{}^{klm} and |F|^2 = (1/4!) F_{iklm}F^{iklm}
/// (the normalization fixed by the Freund-Rubin and flat-vacuum checks).
/// G is the n x n metric, row-major; returns the n x n symmetric tensor.
std::vector<double> f_squared(const Form4& F, const std::vector<double>& G,
                              double* f_norm2_out = nullptr);

// ---------------------------------------------------------------------------
// Warped ansatz g11 = e^{2A} g3 + g8, F = Vol3 ^ df

struct WarpedAnsatz {
    GridPtr grid;      // m = 4 (8 transverse coordinates), 3 active
    ScalarField A;     // warp factor
    ScalarField f;     // flux potential
    ScalarField mask;  // 1 = point included in residual norms
    // transverse metric is g8 = e^{-A} delta (flat gbar8 representative)
};

/// Manufactured membrane data: e^{-3A} = 1 + eps * (periodized dipole,
/// capped inside the core balls), f = e^{3A}. The mask keeps points whose
/// finite-difference stencils stay inside the harmonic region. When
/// coarse_mask_res > 0 the mask is further restricted to points on the
/// coarser sub-lattice so that resolutions share identical physical probes.
WarpedAnsatz duff_stelle_data(int res, double eps, int coarse_mask_res = 0);

/// L2 residual norms (masked) of R_ij = 1/2 (F^2)_ij - 1/6 |F|^2 G_ij and
/// d*F = 1/2 F^F (which reduces to sum_a d_a(e^{-6A} d_a f) here; F^F = 0).
/// The warped Ricci tensor is assembled from first and mixed second centered
/// differences of the metric entries, with products expanded analytically so
/// every stencil stays at +-1 spacing.
std::pair<double, double> sugra_field_residual(const WarpedAnsatz& a);

struct DuffStelleReport {
    bool flat_g3 = true;    // (a) by construction
    bool flat_gbar8 = true; // (b) implemented representative
    bool c_pass = false, d_pass = false;
    double c_residual = 0.0, d_residual = 0.0;
    double tol = 0.0;
};
/// (c) FD Laplacian of e^{-3A} with respect to flat gbar8, (d)
/// min over signs of ||df -/+ d(e^{3A})||, both masked L2.
DuffStelleReport duff_stelle_check(const WarpedAnsatz& a, double tol = 1e-9);

// ---------------------------------------------------------------------------
// Homogeneous reduction of the 11d flow (constant data)

struct HomogeneousState {
    int n = 11;
    int wv = 3; // worldvolume dimensions (p+1)
    std::vector<double> G;    // n x n symmetric, block diagonal wv/transverse
    std::vector<double> beta; // n-wv transverse components
    Form4 Psi;                // transverse 4-form, dimension n-wv
};

struct HomogeneousRates {
    std::vector<double> Gdot; // F^2 - (1/3)|F|^2 G (curvature vanishes)
    std::vector<double> betadot;
    Form4 Psidot;
    double f_norm2 = 0.0;
    double dstar_ff_norm = 0.0; // identically zero for constant data
};

/// Assembles F = Vol_wv ^ beta + Psi and returns the algebraic flow rates.
HomogeneousRates homogeneous_flow_rhs(const HomogeneousState& s);

/// Blow-up functional |G| + |beta| + |Psi| (sup norms of the coefficients).
double homogeneous_blowup_norm(const HomogeneousState& s);

} // namespace sf

#endif
