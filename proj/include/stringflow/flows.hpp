#ifndef STRINGFLOW_FLOWS_HPP
#define STRINGFLOW_FLOWS_HPP

#include "stringflow/geometry.hpp"
#include "stringflow/ode.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace sf {

// ---------------------------------------------------------------------------
// Right-hand sides

/// (m-1,m-1) rate i del delbar omega^{m-2} - alpha' * Phi. Phi may be null;
/// when present it must be a closed (m-1,m-1)-form.
FormField anomaly_rate_22(const MetricField& g, double alpha_prime,
                          const FormField* Phi);

/// Pointwise linearization of g -> ||Omega||_g g-form^{m-1} applied to gdot:
/// D[g](gdot) = ||Omega|| ( -1/2 tr(g^{-1} gdot) omega^{m-1}
///                          + (m-1) gdot-form ^ omega^{m-2} ).
FormField rate_map_forward(const MetricField& g, const HermTensorField& gdot);

/// Inverts rate_map_forward per point: assembles the real 2m^2 x m^2 system
/// over a Hermitian basis and solves it by least squares. Throws on a
/// singular linearization, reporting the point and condition number.
HermTensorField invert_rate_map(const MetricField& g, const FormField& rate22);

/// Direct (1,1) formulation of the anomaly flow rate, m >= 3, Phi = 0:
/// dg_{kbar j}/dt = 1/((m-1)||Omega||) { -Rt_{kbar j}
///   - 1/2 T_{kbar pq} Tbar_j^{pq} + T_{kbar js} taubar^s
///   + tau^{rbar} Tbar_{j kbar rbar} + tau_j taubar_{kbar}
///   + 1/(2(m-2)) (|T|^2 - 2|tau|^2) g_{kbar j} }.
HermTensorField anomaly_rhs_11(const MetricField& g);

/// m = 3 reduced bracket: -Rt_{kbar j} + g^{s rbar} g^{p qbar} T_{qbar s j}
/// Tbar_{p rbar kbar}, divided by the same (m-1)||Omega|| prefactor.
HermTensorField anomaly_rhs_11_simple(const MetricField& g);

/// d eta_{kbar j}/dt = -1/(m-1) ( Rt_{kbar j}(eta)
///                                + 1/2 T_{kbar pq}(eta) Tbar_j^{pq}(eta) ).
HermTensorField eta_rhs(const MetricField& eta);

/// chi_hat + i del delbar phi as a metric (the Hessian taken spectrally).
MetricField hessian_metric(const MetricField& chi_hat, const ScalarField& phi);

struct MaRhsResult {
    ScalarField rate;
    bool positive = true;
    std::size_t worst_point = 0;
    double min_eig = 0.0;
};
/// Pointwise e^{-f} det(chi_hat + Hess phi) / det(chi_hat). Positivity of
/// chi_hat + Hess phi is checked; loss is reported, not thrown.
MaRhsResult ma_flow_rhs(const ScalarField& phi, const MetricField& chi_hat,
                        const ScalarField& f);

struct FuYauData {
    MetricField chi_hat;           // base Kahler metric (m = 2)
    const FormField* rho = nullptr; // (1,1) datum, may be null
    const FormField* mu = nullptr;  // (2,2) datum, may be null
    double alpha_prime = 0.0;
    bool allow_nonparabolic = false;
};
/// Scalar rate of the base flow on omega_u = e^u chi_hat:
/// du/dt = -1/(2||Omega||) ( R/2 - |T|^2 - (alpha'/4) sigma_2(i Ric)
///          + 2 alpha' i del delbar(||Omega|| rho)/omega_u^2
///          - 2 mu/omega_u^2 ).
/// integrability_out, when non-null, receives the integral of the bracket
/// (vanishes at a stationary point; surfaced as a diagnostic).
ScalarField fu_yau_rhs(const ScalarField& u, const FuYauData& data,
                       double* integrability_out = nullptr);

/// sigma_2 of a Hermitian tensor a with respect to g:
/// 1/2 [ (tr_g a)^2 - tr((g^{-1} a)^2) ] pointwise.
ScalarField sigma2(const MetricField& g, const HermTensorField& a);

/// (2,2) rate i del delbar eta - rho_B (m = 3; rho_B closed (2,2)).
FormField iib_rhs(const MetricField& eta, const FormField& rho_B);

// ---------------------------------------------------------------------------
// Driver

enum class FlowKind { Anomaly, Eta, MA, FuYau, IIB };

enum class FlowTermination {
    Converged,
    TimeEnd,
    MaxSteps,
    DtUnderflow,
    PositivityLoss,
    ParabolicityLoss
};
const char* to_string(FlowTermination t);

struct FlowConfig {
    FlowKind kind = FlowKind::Anomaly;
    double alpha_prime = 0.0;
    double t_end = 1.0;
    long max_steps = 200000;
    double stop_tol = 1e-8;   // on the per-kind deviation norm
    int monitor_every = 10;   // accepted steps between monitor rows
    OdeOptions ode;
    /// Anomaly/IIB runs require balanced_residual(initial) below this.
    double balanced_tol = 1e-6;
    /// Anomaly formulation: false = invert_rate_map of the (m-1,m-1) rate
    /// (general), true = direct (1,1) rate (m >= 3, alpha' = 0 only).
    bool use_direct_11 = false;
    const FormField* Phi = nullptr;    // anomaly source
    const FormField* rho_B = nullptr;  // IIB source
    const FuYauData* fu_yau = nullptr;
    const MetricField* chi_hat = nullptr; // MA data
    const ScalarField* f = nullptr;       // MA data
    std::ostream* trajectory_csv = nullptr;
    /// Called at monitor cadence with the accepted state.
    std::function<void(long step, double t, const MetricField* g,
                       const ScalarField* s)>
        snapshot_hook;
};

struct FlowResult {
    FlowTermination reason = FlowTermination::TimeEnd;
    double t = 0.0;
    long steps = 0;
    double final_rhs_norm = 0.0;
    double initial_balanced = 0.0;
    double max_balanced = 0.0;
    double volume_initial = 0.0;
    double max_volume_drift = 0.0; // max |V - V0| over monitor checks
    double min_eig_seen = 0.0;
    std::string message;
    MetricField g;       // metric kinds
    ScalarField scalar;  // MA / Fu-Yau
};

double l2_norm(const HermTensorField& t);

/// Integrates the configured flow from the given initial data (exactly one
/// of g0/s0 per kind). Emits CSV rows
/// step,t,dt,rhs_norm,balanced_residual,conserved_volume,min_eig at monitor
/// cadence when a stream is configured.
FlowResult run_flow(const FlowConfig& cfg, const MetricField* g0,
                    const ScalarField* s0);

} // namespace sf

#endif
