#ifndef STRINGFLOW_MONITORS_HPP
#define STRINGFLOW_MONITORS_HPP

#include "stringflow/geometry.hpp"

#include <map>
#include <string>
#include <utility>

namespace sf {

/// The flat reference Kahler form i sum_j dz^j ^ dzbar^j.
FormField flat_kahler_form(GridPtr g);

/// (1/(m! 2^m)) Int ||Omega||_g omega^{m-1} ^ gamma for a constant closed
/// (1,1)-form gamma. Errors if gamma is not constant or not (1,1).
double class_pairing(const MetricField& g, const FormField& gamma);

/// class_pairing against the flat Kahler form; flat identity metric in
/// m = 3 gives Vol/sqrt(6).
double conserved_volume(const MetricField& g);

struct FuYauBounds {
    double sup_eu = 0.0, inf_eu = 0.0, sup_t2 = 0.0, sup_alpha_ric = 0.0;
};
FuYauBounds fu_yau_bounds(const ScalarField& u, const MetricField& g,
                          double alpha_prime);

/// Pointwise eigen-floor of F^{p qbar} = g^{p qbar}
/// + alpha' ||Omega||^3 rho~^{p qbar} - (alpha'/2)(R g^{p qbar} - R^{p qbar});
/// rho~ is the supplied (1,1) datum with indices raised (null = zero).
/// Returns (min eigenvalue over all points, floor > 0).
std::pair<double, bool> parabolicity(const MetricField& g, double alpha_prime,
                                     const FormField* rho);

/// G = log Tr h - A (phi - mean_{chi_hat^n} phi) + B (det chi / det chi_hat)^2
/// with h = chi_hat^{-1} chi, chi = chi_hat + i del delbar phi.
ScalarField test_function_ma(const ScalarField& phi, const MetricField& chi_hat,
                             double A = 1.0, double B = 1.0);

/// G = (|alpha' Ric| + tau1) |grad Ric|^2 + (|T|^2 + tau2) |grad T|^2 with
/// full metric contractions (the same 1/2 weight as |T|^2 on torsion).
ScalarField test_function_fu_yau(const MetricField& g, double alpha_prime,
                                 double tau1 = 1.0, double tau2 = 1.0);

struct MonitorReport {
    double t = 0.0;
    std::map<std::string, double> values;
    std::map<std::string, bool> pass;
};

/// Structured breach event line.
std::string breach_line(const std::string& name, double t, double value,
                        double threshold);

} // namespace sf

#endif
