#ifndef STRINGFLOW_ORACLES_HPP
#define STRINGFLOW_ORACLES_HPP

#include "stringflow/geometry.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sf {

// ---------------------------------------------------------------------------
// Naive reference computations (slow by design, test/verify use only).

/// Dense complex tensor with arbitrary rank, row-major.
struct DenseTensor {
    std::vector<int> dims;
    std::vector<cplx> v;
    DenseTensor() = default;
    explicit DenseTensor(std::vector<int> d);
    std::size_t flat(const std::vector<int>& idx) const;
    cplx& at(const std::vector<int>& idx) { return v[flat(idx)]; }
    const cplx& at(const std::vector<int>& idx) const { return v[flat(idx)]; }
};

/// Nested-loop einsum: spec like "ab,bc->ac"; repeated labels are summed.
DenseTensor brute_contract(const std::string& spec,
                           const std::vector<const DenseTensor*>& ops);

/// Centered difference with a grid-commensurate shift of `cells` lattice
/// cells along real coordinate d (wraparound).
ScalarField fd_derivative(const ScalarField& f, int d, int cells = 1);

// ---------------------------------------------------------------------------
// Independent elliptic solver for the stationary Monge-Ampere equation
// det(chi_hat + Hess phi) = c e^f det(chi_hat), c = Int chi_hat^n / Int e^f
// chi_hat^n, with mean-zero phi.

struct NewtonMaResult {
    ScalarField phi;
    double c = 1.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};
NewtonMaResult newton_ma(const MetricField& chi_hat, const ScalarField& f,
                         double tol, int max_iter = 60);

// ---------------------------------------------------------------------------
// Verification registry

struct OracleReport {
    std::string name;
    double max_dev = 0.0;
    double order = 0.0; // observed convergence order, 0 when n/a
    double tol = 0.0;
    bool pass = false;
};

/// Runs every registered kernel-vs-reference check on `count` random inputs
/// drawn from the given seed.
std::vector<OracleReport> run_verification(std::uint64_t seed, int count = 50);

// Seeded random data helpers (shared with the test suite).
ScalarField random_bandlimited_scalar(GridPtr g, std::mt19937_64& rng,
                                      double amplitude, int max_mode = 2);
MetricField random_metric(GridPtr g, std::mt19937_64& rng, double amplitude);
/// Conformally balanced Fu-Yau family metric diag(e^u, e^u, 1) on an m = 3
/// grid whose active coordinates lie in the base (coords 0..3).
MetricField fu_yau_metric(GridPtr g, const ScalarField& u);

} // namespace sf

#endif
