#ifndef STRINGFLOW_GRID_HPP
#define STRINGFLOW_GRID_HPP

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace sf {

using cplx = std::complex<double>;

/// Thrown on invalid grid/field construction or use.
struct grid_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Periodic sampling lattice for a flat complex torus C^m / Lambda.
///
/// Real coordinate 2j is Re z_j, coordinate 2j+1 is Im z_j (0-based j).
/// Inactive coordinates carry exactly one sample; fields are constant
/// along them.
class LatticeGrid {
  public:
    static constexpr std::size_t default_budget = std::size_t(1) << 22;

    int m = 0;                      // complex dimension
    std::vector<int> shape;         // 2m entries, 1 on inactive coords
    std::vector<double> periods;    // 2m entries
    std::vector<bool> active;       // 2m entries
    std::vector<std::size_t> stride; // row-major, last coord fastest
    std::size_t npoints = 0;

    int dims() const { return 2 * m; }
    double spacing(int d) const { return periods[d] / shape[d]; }
    /// Physical volume of the torus, all 2m coordinates included.
    double volume() const;

    std::size_t flat_index(const std::vector<int>& idx) const;
    void unflatten(std::size_t flat, std::vector<int>& idx) const;
    /// Coordinate value of lattice point `idx` along coordinate d.
    double coord(const std::vector<int>& idx, int d) const {
        return idx[d] * spacing(d);
    }

    bool compatible(const LatticeGrid& o) const;
};

using GridPtr = std::shared_ptr<const LatticeGrid>;

/// Builds and validates a grid. `resolution` applies to every active
/// coordinate and must be a power of two >= 4. `active_dims` indexes the
/// 2m real coordinates. Empty `periods` means unit periods.
GridPtr make_grid(int m, int resolution, const std::vector<int>& active_dims,
                  const std::vector<double>& periods = {},
                  std::size_t budget = LatticeGrid::default_budget);

/// Variant with per-coordinate resolutions (used by refinement studies).
GridPtr make_grid(int m, const std::vector<int>& resolutions,
                  const std::vector<int>& active_dims,
                  const std::vector<double>& periods = {},
                  std::size_t budget = LatticeGrid::default_budget);

// ---------------------------------------------------------------------------
// Fields

/// One real or complex value per lattice point.
class ScalarField {
  public:
    GridPtr grid;
    std::vector<cplx> v;
    bool is_real = false;

    ScalarField() = default;
    explicit ScalarField(GridPtr g, bool real_typed = false)
        : grid(std::move(g)), v(grid->npoints, cplx(0.0)), is_real(real_typed) {}

    std::size_t size() const { return v.size(); }
    cplx& operator[](std::size_t i) { return v[i]; }
    const cplx& operator[](std::size_t i) const { return v[i]; }

    /// Drops imaginary parts; used after operations that preserve realness
    /// only up to roundoff.
    void enforce_real();
    double max_abs_imag() const;
};

enum class FormKind : uint8_t { ComplexPQ, RealK };

/// Coefficient array of a (p,q)-form (complex case) or a real k-form.
///
/// Complex case: coefficients alpha_{J,Kbar} with J,K strictly increasing
/// multi-indices; alpha = sum alpha_{JK} dz^J ^ dzbar^K. Component index is
/// rank(J)*C(m,q) + rank(K), lexicographic ranks. Storage is
/// component-major: data[c*npoints + point].
class FormField {
  public:
    GridPtr grid;
    FormKind kind = FormKind::ComplexPQ;
    int p = 0, q = 0; // bidegree, or (k,0) for RealK
    int ncomp = 0;
    std::vector<cplx> data;

    FormField() = default;
    FormField(GridPtr g, int p_, int q_);            // complex (p,q)
    static FormField real_form(GridPtr g, int k);    // real k-form

    int degree() const { return p + q; }
    std::size_t npoints() const { return grid->npoints; }
    cplx& at(int comp, std::size_t pt) { return data[std::size_t(comp) * npoints() + pt]; }
    const cplx& at(int comp, std::size_t pt) const { return data[std::size_t(comp) * npoints() + pt]; }
    cplx* comp(int c) { return data.data() + std::size_t(c) * npoints(); }
    const cplx* comp(int c) const { return data.data() + std::size_t(c) * npoints(); }

    FormField& operator+=(const FormField& o);
    FormField& operator-=(const FormField& o);
    FormField& operator*=(cplx s);
};

// ---------------------------------------------------------------------------
// Multi-index combinatorics (shared by forms, wedge products and the
// pointwise exterior algebra used in the rate-map inversion).

std::int64_t binom(int n, int k);

/// All strictly increasing k-subsets of {0..n-1} in lexicographic order,
/// packed as sorted index lists. Cached per (n,k).
const std::vector<std::vector<int>>& combos(int n, int k);
/// Rank of a sorted combination in the lexicographic order.
int combo_rank(int n, const std::vector<int>& c);

/// Sign of inserting index j in front of the sorted set J (j not in J):
/// dz^j ^ dz^J = sign * dz^{sorted(J+j)}. Returns 0 if j is in J.
int insert_sign(const std::vector<int>& J, int j, std::vector<int>& merged);

/// One term of a precomputed wedge evaluation: out[c] += sign*a[ca]*b[cb].
struct WedgeTerm {
    int ca, cb, cout;
    double sign;
};
/// Precomputed term list for (p1,q1) ^ (p2,q2) in dimension m.
const std::vector<WedgeTerm>& wedge_plan(int m, int p1, int q1, int p2, int q2);

// ---------------------------------------------------------------------------
// Operations

/// Spectral derivative along real coordinate d, in place on one component
/// block of length grid.npoints. Derivative along an inactive coordinate
/// yields zero.
void spectral_partial_real(const LatticeGrid& g, cplx* block, int d);

/// d/dz_j = (d/dx_j - i d/dy_j)/2 and d/dzbar_j = (d/dx_j + i d/dy_j)/2.
ScalarField partial_z(const ScalarField& f, int j);
ScalarField partial_zbar(const ScalarField& f, int j);
/// Coefficient-wise derivative of every component (no basis bookkeeping).
FormField partial_z(const FormField& f, int j);
FormField partial_zbar(const FormField& f, int j);

/// Dolbeault operators with full basis bookkeeping: del adds a dz index,
/// delbar adds a dzbar index.
FormField del(const FormField& f);
FormField delbar(const FormField& f);
FormField del(const ScalarField& f);
FormField delbar(const ScalarField& f);

FormField wedge(const FormField& a, const FormField& b);

/// Integral of a scalar density over the torus (Riemann sum x cell volume;
/// exact for band-limited integrands).
cplx integrate(const ScalarField& f);
/// Integral of a top-degree form. For the complex case the (m,m)
/// coefficient is converted through dz^{1..m}^dzbar^{1..m} = i^{-m^2} 2^m dV.
cplx integrate(const FormField& f);

/// sqrt of the mean over lattice points of sum_c |coeff_c|^2; the L2 norm
/// used by every residual in the library.
double l2_norm(const FormField& f);
double l2_norm(const ScalarField& f);
double max_abs(const ScalarField& f);

// ---------------------------------------------------------------------------
// Dump format: header line
//   SFGRID m=<m> res=<r1,...> periods=<l1,...> active=<mask> kind=<...>
// then one line per point ("re im" pairs across components), or the binary
// variant with little-endian 64-bit floats after the same header.

void dump_field(std::ostream& os, const ScalarField& f, bool binary = false);
void dump_field(std::ostream& os, const FormField& f, bool binary = false);
ScalarField load_scalar(std::istream& is);
FormField load_form(std::istream& is);

} // namespace sf

#endif
