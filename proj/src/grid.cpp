#include "stringflow/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sf {

// ---------------------------------------------------------------------------
// LatticeGrid

double LatticeGrid::volume() const {
    double v = 1.0;
    for (int d = 0; d < dims(); ++d) v *= periods[d];
    return v;
}

std::size_t LatticeGrid::flat_index(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (int d = 0; d < dims(); ++d) f += stride[d] * std::size_t(idx[d]);
    return f;
}

void LatticeGrid::unflatten(std::size_t flat, std::vector<int>& idx) const {
    idx.assign(dims(), 0);
    for (int d = 0; d < dims(); ++d) {
        idx[d] = int(flat / stride[d]);
        flat %= stride[d];
    }
}

bool LatticeGrid::compatible(const LatticeGrid& o) const {
    return m == o.m && shape == o.shape && periods == o.periods;
}

static bool power_of_two(int n) { return n >= 1 && (n & (n - 1)) == 0; }

GridPtr make_grid(int m, const std::vector<int>& resolutions,
                  const std::vector<int>& active_dims,
                  const std::vector<double>& periods, std::size_t budget) {
    if (m < 1) throw grid_error("complex dimension must be >= 1");
    const int d = 2 * m;
    auto g = std::make_shared<LatticeGrid>();
    g->m = m;
    g->shape.assign(d, 1);
    g->periods = periods.empty() ? std::vector<double>(d, 1.0) : periods;
    if (int(g->periods.size()) != d) throw grid_error("periods size mismatch");
    for (double L : g->periods)
        if (!(L > 0)) throw grid_error("periods must be positive");
    g->active.assign(d, false);
    if (int(resolutions.size()) != int(active_dims.size()))
        throw grid_error("one resolution per active coordinate required");
    std::size_t n = 1;
    for (std::size_t i = 0; i < active_dims.size(); ++i) {
        int dim = active_dims[i], res = resolutions[i];
        if (dim < 0 || dim >= d) throw grid_error("active coordinate index out of range");
        if (g->active[dim]) throw grid_error("duplicate active coordinate");
        if (!power_of_two(res) || res < 4)
            throw grid_error("resolution must be a power of two >= 4");
        g->active[dim] = true;
        g->shape[dim] = res;
        n *= std::size_t(res);
        if (n > budget) throw grid_error("active sample budget exceeded");
    }
    g->stride.assign(d, 1);
    for (int k = d - 2; k >= 0; --k) g->stride[k] = g->stride[k + 1] * g->shape[k + 1];
    g->npoints = g->stride[0] * std::size_t(g->shape[0]);
    return g;
}

GridPtr make_grid(int m, int resolution, const std::vector<int>& active_dims,
                  const std::vector<double>& periods, std::size_t budget) {
    return make_grid(m, std::vector<int>(active_dims.size(), resolution),
                     active_dims, periods, budget);
}

// ---------------------------------------------------------------------------
// Fields

void ScalarField::enforce_real() {
    for (auto& z : v) z = cplx(z.real(), 0.0);
    is_real = true;
}

double ScalarField::max_abs_imag() const {
    double w = 0.0;
    for (const auto& z : v) w = std::max(w, std::abs(z.imag()));
    return w;
}

FormField::FormField(GridPtr g, int p_, int q_)
    : grid(std::move(g)), kind(FormKind::ComplexPQ), p(p_), q(q_) {
    if (p < 0 || q < 0 || p > grid->m || q > grid->m)
        throw grid_error("form bidegree out of range");
    ncomp = int(binom(grid->m, p) * binom(grid->m, q));
    data.assign(std::size_t(ncomp) * grid->npoints, cplx(0.0));
}

FormField FormField::real_form(GridPtr g, int k) {
    FormField f;
    f.grid = std::move(g);
    f.kind = FormKind::RealK;
    f.p = k;
    f.q = 0;
    if (k < 0 || k > f.grid->dims()) throw grid_error("real form degree out of range");
    f.ncomp = int(binom(f.grid->dims(), k));
    f.data.assign(std::size_t(f.ncomp) * f.grid->npoints, cplx(0.0));
    return f;
}

static void check_same_shape(const FormField& a, const FormField& b) {
    if (!a.grid->compatible(*b.grid) || a.kind != b.kind || a.p != b.p || a.q != b.q)
        throw grid_error("form shape mismatch");
}

FormField& FormField::operator+=(const FormField& o) {
    check_same_shape(*this, o);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
}
FormField& FormField::operator-=(const FormField& o) {
    check_same_shape(*this, o);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
    return *this;
}
FormField& FormField::operator*=(cplx s) {
    for (auto& z : data) z *= s;
    return *this;
}

// ---------------------------------------------------------------------------
// Combinatorics

std::int64_t binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::int64_t r = 1;
    for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

const std::vector<std::vector<int>>& combos(int n, int k) {
    static std::map<std::pair<int, int>, std::vector<std::vector<int>>> cache;
    auto key = std::make_pair(n, k);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<std::vector<int>> out;
    std::vector<int> c(k);
    std::iota(c.begin(), c.end(), 0);
    if (k == 0) {
        out.push_back({});
    } else if (k <= n) {
        while (true) {
            out.push_back(c);
            int i = k - 1;
            while (i >= 0 && c[i] == n - k + i) --i;
            if (i < 0) break;
            ++c[i];
            for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
        }
    }
    return cache.emplace(key, std::move(out)).first->second;
}

int combo_rank(int n, const std::vector<int>& c) {
    // lexicographic rank of a sorted combination
    int k = int(c.size());
    std::int64_t r = 0;
    int prev = -1;
    for (int i = 0; i < k; ++i) {
        for (int v = prev + 1; v < c[i]; ++v) r += binom(n - 1 - v, k - 1 - i);
        prev = c[i];
    }
    return int(r);
}

int insert_sign(const std::vector<int>& J, int j, std::vector<int>& merged) {
    int below = 0;
    for (int a : J) {
        if (a == j) return 0;
        if (a < j) ++below;
    }
    merged = J;
    merged.insert(std::upper_bound(merged.begin(), merged.end(), j), j);
    return (below % 2 == 0) ? 1 : -1;
}

// sign of sorting the concatenation of two sorted disjoint sets
static int merge_sign(const std::vector<int>& a, const std::vector<int>& b,
                      std::vector<int>& merged) {
    long inv = 0;
    for (int x : a)
        for (int y : b) {
            if (x == y) return 0;
            if (x > y) ++inv;
        }
    merged.resize(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), merged.begin());
    return (inv % 2 == 0) ? 1 : -1;
}

const std::vector<WedgeTerm>& wedge_plan(int m, int p1, int q1, int p2, int q2) {
    static std::map<std::array<int, 5>, std::vector<WedgeTerm>> cache;
    std::array<int, 5> key{m, p1, q1, p2, q2};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<WedgeTerm> plan;
    const auto& Js1 = combos(m, p1);
    const auto& Ks1 = combos(m, q1);
    const auto& Js2 = combos(m, p2);
    const auto& Ks2 = combos(m, q2);
    const int p = p1 + p2, q = q1 + q2;
    const int nq = int(binom(m, q));
    const int nq1 = int(binom(m, q1));
    const int nq2 = int(binom(m, q2));
    std::vector<int> Jm, Km;
    for (std::size_t a = 0; a < Js1.size(); ++a)
        for (std::size_t b = 0; b < Ks1.size(); ++b)
            for (std::size_t c = 0; c < Js2.size(); ++c)
                for (std::size_t d = 0; d < Ks2.size(); ++d) {
                    int sj = merge_sign(Js1[a], Js2[c], Jm);
                    if (sj == 0) continue;
                    int sk = merge_sign(Ks1[b], Ks2[d], Km);
                    if (sk == 0) continue;
                    // move the q1 dzbar's of the first factor past the p2 dz's
                    int cross = (q1 * p2) % 2 == 0 ? 1 : -1;
                    WedgeTerm t;
                    t.ca = int(a) * nq1 + int(b);
                    t.cb = int(c) * nq2 + int(d);
                    t.cout = combo_rank(m, Jm) * nq + combo_rank(m, Km);
                    t.sign = double(sj * sk * cross);
                    plan.push_back(t);
                }
    return cache.emplace(key, std::move(plan)).first->second;
}

// ---------------------------------------------------------------------------
// Spectral differentiation

namespace {

struct Fft1d {
    int n;
    fftw_complex* buf;
    fftw_plan fwd, bwd;
    explicit Fft1d(int n_) : n(n_) {
        buf = fftw_alloc_complex(std::size_t(n));
        fwd = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft1d() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(buf);
    }
};

Fft1d& fft_for(int n) {
    static std::map<int, std::unique_ptr<Fft1d>> cache;
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, std::make_unique<Fft1d>(n)).first;
    return *it->second;
}

} // namespace

void spectral_partial_real(const LatticeGrid& g, cplx* block, int d) {
    const int N = g.shape[d];
    if (!g.active[d] || N == 1) {
        std::fill(block, block + g.npoints, cplx(0.0));
        return;
    }
    Fft1d& fft = fft_for(N);
    const double L = g.periods[d];
    const std::size_t sd = g.stride[d];
    // wavenumber multipliers i*2*pi*k/L, Nyquist mode dropped
    std::vector<cplx> mul(N);
    for (int t = 0; t < N; ++t) {
        int k = (t <= N / 2) ? t : t - N;
        if (t == N / 2) k = 0;
        mul[t] = cplx(0.0, 2.0 * M_PI * double(k) / L) / double(N);
    }
    const std::size_t nlines = g.npoints / std::size_t(N);
    for (std::size_t line = 0; line < nlines; ++line) {
        // base index of this line: distribute `line` over all coords but d
        std::size_t rem = line, base = 0;
        for (int c = g.dims() - 1; c >= 0; --c) {
            if (c == d) continue;
            std::size_t s = std::size_t(g.shape[c]);
            base += (rem % s) * g.stride[c];
            rem /= s;
        }
        cplx* b = reinterpret_cast<cplx*>(fft.buf);
        for (int t = 0; t < N; ++t) b[t] = block[base + std::size_t(t) * sd];
        fftw_execute(fft.fwd);
        for (int t = 0; t < N; ++t) b[t] *= mul[t];
        fftw_execute(fft.bwd);
        for (int t = 0; t < N; ++t) block[base + std::size_t(t) * sd] = b[t];
    }
}

static void check_holo_index(const LatticeGrid& g, int j) {
    if (j < 0 || j >= g.m) throw grid_error("holomorphic index out of range");
}

ScalarField partial_z(const ScalarField& f, int j) {
    check_holo_index(*f.grid, j);
    ScalarField dx = f, dy = f;
    spectral_partial_real(*f.grid, dx.v.data(), 2 * j);
    spectral_partial_real(*f.grid, dy.v.data(), 2 * j + 1);
    ScalarField out(f.grid);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = 0.5 * (dx.v[i] - cplx(0, 1) * dy.v[i]);
    return out;
}

ScalarField partial_zbar(const ScalarField& f, int j) {
    check_holo_index(*f.grid, j);
    ScalarField dx = f, dy = f;
    spectral_partial_real(*f.grid, dx.v.data(), 2 * j);
    spectral_partial_real(*f.grid, dy.v.data(), 2 * j + 1);
    ScalarField out(f.grid);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = 0.5 * (dx.v[i] + cplx(0, 1) * dy.v[i]);
    return out;
}

static FormField partial_cplx(const FormField& f, int j, double ysign) {
    check_holo_index(*f.grid, j);
    FormField out = f;
    const std::size_t np = f.npoints();
    std::vector<cplx> dx(np), dy(np);
    for (int c = 0; c < f.ncomp; ++c) {
        std::copy(f.comp(c), f.comp(c) + np, dx.begin());
        std::copy(f.comp(c), f.comp(c) + np, dy.begin());
        spectral_partial_real(*f.grid, dx.data(), 2 * j);
        spectral_partial_real(*f.grid, dy.data(), 2 * j + 1);
        cplx* o = out.comp(c);
        for (std::size_t i = 0; i < np; ++i)
            o[i] = 0.5 * (dx[i] + cplx(0, ysign) * dy[i]);
    }
    return out;
}

FormField partial_z(const FormField& f, int j) { return partial_cplx(f, j, -1.0); }
FormField partial_zbar(const FormField& f, int j) { return partial_cplx(f, j, 1.0); }

FormField del(const FormField& f) {
    if (f.kind != FormKind::ComplexPQ) throw grid_error("del needs a (p,q)-form");
    const int m = f.grid->m;
    FormField out(f.grid, f.p + 1, f.q);
    const auto& Js = combos(m, f.p);
    const int nq = int(binom(m, f.q));
    const int nq_out = nq;
    std::vector<int> merged;
    for (int j = 0; j < m; ++j) {
        if (!f.grid->active[2 * j] && !f.grid->active[2 * j + 1]) continue;
        FormField dj = partial_z(f, j);
        for (std::size_t a = 0; a < Js.size(); ++a) {
            int s = insert_sign(Js[a], j, merged);
            if (s == 0) continue;
            int rJ = combo_rank(m, merged);
            for (int b = 0; b < nq; ++b) {
                const cplx* src = dj.comp(int(a) * nq + b);
                cplx* dst = out.comp(rJ * nq_out + b);
                for (std::size_t i = 0; i < f.npoints(); ++i)
                    dst[i] += double(s) * src[i];
            }
        }
    }
    return out;
}

FormField delbar(const FormField& f) {
    if (f.kind != FormKind::ComplexPQ) throw grid_error("delbar needs a (p,q)-form");
    const int m = f.grid->m;
    FormField out(f.grid, f.p, f.q + 1);
    const auto& Ks = combos(m, f.q);
    const int nq = int(binom(m, f.q));
    const int nq_out = int(binom(m, f.q + 1));
    const int npcomb = int(binom(m, f.p));
    const double psign = (f.p % 2 == 0) ? 1.0 : -1.0; // dzbar^k past dz^J
    std::vector<int> merged;
    for (int k = 0; k < m; ++k) {
        if (!f.grid->active[2 * k] && !f.grid->active[2 * k + 1]) continue;
        FormField dk = partial_zbar(f, k);
        for (std::size_t b = 0; b < Ks.size(); ++b) {
            int s = insert_sign(Ks[b], k, merged);
            if (s == 0) continue;
            int rK = combo_rank(m, merged);
            for (int a = 0; a < npcomb; ++a) {
                const cplx* src = dk.comp(a * nq + int(b));
                cplx* dst = out.comp(a * nq_out + rK);
                for (std::size_t i = 0; i < f.npoints(); ++i)
                    dst[i] += psign * double(s) * src[i];
            }
        }
    }
    return out;
}

FormField del(const ScalarField& f) {
    FormField w(f.grid, 0, 0);
    std::copy(f.v.begin(), f.v.end(), w.comp(0));
    return del(w);
}
FormField delbar(const ScalarField& f) {
    FormField w(f.grid, 0, 0);
    std::copy(f.v.begin(), f.v.end(), w.comp(0));
    return delbar(w);
}

FormField wedge(const FormField& a, const FormField& b) {
    if (!a.grid->compatible(*b.grid)) throw grid_error("wedge: incompatible grids");
    if (a.kind != FormKind::ComplexPQ || b.kind != FormKind::ComplexPQ)
        throw grid_error("wedge: complex forms only");
    const int m = a.grid->m;
    if (a.p + b.p > m || a.q + b.q > m) throw grid_error("wedge: degree overflow");
    FormField out(a.grid, a.p + b.p, a.q + b.q);
    const auto& plan = wedge_plan(m, a.p, a.q, b.p, b.q);
    const std::size_t np = a.npoints();
    for (const auto& t : plan) {
        const cplx* pa = a.comp(t.ca);
        const cplx* pb = b.comp(t.cb);
        cplx* po = out.comp(t.cout);
        for (std::size_t i = 0; i < np; ++i) po[i] += t.sign * pa[i] * pb[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Integration and norms

cplx integrate(const ScalarField& f) {
    cplx s = 0.0;
    for (const auto& z : f.v) s += z;
    return s / double(f.size()) * f.grid->volume();
}

cplx integrate(const FormField& f) {
    const int m = f.grid->m;
    if (f.kind == FormKind::ComplexPQ) {
        if (f.p != m || f.q != m) throw grid_error("integrate: not a top form");
        cplx s = 0.0;
        const cplx* c = f.comp(0);
        for (std::size_t i = 0; i < f.npoints(); ++i) s += c[i];
        s /= double(f.npoints());
        // dz^{1..m} ^ dzbar^{1..m} = i^{-m^2} 2^m dV
        static const cplx ipow[4] = {cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
        cplx unit = ipow[((-(m * m)) % 4 + 4) % 4];
        return s * unit * std::pow(2.0, m) * f.grid->volume();
    }
    if (f.p != f.grid->dims()) throw grid_error("integrate: not a top form");
    cplx s = 0.0;
    const cplx* c = f.comp(0);
    for (std::size_t i = 0; i < f.npoints(); ++i) s += c[i];
    return s / double(f.npoints()) * f.grid->volume();
}

double l2_norm(const FormField& f) {
    double s = 0.0;
    for (const auto& z : f.data) s += std::norm(z);
    return std::sqrt(s / double(f.npoints()));
}

double l2_norm(const ScalarField& f) {
    double s = 0.0;
    for (const auto& z : f.v) s += std::norm(z);
    return std::sqrt(s / double(f.size()));
}

double max_abs(const ScalarField& f) {
    double w = 0.0;
    for (const auto& z : f.v) w = std::max(w, std::abs(z));
    return w;
}

// ---------------------------------------------------------------------------
// Dump / load

static void write_header(std::ostream& os, const LatticeGrid& g,
                         const std::string& kind, bool binary) {
    os << "SFGRID m=" << g.m << " res=";
    for (int d = 0; d < g.dims(); ++d) os << (d ? "," : "") << g.shape[d];
    os << " periods=";
    for (int d = 0; d < g.dims(); ++d) {
        os << (d ? "," : "") << std::setprecision(17) << g.periods[d];
    }
    os << " active=";
    for (int d = 0; d < g.dims(); ++d) os << (g.active[d] ? '1' : '0');
    os << " kind=" << kind;
    if (binary) os << " enc=bin";
    os << "\n";
}

static void write_values(std::ostream& os, const LatticeGrid& g,
                         const std::vector<cplx>& data, int ncomp, bool binary) {
    const std::size_t np = g.npoints;
    if (binary) {
        for (std::size_t i = 0; i < np; ++i)
            for (int c = 0; c < ncomp; ++c) {
                double re = data[std::size_t(c) * np + i].real();
                double im = data[std::size_t(c) * np + i].imag();
                os.write(reinterpret_cast<const char*>(&re), 8);
                os.write(reinterpret_cast<const char*>(&im), 8);
            }
        return;
    }
    os << std::setprecision(17);
    for (std::size_t i = 0; i < np; ++i) {
        for (int c = 0; c < ncomp; ++c) {
            const cplx& z = data[std::size_t(c) * np + i];
            os << (c ? " " : "") << z.real() << " " << z.imag();
        }
        os << "\n";
    }
}

void dump_field(std::ostream& os, const ScalarField& f, bool binary) {
    write_header(os, *f.grid, "scalar", binary);
    write_values(os, *f.grid, f.v, 1, binary);
}

void dump_field(std::ostream& os, const FormField& f, bool binary) {
    std::ostringstream kind;
    if (f.kind == FormKind::ComplexPQ)
        kind << "form " << f.p << " " << f.q;
    else
        kind << "real " << f.p;
    write_header(os, *f.grid, kind.str(), binary);
    write_values(os, *f.grid, f.data, f.ncomp, binary);
}

namespace {

struct Header {
    GridPtr grid;
    std::string kind;
    int p = 0, q = 0;
    bool binary = false;
};

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

Header read_header(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw grid_error("dump: missing header");
    std::stringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "SFGRID") throw grid_error("dump: bad magic");
    int m = 0;
    std::vector<int> res;
    std::vector<double> periods;
    std::string activemask;
    Header h;
    std::string tok;
    std::vector<std::string> kindparts;
    while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) {
            kindparts.push_back(tok); // continuation of kind= value
            continue;
        }
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "m") m = std::stoi(val);
        else if (key == "res") res = split_ints(val);
        else if (key == "periods") periods = split_doubles(val);
        else if (key == "active") activemask = val;
        else if (key == "kind") kindparts.push_back(val);
        else if (key == "enc") h.binary = (val == "bin");
    }
    std::vector<int> active_dims, active_res;
    for (std::size_t d = 0; d < activemask.size(); ++d)
        if (activemask[d] == '1') {
            active_dims.push_back(int(d));
            active_res.push_back(res[d]);
        }
    h.grid = make_grid(m, active_res, active_dims, periods);
    if (kindparts.empty()) throw grid_error("dump: missing kind");
    h.kind = kindparts[0];
    if (h.kind == "form" && kindparts.size() >= 3) {
        h.p = std::stoi(kindparts[1]);
        h.q = std::stoi(kindparts[2]);
    } else if (h.kind == "real" && kindparts.size() >= 2) {
        h.p = std::stoi(kindparts[1]);
    }
    return h;
}

void read_values(std::istream& is, const LatticeGrid& g, std::vector<cplx>& data,
                 int ncomp, bool binary) {
    const std::size_t np = g.npoints;
    for (std::size_t i = 0; i < np; ++i)
        for (int c = 0; c < ncomp; ++c) {
            double re, im;
            if (binary) {
                is.read(reinterpret_cast<char*>(&re), 8);
                is.read(reinterpret_cast<char*>(&im), 8);
            } else {
                is >> re >> im;
            }
            if (!is) throw grid_error("dump: truncated data");
            data[std::size_t(c) * np + i] = cplx(re, im);
        }
}

} // namespace

ScalarField load_scalar(std::istream& is) {
    Header h = read_header(is);
    if (h.kind != "scalar") throw grid_error("dump: expected scalar");
    ScalarField f(h.grid);
    read_values(is, *h.grid, f.v, 1, h.binary);
    return f;
}

FormField load_form(std::istream& is) {
    Header h = read_header(is);
    if (h.kind == "form") {
        FormField f(h.grid, h.p, h.q);
        read_values(is, *h.grid, f.data, f.ncomp, h.binary);
        return f;
    }
    if (h.kind == "real") {
        FormField f = FormField::real_form(h.grid, h.p);
        read_values(is, *h.grid, f.data, f.ncomp, h.binary);
        return f;
    }
    throw grid_error("dump: expected form");
}

} // namespace sf
