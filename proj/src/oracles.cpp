#include "stringflow/oracles.hpp"
#include "stringflow/flows.hpp"
#include "stringflow/sugra.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace sf {

DenseTensor::DenseTensor(std::vector<int> d) : dims(std::move(d)) {
    std::size_t n = 1;
    for (int x : dims) n *= std::size_t(x);
    v.assign(n, cplx(0.0));
}

std::size_t DenseTensor::flat(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) f = f * dims[i] + idx[i];
    return f;
}

DenseTensor brute_contract(const std::string& spec,
                           const std::vector<const DenseTensor*>& ops) {
    auto arrow = spec.find("->");
    if (arrow == std::string::npos) throw grid_error("brute_contract: missing ->");
    std::string lhs = spec.substr(0, arrow), out_labels = spec.substr(arrow + 2);
    std::vector<std::string> in_labels;
    std::stringstream ss(lhs);
    std::string tok;
    while (std::getline(ss, tok, ',')) in_labels.push_back(tok);
    if (in_labels.size() != ops.size())
        throw grid_error("brute_contract: operand count mismatch");
    std::map<char, int> dim_of;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (in_labels[i].size() != ops[i]->dims.size())
            throw grid_error("brute_contract: index arity mismatch");
        for (std::size_t k = 0; k < in_labels[i].size(); ++k) {
            char c = in_labels[i][k];
            int d = ops[i]->dims[k];
            auto it = dim_of.find(c);
            if (it == dim_of.end())
                dim_of[c] = d;
            else if (it->second != d)
                throw grid_error("brute_contract: inconsistent dimensions");
        }
    }
    std::vector<char> labels;
    for (auto& [c, d] : dim_of) labels.push_back(c);
    for (char c : out_labels)
        if (!dim_of.count(c)) throw grid_error("brute_contract: unknown output label");
    std::vector<int> out_dims;
    for (char c : out_labels) out_dims.push_back(dim_of[c]);
    DenseTensor out(out_dims);

    std::vector<int> assign(labels.size(), 0);
    std::vector<int> idx;
    for (;;) {
        std::map<char, int> val;
        for (std::size_t i = 0; i < labels.size(); ++i) val[labels[i]] = assign[i];
        cplx prod = 1.0;
        for (std::size_t i = 0; i < ops.size(); ++i) {
            idx.clear();
            for (char c : in_labels[i]) idx.push_back(val[c]);
            prod *= ops[i]->at(idx);
            if (prod == cplx(0.0)) break;
        }
        if (prod != cplx(0.0)) {
            idx.clear();
            for (char c : out_labels) idx.push_back(val[c]);
            out.at(idx) += prod;
        }
        // odometer
        std::size_t p = 0;
        for (; p < labels.size(); ++p) {
            if (++assign[p] < dim_of[labels[p]]) break;
            assign[p] = 0;
        }
        if (p == labels.size()) break;
    }
    return out;
}

ScalarField fd_derivative(const ScalarField& f, int d, int cells) {
    const LatticeGrid& g = *f.grid;
    ScalarField out(f.grid, f.is_real);
    if (!g.active[d]) return out;
    double h = g.spacing(d) * cells;
    std::vector<int> idx;
    for (std::size_t pt = 0; pt < g.npoints; ++pt) {
        g.unflatten(pt, idx);
        std::vector<int> ip = idx, im = idx;
        ip[d] = ((idx[d] + cells) % g.shape[d] + g.shape[d]) % g.shape[d];
        im[d] = ((idx[d] - cells) % g.shape[d] + g.shape[d]) % g.shape[d];
        out.v[pt] = (f.v[g.flat_index(ip)] - f.v[g.flat_index(im)]) / (2.0 * h);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Newton solver

NewtonMaResult newton_ma(const MetricField& chi_hat, const ScalarField& f,
                         double tol, int max_iter) {
    const std::size_t np = chi_hat.npoints();
    const int m = chi_hat.m;
    NewtonMaResult res;
    res.phi = ScalarField(chi_hat.grid, true);
    ScalarField dhat = det_field(chi_hat);
    double num = 0.0, den = 0.0;
    for (std::size_t pt = 0; pt < np; ++pt) {
        num += dhat.v[pt].real();
        den += std::exp(f.v[pt].real()) * dhat.v[pt].real();
    }
    res.c = num / den;

    auto residual = [&](const ScalarField& phi, MetricField& chi_out,
                        Eigen::VectorXd& r) -> bool {
        chi_out = hessian_metric(chi_hat, phi);
        MetricCheckResult chk = check_metric(chi_out);
        if (!(chk.min_eigenvalue > 0)) return false;
        ScalarField d = det_field(chi_out);
        r.resize(np);
        for (std::size_t pt = 0; pt < np; ++pt)
            r(pt) = d.v[pt].real() /
                        (std::exp(f.v[pt].real()) * dhat.v[pt].real()) -
                    res.c;
        return true;
    };

    MetricField chi(chi_hat.grid);
    Eigen::VectorXd r;
    if (!residual(res.phi, chi, r))
        throw grid_error("newton_ma: initial chi_hat not positive");
    double rnorm = r.norm() / std::sqrt(double(np));

    Eigen::MatrixXd J(np + 1, np);
    Eigen::VectorXd rhs(np + 1), delta;
    for (int it = 0; it < max_iter && rnorm > tol; ++it) {
        ScalarField d = det_field(chi);
        InverseMetricField ci = inverse(chi);
        // column j: det(chi) tr(chi^{-1} Hess e_j) / (e^f det chi_hat)
        ScalarField ej(chi_hat.grid, true);
        for (std::size_t col = 0; col < np; ++col) {
            ej.v[col] = 1.0;
            MetricField h = hessian_metric(MetricField(chi_hat.grid), ej);
            ej.v[col] = 0.0;
            for (std::size_t pt = 0; pt < np; ++pt) {
                cplx tr = 0.0;
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b)
                        tr += ci.at(a, b, pt) * h.at(b, a, pt);
                J(pt, col) = (d.v[pt].real() * tr.real()) /
                             (std::exp(f.v[pt].real()) * dhat.v[pt].real());
            }
            J(np, col) = 1.0 / double(np); // pins the mean of the update
        }
        rhs.head(np) = -r;
        rhs(np) = 0.0;
        delta = J.colPivHouseholderQr().solve(rhs);
        double lambda = 1.0;
        ScalarField trial(chi_hat.grid, true);
        for (int bt = 0; bt < 12; ++bt, lambda *= 0.5) {
            for (std::size_t pt = 0; pt < np; ++pt)
                trial.v[pt] = res.phi.v[pt].real() + lambda * delta(pt);
            MetricField chi_try(chi_hat.grid);
            Eigen::VectorXd r_try;
            if (!residual(trial, chi_try, r_try)) continue;
            double rn = r_try.norm() / std::sqrt(double(np));
            if (rn < rnorm) {
                res.phi = trial;
                chi = chi_try;
                r = r_try;
                rnorm = rn;
                break;
            }
        }
        res.iterations = it + 1;
    }
    // re-center the mean
    double mean = 0.0;
    for (std::size_t pt = 0; pt < np; ++pt) mean += res.phi.v[pt].real();
    mean /= double(np);
    for (std::size_t pt = 0; pt < np; ++pt) res.phi.v[pt] -= mean;
    res.residual = rnorm;
    res.converged = rnorm <= tol;
    return res;
}

// ---------------------------------------------------------------------------
// Random data

ScalarField random_bandlimited_scalar(GridPtr g, std::mt19937_64& rng,
                                      double amplitude, int max_mode) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    ScalarField out(g, true);
    std::vector<int> idx;
    const int dims = g->dims();
    for (int d = 0; d < dims; ++d) {
        if (!g->active[d]) continue;
        for (int k = 1; k <= max_mode; ++k) {
            double amp = amplitude * unif(rng);
            double phase = M_PI * unif(rng);
            for (std::size_t pt = 0; pt < g->npoints; ++pt) {
                g->unflatten(pt, idx);
                double x = g->coord(idx, d) / g->periods[d];
                out.v[pt] += amp * std::cos(2.0 * M_PI * k * x + phase);
            }
        }
    }
    return out;
}

MetricField random_metric(GridPtr g, std::mt19937_64& rng, double amplitude) {
    const int m = g->m;
    MetricField out = MetricField::identity(g);
    for (int k = 0; k < m; ++k)
        for (int j = k; j < m; ++j) {
            ScalarField re = random_bandlimited_scalar(g, rng, amplitude);
            ScalarField im = random_bandlimited_scalar(g, rng, amplitude);
            for (std::size_t pt = 0; pt < g->npoints; ++pt) {
                if (j == k) {
                    out.at(k, j, pt) += re.v[pt].real();
                } else {
                    cplx z(re.v[pt].real(), im.v[pt].real());
                    out.at(k, j, pt) += z;
                    out.at(j, k, pt) += std::conj(z);
                }
            }
        }
    return out;
}

MetricField fu_yau_metric(GridPtr g, const ScalarField& u) {
    if (g->m != 3) throw grid_error("fu_yau_metric: m = 3 required");
    for (int d = 4; d < 6; ++d)
        if (g->active[d])
            throw grid_error("fu_yau_metric: fiber coordinates must be inactive");
    MetricField out(g);
    for (std::size_t pt = 0; pt < g->npoints; ++pt) {
        double e = std::exp(u.v[pt].real());
        out.at(0, 0, pt) = e;
        out.at(1, 1, pt) = e;
        out.at(2, 2, pt) = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Verification registry

namespace {

DenseTensor metric_point(const MetricField& g, std::size_t pt, bool lower) {
    const int m = g.m;
    DenseTensor t({m, m});
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < m; ++j) t.at({k, j}) = g.at(k, j, pt);
    (void)lower;
    return t;
}

DenseTensor inverse_point(const InverseMetricField& gi, std::size_t pt) {
    const int m = gi.m;
    DenseTensor t({m, m});
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) t.at({j, k}) = gi.at(j, k, pt);
    return t;
}

DenseTensor torsion_point(const FormField& T, std::size_t pt) {
    const int m = T.grid->m;
    DenseTensor t({m, m, m}); // T_{kbar j m}
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < m; ++j)
            for (int mm = 0; mm < m; ++mm)
                t.at({k, j, mm}) = torsion_coeff(T, k, j, mm, pt);
    return t;
}

struct Check {
    std::string name;
    double tol;
    // returns max deviation over `count` random draws
    std::function<double(std::mt19937_64&, int)> run;
};

double check_torsion(std::mt19937_64& rng, int count) {
    double dev = 0.0;
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    std::uniform_int_distribution<std::size_t> pick(0, g->npoints - 1);
    for (int it = 0; it < count; ++it) {
        MetricField gm = random_metric(g, rng, 0.05);
        FormField T = torsion(gm);
        // independent assembly from spectral metric derivatives
        std::vector<MetricField> dg;
        for (int p = 0; p < 3; ++p) {
            MetricField d(g);
            for (int c = 0; c < 9; ++c) {
                ScalarField comp(g);
                for (std::size_t pt = 0; pt < g->npoints; ++pt)
                    comp.v[pt] = gm.a[std::size_t(c) * g->npoints + pt];
                ScalarField dz = partial_z(comp, p);
                for (std::size_t pt = 0; pt < g->npoints; ++pt)
                    d.a[std::size_t(c) * g->npoints + pt] = dz.v[pt];
            }
            dg.push_back(std::move(d));
        }
        for (int probe = 0; probe < 5; ++probe) {
            std::size_t pt = pick(rng);
            for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j)
                    for (int mm = 0; mm < 3; ++mm) {
                        cplx ref = dg[mm].at(k, j, pt) - dg[j].at(k, mm, pt);
                        dev = std::max(dev,
                                       std::abs(torsion_coeff(T, k, j, mm, pt) - ref));
                    }
        }
    }
    return dev;
}

double check_tau(std::mt19937_64& rng, int count) {
    double dev = 0.0;
    auto g = make_grid(2, 8, {0, 1, 2, 3});
    std::uniform_int_distribution<std::size_t> pick(0, g->npoints - 1);
    for (int it = 0; it < count; ++it) {
        MetricField gm = random_metric(g, rng, 0.05);
        InverseMetricField gi = inverse(gm);
        FormField T = torsion(gm);
        FormField tf = tau(T, gi);
        std::size_t pt = pick(rng);
        DenseTensor gi_t = inverse_point(gi, pt);
        DenseTensor T_t = torsion_point(T, pt);
        DenseTensor ref = brute_contract("jk,kjl->l", {&gi_t, &T_t});
        for (int l = 0; l < 2; ++l)
            dev = std::max(dev, std::abs(tf.at(l, pt) - ref.at({l})));
    }
    return dev;
}

double check_ricci(std::mt19937_64& rng, int count) {
    double dev = 0.0;
    auto g = make_grid(2, 8, {0, 1, 2, 3});
    std::uniform_int_distribution<std::size_t> pick(0, g->npoints - 1);
    for (int it = 0; it < count; ++it) {
        MetricField gm = random_metric(g, rng, 0.05);
        InverseMetricField gi = inverse(gm);
        HermTensorField ric = chern_ricci_tilde(gm);
        CurvatureField R = chern_curvature(gm);
        std::size_t pt = pick(rng);
        // Rt_{kbar j} = g^{p qbar} g_{kbar a} R_{qbar p}{}^a{}_j
        DenseTensor gi_t = inverse_point(gi, pt);
        DenseTensor g_t = metric_point(gm, pt, true);
        DenseTensor R_t({2, 2, 2, 2});
        for (int q = 0; q < 2; ++q)
            for (int p = 0; p < 2; ++p)
                for (int aa = 0; aa < 2; ++aa)
                    for (int b = 0; b < 2; ++b)
                        R_t.at({q, p, aa, b}) = R.at(q, p, aa, b, pt);
        DenseTensor ref = brute_contract("pq,ka,qpab->kb", {&gi_t, &g_t, &R_t});
        for (int k = 0; k < 2; ++k)
            for (int j = 0; j < 2; ++j)
                dev = std::max(dev, std::abs(ric.at(k, j, pt) - ref.at({k, j})));
    }
    return dev;
}

double check_curvature(std::mt19937_64& rng, int count) {
    double dev = 0.0;
    auto g = make_grid(2, 8, {0, 1});
    for (int it = 0; it < count; ++it) {
        MetricField gm = random_metric(g, rng, 0.05);
        InverseMetricField gi = inverse(gm);
        CurvatureField R = chern_curvature(gm);
        // reference: the 2-jet of the metric taken spectrally, then
        // R^a{}_b = -[g^{-1} ddg - g^{-1} (dbar g) g^{-1} (d g)]^a_b assembled
        // by brute contraction at every point
        for (int p = 0; p < 2; ++p) {
            MetricField dgp(g);
            for (int c = 0; c < 4; ++c) {
                ScalarField comp(g);
                for (std::size_t pt = 0; pt < g->npoints; ++pt)
                    comp.v[pt] = gm.a[std::size_t(c) * g->npoints + pt];
                ScalarField dz = partial_z(comp, p);
                for (std::size_t pt = 0; pt < g->npoints; ++pt)
                    dgp.a[std::size_t(c) * g->npoints + pt] = dz.v[pt];
            }
            for (int q = 0; q < 2; ++q) {
                MetricField ddg(g), dbg(g);
                for (int c = 0; c < 4; ++c) {
                    ScalarField comp(g);
                    for (std::size_t pt = 0; pt < g->npoints; ++pt)
                        comp.v[pt] = dgp.a[std::size_t(c) * g->npoints + pt];
                    ScalarField dq = partial_zbar(comp, q);
                    for (std::size_t pt = 0; pt < g->npoints; ++pt)
                        ddg.a[std::size_t(c) * g->npoints + pt] = dq.v[pt];
                }
                for (int k = 0; k < 2; ++k)
                    for (int j = 0; j < 2; ++j) {
                        // dbar_q g_{kbar j} = conj(d_q g_{jbar k})
                        ScalarField comp(g);
                        for (std::size_t pt = 0; pt < g->npoints; ++pt)
                            comp.v[pt] = gm.at(j, k, pt);
                        ScalarField dz = partial_z(comp, q);
                        for (std::size_t pt = 0; pt < g->npoints; ++pt)
                            dbg.at(k, j, pt) = std::conj(dz.v[pt]);
                    }
                for (std::size_t pt = 0; pt < g->npoints; ++pt) {
                    DenseTensor gi_t = inverse_point(gi, pt);
                    DenseTensor d_t = metric_point(dgp, pt, true);
                    DenseTensor dd_t = metric_point(ddg, pt, true);
                    DenseTensor db_t = metric_point(dbg, pt, true);
                    DenseTensor lin = brute_contract("al,lb->ab", {&gi_t, &dd_t});
                    DenseTensor qu =
                        brute_contract("al,lc,cd,db->ab", {&gi_t, &db_t, &gi_t, &d_t});
                    for (int aa = 0; aa < 2; ++aa)
                        for (int b = 0; b < 2; ++b) {
                            cplx ref = -(lin.at({aa, b}) - qu.at({aa, b}));
                            dev = std::max(dev,
                                           std::abs(R.at(q, p, aa, b, pt) - ref));
                        }
                }
            }
        }
    }
    return dev;
}

double check_tr_rm_rm(std::mt19937_64& rng, int count) {
    double dev = 0.0;
    auto g = make_grid(3, 8, {0, 1, 2, 3});
    std::uniform_int_distribution<std::size_t> pick(0, g->npoints - 1);
    for (int it = 0; it < count; ++it) {
        MetricField gm = random_metric(g, rng, 0.05);
        CurvatureField R = chern_curvature(gm);
        FormField tr = tr_rm_wedge_rm(R);
        std::size_t pt = pick(rng);
        // independent antisymmetrized double sum for the (2,2) coefficients
        const auto& J2 = combos(3, 2);
        for (std::size_t jr = 0; jr < J2.size(); ++jr)
            for (std::size_t kr = 0; kr < J2.size(); ++kr) {
                int j1 = J2[jr][0], j2 = J2[jr][1];
                int k1 = J2[kr][0], k2 = J2[kr][1];
                cplx ref = 0.0;
                for (int aa = 0; aa < 3; ++aa)
                    for (int b = 0; b < 3; ++b) {
                        // (R^a_b)_{p qbar} = R_{qbar p}{}^a{}_b on dz^p dzbar^q
                        auto term = [&](int p1, int q1, int p2, int q2) {
                            return R.at(q1, p1, aa, b, pt) * R.at(q2, p2, b, aa, pt);
                        };
                        // expand (dz^{p1}dzbar^{q1}) ^ (dz^{p2}dzbar^{q2}):
                        // sign = -(dz^{p1}dz^{p2}) (dzbar^{q1}dzbar^{q2}) with
                        // the (-1) from moving dzbar^{q1} past dz^{p2}
                        ref += -(term(j1, k1, j2, k2) - term(j1, k2, j2, k1) -
                                 term(j2, k1, j1, k2) + term(j2, k2, j1, k1));
                    }
                int comp = int(jr) * int(J2.size()) + int(kr);
                dev = std::max(dev, std::abs(tr.at(comp, pt) - ref));
            }
    }
    return dev;
}

double check_sigma2(std::mt19937_64& rng, int count) {
    double dev = 0.0;
    auto g = make_grid(2, 4, {0});
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int it = 0; it < count; ++it) {
        MetricField gm = random_metric(g, rng, 0.05);
        HermTensorField a(g);
        for (std::size_t pt = 0; pt < g->npoints; ++pt) {
            double d0 = unif(rng), d1 = unif(rng);
            cplx off(unif(rng), unif(rng));
            a.at(0, 0, pt) = d0;
            a.at(1, 1, pt) = d1;
            a.at(0, 1, pt) = off;
            a.at(1, 0, pt) = std::conj(off);
        }
        ScalarField s2 = sigma2(gm, a);
        InverseMetricField gi = inverse(gm);
        for (std::size_t pt = 0; pt < g->npoints; ++pt) {
            DenseTensor gi_t = inverse_point(gi, pt);
            DenseTensor a_t = metric_point(a, pt, true);
            DenseTensor tr = brute_contract("jk,kj->", {&gi_t, &a_t});
            DenseTensor tr2 =
                brute_contract("jk,kp,pq,qj->", {&gi_t, &a_t, &gi_t, &a_t});
            cplx ref = 0.5 * (tr.at({}) * tr.at({}) - tr2.at({}));
            dev = std::max(dev, std::abs(s2.v[pt] - ref));
        }
    }
    return dev;
}

double check_f_squared(std::mt19937_64& rng, int count, bool trace_identity) {
    double dev = 0.0;
    const int n = 5;
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int it = 0; it < count; ++it) {
        Form4 F(n);
        const auto& c4 = combos(n, 4);
        for (const auto& c : c4) F.set(c[0], c[1], c[2], c[3], unif(rng));
        std::vector<double> G(n * n, 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = i; j < n; ++j) {
                double x = 0.15 * unif(rng);
                G[i * n + j] += x;
                G[j * n + i] += x;
            }
            G[i * n + i] += 2.0;
        }
        double fn2 = 0.0;
        std::vector<double> f2 = f_squared(F, G, &fn2);
        DenseTensor F_t({n, n, n, n}), G_t({n, n});
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                G_t.at({i, k}) = 0.0;
                for (int l = 0; l < n; ++l)
                    for (int m = 0; m < n; ++m)
                        F_t.at({i, k, l, m}) = 0.0;
            }
        Eigen::Map<Eigen::MatrixXd> Gm(G.data(), n, n);
        Eigen::MatrixXd Gi = Gm.inverse();
        DenseTensor Gi_t({n, n});
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                G_t.at({i, k}) = G[i * n + k];
                Gi_t.at({i, k}) = Gi(i, k);
            }
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    for (int m = 0; m < n; ++m)
                        F_t.at({i, k, l, m}) = F.get(i, k, l, m);
        if (!trace_identity) {
            DenseTensor ref = brute_contract("iklm,jpqr,kp,lq,mr->ij",
                                             {&F_t, &F_t, &Gi_t, &Gi_t, &Gi_t});
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    dev = std::max(dev, std::abs(f2[i * n + j] - ref.at({i, j}) / 6.0));
        } else {
            double tr = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) tr += Gi(i, j) * f2[i * n + j];
            dev = std::max(dev, std::abs(tr - 4.0 * fn2));
        }
    }
    return dev;
}

double check_roundtrip(std::mt19937_64& rng, int count) {
    double dev = 0.0;
    auto g = make_grid(3, 4, {0, 1});
    for (int it = 0; it < count; ++it) {
        MetricField gm = random_metric(g, rng, 0.05);
        MetricField gdot = random_metric(g, rng, 0.3);
        for (std::size_t i = 0; i < gdot.a.size(); ++i)
            gdot.a[i] -= (i < g->npoints * 9 && (i / g->npoints) % 4 == 0)
                             ? cplx(1.0)
                             : cplx(0.0); // strip the identity part
        FormField fwd = rate_map_forward(gm, gdot);
        HermTensorField back = invert_rate_map(gm, fwd);
        for (std::size_t i = 0; i < gdot.a.size(); ++i)
            dev = std::max(dev, std::abs(back.a[i] - gdot.a[i]));
    }
    return dev;
}

double check_fd_spectral(std::mt19937_64& rng, int count, double* order_out) {
    double dev = 0.0;
    std::vector<double> errs;
    for (int res : {16, 32, 64}) {
        auto g = make_grid(1, res, {0, 1});
        std::mt19937_64 local(12345);
        ScalarField f = random_bandlimited_scalar(g, local, 1.0, 2);
        ScalarField sp = partial_z(f, 0);
        ScalarField fx = fd_derivative(f, 0, 1);
        ScalarField fy = fd_derivative(f, 1, 1);
        double e = 0.0;
        for (std::size_t pt = 0; pt < g->npoints; ++pt)
            e = std::max(e, std::abs(0.5 * (fx.v[pt] - cplx(0, 1) * fy.v[pt]) -
                                     sp.v[pt]));
        errs.push_back(e);
    }
    (void)rng;
    (void)count;
    if (order_out)
        *order_out = 0.5 * (std::log2(errs[0] / errs[1]) + std::log2(errs[1] / errs[2]));
    dev = errs.back();
    return dev;
}

} // namespace

std::vector<OracleReport> run_verification(std::uint64_t seed, int count) {
    std::vector<OracleReport> reports;
    std::mt19937_64 rng(seed);
    auto add = [&](const std::string& name, double tol, double dev,
                   double order = 0.0) {
        OracleReport r;
        r.name = name;
        r.tol = tol;
        r.max_dev = dev;
        r.order = order;
        r.pass = dev < tol;
        reports.push_back(r);
    };
    add("torsion", 1e-12, check_torsion(rng, std::max(1, count / 10)));
    add("tau", 1e-12, check_tau(rng, count));
    add("chern_ricci", 1e-12, check_ricci(rng, std::max(1, count / 5)));
    add("chern_curvature", 1e-12, check_curvature(rng, std::max(1, count / 10)));
    add("tr_rm_wedge_rm", 1e-12, check_tr_rm_rm(rng, std::max(1, count / 10)));
    add("sigma2", 1e-12, check_sigma2(rng, count));
    add("f_squared", 1e-12, check_f_squared(rng, std::max(1, count / 5), false));
    add("f_trace_identity", 1e-12, check_f_squared(rng, count, true));
    add("invert_rate_map_roundtrip", 1e-10, check_roundtrip(rng, std::max(1, count / 5)));
    {
        double order = 0.0;
        double dev = check_fd_spectral(rng, count, &order);
        OracleReport r;
        r.name = "fd_vs_spectral";
        r.tol = 0.25;
        r.max_dev = dev;
        r.order = order;
        r.pass = std::abs(order - 2.0) < 0.25;
        reports.push_back(r);
    }
    return reports;
}

} // namespace sf
