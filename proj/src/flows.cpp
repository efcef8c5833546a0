#include "stringflow/flows.hpp"
#include "stringflow/monitors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ostream>
#include <sstream>

namespace sf {

FormField anomaly_rate_22(const MetricField& g, double alpha_prime,
                          const FormField* Phi) {
    const int m = g.m;
    if (m < 2) throw grid_error("anomaly_rate_22: m < 2");
    FormField r = del(delbar(omega_power(g, m - 2)));
    r *= cplx(0.0, 1.0);
    if (Phi) {
        if (Phi->p != m - 1 || Phi->q != m - 1)
            throw grid_error("anomaly_rate_22: Phi must be an (m-1,m-1)-form");
        double cd = d_closedness(*Phi);
        if (cd > 1e-6 * (1.0 + l2_norm(*Phi)))
            throw grid_error("anomaly_rate_22: Phi is not closed");
        FormField scaled = *Phi;
        scaled *= cplx(-alpha_prime, 0.0);
        r += scaled;
    }
    return r;
}

FormField rate_map_forward(const MetricField& g, const HermTensorField& gdot) {
    const int m = g.m;
    ScalarField n = norm_omega(g);
    InverseMetricField gi = inverse(g);
    FormField w1 = omega_power(g, m - 1);
    FormField w2 = omega_power(g, m - 2);
    FormField wedge_part = wedge(gdot.to_form(), w2);
    FormField out(g.grid, m - 1, m - 1);
    const std::size_t np = g.npoints();
    for (std::size_t pt = 0; pt < np; ++pt) {
        cplx tr = 0.0;
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) tr += gi.at(j, k, pt) * gdot.at(k, j, pt);
        double nn = n.v[pt].real();
        for (int c = 0; c < out.ncomp; ++c)
            out.at(c, pt) =
                nn * (-0.5 * tr * w1.at(c, pt) + double(m - 1) * wedge_part.at(c, pt));
    }
    return out;
}

HermTensorField invert_rate_map(const MetricField& g, const FormField& rate22) {
    const int m = g.m;
    if (rate22.p != m - 1 || rate22.q != m - 1)
        throw grid_error("invert_rate_map: rate must be an (m-1,m-1)-form");
    const std::size_t np = g.npoints();
    const int nc = m * m; // components of both the unknown and the rate
    ScalarField n = norm_omega(g);
    InverseMetricField gi = inverse(g);
    FormField w1 = omega_power(g, m - 1);
    FormField w2 = omega_power(g, m - 2);
    const auto& plan = wedge_plan(m, 1, 1, m - 2, m - 2);
    const int w2c = w2.ncomp;

    HermTensorField out(g.grid);
    Eigen::MatrixXcd M(nc, nc);
    Eigen::VectorXcd rhs(nc), x(nc);
    std::vector<cplx> b11(nc), col(nc), w2pt(w2c);
    const cplx iu(0.0, 1.0);

    for (std::size_t pt = 0; pt < np; ++pt) {
        double nn = n.v[pt].real();
        for (int c = 0; c < w2c; ++c) w2pt[c] = w2.at(c, pt);
        // columns: the complex-linear map applied to elementary matrices
        // E_{kj} (the Hermitian solution is recovered because the map is the
        // complexification of the real-linear rate map).
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j) {
                std::fill(b11.begin(), b11.end(), cplx(0.0));
                b11[j * m + k] = iu; // (J={j},K={k}) coefficient of E_{kj}
                std::fill(col.begin(), col.end(), cplx(0.0));
                for (const auto& t : plan)
                    col[t.cout] += t.sign * b11[t.ca] * w2pt[t.cb];
                cplx tr = gi.at(j, k, pt); // tr(g^{-1} E_{kj})
                for (int c = 0; c < nc; ++c)
                    M(c, k * m + j) =
                        nn * (-0.5 * tr * w1.at(c, pt) + double(m - 1) * col[c]);
            }
        for (int c = 0; c < nc; ++c) rhs(c) = rate22.at(c, pt);
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
        x = lu.solve(rhs);
        double resid = (M * x - rhs).norm();
        double scale = rhs.norm() + 1.0;
        if (!x.allFinite() || resid > 1e-8 * scale) {
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
                M, Eigen::ComputeThinU | Eigen::ComputeThinV);
            double cond = svd.singularValues()(0) /
                          std::max(svd.singularValues()(nc - 1), 1e-300);
            x = svd.solve(rhs);
            if (!x.allFinite() || (M * x - rhs).norm() > 1e-6 * scale) {
                std::ostringstream os;
                os << "invert_rate_map: singular linearization at point " << pt
                   << " (condition number " << cond << ")";
                throw grid_error(os.str());
            }
        }
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j) {
                cplx h = 0.5 * (x(k * m + j) + std::conj(x(j * m + k)));
                out.at(k, j, pt) = h;
            }
    }
    return out;
}

namespace {

// Shared torsion-squared contraction sum_{p,q,b,c} T_{kbar pq}
// conj(T_{jbar bc}) g^{p bbar} g^{q cbar} at one point.
cplx tt_contract(const FormField& T, const InverseMetricField& gi, int k, int j,
                 std::size_t pt) {
    const int m = T.grid->m;
    cplx s = 0.0;
    for (int p = 0; p < m; ++p)
        for (int q = p + 1; q < m; ++q) {
            cplx tk = torsion_coeff(T, k, p, q, pt);
            if (tk == cplx(0.0)) continue;
            for (int b = 0; b < m; ++b)
                for (int c = 0; c < m; ++c) {
                    cplx tj = torsion_coeff(T, j, b, c, pt);
                    if (tj == cplx(0.0)) continue;
                    // factor 2: restriction to p<q with antisymmetry
                    s += 2.0 * tk * std::conj(tj) * gi.at(p, b, pt) * gi.at(q, c, pt);
                }
        }
    return s;
}

} // namespace

HermTensorField anomaly_rhs_11(const MetricField& g) {
    const int m = g.m;
    if (m < 3) throw grid_error("anomaly_rhs_11: requires m >= 3");
    const std::size_t np = g.npoints();
    InverseMetricField gi = inverse(g);
    FormField T = torsion(g);
    FormField tf = tau(T, gi);
    HermTensorField ric = chern_ricci_tilde(g);
    ScalarField t2 = torsion_norm2(T, gi);
    ScalarField tn2 = tau_norm2(tf, gi);
    ScalarField n = norm_omega(g);

    HermTensorField out(g.grid);
    for (std::size_t pt = 0; pt < np; ++pt) {
        double pref = 1.0 / ((m - 1) * n.v[pt].real());
        // full torsion contraction (no antisymmetry half-weight) minus 2|tau|^2
        double tr_term =
            (2.0 * t2.v[pt].real() - 2.0 * tn2.v[pt].real()) / (2.0 * (m - 2));
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j) {
                cplx v = -ric.at(k, j, pt);
                v -= 0.5 * tt_contract(T, gi, k, j, pt);
                for (int s = 0; s < m; ++s) {
                    cplx tks = torsion_coeff(T, k, j, s, pt);
                    if (tks != cplx(0.0))
                        for (int b = 0; b < m; ++b)
                            v += tks * gi.at(s, b, pt) * std::conj(tf.at(b, pt));
                }
                for (int a = 0; a < m; ++a)
                    for (int r = 0; r < m; ++r) {
                        cplx tjr = torsion_coeff(T, j, k, r, pt);
                        if (tjr != cplx(0.0))
                            v += gi.at(a, r, pt) * tf.at(a, pt) * std::conj(tjr);
                    }
                v += tf.at(j, pt) * std::conj(tf.at(k, pt));
                v += tr_term * g.at(k, j, pt);
                out.at(k, j, pt) = pref * v;
            }
    }
    return out;
}

HermTensorField anomaly_rhs_11_simple(const MetricField& g) {
    const int m = g.m;
    if (m != 3) throw grid_error("anomaly_rhs_11_simple: m = 3 only");
    const std::size_t np = g.npoints();
    InverseMetricField gi = inverse(g);
    FormField T = torsion(g);
    HermTensorField ric = chern_ricci_tilde(g);
    ScalarField n = norm_omega(g);
    HermTensorField out(g.grid);
    for (std::size_t pt = 0; pt < np; ++pt) {
        double pref = 1.0 / ((m - 1) * n.v[pt].real());
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j) {
                cplx v = -ric.at(k, j, pt);
                for (int s = 0; s < m; ++s)
                    for (int r = 0; r < m; ++r)
                        for (int p = 0; p < m; ++p)
                            for (int q = 0; q < m; ++q) {
                                cplx tq = torsion_coeff(T, q, s, j, pt);
                                if (tq == cplx(0.0)) continue;
                                v += gi.at(s, r, pt) * gi.at(p, q, pt) * tq *
                                     std::conj(torsion_coeff(T, p, r, k, pt));
                            }
                out.at(k, j, pt) = pref * v;
            }
    }
    return out;
}

HermTensorField eta_rhs(const MetricField& eta) {
    const int m = eta.m;
    if (m < 2) throw grid_error("eta_rhs: m < 2");
    const std::size_t np = eta.npoints();
    InverseMetricField gi = inverse(eta);
    FormField T = torsion(eta);
    HermTensorField ric = chern_ricci_tilde(eta);
    HermTensorField out(eta.grid);
    double pref = -1.0 / (m - 1);
    for (std::size_t pt = 0; pt < np; ++pt)
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j)
                out.at(k, j, pt) =
                    pref * (ric.at(k, j, pt) + 0.5 * tt_contract(T, gi, k, j, pt));
    return out;
}

MetricField hessian_metric(const MetricField& chi_hat, const ScalarField& phi) {
    const int m = chi_hat.m;
    MetricField chi = chi_hat;
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < m; ++j) {
            ScalarField h = partial_zbar(partial_z(phi, j), k);
            for (std::size_t pt = 0; pt < chi.npoints(); ++pt)
                chi.at(k, j, pt) += h.v[pt];
        }
    return chi;
}

MaRhsResult ma_flow_rhs(const ScalarField& phi, const MetricField& chi_hat,
                        const ScalarField& f) {
    MaRhsResult res;
    MetricField chi = hessian_metric(chi_hat, phi);
    MetricCheckResult chk = check_metric(chi);
    res.min_eig = chk.min_eigenvalue;
    res.worst_point = chk.worst_point;
    if (!(chk.min_eigenvalue > 0)) {
        res.positive = false;
        res.rate = ScalarField(phi.grid, true);
        return res;
    }
    ScalarField dnum = det_field(chi);
    ScalarField dden = det_field(chi_hat);
    res.rate = ScalarField(phi.grid, true);
    for (std::size_t pt = 0; pt < phi.size(); ++pt)
        res.rate.v[pt] = std::exp(-f.v[pt].real()) * dnum.v[pt].real() /
                         dden.v[pt].real();
    return res;
}

ScalarField sigma2(const MetricField& g, const HermTensorField& a) {
    const int m = g.m;
    InverseMetricField gi = inverse(g);
    ScalarField out(g.grid, true);
    for (std::size_t pt = 0; pt < g.npoints(); ++pt) {
        cplx tr = 0.0, tr2 = 0.0;
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) tr += gi.at(j, k, pt) * a.at(k, j, pt);
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                for (int p = 0; p < m; ++p)
                    for (int q = 0; q < m; ++q)
                        tr2 += gi.at(j, k, pt) * a.at(k, p, pt) * gi.at(p, q, pt) *
                               a.at(q, j, pt);
        out.v[pt] = 0.5 * (tr * tr - tr2).real();
    }
    return out;
}

ScalarField fu_yau_rhs(const ScalarField& u, const FuYauData& data,
                       double* integrability_out) {
    if (data.chi_hat.m != 2)
        throw grid_error("fu_yau_rhs: base metric must have m = 2");
    const std::size_t np = u.size();
    MetricField gu = data.chi_hat;
    for (int c = 0; c < 4; ++c) {
        cplx* dst = gu.a.data() + std::size_t(c) * np;
        for (std::size_t pt = 0; pt < np; ++pt) dst[pt] *= std::exp(u.v[pt].real());
    }
    // holomorphic-form norm of the total fibered metric diag(e^u, e^u, 1):
    // e^{-u}/sqrt(6), not the norm of the 2d base metric alone
    ScalarField n(u.grid, true);
    for (std::size_t pt = 0; pt < np; ++pt)
        n.v[pt] = std::exp(-u.v[pt].real()) / std::sqrt(6.0);
    ScalarField R = scalar_curvature(gu);
    ScalarField t2 = torsion_norm2(gu);
    ScalarField bracket(u.grid, true);
    for (std::size_t pt = 0; pt < np; ++pt)
        bracket.v[pt] = 0.5 * R.v[pt].real() - t2.v[pt].real();
    if (data.alpha_prime != 0.0) {
        HermTensorField ric = chern_ricci_tilde(gu);
        ScalarField s2 = sigma2(gu, ric);
        for (std::size_t pt = 0; pt < np; ++pt)
            bracket.v[pt] -= 0.25 * data.alpha_prime * s2.v[pt].real();
    }
    FormField w2 = omega_power(gu, 2);
    if (data.alpha_prime != 0.0 && data.rho) {
        if (data.rho->p != 1 || data.rho->q != 1)
            throw grid_error("fu_yau_rhs: rho must be a (1,1)-form");
        FormField nrho = *data.rho;
        for (int c = 0; c < nrho.ncomp; ++c)
            for (std::size_t pt = 0; pt < np; ++pt)
                nrho.at(c, pt) *= n.v[pt].real();
        FormField x = del(delbar(nrho));
        x *= cplx(0.0, 1.0);
        for (std::size_t pt = 0; pt < np; ++pt)
            bracket.v[pt] +=
                2.0 * data.alpha_prime * (x.at(0, pt) / w2.at(0, pt)).real();
    }
    if (data.mu) {
        if (data.mu->p != 2 || data.mu->q != 2)
            throw grid_error("fu_yau_rhs: mu must be a (2,2)-form");
        for (std::size_t pt = 0; pt < np; ++pt)
            bracket.v[pt] -= 2.0 * (data.mu->at(0, pt) / w2.at(0, pt)).real();
    }
    if (integrability_out) *integrability_out = integrate(bracket).real();
    ScalarField rate(u.grid, true);
    for (std::size_t pt = 0; pt < np; ++pt)
        rate.v[pt] = -bracket.v[pt].real() / (2.0 * n.v[pt].real());
    return rate;
}

FormField iib_rhs(const MetricField& eta, const FormField& rho_B) {
    if (eta.m != 3) throw grid_error("iib_rhs: m = 3 only");
    if (rho_B.p != 2 || rho_B.q != 2)
        throw grid_error("iib_rhs: rho_B must be a (2,2)-form");
    double cd = d_closedness(rho_B);
    if (cd > 1e-6 * (1.0 + l2_norm(rho_B)))
        throw grid_error("iib_rhs: rho_B is not closed");
    FormField r = del(delbar(eta.to_form()));
    r *= cplx(0.0, 1.0);
    r -= rho_B;
    return r;
}

double l2_norm(const HermTensorField& t) {
    double acc = 0.0;
    for (const cplx& z : t.a) acc += std::norm(z);
    return std::sqrt(acc / double(t.npoints()));
}

const char* to_string(FlowTermination t) {
    switch (t) {
        case FlowTermination::Converged: return "converged";
        case FlowTermination::TimeEnd: return "time-end";
        case FlowTermination::MaxSteps: return "max-steps";
        case FlowTermination::DtUnderflow: return "dt-underflow";
        case FlowTermination::PositivityLoss: return "positivity-loss";
        case FlowTermination::ParabolicityLoss: return "parabolicity-loss";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// run_flow

namespace {

void pack(const MetricField& g, OdeVec& y) {
    y.resize(2 * g.a.size());
    std::memcpy(y.data(), g.a.data(), y.size() * sizeof(double));
}
void unpack(const OdeVec& y, MetricField& g) {
    std::memcpy(g.a.data(), y.data(), y.size() * sizeof(double));
}
void pack(const ScalarField& s, OdeVec& y) {
    y.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) y[i] = s.v[i].real();
}
void unpack(const OdeVec& y, ScalarField& s) {
    for (std::size_t i = 0; i < y.size(); ++i) s.v[i] = y[i];
}

bool is_metric_kind(FlowKind k) {
    return k == FlowKind::Anomaly || k == FlowKind::Eta || k == FlowKind::IIB;
}

} // namespace

FlowResult run_flow(const FlowConfig& cfg, const MetricField* g0,
                    const ScalarField* s0) {
    FlowResult res;
    const bool metric_kind = is_metric_kind(cfg.kind);
    if (metric_kind && !g0) throw grid_error("run_flow: metric initial data required");
    if (!metric_kind && !s0) throw grid_error("run_flow: scalar initial data required");
    if (cfg.kind == FlowKind::MA && (!cfg.chi_hat || !cfg.f))
        throw grid_error("run_flow: MA flow needs chi_hat and f");
    if (cfg.kind == FlowKind::FuYau && !cfg.fu_yau)
        throw grid_error("run_flow: Fu-Yau flow needs its data");

    if (cfg.kind == FlowKind::Anomaly || cfg.kind == FlowKind::IIB) {
        res.initial_balanced = balanced_residual(*g0);
        if (res.initial_balanced > cfg.balanced_tol) {
            std::ostringstream os;
            os << "run_flow: initial metric is not conformally balanced (residual "
               << res.initial_balanced << " > " << cfg.balanced_tol << ")";
            throw grid_error(os.str());
        }
    } else if (cfg.kind == FlowKind::Eta) {
        res.initial_balanced = balanced_residual_sq(*g0);
    }

    MetricField gwork = metric_kind ? *g0 : MetricField();
    ScalarField swork = metric_kind ? ScalarField() : *s0;
    // MA positivity diagnostics captured from the last rejected evaluation
    bool positivity_flag = false;
    double chimin0 = 0.0;
    ScalarField chi_hat_mineig; // Fu-Yau: pointwise floor of chi_hat
    if (cfg.kind == FlowKind::FuYau) chimin0 = check_metric(cfg.fu_yau->chi_hat).min_eigenvalue;

    auto eval_rate = [&](const OdeVec& y, OdeVec& dy) -> bool {
        try {
            if (metric_kind) {
                unpack(y, gwork);
                HermTensorField rate(gwork.grid);
                if (cfg.kind == FlowKind::Anomaly) {
                    if (cfg.use_direct_11)
                        rate = anomaly_rhs_11(gwork);
                    else
                        rate = invert_rate_map(
                            gwork, anomaly_rate_22(gwork, cfg.alpha_prime, cfg.Phi));
                } else if (cfg.kind == FlowKind::Eta) {
                    rate = eta_rhs(gwork);
                } else {
                    rate = invert_rate_map(gwork, iib_rhs(gwork, *cfg.rho_B));
                }
                pack(rate, dy);
            } else {
                unpack(y, swork);
                if (cfg.kind == FlowKind::MA) {
                    MaRhsResult r = ma_flow_rhs(swork, *cfg.chi_hat, *cfg.f);
                    if (!r.positive) {
                        positivity_flag = true;
                        return false;
                    }
                    pack(r.rate, dy);
                } else {
                    ScalarField r = fu_yau_rhs(swork, *cfg.fu_yau);
                    pack(r, dy);
                }
            }
            return true;
        } catch (const grid_error&) {
            positivity_flag = true;
            return false;
        }
    };

    OdeVec y0;
    if (metric_kind)
        pack(*g0, y0);
    else
        pack(*s0, y0);

    AdaptiveRk4 stepper(
        [&](double, const OdeVec& y, OdeVec& dy) { return eval_rate(y, dy); },
        cfg.ode, 0.0, std::move(y0));

    if (cfg.trajectory_csv)
        *cfg.trajectory_csv
            << "step,t,dt,rhs_norm,balanced_residual,conserved_volume,min_eig\n";

    int streak = 0;
    bool vol_init_set = false;
    double rhs_norm = 0.0;

    auto monitor = [&](long step, double t) -> FlowTermination {
        OdeVec dy;
        double balanced = 0.0, vol = 0.0, mineig = 0.0;
        if (metric_kind) {
            unpack(stepper.y(), gwork);
            MetricCheckResult chk = check_metric(gwork);
            mineig = chk.min_eigenvalue;
            if (!(mineig > 0)) return FlowTermination::PositivityLoss;
            balanced = (cfg.kind == FlowKind::Eta) ? balanced_residual_sq(gwork)
                                                   : balanced_residual(gwork);
            vol = conserved_volume(gwork);
        } else {
            unpack(stepper.y(), swork);
            if (cfg.kind == FlowKind::MA) {
                MetricField chi = hessian_metric(*cfg.chi_hat, swork);
                MetricCheckResult chk = check_metric(chi);
                mineig = chk.min_eigenvalue;
                if (!(mineig > 0)) return FlowTermination::PositivityLoss;
                balanced = d_closedness(chi.to_form());
                vol = class_pairing(chi, flat_kahler_form(chi.grid));
            } else {
                double umin = 1e300, umax = -1e300;
                for (const cplx& z : swork.v) {
                    umin = std::min(umin, z.real());
                    umax = std::max(umax, z.real());
                }
                mineig = std::exp(umin) * chimin0;
                MetricField gu = cfg.fu_yau->chi_hat;
                for (std::size_t i = 0; i < gu.a.size(); ++i)
                    gu.a[i] *= std::exp(swork.v[i % swork.size()].real());
                balanced = balanced_residual(gu);
                vol = conserved_volume(gu);
                if (cfg.fu_yau->alpha_prime != 0.0) {
                    auto [floor_, ok] = parabolicity(gu, cfg.fu_yau->alpha_prime,
                                                     cfg.fu_yau->rho);
                    if (!ok && !cfg.fu_yau->allow_nonparabolic)
                        return FlowTermination::ParabolicityLoss;
                }
            }
        }
        if (!eval_rate(stepper.y(), dy)) return FlowTermination::PositivityLoss;
        double acc = 0.0, mean = 0.0;
        if (cfg.kind == FlowKind::MA) {
            for (double v : dy) mean += v;
            mean /= double(dy.size());
        }
        for (double v : dy) acc += (v - mean) * (v - mean);
        std::size_t npts = metric_kind ? gwork.npoints() : swork.size();
        rhs_norm = std::sqrt(acc / double(npts));
        res.max_balanced = std::max(res.max_balanced, balanced);
        res.min_eig_seen = (step == 0) ? mineig : std::min(res.min_eig_seen, mineig);
        if (!vol_init_set) {
            res.volume_initial = vol;
            vol_init_set = true;
        }
        res.max_volume_drift =
            std::max(res.max_volume_drift, std::abs(vol - res.volume_initial));
        if (cfg.trajectory_csv) {
            char line[256];
            std::snprintf(line, sizeof line,
                          "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", step, t,
                          stepper.dt(), rhs_norm, balanced, vol, mineig);
            *cfg.trajectory_csv << line;
        }
        if (cfg.snapshot_hook)
            cfg.snapshot_hook(step, t, metric_kind ? &gwork : nullptr,
                              metric_kind ? nullptr : &swork);
        streak = (rhs_norm < cfg.stop_tol) ? streak + 1 : 0;
        if (streak >= 3 || (step == 0 && rhs_norm < cfg.stop_tol))
            return FlowTermination::Converged;
        return FlowTermination::TimeEnd; // sentinel: keep going
    };

    long step = 0;
    FlowTermination verdict = monitor(0, 0.0);
    if (verdict == FlowTermination::TimeEnd || step >= cfg.max_steps) {
        while (stepper.t() < cfg.t_end && step < cfg.max_steps) {
            StepOutcome oc = stepper.step(cfg.t_end);
            if (oc == StepOutcome::Underflow) {
                verdict = FlowTermination::DtUnderflow;
                break;
            }
            if (oc == StepOutcome::Invalid) {
                verdict = positivity_flag ? FlowTermination::PositivityLoss
                                          : FlowTermination::DtUnderflow;
                break;
            }
            ++step;
            if (step % std::max(1, cfg.monitor_every) == 0 ||
                stepper.t() >= cfg.t_end || step >= cfg.max_steps) {
                verdict = monitor(step, stepper.t());
                if (verdict != FlowTermination::TimeEnd) break;
            }
        }
        if (verdict == FlowTermination::TimeEnd && step >= cfg.max_steps &&
            stepper.t() < cfg.t_end)
            verdict = FlowTermination::MaxSteps;
    }

    res.reason = verdict;
    res.t = stepper.t();
    res.steps = step;
    res.final_rhs_norm = rhs_norm;
    if (metric_kind) {
        unpack(stepper.y(), gwork);
        res.g = gwork;
    } else {
        unpack(stepper.y(), swork);
        swork.enforce_real();
        res.scalar = swork;
    }
    return res;
}

} // namespace sf
