#ifndef STRINGFLOW_ODE_HPP
#define STRINGFLOW_ODE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace sf {

using OdeVec = std::vector<double>;

/// Returns false when the state is outside the admissible region (the step
/// is then rejected and retried with a smaller dt).
using OdeRhs = std::function<bool(double t, const OdeVec& y, OdeVec& dy)>;

struct OdeOptions {
    double dt_init = 1e-3;
    double dt_min = 1e-13;
    double dt_max = 0.25;
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double safety = 0.9;
    /// Step-doubling error control runs every `recheck_every` accepted
    /// steps; plain RK4 in between (the dt is frozen between checks).
    int recheck_every = 1;
    /// > 0 switches to fixed-step RK4 (no error control), used by
    /// convergence-order studies.
    double fixed_dt = 0.0;
};

enum class StepOutcome { Accepted, Underflow, Invalid };

/// Classical RK4 with step-doubling error control (error estimate
/// |y_two_half_steps - y_one_step| / 15, local order 5).
class AdaptiveRk4 {
  public:
    AdaptiveRk4(OdeRhs rhs, OdeOptions opt, double t0, OdeVec y0)
        : rhs_(std::move(rhs)), opt_(opt), t_(t0), y_(std::move(y0)),
          dt_(opt.fixed_dt > 0 ? opt.fixed_dt : opt.dt_init) {}

    double t() const { return t_; }
    const OdeVec& y() const { return y_; }
    OdeVec& y() { return y_; }
    double dt() const { return dt_; }
    double last_error() const { return last_err_; }

    StepOutcome step(double t_end) {
        if (opt_.fixed_dt > 0) {
            double h = std::min(opt_.fixed_dt, t_end - t_);
            if (!rk4(t_, y_, h, scratch_)) return StepOutcome::Invalid;
            y_.swap(scratch_);
            t_ += h;
            return StepOutcome::Accepted;
        }
        bool check = (accepted_ % std::max(1, opt_.recheck_every)) == 0;
        for (;;) {
            double h = std::min(dt_, t_end - t_);
            if (h < opt_.dt_min && t_ + h < t_end) return StepOutcome::Underflow;
            if (!check) {
                if (rk4(t_, y_, h, scratch_)) {
                    y_.swap(scratch_);
                    t_ += h;
                    ++accepted_;
                    return StepOutcome::Accepted;
                }
                check = true; // invalid mid-run: fall through to controlled retry
                continue;
            }
            bool ok = rk4(t_, y_, h, big_) && rk4(t_, y_, h / 2, half_) &&
                      rk4(t_ + h / 2, half_, h / 2, scratch_);
            if (!ok) {
                dt_ = h / 2;
                if (dt_ < opt_.dt_min) return StepOutcome::Invalid;
                continue;
            }
            double err = 0.0;
            for (std::size_t i = 0; i < y_.size(); ++i) {
                double scale = opt_.abs_tol +
                               opt_.rel_tol * std::max(std::abs(y_[i]), std::abs(scratch_[i]));
                double e = std::abs(scratch_[i] - big_[i]) / 15.0 / scale;
                if (e > err) err = e;
            }
            last_err_ = err;
            double factor = (err > 0) ? opt_.safety * std::pow(err, -0.2) : 2.0;
            factor = std::min(2.0, std::max(0.2, factor));
            if (err <= 1.0) {
                y_.swap(scratch_);
                t_ += h;
                ++accepted_;
                dt_ = std::min(opt_.dt_max, std::max(opt_.dt_min, dt_ * factor));
                return StepOutcome::Accepted;
            }
            dt_ = std::max(opt_.dt_min, h * factor);
            if (dt_ <= opt_.dt_min && h <= opt_.dt_min) return StepOutcome::Underflow;
        }
    }

  private:
    bool rk4(double t, const OdeVec& y, double h, OdeVec& out) {
        const std::size_t n = y.size();
        k1_.resize(n); k2_.resize(n); k3_.resize(n); k4_.resize(n); tmp_.resize(n);
        if (!rhs_(t, y, k1_)) return false;
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k1_[i];
        if (!rhs_(t + 0.5 * h, tmp_, k2_)) return false;
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k2_[i];
        if (!rhs_(t + 0.5 * h, tmp_, k3_)) return false;
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * k3_[i];
        if (!rhs_(t + h, tmp_, k4_)) return false;
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = y[i] + h / 6.0 * (k1_[i] + 2 * k2_[i] + 2 * k3_[i] + k4_[i]);
        return true;
    }

    OdeRhs rhs_;
    OdeOptions opt_;
    double t_;
    OdeVec y_;
    double dt_;
    double last_err_ = 0.0;
    long accepted_ = 0;
    OdeVec k1_, k2_, k3_, k4_, tmp_, scratch_, big_, half_;
};

} // namespace sf

#endif
