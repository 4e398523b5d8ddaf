#pragma once

// Adaptive Dormand-Prince 5(4) integration with dense output.  The stepper is
// templated on the right-hand-side functor; Trajectory-producing drivers and
// the Poincare-section limit-cycle detector are free functions on top of it.

#include "grnlab/schedule.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace grnlab {

struct Tolerances {
    double rtol = 1e-8;
    double atol = 1e-10;
};

enum class StepOutcome { Ok, Underflow, NonFinite, MaxSteps };

struct StepperOptions {
    Tolerances tol;
    double h_max = std::numeric_limits<double>::infinity();
    double h_init = 0.0;  ///< 0 = automatic
    std::int64_t max_steps = 400'000'000;
    bool clamp_nonnegative = false;  ///< clamp tiny negative components to 0 on accept
};

/// One accepted step's quartic interpolant.
struct DenseStep {
    double t0 = 0.0, t1 = 0.0;
    Vec c1, c2, c3, c4, c5;

    void eval(double t, Vec& out) const {
        double th = (t - t0) / (t1 - t0);
        double th1 = 1.0 - th;
        out = c1 + th * (c2 + th1 * (c3 + th * (c4 + th1 * c5)));
    }
};

template <class F>
class Dopri5 {
  public:
    Dopri5(F f, int n, StepperOptions opt = {})
        : f_(std::move(f)), n_(n), opt_(opt) {
        for (Vec* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &y_, &yold_, &ytmp_, &ysti_})
            v->resize(n);
    }

    void start(double t0, const Vec& y0) {
        t_ = told_ = t0;
        y_ = yold_ = y0;
        f_(t_, y_, k1_);
        nfev_ = 1;
        nsteps_ = 0;
        h_ = opt_.h_init > 0.0 ? opt_.h_init : initial_step();
        facold_ = 1e-4;
    }

    double t() const { return t_; }
    double t_old() const { return told_; }
    const Vec& state() const { return y_; }
    const Vec& state_old() const { return yold_; }
    const Vec& deriv() const { return k1_; }  ///< f at (t, state), FSAL
    std::int64_t n_steps() const { return nsteps_; }
    std::int64_t n_evals() const { return nfev_; }
    double step_size() const { return h_; }

    const DenseStep& dense() const { return dense_; }

    /// Advance one accepted step, never stepping past t_limit.
    StepOutcome step(double t_limit) {
        constexpr double kSafe = 0.9, kBeta = 0.04, kExpo1 = 0.2 - kBeta * 0.75;
        constexpr double kFacMin = 0.2, kFacMax = 10.0;
        bool rejected = false;
        for (;;) {
            if (++nsteps_ > opt_.max_steps) return StepOutcome::MaxSteps;
            if (h_ < 16.0 * std::numeric_limits<double>::epsilon() * std::abs(t_) &&
                h_ < 1e-14)
                return StepOutcome::Underflow;
            double h = std::min(h_, opt_.h_max);
            bool last = t_ + 1.01 * h >= t_limit;
            if (last) h = t_limit - t_;

            // stages
            ytmp_ = y_ + h * (a21 * k1_);
            f_(t_ + c2 * h, ytmp_, k2_);
            ytmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
            f_(t_ + c3 * h, ytmp_, k3_);
            ytmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
            f_(t_ + c4 * h, ytmp_, k4_);
            ytmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
            f_(t_ + c5 * h, ytmp_, k5_);
            ysti_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
            f_(t_ + h, ysti_, k6_);
            ytmp_ = y_ + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
            f_(t_ + h, ytmp_, k7_);
            nfev_ += 6;

            // scaled error norm
            double err = 0.0;
            for (int i = 0; i < n_; ++i) {
                double e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] +
                                e6 * k6_[i] + e7 * k7_[i]);
                double sc = opt_.tol.atol +
                            opt_.tol.rtol * std::max(std::abs(y_[i]), std::abs(ytmp_[i]));
                err += (e / sc) * (e / sc);
            }
            err = std::sqrt(err / n_);
            if (!std::isfinite(err)) return StepOutcome::NonFinite;

            double fac11 = std::pow(err, kExpo1);
            if (err <= 1.0) {
                facold_ = std::max(err, 1e-4);
                double fac = fac11 / std::pow(facold_, kBeta);
                fac = std::max(1.0 / kFacMax, std::min(1.0 / kFacMin, fac / kSafe));
                double hnew = h / fac;
                if (rejected) hnew = std::min(hnew, h);

                build_dense(h);
                told_ = t_;
                yold_.swap(y_);
                y_ = ytmp_;
                if (opt_.clamp_nonnegative)
                    for (int i = 0; i < n_; ++i)
                        if (y_[i] < 0.0) y_[i] = 0.0;
                t_ = last ? t_limit : t_ + h;
                if (opt_.clamp_nonnegative) {
                    f_(t_, y_, k1_);  // re-evaluate so FSAL matches the clamped state
                    ++nfev_;
                } else {
                    k1_.swap(k7_);
                }
                h_ = hnew;
                return StepOutcome::Ok;
            }
            h_ = h / std::min(1.0 / kFacMin, fac11 / kSafe);
            rejected = true;
        }
    }

  private:
    double initial_step() {
        // Hairer's hinit, abbreviated.
        double dnf = 0.0, dny = 0.0;
        for (int i = 0; i < n_; ++i) {
            double sc = opt_.tol.atol + opt_.tol.rtol * std::abs(y_[i]);
            dnf += (k1_[i] / sc) * (k1_[i] / sc);
            dny += (y_[i] / sc) * (y_[i] / sc);
        }
        double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
        h = std::min(h, opt_.h_max);
        ytmp_ = y_ + h * k1_;
        f_(t_ + h, ytmp_, k2_);
        ++nfev_;
        double der2 = 0.0;
        for (int i = 0; i < n_; ++i) {
            double sc = opt_.tol.atol + opt_.tol.rtol * std::abs(y_[i]);
            der2 += ((k2_[i] - k1_[i]) / sc) * ((k2_[i] - k1_[i]) / sc);
        }
        der2 = std::sqrt(der2) / h;
        double der12 = std::max(der2, std::sqrt(dnf));
        double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3)
                                   : std::pow(0.01 / der12, 0.2);
        return std::min({100.0 * h, h1, opt_.h_max});
    }

    void build_dense(double h) {
        dense_.t0 = t_;
        dense_.t1 = t_ + h;
        dense_.c1 = y_;
        dense_.c2 = ytmp_ - y_;
        dense_.c3 = h * k1_ - dense_.c2;
        dense_.c4 = dense_.c2 - h * k7_ - dense_.c3;
        dense_.c5 = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
    }

    // Dormand-Prince coefficients
    static constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
    static constexpr double a21 = 0.2;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                            a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                            a65 = -5103.0 / 18656.0;
    static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                            a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    static constexpr double d1 = -12715105075.0 / 11282082432.0,
                            d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0,
                            d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0,
                            d7 = 69997945.0 / 29380423.0;

    F f_;
    int n_;
    StepperOptions opt_;
    double t_ = 0.0, told_ = 0.0, h_ = 0.0, facold_ = 1e-4;
    std::int64_t nfev_ = 0, nsteps_ = 0;
    Vec k1_, k2_, k3_, k4_, k5_, k6_, k7_, y_, yold_, ytmp_, ysti_;
    DenseStep dense_;
};

// ---------------------------------------------------------------------------

struct TrajectoryEvent {
    double t;
    std::string kind;
    double data = 0.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<DenseStep> steps;  ///< one per accepted step when dense output kept
    std::vector<TrajectoryEvent> events;

    const Vec& back() const { return states.back(); }

    /// Dense evaluation; requires kept steps and t within range.
    Vec eval(double t) const;
};

struct IntegrateOptions {
    Tolerances tol;
    bool keep_dense = true;
    std::int64_t max_steps = 400'000'000;
};

/// Integrates the scheduled system over [t0, t1], splitting exactly at every
/// schedule discontinuity so each subinterval sees a smooth field.
/// Throws std::runtime_error on step-size underflow or non-finite states,
/// reporting the failure time.
Trajectory integrate(const ScheduledSystem& sys, const Vec& ic, double t0, double t1,
                     const IntegrateOptions& opt = {});

inline Trajectory integrate(const ModelInstance& model, const std::vector<Schedule>& schedules,
                            const Vec& ic, double t0, double t1,
                            const IntegrateOptions& opt = {}) {
    return integrate(ScheduledSystem(model, schedules), ic, t0, t1, opt);
}

// ---------------------------------------------------------------------------

struct LimitCycle {
    double period = 0.0;
    Vec anchor;                  ///< state on the section (upward crossing)
    Vec min_levels, max_levels;  ///< per-gene extrema over one period
    std::vector<double> sample_times;  ///< in [0, period], from the anchor
    std::vector<Vec> samples;
    int section_component = 0;
    double section_level = 0.0;
    double anchor_param = std::numeric_limits<double>::quiet_NaN();  ///< set by continuation
};

struct CycleDetectOptions {
    Tolerances tol{1e-8, 1e-10};
    double settle_time = 2000.0;
    double return_tol = 1e-4;       ///< relative agreement of successive return times
    int section_component = 0;
    double amplitude_floor = 1e-6;  ///< absolute oscillation-death floor
    double max_time = 2e6;          ///< detection budget after settling
    int n_samples = 512;
    double period_hint = 0.0;       ///< 0 = unknown
};

struct CycleDetection {
    std::optional<LimitCycle> cycle;
    std::string reason;  ///< set when no cycle: "amplitude_floor", "no_crossings", ...
    bool found() const { return cycle.has_value(); }
};

/// Settles past opt.settle_time, then measures successive upward crossings of
/// the section component through its running mean.  Reports a cycle when
/// three successive return times agree within return_tol; reports no-cycle
/// when every component's windowed amplitude falls below amplitude_floor.
CycleDetection detect_limit_cycle(const ModelInstance& model, const Vec& ic,
                                  const CycleDetectOptions& opt = {});

/// Same, for an autonomous scheduled system (used with constant overrides).
CycleDetection detect_limit_cycle(const ScheduledSystem& sys, const Vec& ic,
                                  const CycleDetectOptions& opt = {});

}  // namespace grnlab
