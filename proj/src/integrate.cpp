#include "grnlab/integrate.hpp"

#include <algorithm>
#include <sstream>

namespace grnlab {

Vec Trajectory::eval(double t) const {
    if (steps.empty()) throw std::runtime_error("trajectory has no dense output");
    auto it = std::lower_bound(steps.begin(), steps.end(), t,
                               [](const DenseStep& s, double tv) { return s.t1 < tv; });
    if (it == steps.end()) --it;
    Vec out;
    it->eval(std::clamp(t, it->t0, it->t1), out);
    return out;
}

namespace {

[[noreturn]] void throw_step_failure(StepOutcome oc, double t) {
    std::ostringstream os;
    switch (oc) {
        case StepOutcome::Underflow: os << "step size underflow at t=" << t; break;
        case StepOutcome::NonFinite: os << "non-finite state at t=" << t; break;
        default: os << "step budget exhausted at t=" << t; break;
    }
    throw std::runtime_error(os.str());
}

}  // namespace

Trajectory integrate(const ScheduledSystem& sys, const Vec& ic, double t0, double t1,
                     const IntegrateOptions& opt) {
    if (!(t1 > t0)) throw std::invalid_argument("integrate: t1 must exceed t0");
    if (!(opt.tol.rtol > 0.0) || !(opt.tol.atol > 0.0))
        throw std::invalid_argument("integrate: tolerances must be positive");
    for (int i = 0; i < ic.size(); ++i)
        if (ic[i] < 0.0) throw std::invalid_argument("integrate: negative initial condition");

    Trajectory traj;
    traj.times.push_back(t0);
    traj.states.push_back(ic);

    auto rhs = [&sys](double t, const Vec& x, Vec& dx) { sys.rhs(t, x, dx); };
    StepperOptions sopt;
    sopt.tol = opt.tol;
    sopt.max_steps = opt.max_steps;
    sopt.clamp_nonnegative = true;

    std::vector<double> marks = sys.discontinuities(t0, t1);
    marks.push_back(t1);

    double t_seg = t0;
    Vec x_seg = ic;
    for (double t_stop : marks) {
        Dopri5<decltype(rhs)> stepper(rhs, static_cast<int>(ic.size()), sopt);
        stepper.start(t_seg, x_seg);
        while (stepper.t() < t_stop) {
            StepOutcome oc = stepper.step(t_stop);
            if (oc != StepOutcome::Ok) throw_step_failure(oc, stepper.t());
            traj.times.push_back(stepper.t());
            traj.states.push_back(stepper.state());
            if (opt.keep_dense) traj.steps.push_back(stepper.dense());
        }
        t_seg = t_stop;
        x_seg = stepper.state();
        if (t_stop != t1)
            traj.events.push_back(TrajectoryEvent{t_stop, "schedule_discontinuity", 0.0});
    }
    return traj;
}

// ---------------------------------------------------------------------------

namespace {

/// Tracks min/max of every component using dense subsamples of each step.
struct ExtremaTracker {
    Vec lo, hi;
    void reset(const Vec& x) { lo = x; hi = x; }
    void add(const Vec& x) {
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
    }
    double max_amplitude() const { return (hi - lo).maxCoeff(); }
};

template <class Stepper>
void observe_substeps(const Stepper& st, ExtremaTracker& tr, Vec& scratch, int nsub = 4) {
    for (int k = 1; k < nsub; ++k) {
        double t = st.t_old() + (st.t() - st.t_old()) * k / nsub;
        st.dense().eval(t, scratch);
        tr.add(scratch);
    }
    tr.add(st.state());
}

}  // namespace

CycleDetection detect_limit_cycle(const ScheduledSystem& sys, const Vec& ic,
                                  const CycleDetectOptions& opt) {
    if (!sys.autonomous())
        throw std::invalid_argument("detect_limit_cycle requires an autonomous system");
    const int n = sys.dim();
    const int c = opt.section_component;
    if (c < 0 || c >= n) throw std::invalid_argument("bad section component");

    auto rhs = [&sys](double t, const Vec& x, Vec& dx) { sys.rhs(t, x, dx); };
    StepperOptions sopt;
    sopt.tol = opt.tol;
    sopt.clamp_nonnegative = true;
    Dopri5<decltype(rhs)> st(rhs, n, sopt);
    st.start(0.0, ic);

    CycleDetection out;

    // settle
    while (st.t() < opt.settle_time) {
        if (st.step(opt.settle_time) != StepOutcome::Ok) {
            out.reason = "integration_failure";
            return out;
        }
    }

    // probe the section level: time-average and range of the component
    double probe_len = opt.period_hint > 0.0 ? 5.0 * opt.period_hint
                                             : std::max(100.0, 0.25 * opt.settle_time);
    ExtremaTracker probe;
    probe.reset(st.state());
    Vec scratch(n);
    double t_probe_end = st.t() + probe_len;
    double integral = 0.0;
    while (st.t() < t_probe_end) {
        if (st.step(t_probe_end) != StepOutcome::Ok) {
            out.reason = "integration_failure";
            return out;
        }
        integral += 0.5 * (st.state()[c] + st.state_old()[c]) * (st.t() - st.t_old());
        observe_substeps(st, probe, scratch);
    }
    const double level = integral / probe_len;

    if (probe.max_amplitude() < opt.amplitude_floor) {
        // confirm over a second window before declaring oscillation death
        ExtremaTracker confirm;
        confirm.reset(st.state());
        double t_end = st.t() + probe_len;
        while (st.t() < t_end) {
            if (st.step(t_end) != StepOutcome::Ok) {
                out.reason = "integration_failure";
                return out;
            }
            observe_substeps(st, confirm, scratch);
        }
        if (confirm.max_amplitude() < opt.amplitude_floor) {
            out.reason = "amplitude_floor";
            return out;
        }
    }

    // crossing phase
    auto refine_crossing = [&](double lo, double hi) {
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            st.dense().eval(mid, scratch);
            if (scratch[c] - level < 0.0) lo = mid;
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    };

    std::vector<double> crossings;
    Vec anchor(n);
    const double t_deadline = st.t() + opt.max_time;
    double period = 0.0;
    ExtremaTracker window;
    window.reset(st.state());
    double window_start = st.t();
    bool have_cycle = false;
    while (st.t() < t_deadline) {
        double s_old = st.state()[c] - level;
        if (st.step(t_deadline) != StepOutcome::Ok) {
            out.reason = "integration_failure";
            return out;
        }
        observe_substeps(st, window, scratch);
        double s_new = st.state()[c] - level;
        if (s_old < 0.0 && s_new >= 0.0) {
            double tc = refine_crossing(st.t_old(), st.t());
            crossings.push_back(tc);
            if (crossings.size() >= 4) {
                double r1 = crossings[crossings.size() - 3] - crossings[crossings.size() - 4];
                double r2 = crossings[crossings.size() - 2] - crossings[crossings.size() - 3];
                double r3 = crossings[crossings.size() - 1] - crossings[crossings.size() - 2];
                double mean = (r1 + r2 + r3) / 3.0;
                if (std::abs(r1 - mean) <= opt.return_tol * mean &&
                    std::abs(r2 - mean) <= opt.return_tol * mean &&
                    std::abs(r3 - mean) <= opt.return_tol * mean) {
                    period = mean;
                    st.dense().eval(crossings.back(), anchor);
                    have_cycle = true;
                    break;
                }
            }
        }
        // oscillation-death watch over ~5 period estimates
        double west = crossings.size() >= 2
                          ? crossings.back() - crossings[crossings.size() - 2]
                          : probe_len / 5.0;
        if (st.t() - window_start > 5.0 * west) {
            if (window.max_amplitude() < opt.amplitude_floor) {
                out.reason = "amplitude_floor";
                return out;
            }
            window.reset(st.state());
            window_start = st.t();
        }
    }
    if (!have_cycle) {
        out.reason = crossings.empty() ? "no_crossings" : "returns_not_converged";
        return out;
    }

    // sample one period from the anchor
    LimitCycle cyc;
    cyc.period = period;
    cyc.anchor = anchor;
    cyc.section_component = c;
    cyc.section_level = level;
    Dopri5<decltype(rhs)> st2(rhs, n, sopt);
    st2.start(0.0, anchor);
    ExtremaTracker ext;
    ext.reset(anchor);
    cyc.sample_times.reserve(opt.n_samples + 1);
    cyc.samples.reserve(opt.n_samples + 1);
    int next_sample = 0;
    while (st2.t() < period) {
        if (st2.step(period) != StepOutcome::Ok) {
            out.reason = "integration_failure";
            return out;
        }
        observe_substeps(st2, ext, scratch, 6);
        while (next_sample <= opt.n_samples) {
            double ts = period * next_sample / opt.n_samples;
            if (ts > st2.t()) break;
            if (ts < st2.t_old()) {  // before this step (start point)
                ++next_sample;
                continue;
            }
            st2.dense().eval(ts, scratch);
            cyc.sample_times.push_back(ts);
            cyc.samples.push_back(scratch);
            ++next_sample;
        }
    }
    if (cyc.sample_times.empty() || cyc.sample_times.front() > 0.0) {
        cyc.sample_times.insert(cyc.sample_times.begin(), 0.0);
        cyc.samples.insert(cyc.samples.begin(), anchor);
    }
    cyc.min_levels = ext.lo;
    cyc.max_levels = ext.hi;
    out.cycle = std::move(cyc);
    return out;
}

CycleDetection detect_limit_cycle(const ModelInstance& model, const Vec& ic,
                                  const CycleDetectOptions& opt) {
    return detect_limit_cycle(ScheduledSystem(model), ic, opt);
}

}  // namespace grnlab
