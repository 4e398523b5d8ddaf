#include "grnlab/continuation.hpp"

#include "free_param.hpp"

#include <numbers>

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

// Limit-cycle shooting: segments are integrated together with the
// variational matrix and the parameter sensitivity, then matched by a damped
// Newton on (segment states, period, [parameter]).  Segment boundaries sit at
// speed extrema along the orbit so that each saddle passage is split into its
// contracting and expanding halves, which keeps the per-segment transition
// matrices well conditioned near global bifurcations.

namespace grnlab {

namespace {

using detail::FreeParamModel;

struct SegmentResult {
    Vec end;        // state after time tau
    Mat transition; // d end / d start
    Vec sens;       // d end / d p
    Vec f_end;      // vector field at the end state
};

/// Integrates (y, Y, s) over [0, tau] at parameter p from y0, Y=I, s=0.
class AugmentedFlow {
  public:
    AugmentedFlow(const FreeParamModel& fp, Tolerances tol) : fp_(&fp), tol_(tol) {}

    SegmentResult run(const Vec& y0, double p, double tau, Vec* track_lo = nullptr,
                      Vec* track_hi = nullptr) const {
        const int n = static_cast<int>(y0.size());
        const int dim = n + n * n + n;
        Vec z0(dim);
        z0.head(n) = y0;
        z0.segment(n, n * n).setZero();
        for (int i = 0; i < n; ++i) z0[n + i * n + i] = 1.0;
        z0.tail(n).setZero();

        auto rhs = [this, n, p](double, const Vec& z, Vec& dz) {
            eval_aug(z, p, n, dz);
        };
        StepperOptions sopt;
        sopt.tol = tol_;
        Dopri5<decltype(rhs)> st(rhs, dim, sopt);
        st.start(0.0, z0);
        Vec scratch(dim);
        while (st.t() < tau) {
            StepOutcome oc = st.step(tau);
            if (oc != StepOutcome::Ok) throw SolveError("shooting segment integration failed");
            if (track_lo) {
                for (int k = 1; k <= 4; ++k) {
                    double t = st.t_old() + (st.t() - st.t_old()) * k / 4.0;
                    st.dense().eval(t, scratch);
                    *track_lo = track_lo->cwiseMin(scratch.head(n));
                    *track_hi = track_hi->cwiseMax(scratch.head(n));
                }
            }
        }
        SegmentResult r;
        r.end = st.state().head(n);
        r.transition = Eigen::Map<const Mat>(st.state().data() + n, n, n);
        r.sens = st.state().tail(n);
        r.f_end.resize(n);
        fp_->rhs(r.end, p, r.f_end);
        return r;
    }

  private:
    void eval_aug(const Vec& z, double p, int n, Vec& dz) const {
        dz.resize(z.size());
        const Vec y = z.head(n);
        fp_->rhs(y, p, f_);
        fp_->jac(y, p, J_);
        fp_->dfdp(y, p, fp_vec_);
        dz.head(n) = f_;
        Eigen::Map<const Mat> Y(z.data() + n, n, n);
        Eigen::Map<Mat> dY(dz.data() + n, n, n);
        dY = J_ * Y;
        dz.tail(n) = J_ * z.tail(n) + fp_vec_;
    }

    const FreeParamModel* fp_;
    Tolerances tol_;
    mutable Vec f_, fp_vec_;
    mutable Mat J_;
};

struct SegmentSeed {
    std::vector<Vec> X;
    std::vector<double> rho;  ///< per-segment duration fractions, sum 1
};

/// Segment boundary states along one period, placed at speed extrema so each
/// slow passage splits into its contracting and expanding halves.
SegmentSeed segment_boundaries(const FreeParamModel& fp, double p, const Vec& anchor,
                               double period, int want, Tolerances tol) {
    const int n = static_cast<int>(anchor.size());
    if (want <= 1) return {{anchor}, {1.0}};
    auto rhs = [&fp, p](double, const Vec& x, Vec& dx) { fp.rhs(x, p, dx); };
    StepperOptions sopt;
    sopt.tol = tol;
    Dopri5<decltype(rhs)> st(rhs, n, sopt);
    st.start(0.0, anchor);
    const int K = 1024;
    std::vector<Vec> ys;
    std::vector<double> speed;
    ys.reserve(K);
    Vec x(n), f(n);
    int k = 0;
    while (st.t() < period && k < K) {
        if (st.step(period) != StepOutcome::Ok)
            throw SolveError("segment resampling integration failed");
        while (k < K) {
            double ts = period * k / K;
            if (ts > st.t()) break;
            if (ts < st.t_old()) {
                ++k;
                continue;
            }
            st.dense().eval(ts, x);
            fp.rhs(x, p, f);
            ys.push_back(x);
            speed.push_back(f.norm());
            ++k;
        }
    }
    const int K2 = static_cast<int>(ys.size());
    if (K2 < 8) return {{anchor}, {1.0}};
    // local extrema of the (cyclic) speed profile, excluding the anchor bin
    std::vector<int> marks;
    for (int i = K2 / 16; i < K2 - K2 / 16; ++i) {
        double prev = speed[(i + K2 - 1) % K2], next = speed[(i + 1) % K2];
        if ((speed[i] > prev && speed[i] >= next) || (speed[i] < prev && speed[i] <= next))
            marks.push_back(i);
    }
    int interior = want - 1;
    if (static_cast<int>(marks.size()) > interior) {
        std::vector<int> kept;
        double stride = static_cast<double>(marks.size()) / interior;
        for (int i = 0; i < interior; ++i) kept.push_back(marks[static_cast<int>(i * stride)]);
        marks = kept;
    }
    SegmentSeed out;
    out.X.push_back(anchor);
    std::vector<double> times{0.0};
    for (int idx : marks) {
        out.X.push_back(ys[idx]);
        times.push_back(period * idx / K2);
    }
    times.push_back(period);
    for (size_t j = 0; j + 1 < times.size(); ++j)
        out.rho.push_back((times[j + 1] - times[j]) / period);
    return out;
}

struct ShootWork {
    std::vector<Vec> X;          // segment start states
    std::vector<double> rho;     // per-segment duration fractions (sum 1)
    double T = 0.0;
    int sec = 0;                 // phase-pinned component of X[0]
    double level = 0.0;          // pinned value
};

/// One Newton solve of the matching system at fixed parameter p.
/// When `free_p` is non-null, the system is bordered with an arclength row
/// and p becomes an unknown (pseudo-arclength corrector).
struct BorderedRow {
    Vec w_x;      // weights on X[0]
    double w_T = 0.0, w_p = 0.0;
    double target = 0.0;  // row: w_x . (X0 - X0_ref) + ... - target = 0
    Vec x_ref;
    double T_ref = 0.0, p_ref = 0.0;
};

bool shoot_newton(const FreeParamModel& fp, ShootWork& w, double& p,
                  const BorderedRow* arc, const ShootOptions& opt, ShootResult& out) {
    const int n = fp.dim();
    const int m = static_cast<int>(w.X.size());
    const int nu = m * n + 1 + (arc ? 1 : 0);  // unknowns, equations
    AugmentedFlow flow(fp, opt.ode_tol);

    Mat Jb(nu, nu);
    Vec R(nu), dz(nu);
    std::vector<SegmentResult> seg(m);
    double last_res = std::numeric_limits<double>::infinity();

    for (int it = 0; it < opt.max_newton; ++it) {
        Vec lo = w.X[0], hi = w.X[0];
        for (int j = 0; j < m; ++j)
            seg[j] = flow.run(w.X[j], p, w.rho[j] * w.T, &lo, &hi);

        R.setZero();
        for (int j = 0; j < m; ++j)
            R.segment(j * n, n) = seg[j].end - w.X[(j + 1) % m];
        R[m * n] = w.X[0][w.sec] - w.level;
        if (arc) {
            double a = arc->w_x.dot(w.X[0] - arc->x_ref) + arc->w_T * (std::log(w.T) - arc->T_ref) +
                       arc->w_p * (p - arc->p_ref) - arc->target;
            R[m * n + 1] = a;
        }
        double res = R.lpNorm<Eigen::Infinity>();
        double xscale = 1.0;
        for (const Vec& xx : w.X) xscale = std::max(xscale, xx.lpNorm<Eigen::Infinity>());

        if (res < opt.newton_tol * xscale) {
            out.converged = true;
            out.period = w.T;
            out.anchor = w.X[0];
            out.residual = res;
            out.segments = m;
            out.cycle_min = lo;
            out.cycle_max = hi;
            out.segment_states = w.X;
            Mat M = Mat::Identity(n, n);
            for (int j = 0; j < m; ++j) M = (seg[j].transition * M).eval();
            out.multipliers = eigenvalues(M);
            Eigen::JacobiSVD<Mat> svd(M);
            out.monodromy_cond =
                svd.singularValues()(0) / std::max(svd.singularValues()(n - 1), 1e-300);
            return true;
        }
        if (!std::isfinite(res)) return false;
        // simple divergence guard
        if (it > 0 && res > 50.0 * last_res) return false;
        last_res = std::min(last_res, res);

        Jb.setZero();
        for (int j = 0; j < m; ++j) {
            Jb.block(j * n, j * n, n, n) = seg[j].transition;
            int nxt = ((j + 1) % m) * n;
            for (int i = 0; i < n; ++i) Jb(j * n + i, nxt + i) -= 1.0;
            Jb.block(j * n, m * n, n, 1) = seg[j].f_end * w.rho[j];
            if (arc) Jb.block(j * n, m * n + 1, n, 1) = seg[j].sens;
        }
        Jb(m * n, w.sec) = 1.0;
        if (arc) {
            for (int i = 0; i < n; ++i) Jb(m * n + 1, i) = arc->w_x[i];
            Jb(m * n + 1, m * n) = arc->w_T / w.T;  // d(lnT)/dT chain
            Jb(m * n + 1, m * n + 1) = arc->w_p;
        }
        dz = Eigen::PartialPivLU<Mat>(Jb).solve(-R);
        if (!dz.allFinite()) return false;

        // damping: halve until the matching residual does not blow up
        double step = 1.0;
        for (int bt = 0; bt < 5; ++bt) {
            ShootWork trial = w;
            double pt = p;
            for (int j = 0; j < m; ++j) trial.X[j] += step * dz.segment(j * n, n);
            trial.T += step * dz[m * n];
            if (arc) pt += step * dz[m * n + 1];
            if (trial.T > 0.0) {
                w = trial;
                p = pt;
                break;
            }
            step *= 0.5;
        }
    }
    return false;
}

BranchPoint make_cycle_point(const ShootResult& r, double p, double s) {
    BranchPoint bp;
    bp.param = p;
    bp.arclength = s;
    bp.x = r.anchor;
    bp.eigenvalues = r.multipliers;
    bp.period = r.period;
    bp.cycle_min = r.cycle_min;
    bp.cycle_max = r.cycle_max;
    bp.residual = r.residual;
    // stability from the nontrivial multipliers: drop the one nearest +1
    int skip = 0;
    double best = 1e30;
    for (int i = 0; i < r.multipliers.size(); ++i) {
        double d = std::abs(r.multipliers[i] - Complex(1.0, 0.0));
        if (d < best) {
            best = d;
            skip = i;
        }
    }
    bool stable = true;
    for (int i = 0; i < r.multipliers.size(); ++i)
        if (i != skip && std::abs(r.multipliers[i]) > 1.0 + 1e-6) stable = false;
    bp.stability = stable ? Stability::Stable : Stability::Unstable;
    return bp;
}

int pick_section_component(const FreeParamModel& fp, const Vec& anchor, double p) {
    Vec f(anchor.size());
    fp.rhs(anchor, p, f);
    int sec = 0;
    for (int i = 1; i < f.size(); ++i)
        if (std::abs(f[i]) > std::abs(f[sec])) sec = i;
    return sec;
}

}  // namespace

// ---------------------------------------------------------------------------

ShootResult shoot_cycle_at(const ModelInstance& model, const std::string& free_param,
                           double p, const Vec& anchor, double period_guess,
                           const ShootOptions& opt) {
    FreeParamModel fp(model, free_param);
    ShootWork w;
    int m = opt.segments;
    if (m <= 0) m = 1;
    SegmentSeed seed2 = segment_boundaries(fp, p, anchor, period_guess, m, opt.ode_tol);
    w.X = seed2.X;
    w.rho = seed2.rho;
    w.T = period_guess;
    w.sec = pick_section_component(fp, w.X[0], p);
    w.level = w.X[0][w.sec];
    ShootResult out;
    double pp = p;
    if (!shoot_newton(fp, w, pp, nullptr, opt, out)) out.converged = false;
    return out;
}

ShootResult shoot_cycle(const ModelInstance& model, const LimitCycle& seed,
                        const ShootOptions& opt) {
    // the model's own parameters: shoot with a dummy free parameter (d1 is
    // always present) that the bordered row never moves
    std::string dummy = "d1";
    FreeParamModel fp(model, dummy);
    double p = model.params().d[0];
    ShootWork w;
    int m = opt.segments;
    if (m <= 0) m = 1;
    SegmentSeed seed2 = segment_boundaries(fp, p, seed.anchor, seed.period, m, opt.ode_tol);
    w.X = seed2.X;
    w.rho = seed2.rho;
    w.T = seed.period;
    w.sec = pick_section_component(fp, w.X[0], p);
    w.level = w.X[0][w.sec];
    ShootResult out;
    if (!shoot_newton(fp, w, p, nullptr, opt, out)) out.converged = false;
    return out;
}

// ---------------------------------------------------------------------------

Branch continue_limit_cycle_from(const ModelInstance& model, const std::string& free_param,
                                 const LimitCycle& seed, double seed_param, double lo,
                                 double hi, const ContinuationOptions& opt) {
    FreeParamModel fp(model, free_param);
    const int n = model.dim();

    Branch br;
    br.kind = BranchKind::Cycle;
    br.free_param = free_param;
    br.termination = "max_points";

    ShootOptions sopt;
    sopt.ode_tol = opt.ode_tol;
    sopt.newton_tol = opt.newton_tol * 10.0;  // matching residual scale
    sopt.max_newton = 9;
    int m = 1;

    // certify the seed; the phase section stays pinned between re-anchors
    ShootWork w;
    w.X = {seed.anchor};
    w.rho = {1.0};
    w.T = seed.period;
    w.sec = pick_section_component(fp, seed.anchor, seed_param);
    w.level = seed.anchor[w.sec];
    const int sec = w.sec;
    double level = w.level;
    double p_cur = seed_param;
    ShootResult res;
    if (!shoot_newton(fp, w, p_cur, nullptr, sopt, res))
        throw SolveError("cycle continuation: seed shooting failed (monodromy diagnostics: "
                         "see residual)");
    br.points.push_back(make_cycle_point(res, p_cur, 0.0));

    int dir = opt.direction;
    if (dir == 0) dir = (hi - p_cur > p_cur - lo) ? +1 : -1;

    Vec x_cur = res.anchor;
    double w_cur = std::log(res.period);
    Vec x_prev = x_cur;
    double w_prev = w_cur, p_prev = p_cur;
    bool have_secant = false;
    double arclen = 0.0;
    double ds = opt.ds0;

    auto xs_scale = [&](const Vec& x) {
        Vec s(n);
        for (int i = 0; i < n; ++i) s[i] = std::max(1e-3, std::abs(x[i]));
        return s;
    };

    for (int step = 0; step < opt.max_points; ++step) {
        // monodromy conditioning governs the segment count
        if (res.monodromy_cond > 1e8) m = std::max(m, 6);
        else if (res.monodromy_cond > 1e5) m = std::max(m, 3);

        if (!have_secant) {
            // plain parameter step to build the secant direction
            double dp = dir * std::max(2e-4 * (1.0 + std::abs(p_cur)), 1e-5);
            ShootResult r2;
            bool ok = false;
            for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
                ShootWork wt;
                SegmentSeed sb =
                    segment_boundaries(fp, p_cur, x_cur, std::exp(w_cur), m, opt.ode_tol);
                wt.X = sb.X;
                wt.rho = sb.rho;
                wt.T = std::exp(w_cur);
                wt.sec = sec;
                wt.level = level;
                double pt = p_cur + dp;
                if (shoot_newton(fp, wt, pt, nullptr, sopt, r2)) {
                    ok = true;
                    x_prev = x_cur;
                    w_prev = w_cur;
                    p_prev = p_cur;
                    x_cur = r2.anchor;
                    w_cur = std::log(r2.period);
                    p_cur = p_cur + dp;
                    res = r2;
                    arclen += std::abs(dp);
                    br.points.push_back(make_cycle_point(r2, p_cur, arclen));
                    have_secant = true;
                } else {
                    dp *= 0.5;
                }
            }
            if (!ok) {
                br.termination = "min_step";
                return br;
            }
            continue;
        }

        Vec s = xs_scale(x_cur);
        const double sT = 0.35, sp = std::max(0.02, 0.05 * std::abs(p_cur));
        Vec t_x = (x_cur - x_prev).cwiseQuotient(s);
        double t_T = (w_cur - w_prev) / sT;
        double t_p = (p_cur - p_prev) / sp;
        double tn = std::sqrt(t_x.squaredNorm() + t_T * t_T + t_p * t_p);
        if (tn == 0.0) tn = 1.0;
        t_x /= tn;
        t_T /= tn;
        t_p /= tn;

        bool accepted = false;
        ShootResult r2;
        double p_new = p_cur;
        while (!accepted) {
            Vec x_pred = x_cur + ds * t_x.cwiseProduct(s);
            double T_pred = std::exp(w_cur + ds * t_T * sT);
            double p_pred = p_cur + ds * t_p * sp;

            ShootWork wt;
            SegmentSeed sb = segment_boundaries(fp, p_cur, x_cur, std::exp(w_cur), m, opt.ode_tol);
            wt.X = sb.X;
            wt.rho = sb.rho;
            wt.T = T_pred;
            Vec shift = x_pred - x_cur;
            for (Vec& xx : wt.X) xx += shift;
            wt.sec = sec;
            wt.level = level;

            BorderedRow arc;
            arc.w_x = t_x.cwiseQuotient(s);
            arc.w_T = t_T / sT;
            arc.w_p = t_p / sp;
            arc.x_ref = x_cur;
            arc.T_ref = w_cur;
            arc.p_ref = p_cur;
            arc.target = ds;

            double pt = p_pred;
            if (shoot_newton(fp, wt, pt, &arc, sopt, r2)) {
                accepted = true;
                p_new = pt;
            } else {
                ds *= 0.4;
                if (ds < opt.ds_min) {
                    br.termination = "min_step";
                    return br;
                }
            }
        }

        arclen += ds;
        br.points.push_back(make_cycle_point(r2, p_new, arclen));

        x_prev = x_cur;
        w_prev = w_cur;
        p_prev = p_cur;
        x_cur = r2.anchor;
        w_cur = std::log(r2.period);
        p_cur = p_new;
        res = r2;

        if (p_cur < lo || p_cur > hi) {
            br.termination = "range_end";
            return br;
        }
        if (r2.period > opt.t_max_period) {
            br.termination = "period_blowup";
            return br;
        }
        double amp = (r2.cycle_max - r2.cycle_min).maxCoeff();
        if (amp < 1e-4 * std::max(1.0, r2.cycle_max.maxCoeff())) {
            br.termination = "hopf_shrink";
            return br;
        }
        // re-anchor when the pinned level drifts out of the orbit's range;
        // the secant is rebuilt on the next iteration
        double secspan = r2.cycle_max[sec] - r2.cycle_min[sec];
        if (level < r2.cycle_min[sec] + 0.1 * secspan ||
            level > r2.cycle_max[sec] - 0.1 * secspan) {
            double new_level = 0.5 * (r2.cycle_min[sec] + r2.cycle_max[sec]);
            // slide the anchor to the new section along the current orbit
            auto rhs = [&fp, p_cur](double, const Vec& x, Vec& dx) { fp.rhs(x, p_cur, dx); };
            StepperOptions so;
            so.tol = opt.ode_tol;
            Dopri5<decltype(rhs)> st(rhs, n, so);
            st.start(0.0, x_cur);
            Vec probe(n);
            bool moved = false;
            while (st.t() < 1.2 * r2.period && !moved) {
                if (st.step(1.2 * r2.period) != StepOutcome::Ok) break;
                double a = st.state_old()[sec] - new_level;
                double b = st.state()[sec] - new_level;
                if (a < 0.0 && b >= 0.0) {
                    double tl = st.t_old(), th = st.t();
                    for (int it = 0; it < 60; ++it) {
                        double mid = 0.5 * (tl + th);
                        st.dense().eval(mid, probe);
                        (probe[sec] - new_level < 0.0 ? tl : th) = mid;
                    }
                    st.dense().eval(0.5 * (tl + th), probe);
                    moved = true;
                }
            }
            if (moved) {
                level = new_level;
                x_cur = probe;
                have_secant = false;
            }
        }
        ds = std::min(ds * 1.25, opt.ds_max);
    }
    return br;
}

Branch continue_limit_cycle(const ModelInstance& model, const std::string& free_param,
                            const BifurcationPoint& hopf, double lo, double hi,
                            const ContinuationOptions& opt) {
    FreeParamModel fp(model, free_param);
    // find the side of the Hopf point where the equilibrium is unstable
    auto unstable_side = [&](double p) {
        Vec x = hopf.x;
        if (!fp.newton(x, p, opt.newton_tol)) return false;
        Mat J(model.dim(), model.dim());
        fp.jac(x, p, J);
        auto h = detail::hopf_test(eigenvalues(J), opt.hopf_im_guard);
        return h && *h > 0.0;
    };
    double span = hi - lo;
    int dir = 0;
    for (double frac : {0.02, 0.05}) {
        double d = frac * span;
        if (hopf.param + d <= hi && unstable_side(hopf.param + d)) {
            dir = +1;
            break;
        }
        if (hopf.param - d >= lo && unstable_side(hopf.param - d)) {
            dir = -1;
            break;
        }
    }
    if (dir == 0) throw SolveError("continue_limit_cycle: no unstable side at the Hopf point");

    // Hopf frequency sets the period scale for the detection probe
    double om = 0.0;
    for (int i = 0; i < hopf.eigenvalues.size(); ++i)
        om = std::max(om, std::abs(hopf.eigenvalues[i].imag()));
    double T0 = om > 0.0 ? 2.0 * std::numbers::pi / om : 50.0;

    for (double frac : {0.05, 0.12, 0.25, 0.5}) {
        double p0 = hopf.param + dir * frac * span;
        if (p0 < lo || p0 > hi) continue;
        ScheduledSystem sys(model, {Schedule{ScheduleKind::Constant, free_param,
                                             p0, 0, 0, 1, 1, 0}});
        // loose return agreement: the shooting Newton polishes the seed
        CycleDetectOptions det;
        det.tol = opt.ode_tol;
        det.settle_time = 200.0 * T0;
        det.period_hint = T0;
        det.max_time = 4000.0 * T0;
        det.return_tol = 0.02;
        // asymmetric kick so the perturbation has weight in the oscillatory plane
        Vec ic = hopf.x;
        for (int i = 0; i < model.dim(); ++i)
            ic[i] *= 1.0 + 0.1 * std::cos(2.0 * std::numbers::pi * i / model.dim() + 0.4);
        CycleDetection d = detect_limit_cycle(sys, ic, det);
        if (d.found()) {
            ContinuationOptions o = opt;
            o.direction = dir;
            return continue_limit_cycle_from(model, free_param, *d.cycle, p0, lo, hi, o);
        }
    }
    throw SolveError("continue_limit_cycle: no cycle detected near the Hopf point");
}

}  // namespace grnlab
