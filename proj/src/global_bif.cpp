#include "grnlab/continuation.hpp"
#include "grnlab/scaling.hpp"

#include "free_param.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace grnlab {

using detail::FreeParamModel;

// ---------------------------------------------------------------------------

CycleExistence cycle_exists(const ModelInstance& model, const std::string& free_param,
                            double p, const Vec& near_cycle_state, double time_budget,
                            const Tolerances& tol) {
    const int n = model.dim();
    ModelInstance at_p = with_param(model, free_param, p);
    std::vector<Vec> nodes;
    for (const Equilibrium& e : find_all_equilibria(at_p))
        if (e.stability == Stability::Stable) nodes.push_back(e.x);
    const double scale = std::max(at_p.state_scale(), 1e-6);

    auto rhs = [&at_p](double, const Vec& x, Vec& dx) { at_p.rhs(x, dx); };
    StepperOptions sopt;
    sopt.tol = tol;
    sopt.clamp_nonnegative = true;
    Dopri5<decltype(rhs)> st(rhs, n, sopt);
    st.start(0.0, near_cycle_state);

    CycleExistence out;
    Vec f(n), scratch(n);
    double level = near_cycle_state[0];
    double lo = near_cycle_state[0], hi = near_cycle_state[0];
    std::vector<double> crossings;
    const double settle = std::min(0.1 * time_budget, 2000.0);

    while (st.t() < time_budget) {
        double s_old = st.state()[0] - level;
        if (st.step(time_budget) != StepOutcome::Ok) {
            out.outcome = "integration_failure";
            out.state = st.state();
            return out;
        }
        // track the running range of x1 and keep the section at its middle
        for (int k = 1; k <= 2; ++k) {
            double t = st.t_old() + (st.t() - st.t_old()) * k / 2.0;
            st.dense().eval(t, scratch);
            lo = std::min(lo, scratch[0]);
            hi = std::max(hi, scratch[0]);
        }
        level = 0.5 * (lo + hi);

        // convergence onto a stable equilibrium ends it
        if (!nodes.empty() && st.t() > 10.0) {
            at_p.rhs(st.state(), f);
            if (f.lpNorm<Eigen::Infinity>() < 1e-7 * scale) {
                for (const Vec& nd : nodes) {
                    if ((st.state() - nd).norm() < 1e-3 * (1.0 + nd.norm())) {
                        out.exists = false;
                        out.outcome = "converged_to_equilibrium";
                        out.state = st.state();
                        return out;
                    }
                }
            }
        }

        double s_new = st.state()[0] - level;
        if (st.t() > settle && s_old < 0.0 && s_new >= 0.0 && (hi - lo) > 0.02 * scale) {
            crossings.push_back(st.t());
            if (crossings.size() >= 4) {
                double r1 = crossings[crossings.size() - 1] - crossings[crossings.size() - 2];
                double r2 = crossings[crossings.size() - 2] - crossings[crossings.size() - 3];
                if (std::abs(r1 - r2) < 0.05 * std::max(r1, r2)) {
                    out.exists = true;
                    out.outcome = "oscillating";
                    out.period = 0.5 * (r1 + r2);
                    out.state = st.state();
                    return out;
                }
            }
        }
    }
    out.outcome = "budget";
    out.state = st.state();
    return out;
}

TerminationBracket find_cycle_termination(const ModelInstance& model,
                                          const std::string& free_param, double p_osc,
                                          double p_dead, const Vec& osc_state,
                                          double target_width, double time_budget) {
    CycleExistence e0 = cycle_exists(model, free_param, p_osc, osc_state, time_budget);
    if (!e0.exists)
        throw SolveError("find_cycle_termination: no cycle at the oscillating endpoint");
    TerminationBracket br;
    br.lo = p_osc;
    br.hi = p_dead;
    br.period_at_lo = e0.period;
    br.state_at_lo = e0.state;
    while (std::abs(br.hi - br.lo) > target_width) {
        double mid = 0.5 * (br.lo + br.hi);
        // generous budget once periods grow
        double budget = std::max(time_budget, 8.0 * br.period_at_lo);
        CycleExistence e = cycle_exists(model, free_param, mid, br.state_at_lo, budget);
        if (e.outcome == "budget") break;  // cannot resolve further
        if (e.exists) {
            br.lo = mid;
            br.period_at_lo = e.period;
            br.state_at_lo = e.state;
        } else {
            br.hi = mid;
        }
    }
    return br;
}

// ---------------------------------------------------------------------------

namespace {

/// Stable equilibria present at parameter p?
bool stable_exists_at(const ModelInstance& model, const std::string& free_param, double p) {
    for (const Equilibrium& e : find_all_equilibria(with_param(model, free_param, p)))
        if (e.stability == Stability::Stable) return true;
    return false;
}

struct SaddleInfo {
    Vec x;
    CVec eigenvalues;
    double lambda_plus = std::numeric_limits<double>::quiet_NaN();
};

/// The saddle with exactly one positive real eigenvalue (largest x-norm
/// representative of the symmetry family).
std::optional<SaddleInfo> one_unstable_saddle(const ModelInstance& model,
                                              const std::string& free_param, double p) {
    std::optional<SaddleInfo> best;
    for (const Equilibrium& e : find_all_equilibria(with_param(model, free_param, p))) {
        if (e.stability != Stability::Saddle) continue;
        int pos = 0;
        double lam = 0.0;
        bool pos_real = false;
        for (int i = 0; i < e.eigenvalues.size(); ++i) {
            if (e.eigenvalues[i].real() > 0.0) {
                ++pos;
                if (std::abs(e.eigenvalues[i].imag()) < 1e-10) {
                    pos_real = true;
                    lam = std::max(lam, e.eigenvalues[i].real());
                }
            }
        }
        if (pos == 1 && pos_real) {
            if (!best || e.x.maxCoeff() > best->x.maxCoeff())
                best = SaddleInfo{e.x, e.eigenvalues, lam};
        }
    }
    return best;
}

}  // namespace

BifurcationPoint classify_global_bifurcation(const ModelInstance& model,
                                             const Branch& cycle_branch,
                                             const Branch& eq_branch,
                                             const ContinuationOptions& opt) {
    if (cycle_branch.points.empty() || eq_branch.points.empty())
        throw std::invalid_argument("classify_global_bifurcation: empty branch");
    const std::string& fp = cycle_branch.free_param;

    // cycle termination estimate from the branch tail (largest-period point)
    size_t tail = 0;
    for (size_t i = 0; i < cycle_branch.points.size(); ++i)
        if (!(cycle_branch.points[i].period <= cycle_branch.points[tail].period)) tail = i;
    const BranchPoint& tp = cycle_branch.points[tail];

    // the fold closest to the cycle tail
    std::vector<BifurcationPoint> bifs = detect_bifurcations(model, eq_branch, opt);
    std::optional<BifurcationPoint> fold;
    for (const auto& b : bifs) {
        if (b.kind != BifKind::SaddleNode) continue;
        if (!fold || std::abs(b.param - tp.param) < std::abs(fold->param - tp.param)) fold = b;
    }
    if (!fold) throw SolveError("classify_global_bifurcation: no fold on the branch");

    // refine the termination parameter by existence bisection
    double dir = tp.param >= cycle_branch.points.front().param ? +1.0 : -1.0;
    double p_dead = tp.param + dir * std::max(0.25 * std::abs(fold->param - tp.param) +
                                                  2e-2 * (1.0 + std::abs(tp.param)),
                                              4e-2);
    TerminationBracket term =
        find_cycle_termination(model, fp, tp.param, p_dead, tp.x, 1e-9 * (1.0 + tp.param));
    double p_end = 0.5 * (term.lo + term.hi);

    const double coincide_tol = 1e-3 * (1.0 + std::abs(fold->param));
    bool coincide = std::abs(p_end - fold->param) < coincide_tol;

    // coexistence: stable equilibria strictly below the termination
    double probe = p_end - dir * 2.0 * coincide_tol;
    bool coexist = stable_exists_at(model, fp, probe);

    BifurcationPoint out;
    out.terminal_period = std::max(term.period_at_lo, tp.period);
    out.bracket_width = std::abs(term.hi - term.lo);
    if (coincide && !coexist) {
        out.kind = BifKind::SNIC;
        out.param = fold->param;  // the fold sits on the cycle
        out.x = fold->x;
        out.eigenvalues = fold->eigenvalues;
    } else if (!coincide && coexist) {
        out.kind = BifKind::Heteroclinic;
        out.param = p_end;
        if (auto sd = one_unstable_saddle(model, fp, p_end)) {
            out.x = sd->x;
            out.eigenvalues = sd->eigenvalues;
            out.lambda_plus = sd->lambda_plus;
        }
    } else {
        out.kind = BifKind::Inconclusive;
        out.param = p_end;
        out.note = "fold/termination geometry inconsistent";
        return out;
    }

    // cross-check with the period-scaling laws when the tail supports a fit
    std::vector<PeriodSample> tail_samples;
    for (const auto& bp : cycle_branch.points) {
        double d = std::abs(bp.param - p_end);
        if (std::isfinite(bp.period) && d > 1e-12 && d < 0.1 * (1.0 + std::abs(p_end)))
            tail_samples.push_back({bp.param, bp.period});
    }
    if (tail_samples.size() >= 8) {
        double dmin = 1e300, dmax = 0.0;
        for (const auto& s : tail_samples) {
            double d = std::abs(s.param - p_end);
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
        }
        if (dmax / dmin > 30.0) {
            try {
                ScalingFit sq = fit_snic_scaling(tail_samples, out.param);
                ScalingFit lg = fit_heteroclinic_scaling(tail_samples, out.param);
                // compare on a common (relative) scale
                double mean_T = 0.0, mean_lnT = 0.0;
                for (const auto& s : tail_samples) {
                    mean_T += s.period;
                    mean_lnT += std::log(s.period);
                }
                mean_T /= tail_samples.size();
                mean_lnT /= tail_samples.size();
                double sq_rel = sq.rms_residual / std::abs(mean_lnT);
                double lg_rel = lg.rms_residual / mean_T;
                BifKind by_fit = sq_rel < lg_rel ? BifKind::SNIC : BifKind::Heteroclinic;
                if (by_fit != out.kind) {
                    out.note = std::string("scaling-law fit prefers ") + bif_kind_name(by_fit);
                    out.kind = BifKind::Inconclusive;
                }
            } catch (const std::exception&) {
                // not enough clean tail data; geometry verdict stands
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

/// psi for the two-parameter defining systems.
struct CurvePsi {
    const FreeParamModel* fp1;
    const FreeParamModel* fp2;  // both wrap the same model; applied in order
    const ModelInstance* model;
    CurveKind kind;
    double im_guard;
    mutable Mat J;

    // builds the Jacobian at (x, p1, p2): fp2's work set is rebuilt from the
    // spec with both params applied
    void jac_at(const Vec& x, double p1, double p2, Mat& out) const {
        ModelSpec spec = model->spec();
        apply_param(spec, spec.params, resolve_param(spec, fp1_name), p1);
        apply_param(spec, spec.params, resolve_param(spec, fp2_name), p2);
        model->jacobian_with(spec.params, x, out);
    }
    void rhs_at(const Vec& x, double p1, double p2, Vec& out) const {
        ModelSpec spec = model->spec();
        apply_param(spec, spec.params, resolve_param(spec, fp1_name), p1);
        apply_param(spec, spec.params, resolve_param(spec, fp2_name), p2);
        model->rhs_with(spec.params, x, out);
    }
    std::string fp1_name, fp2_name;

    double operator()(const Vec& x, double p1, double p2) const {
        const int n = static_cast<int>(x.size());
        J.resize(n, n);
        jac_at(x, p1, p2, J);
        if (kind == CurveKind::FoldCurve) return J.determinant();
        auto h = detail::hopf_test(eigenvalues(J), im_guard);
        if (!h) throw SolveError("hopf curve: complex pair lost");
        return *h;
    }
    double im_part(const Vec& x, double p1, double p2) const {
        const int n = static_cast<int>(x.size());
        J.resize(n, n);
        jac_at(x, p1, p2, J);
        CVec ev = eigenvalues(J);
        double im = 0.0;
        for (int i = 0; i < ev.size(); ++i) im = std::max(im, ev[i].imag());
        return im;
    }
};

}  // namespace

CurveInPlane continue_codim1_curve(const ModelInstance& model, const BifurcationPoint& point,
                                   const std::string& param1, const std::string& param2,
                                   double p2_lo, double p2_hi,
                                   const ContinuationOptions& opt) {
    const int n = model.dim();
    CurveKind kind = point.kind == BifKind::Hopf ? CurveKind::HopfCurve : CurveKind::FoldCurve;
    FreeParamModel fp1(model, param1), fp2(model, param2);
    CurvePsi psi{&fp1, &fp2, &model, kind, opt.hopf_im_guard, Mat(), param1, param2};

    // read the model's current second-parameter value as the starting p2
    double p2 = read_param(model.spec(), model.params(), resolve_param(model.spec(), param2));
    double p1 = point.param;
    Vec x = point.x;

    const bool log2 = p2_lo > 0.0 && p2_hi / p2_lo > 20.0;
    auto q2_of = [&](double p) { return log2 ? std::log(p) : p; };
    auto p2_of = [&](double q) { return log2 ? std::exp(q) : q; };

    // z = (x, p1, q2); G = (F, psi); bordered with the arclength row
    const int nz = n + 2;
    auto eval_G = [&](const Vec& z, Vec& G) {
        Vec xs = z.head(n);
        double a = z[n], b = p2_of(z[n + 1]);
        Vec F(n);
        psi.rhs_at(xs, a, b, F);
        G.head(n) = F;
        G[n] = psi(xs, a, b);
    };
    auto num_jac = [&](const Vec& z, Mat& Jz) {
        Vec Gp(nz), Gm(nz), zp(nz);
        for (int j = 0; j < nz; ++j) {
            double h = 1e-7 * (1.0 + std::abs(z[j]));
            zp = z;
            zp[j] += h;
            Vec G1(n + 1), G2(n + 1);
            eval_G(zp, G1);
            zp[j] -= 2.0 * h;
            eval_G(zp, G2);
            for (int i = 0; i <= n; ++i) Jz(i, j) = (G1[i] - G2[i]) / (2.0 * h);
        }
    };

    CurveInPlane curve;
    curve.kind = kind;
    curve.param1 = param1;
    curve.param2 = param2;
    curve.termination = "max_points";

    Vec z(nz);
    z.head(n) = x;
    z[n] = p1;
    z[n + 1] = q2_of(p2);

    // converge onto the curve at fixed p2 first (Newton on (x, p1))
    {
        Vec G(n + 1), d(n + 1);
        Mat Jz(n + 1, nz), Jr(n + 1, n + 1);
        for (int it = 0; it < 30; ++it) {
            eval_G(z, G);
            if (G.lpNorm<Eigen::Infinity>() < opt.newton_tol * (1.0 + z.head(n).lpNorm<Eigen::Infinity>())) break;
            num_jac(z, Jz);
            Jr = Jz.leftCols(n + 1);
            d = Eigen::PartialPivLU<Mat>(Jr).solve(-G);
            if (!d.allFinite()) throw SolveError("codim1 curve: seed Newton failed");
            z.head(n + 1) += d;
        }
    }
    curve.p1.push_back(z[n]);
    curve.p2.push_back(p2_of(z[n + 1]));
    curve.states.push_back(z.head(n));

    // tangent: kernel of the (n+1) x (n+2) Jacobian
    Vec t(nz);
    {
        Mat Jz(n + 1, nz);
        num_jac(z, Jz);
        Eigen::FullPivLU<Mat> lu(Jz);
        Mat K = lu.kernel();
        t = K.col(0);
        t.normalize();
        int dir = opt.direction != 0 ? opt.direction : -1;  // default toward smaller p2
        if (t[n + 1] * dir < 0) t = -t;
    }

    double ds = opt.ds0;
    Mat Jb(nz, nz);
    Vec G(n + 1), Gb(nz), dz(nz);
    for (int step = 0; step < opt.max_points; ++step) {
        Vec zp = z + ds * t;
        bool ok = false;
        for (int attempt = 0; attempt < 30 && !ok; ++attempt) {
            Vec zn = zp;
            bool conv = false;
            for (int it = 0; it < opt.max_newton; ++it) {
                try {
                    eval_G(zn, G);
                } catch (const SolveError&) {
                    break;
                }
                double arc = t.dot(zn - z) - ds;
                if (G.lpNorm<Eigen::Infinity>() <
                        opt.newton_tol * (1.0 + zn.head(n).lpNorm<Eigen::Infinity>()) &&
                    std::abs(arc) < 1e-10) {
                    conv = true;
                    break;
                }
                Mat Jz(n + 1, nz);
                num_jac(zn, Jz);
                Jb.topRows(n + 1) = Jz;
                Jb.row(n + 1) = t.transpose();
                Gb.head(n + 1) = G;
                Gb[n + 1] = arc;
                dz = Eigen::PartialPivLU<Mat>(Jb).solve(-Gb);
                if (!dz.allFinite()) break;
                zn += dz;
            }
            if (conv) {
                Vec tn = (zn - z).normalized();
                t = tn;
                z = zn;
                ok = true;
            } else {
                ds *= 0.4;
                if (ds < opt.ds_min) {
                    curve.termination = "min_step";
                    return curve;
                }
                zp = z + ds * t;
            }
        }
        curve.p1.push_back(z[n]);
        curve.p2.push_back(p2_of(z[n + 1]));
        curve.states.push_back(z.head(n));
        double p2v = p2_of(z[n + 1]);
        if (p2v < p2_lo || p2v > p2_hi) {
            curve.termination = "range_end";
            return curve;
        }
        if (kind == CurveKind::HopfCurve) {
            double im = psi.im_part(z.head(n), z[n], p2v);
            if (im < opt.hopf_im_guard * 10.0) {
                curve.termination = "im_guard";
                return curve;
            }
        }
        ds = std::min(ds * 1.3, opt.ds_max);
    }
    return curve;
}

// ---------------------------------------------------------------------------

BifurcationPoint classify_global_at(const ModelInstance& base_model,
                                    const std::string& free_param, double alpha,
                                    const ContinuationOptions& opt) {
    ModelInstance m = with_param(base_model, "alpha", alpha);

    // fold of the asymmetric branch: seed from a dominance equilibrium
    std::optional<BifurcationPoint> fold;
    for (double g_probe : {2.0, 3.0, 1.5, 4.5}) {
        ModelInstance mp = with_param(m, free_param, g_probe);
        std::vector<Equilibrium> eqs = find_all_equilibria(mp);
        const Equilibrium* node = nullptr;
        for (const Equilibrium& e : eqs) {
            if (e.stability == Stability::Stable && !e.symmetric &&
                (node == nullptr || e.x.maxCoeff() > node->x.maxCoeff()))
                node = &e;
        }
        if (!node) continue;
        try {
            fold = locate_fold(m, free_param, node->x, g_probe, opt);
            break;
        } catch (const SolveError&) {
        }
    }
    if (!fold) throw SolveError("classify_global_at: no fold found");

    // oscillating reference below the fold
    double p_osc = fold->param * 0.93;
    Vec ic(m.dim());
    for (int i = 0; i < m.dim(); ++i) ic[i] = 0.3 + 0.45 * i;
    CycleExistence ex = cycle_exists(m, free_param, p_osc, ic, 6e4);
    if (!ex.exists) {
        p_osc = fold->param * 0.85;
        ex = cycle_exists(m, free_param, p_osc, ic, 6e4);
    }
    if (!ex.exists) throw SolveError("classify_global_at: no oscillation below the fold");

    TerminationBracket term = find_cycle_termination(
        m, free_param, p_osc, fold->param * 1.25, ex.state, 1e-8 * (1.0 + fold->param));
    double p_end = 0.5 * (term.lo + term.hi);

    const double tol = 1e-3 * (1.0 + std::abs(fold->param));
    BifurcationPoint out;
    out.param2 = alpha;
    out.terminal_period = term.period_at_lo;
    out.bracket_width = term.hi - term.lo;
    if (std::abs(p_end - fold->param) < tol) {
        out.kind = BifKind::SNIC;
        out.param = fold->param;
        out.x = fold->x;
        out.eigenvalues = fold->eigenvalues;
    } else {
        out.kind = BifKind::Heteroclinic;
        out.param = p_end;
        if (auto sd = one_unstable_saddle(m, free_param, p_end)) {
            out.x = sd->x;
            out.eigenvalues = sd->eigenvalues;
            out.lambda_plus = sd->lambda_plus;
        }
    }
    return out;
}

CurveInPlane trace_global_curve(const ModelInstance& model, const std::string& param1,
                                const std::string& param2,
                                const std::vector<double>& p2_samples,
                                const ContinuationOptions& opt) {
    if (param2 != "alpha")
        throw std::invalid_argument("trace_global_curve samples the alpha axis");
    CurveInPlane c;
    c.kind = CurveKind::GlobalCurve;
    c.param1 = param1;
    c.param2 = param2;
    for (double a : p2_samples) {
        BifurcationPoint bp = classify_global_at(model, param1, a, opt);
        c.p1.push_back(bp.param);
        c.p2.push_back(a);
        c.states.push_back(bp.x);
    }
    c.termination = "samples_done";
    return c;
}

BifurcationPoint locate_codim2(const ModelInstance& base_model, const std::string& param1,
                               const std::string& param2, double alpha_lo, double alpha_hi,
                               double target_width, const ContinuationOptions& opt) {
    if (param2 != "alpha")
        throw std::invalid_argument("locate_codim2 bisects the alpha axis");
    auto is_snic = [&](double a) {
        BifurcationPoint bp = classify_global_at(base_model, param1, a, opt);
        return bp.kind == BifKind::SNIC;
    };
    bool lo_snic = is_snic(alpha_lo);
    bool hi_snic = is_snic(alpha_hi);
    if (lo_snic == hi_snic)
        throw SolveError("locate_codim2: no classification change in the interval");
    double lo = alpha_lo, hi = alpha_hi;
    while (hi - lo > target_width) {
        double mid = 0.5 * (lo + hi);
        if (is_snic(mid) == lo_snic) lo = mid;
        else hi = mid;
    }
    BifurcationPoint out;
    out.kind = BifKind::CodimTwo;
    out.param2 = 0.5 * (lo + hi);
    out.bracket_width = hi - lo;
    BifurcationPoint at = classify_global_at(base_model, param1, out.param2, opt);
    out.param = at.param;
    out.x = at.x;
    return out;
}

}  // namespace grnlab
