#include "grnlab/continuation.hpp"

#include "free_param.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace grnlab {

const char* bif_kind_name(BifKind k) {
    switch (k) {
        case BifKind::Hopf: return "hopf";
        case BifKind::SaddleNode: return "saddle_node";
        case BifKind::SNIC: return "snic";
        case BifKind::Heteroclinic: return "heteroclinic";
        case BifKind::CodimTwo: return "codim_two";
        case BifKind::Inconclusive: return "inconclusive";
    }
    return "?";
}

double Branch::param_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : points) m = std::min(m, p.param);
    return m;
}

double Branch::param_max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& p : points) m = std::max(m, p.param);
    return m;
}

const BranchPoint& Branch::closest_to(double p) const {
    if (points.empty()) throw std::invalid_argument("empty branch");
    size_t best = 0;
    for (size_t i = 1; i < points.size(); ++i)
        if (std::abs(points[i].param - p) < std::abs(points[best].param - p)) best = i;
    return points[best];
}

// ---------------------------------------------------------------------------



using detail::FreeParamModel;

// ---------------------------------------------------------------------------

namespace {

struct ZState {
    Vec x;
    double q;  ///< parameter coordinate (possibly log)
};

BranchPoint make_eq_point(const ModelInstance& model, const FreeParamModel& fp, const Vec& x,
                          double p, double s) {
    BranchPoint bp;
    bp.param = p;
    bp.arclength = s;
    bp.x = x;
    Mat J(model.dim(), model.dim());
    fp.jac(x, p, J);
    bp.eigenvalues = eigenvalues(J);
    bp.stability = classify_stability(bp.eigenvalues);
    Vec F(model.dim());
    fp.rhs(x, p, F);
    bp.residual = F.lpNorm<Eigen::Infinity>();
    return bp;
}

}  // namespace

Branch continue_equilibria(const ModelInstance& model, const std::string& free_param,
                           double lo, double hi, const Vec& seed, double seed_param,
                           const ContinuationOptions& opt) {
    if (!(hi > lo)) throw std::invalid_argument("continuation range must have hi > lo");
    FreeParamModel fp(model, free_param);
    const int n = model.dim();
    const bool logp = lo > 0.0 && hi / lo > 100.0;
    auto q_of = [&](double p) { return logp ? std::log(p) : p; };
    auto p_of = [&](double q) { return logp ? std::exp(q) : q; };

    Branch br;
    br.kind = BranchKind::Equilibrium;
    br.free_param = free_param;

    Vec x = seed;
    if (!fp.newton(x, seed_param, opt.newton_tol))
        throw SolveError("continuation seed failed to converge");
    double q = q_of(seed_param);
    br.points.push_back(make_eq_point(model, fp, x, seed_param, 0.0));

    // scaled metric around the current point
    auto scales = [&](const ZState& z) {
        Vec s(n + 1);
        for (int i = 0; i < n; ++i) s[i] = std::max(1e-3, std::abs(z.x[i]));
        s[n] = std::max(0.05, std::abs(z.q));
        return s;
    };

    // initial tangent from dx/dq = -J^{-1} F_q
    ZState z{x, q};
    Vec t(n + 1);
    {
        Mat J(n, n);
        Vec Fp(n);
        fp.jac(x, p_of(q), J);
        fp.dfdp(x, p_of(q), Fp);
        double dpdq = logp ? p_of(q) : 1.0;
        Vec dxdq = Eigen::PartialPivLU<Mat>(J).solve(-Fp * dpdq);
        Vec s = scales(z);
        for (int i = 0; i < n; ++i) t[i] = dxdq[i] / s[i];
        t[n] = 1.0 / s[n];
        t.normalize();
        int dir = opt.direction;
        if (dir == 0) dir = (hi - seed_param > seed_param - lo) ? +1 : -1;
        if (t[n] * dir < 0) t = -t;
    }

    double ds = opt.ds0;
    double arclen = 0.0;
    Mat Jb(n + 1, n + 1);
    Vec G(n + 1), dz(n + 1), F(n), Fq(n);
    br.termination = "max_points";
    for (int step = 0; step < opt.max_points; ++step) {
        Vec s = scales(z);
        bool accepted = false;
        ZState zn = z;
        int used_iters = 0;
        while (!accepted) {
            // predictor
            zn.x = z.x + ds * t.head(n).cwiseProduct(s.head(n));
            zn.q = z.q + ds * t[n] * s[n];
            // corrector: F(x,p)=0 plus the scaled arclength plane
            bool ok = false;
            for (int it = 0; it < opt.max_newton; ++it) {
                double p = p_of(zn.q);
                fp.rhs(zn.x, p, F);
                double arc = 0.0;
                for (int i = 0; i < n; ++i) arc += t[i] * (zn.x[i] - z.x[i]) / s[i];
                arc += t[n] * (zn.q - z.q) / s[n];
                arc -= ds;
                G.head(n) = F;
                G[n] = arc;
                double gn = G.head(n).lpNorm<Eigen::Infinity>();
                if (gn < opt.newton_tol * (1.0 + zn.x.lpNorm<Eigen::Infinity>()) &&
                    std::abs(arc) < 1e-8) {
                    ok = true;
                    used_iters = it;
                    break;
                }
                Mat J(n, n);
                fp.jac(zn.x, p, J);
                fp.dfdp(zn.x, p, Fq);
                double dpdq = logp ? p : 1.0;
                Jb.topLeftCorner(n, n) = J;
                Jb.topRightCorner(n, 1) = Fq * dpdq;
                for (int i = 0; i < n; ++i) Jb(n, i) = t[i] / s[i];
                Jb(n, n) = t[n] / s[n];
                dz = Eigen::PartialPivLU<Mat>(Jb).solve(-G);
                if (!dz.allFinite()) break;
                zn.x += dz.head(n);
                zn.q += dz[n];
            }
            if (ok) {
                accepted = true;
            } else {
                ds *= 0.4;
                if (ds < opt.ds_min) {
                    br.termination = "min_step";
                    return br;
                }
                zn = z;
            }
        }

        // tangent update by secant in scaled coordinates
        Vec tn(n + 1);
        for (int i = 0; i < n; ++i) tn[i] = (zn.x[i] - z.x[i]) / s[i];
        tn[n] = (zn.q - z.q) / s[n];
        double norm = tn.norm();
        if (norm > 0.0) t = tn / norm;
        arclen += ds;
        z = zn;

        double p = p_of(z.q);
        br.points.push_back(make_eq_point(model, fp, z.x, p, arclen));

        if (p < lo || p > hi) {
            // land exactly on the boundary for a clean endpoint
            double pb = std::clamp(p, lo, hi);
            Vec xb = z.x;
            if (fp.newton(xb, pb, opt.newton_tol)) {
                br.points.back() = make_eq_point(model, fp, xb, pb, arclen);
            }
            br.termination = "range_end";
            return br;
        }
        if (used_iters <= 3) ds = std::min(ds * 1.4, opt.ds_max);
    }
    return br;
}

// ---------------------------------------------------------------------------

BifurcationPoint refine_hopf(const ModelInstance& model, const std::string& free_param,
                             double p_lo, double p_hi, const Vec& x_near,
                             const ContinuationOptions& opt) {
    FreeParamModel fp(model, free_param);
    const int n = model.dim();
    Mat J(n, n);
    auto psi = [&](double p, Vec& x) -> double {
        if (!fp.newton(x, p, opt.newton_tol))
            throw SolveError("hopf refinement: equilibrium solve failed");
        fp.jac(x, p, J);
        auto h = detail::hopf_test(eigenvalues(J), opt.hopf_im_guard);
        if (!h) throw SolveError("hopf refinement: complex pair disappeared");
        return *h;
    };
    Vec xa = x_near, xb = x_near;
    double fa = psi(p_lo, xa);
    double fb = psi(p_hi, xb);
    if (fa * fb > 0.0) throw SolveError("hopf refinement: no sign change in bracket");
    double a = p_lo, b = p_hi;
    Vec xm = xa;
    for (int it = 0; it < 100 && (b - a) > 1e-14 * (1.0 + std::abs(b)); ++it) {
        double mid = 0.5 * (a + b);
        double fm = psi(mid, xm);
        if (fa * fm <= 0.0) {
            b = mid;
            fb = fm;
        } else {
            a = mid;
            fa = fm;
            xa = xm;
        }
    }
    BifurcationPoint bp;
    bp.kind = BifKind::Hopf;
    bp.param = 0.5 * (a + b);
    Vec x = xm;
    fp.newton(x, bp.param, opt.newton_tol);
    bp.x = x;
    fp.jac(x, bp.param, J);
    bp.eigenvalues = eigenvalues(J);
    bp.bracket_width = b - a;
    return bp;
}

namespace {

/// Solve F(x, p) = 0 with component `comp` frozen to eta; unknowns are the
/// remaining state entries and p.  Returns false on Newton failure.
bool frozen_component_solve(const FreeParamModel& fp, int comp, double eta, Vec& x,
                            double& p, double tol) {
    const int n = fp.dim();
    Vec F(n), Fq(n), G(n), dz(n);
    Mat J(n, n), Jr(n, n);
    x[comp] = eta;
    for (int it = 0; it < 40; ++it) {
        fp.rhs(x, p, F);
        if (F.lpNorm<Eigen::Infinity>() < tol * (1.0 + x.lpNorm<Eigen::Infinity>()))
            return true;
        fp.jac(x, p, J);
        fp.dfdp(x, p, Fq);
        // columns: all state components except comp, then p
        int c = 0;
        for (int j = 0; j < n; ++j) {
            if (j == comp) continue;
            Jr.col(c++) = J.col(j);
        }
        Jr.col(n - 1) = Fq;
        dz = Eigen::PartialPivLU<Mat>(Jr).solve(-F);
        if (!dz.allFinite()) return false;
        c = 0;
        for (int j = 0; j < n; ++j) {
            if (j == comp) continue;
            x[j] += dz[c++];
        }
        p += dz[n - 1];
    }
    fp.rhs(x, p, F);
    return F.lpNorm<Eigen::Infinity>() < tol * (1.0 + x.lpNorm<Eigen::Infinity>());
}

}  // namespace

BifurcationPoint locate_fold(const ModelInstance& model, const std::string& free_param,
                             const Vec& x0, double p0, const ContinuationOptions& opt) {
    // Walk a short stretch of branch around (x0, p0) to bracket the parameter
    // extremum, then refine by golden section over the frozen component.
    Branch local = [&] {
        ContinuationOptions o = opt;
        o.ds0 = 0.01;
        o.ds_max = 0.05;
        o.max_points = 400;
        double span = 0.25 * (1.0 + std::abs(p0));
        return continue_equilibria(model, free_param, p0 - span, p0 + span, x0, p0, o);
    }();
    // pick the extremum among visited points
    size_t imin = 0, imax = 0;
    for (size_t i = 0; i < local.points.size(); ++i) {
        if (local.points[i].param < local.points[imin].param) imin = i;
        if (local.points[i].param > local.points[imax].param) imax = i;
    }
    bool fold_is_min = imin != 0 && imin != local.points.size() - 1;
    size_t i = fold_is_min ? imin : imax;
    if (i == 0 || i + 1 >= local.points.size())
        throw SolveError("locate_fold: no parameter extremum near the seed");

    const BranchPoint& a = local.points[i - 1];
    const BranchPoint& b = local.points[i + 1];
    int comp = 0;
    double best = -1.0;
    for (int j = 0; j < model.dim(); ++j) {
        double d = std::abs(b.x[j] - a.x[j]) / std::max(1e-3, std::abs(local.points[i].x[j]));
        if (d > best) {
            best = d;
            comp = j;
        }
    }

    FreeParamModel fp(model, free_param);
    double eta_a = a.x[comp], eta_b = b.x[comp];
    Vec x = local.points[i].x;
    double p = local.points[i].param;
    auto eval = [&](double eta) {
        Vec xe = x;
        double pe = p;
        if (!frozen_component_solve(fp, comp, eta, xe, pe, opt.newton_tol))
            throw SolveError("locate_fold: frozen-component solve failed");
        x = xe;  // warm start the next call
        p = pe;
        return fold_is_min ? pe : -pe;
    };

    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = std::min(eta_a, eta_b), hi = std::max(eta_a, eta_b);
    double c1 = hi - gr * (hi - lo), c2 = lo + gr * (hi - lo);
    double f1 = eval(c1), f2 = eval(c2);
    for (int it = 0; it < 160 && (hi - lo) > 1e-11 * (1.0 + std::abs(hi)); ++it) {
        if (f1 < f2) {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - gr * (hi - lo);
            f1 = eval(c1);
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + gr * (hi - lo);
            f2 = eval(c2);
        }
    }
    double eta = 0.5 * (lo + hi);
    Vec xf = x;
    double pf = p;
    if (!frozen_component_solve(fp, comp, eta, xf, pf, opt.newton_tol))
        throw SolveError("locate_fold: final solve failed");

    BifurcationPoint bp;
    bp.kind = BifKind::SaddleNode;
    bp.param = pf;
    bp.x = xf;
    Mat J(model.dim(), model.dim());
    fp.jac(xf, pf, J);
    bp.eigenvalues = eigenvalues(J);
    bp.bracket_width = std::abs(f1 - f2);
    return bp;
}

std::vector<BifurcationPoint> detect_bifurcations(const ModelInstance& model,
                                                  const Branch& branch,
                                                  const ContinuationOptions& opt) {
    std::vector<BifurcationPoint> out;
    if (branch.points.size() < 2) return out;
    if (branch.kind != BranchKind::Equilibrium)
        throw std::invalid_argument("detect_bifurcations expects an equilibrium branch");

    for (size_t k = 0; k + 1 < branch.points.size(); ++k) {
        const BranchPoint& A = branch.points[k];
        const BranchPoint& B = branch.points[k + 1];

        double fa = detail::fold_test(A.eigenvalues);
        double fb = detail::fold_test(B.eigenvalues);
        if (fa * fb < 0.0) {
            try {
                BifurcationPoint bp = locate_fold(model, branch.free_param,
                                                  A.x, A.param, opt);
                out.push_back(std::move(bp));
            } catch (const SolveError&) {
                BifurcationPoint bp;
                bp.kind = BifKind::SaddleNode;
                bp.param = 0.5 * (A.param + B.param);
                bp.x = A.x;
                bp.note = "refinement failed; midpoint reported";
                out.push_back(std::move(bp));
            }
        }

        auto ha = detail::hopf_test(A.eigenvalues, opt.hopf_im_guard);
        auto hb = detail::hopf_test(B.eigenvalues, opt.hopf_im_guard);
        if (ha && hb && (*ha) * (*hb) < 0.0 && fa * fb > 0.0) {
            try {
                out.push_back(refine_hopf(model, branch.free_param,
                                          std::min(A.param, B.param),
                                          std::max(A.param, B.param), A.x, opt));
            } catch (const SolveError&) {
                BifurcationPoint bp;
                bp.kind = BifKind::Hopf;
                bp.param = 0.5 * (A.param + B.param);
                bp.x = A.x;
                bp.note = "refinement failed; midpoint reported";
                out.push_back(std::move(bp));
            }
        }
    }
    std::sort(out.begin(), out.end(),
              [](const BifurcationPoint& a, const BifurcationPoint& b) {
                  return a.param < b.param;
              });
    return out;
}

}  // namespace grnlab
