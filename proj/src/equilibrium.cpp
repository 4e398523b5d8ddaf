#include "grnlab/equilibrium.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace grnlab {

const char* stability_name(Stability s) {
    switch (s) {
        case Stability::Stable: return "stable";
        case Stability::Saddle: return "saddle";
        case Stability::Unstable: return "unstable";
        case Stability::Marginal: return "marginal";
    }
    return "?";
}

Stability classify_stability(const CVec& ev, double marginal) {
    int pos = 0, neg = 0;
    for (int i = 0; i < ev.size(); ++i) {
        double re = ev[i].real();
        if (std::abs(re) < marginal) return Stability::Marginal;
        (re > 0.0 ? pos : neg)++;
    }
    if (pos == 0) return Stability::Stable;
    if (neg == 0) return Stability::Unstable;
    return Stability::Saddle;
}

// ---------------------------------------------------------------------------
// Characteristic-polynomial eigensolver (Durand-Kerner) with certification.

namespace {

/// Monic characteristic polynomial coefficients by Faddeev-LeVerrier:
/// p(z) = z^n + a[n-1] z^{n-1} + ... + a[0].
std::vector<double> char_poly(const Mat& A) {
    const int n = static_cast<int>(A.rows());
    std::vector<double> a(n + 1, 0.0);
    a[n] = 1.0;
    Mat M = Mat::Zero(n, n);
    for (int k = 1; k <= n; ++k) {
        M = (A * M + a[n - k + 1] * Mat::Identity(n, n)).eval();
        a[n - k] = -(A * M).trace() / k;
    }
    return a;
}

Complex poly_eval(const std::vector<double>& a, Complex z) {
    Complex acc(0.0, 0.0);
    for (int k = static_cast<int>(a.size()) - 1; k >= 0; --k) acc = acc * z + a[k];
    return acc;
}

}  // namespace

namespace {

/// Inverse iteration with a slightly offset shift so an exactly-singular
/// (M - lambda I) cannot poison the factorization; optionally refines lambda
/// by Rayleigh quotients.
Eigen::VectorXcd inverse_iterate(const Eigen::MatrixXcd& Mc, Complex& lambda, bool refine) {
    const int n = static_cast<int>(Mc.rows());
    const double scale = std::max(Mc.norm(), 1e-300);
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v[i] = Complex(1.0 + 0.1 * i, 0.05 * (i + 1));
    v.normalize();
    double shift = 1e-10 * scale;
    for (int it = 0; it < 4; ++it) {
        Eigen::MatrixXcd B =
            Mc - (lambda + Complex(shift, shift)) * Eigen::MatrixXcd::Identity(n, n);
        Eigen::VectorXcd w = Eigen::PartialPivLU<Eigen::MatrixXcd>(B).solve(v);
        double nw = w.norm();
        if (!std::isfinite(nw) || nw == 0.0) {
            shift *= 97.0;  // retry with a larger offset
            continue;
        }
        v = w / nw;
        if (refine) lambda = (v.adjoint() * Mc * v)(0, 0);
        shift = std::max(shift * 1e-3, 1e-14 * scale);
    }
    return v;
}

}  // namespace

double eigen_residual(const Mat& M, Complex lambda) {
    Eigen::MatrixXcd Mc = M.cast<Complex>();
    Eigen::VectorXcd v = inverse_iterate(Mc, lambda, false);
    return (Mc * v - lambda * v).norm();
}

CVec eigenvalues(const Mat& M) {
    const int n = static_cast<int>(M.rows());
    if (n != M.cols()) throw std::invalid_argument("eigenvalues: matrix must be square");
    if (n > 5) throw std::invalid_argument("eigenvalues: supported up to n=5");
    if (n == 0) return CVec();
    const double mnorm = std::max(M.norm(), 1e-300);

    std::vector<double> a = char_poly(M);

    // Durand-Kerner from points on a circle sized by the Cauchy bound
    double r = 0.0;
    for (int k = 0; k < n; ++k) r = std::max(r, std::abs(a[k]));
    r = 1.0 + r;
    std::vector<Complex> z(n);
    for (int i = 0; i < n; ++i) {
        double th = 2.0 * std::numbers::pi * (i + 0.25) / n;
        z[i] = r * Complex(std::cos(th), std::sin(th));
    }
    bool converged = false;
    for (int sweep = 0; sweep < 500 && !converged; ++sweep) {
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            Complex denom(1.0, 0.0);
            for (int j = 0; j < n; ++j)
                if (j != i) denom *= z[i] - z[j];
            if (denom == Complex(0.0, 0.0)) {
                z[i] += Complex(1e-8 * r, 1e-8 * r);
                worst = 1.0;
                continue;
            }
            Complex dz = poly_eval(a, z[i]) / denom;
            z[i] -= dz;
            worst = std::max(worst, std::abs(dz) / (1.0 + std::abs(z[i])));
        }
        converged = worst < 1e-14;
    }
    if (!converged) {
        // multiple-root clusters converge slowly; the polish below decides
    }

    // polish each root by inverse iteration + Rayleigh quotient
    Eigen::MatrixXcd Mc = M.cast<Complex>();
    CVec out(n);
    for (int i = 0; i < n; ++i) {
        Complex lam = z[i];
        Eigen::VectorXcd v = inverse_iterate(Mc, lam, true);
        double res = (Mc * v - lam * v).norm();
        if (!(res <= 1e-8 * mnorm)) {
            std::ostringstream os;
            os << "eigenvalue certification failed: residual " << res << " vs " << 1e-8 * mnorm;
            throw SolveError(os.str());
        }
        // real matrices: collapse numerically-real eigenvalues
        if (std::abs(lam.imag()) < 1e-12 * mnorm) lam = Complex(lam.real(), 0.0);
        out[i] = lam;
    }
    std::sort(out.begin(), out.end(), [](Complex p, Complex q) {
        if (p.real() != q.real()) return p.real() < q.real();
        return p.imag() < q.imag();
    });
    return out;
}

CirculantEigs circulant_eigenvalues(double a, double b, double c) {
    CirculantEigs e;
    e.lambda1 = a + b + c;
    e.lambda23 = Complex(a - 0.5 * (b + c), 0.5 * std::sqrt(3.0) * (b - c));
    return e;
}

// ---------------------------------------------------------------------------

namespace {

CVec equilibrium_eigs(const ModelInstance& model, const Vec& x) {
    return eigenvalues(model.jacobian(x));
}

Equilibrium finish_equilibrium(const ModelInstance& model, const Vec& x) {
    Equilibrium eq;
    eq.x = x;
    eq.residual = model.rhs(x).lpNorm<Eigen::Infinity>();
    eq.eigenvalues = equilibrium_eigs(model, x);
    eq.stability = classify_stability(eq.eigenvalues);
    const int n = model.dim();
    eq.symmetric = true;
    for (int i = 1; i < n; ++i)
        if (std::abs(x[i] - x[0]) > 1e-9 * (1.0 + std::abs(x[0]))) eq.symmetric = false;
    return eq;
}

}  // namespace

Equilibrium find_equilibrium(const ModelInstance& model, const Vec& guess,
                             const NewtonOptions& opt) {
    const int n = model.dim();
    if (guess.size() != n) throw std::invalid_argument("guess dimension mismatch");
    for (int i = 0; i < n; ++i)
        if (guess[i] < 0.0) throw std::invalid_argument("guess must be non-negative");

    Vec x = guess, F(n), xs(n), Fs(n);
    Mat J(n, n);
    model.rhs(x, F);
    double fn = F.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < opt.max_iter; ++it) {
        if (fn < opt.tol * (1.0 + x.lpNorm<Eigen::Infinity>())) return finish_equilibrium(model, x);
        model.jacobian(x, J);
        Eigen::PartialPivLU<Mat> lu(J);
        Vec dx = lu.solve(-F);
        if (!dx.allFinite()) {
            Eigen::JacobiSVD<Mat> svd(J);
            std::ostringstream os;
            os << "singular Jacobian in Newton iteration (cond ~ "
               << svd.singularValues()(0) / std::max(svd.singularValues()(n - 1), 1e-300)
               << ")";
            throw SolveError(os.str());
        }
        // backtracking on the residual norm
        double s = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 30; ++bt) {
            xs = x + s * dx;
            model.rhs(xs, Fs);
            double fns = Fs.lpNorm<Eigen::Infinity>();
            if (std::isfinite(fns) && fns < (1.0 - 0.25 * s) * fn + 1e-300) {
                x = xs;
                F = Fs;
                fn = fns;
                moved = true;
                break;
            }
            s *= 0.5;
        }
        if (!moved) {
            // accept the full step once in case the residual landscape is flat
            x += dx;
            model.rhs(x, F);
            fn = F.lpNorm<Eigen::Infinity>();
        }
    }
    if (fn < 1e-10 * (1.0 + x.lpNorm<Eigen::Infinity>())) return finish_equilibrium(model, x);
    std::ostringstream os;
    os << "Newton did not converge in " << opt.max_iter << " iterations (residual " << fn << ")";
    throw SolveError(os.str());
}

std::vector<Equilibrium> find_all_equilibria(const ModelInstance& model,
                                             const NewtonOptions& opt) {
    const int n = model.dim();
    const double scale = std::max(model.state_scale(), 1e-6);

    std::vector<Vec> seeds;
    seeds.push_back(Vec::Constant(n, 1e-3));
    for (double s : {1.0, 0.5, 0.25}) seeds.push_back(Vec::Constant(n, s * scale));
    // all on/off dominance patterns at a few scales
    for (int mask = 1; mask < (1 << n); ++mask) {
        for (double s : {1.0, 0.55, 0.3}) {
            Vec v = Vec::Constant(n, 0.01);
            for (int i = 0; i < n; ++i)
                if (mask & (1 << i)) v[i] = s * scale;
            seeds.push_back(v);
        }
    }
    // ordered dominant/subdominant pairs reach the saddles that sit between
    // neighbouring attractors
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            for (auto [si, sj] : {std::pair{0.65, 0.05}, std::pair{0.8, 0.15}}) {
                Vec v = Vec::Constant(n, 5e-4 * scale);
                v[i] = si * scale;
                v[j] = sj * scale;
                seeds.push_back(v);
            }
        }

    std::vector<Equilibrium> found;
    for (const Vec& s : seeds) {
        Equilibrium eq;
        try {
            eq = find_equilibrium(model, s, opt);
        } catch (const SolveError&) {
            continue;
        }
        bool negative = false;
        for (int i = 0; i < n; ++i)
            if (eq.x[i] < -1e-12) negative = true;
        if (negative) continue;
        bool dup = false;
        for (const Equilibrium& e : found)
            if ((e.x - eq.x).norm() < 1e-6 * (1.0 + e.x.norm())) dup = true;
        if (!dup) found.push_back(std::move(eq));
    }
    std::sort(found.begin(), found.end(), [](const Equilibrium& a, const Equilibrium& b) {
        for (int i = 0; i < a.x.size(); ++i)
            if (a.x[i] != b.x[i]) return a.x[i] < b.x[i];
        return false;
    });
    return found;
}

Equilibrium symmetric_equilibrium(const ModelInstance& model) {
    if (!model.params().symmetric())
        throw std::invalid_argument("symmetric_equilibrium requires a symmetric ParamSet");
    const int n = model.dim();

    Vec xs(n), F(n);
    auto S = [&](double xi) {
        xs.setConstant(xi);
        model.rhs(xs, F);
        return F[0];
    };
    double hi = 1.5 * model.state_scale() + 1.0;
    double s_lo = S(0.0);
    if (s_lo < 0.0) throw SolveError("symmetric scalar equation has no bracket at 0");
    // first sign change on a grid, then bisect
    const int grid = 256;
    double a = 0.0, b = hi, sa = s_lo;
    bool bracket = false;
    for (int k = 1; k <= grid; ++k) {
        double xk = hi * k / grid;
        double sk = S(xk);
        if (sa >= 0.0 && sk <= 0.0) {
            a = hi * (k - 1) / grid;
            b = xk;
            bracket = true;
            break;
        }
        sa = sk;
    }
    if (!bracket) throw SolveError("no sign change bracketing the symmetric equilibrium");
    for (int it = 0; it < 200 && (b - a) > 1e-15 * (1.0 + b); ++it) {
        double mid = 0.5 * (a + b);
        (S(mid) >= 0.0 ? a : b) = mid;
    }
    double xi = 0.5 * (a + b);
    // Newton polish on the scalar equation, derivative from the Jacobian row sum
    Mat J(n, n);
    for (int it = 0; it < 8; ++it) {
        double f = S(xi);
        xs.setConstant(xi);
        model.jacobian(xs, J);
        double df = J.row(0).sum();
        if (df == 0.0) break;
        double step = f / df;
        xi -= step;
        if (std::abs(step) < 1e-16 * (1.0 + std::abs(xi))) break;
    }

    Equilibrium eq;
    eq.x = Vec::Constant(n, xi);
    eq.residual = model.rhs(eq.x).lpNorm<Eigen::Infinity>();
    eq.symmetric = true;
    model.jacobian(eq.x, J);
    if (n == 3) {
        CirculantEigs ce = circulant_eigenvalues(J(0, 0), J(0, 1), J(0, 2));
        eq.eigenvalues.resize(3);
        eq.eigenvalues[0] = Complex(ce.lambda1, 0.0);
        eq.eigenvalues[1] = std::conj(ce.lambda23);
        eq.eigenvalues[2] = ce.lambda23;
    } else {
        eq.eigenvalues = eigenvalues(J);
    }
    eq.stability = classify_stability(eq.eigenvalues);
    return eq;
}

SpinDirection oscillation_direction(const ModelInstance& model) {
    if (model.dim() != 3)
        throw std::invalid_argument("oscillation_direction is defined for three-gene rings");
    Equilibrium eq = symmetric_equilibrium(model);
    Mat J = model.jacobian(eq.x);
    double b = J(0, 1), c = J(0, 2);
    double scale = std::max({std::abs(b), std::abs(c), 1e-30});
    if (std::abs(b - c) <= 1e-9 * scale)
        throw SolveError("degenerate: Im(lambda_23) vanishes (alpha == beta)");
    return b < c ? SpinDirection::Clockwise : SpinDirection::Anticlockwise;
}

}  // namespace grnlab
