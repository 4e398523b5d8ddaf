#pragma once

// Equilibrium location (damped Newton with multistart seeding, plus the
// scalar reduction on the symmetric diagonal), small dense eigensolving via
// the characteristic polynomial, and the circulant closed forms available at
// cyclically-symmetric equilibria.

#include "grnlab/model.hpp"

#include <complex>

namespace grnlab {

using Complex = std::complex<double>;

/// Hard numerical failure (no convergence, singular systems, ...).
struct SolveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Stability { Stable, Saddle, Unstable, Marginal };
const char* stability_name(Stability s);

/// |Re| below this is reported Marginal rather than forced into a class.
inline constexpr double kMarginalRe = 1e-8;

Stability classify_stability(const CVec& eigenvalues, double marginal = kMarginalRe);

struct Equilibrium {
    Vec x;
    CVec eigenvalues;
    Stability stability = Stability::Marginal;
    bool symmetric = false;
    double residual = 0.0;  ///< ||rhs||_inf at x
};

struct NewtonOptions {
    int max_iter = 100;
    double tol = 1e-12;  ///< on ||F||_inf / (1 + ||x||_inf)
};

/// Damped Newton with analytic Jacobian and backtracking line search.
/// Throws SolveError on non-convergence or a singular Jacobian (with a
/// condition estimate in the message).
Equilibrium find_equilibrium(const ModelInstance& model, const Vec& guess,
                             const NewtonOptions& opt = {});

/// Multistart Newton over near-origin, per-axis, pairwise and symmetric
/// seeds; converged roots deduplicated at distance 1e-6*(1+|x|).
/// Sorted lexicographically by state for determinism.
std::vector<Equilibrium> find_all_equilibria(const ModelInstance& model,
                                             const NewtonOptions& opt = {});

/// Solves the scalar equation rhs_0(x,...,x)=0 by bracketing bisection plus a
/// Newton polish; requires a symmetric ParamSet.  For n=3 the eigenvalues
/// come from the circulant closed form.
Equilibrium symmetric_equilibrium(const ModelInstance& model);

/// Eigenvalues of circ(a,b,c) = [[a,b,c],[c,a,b],[b,c,a]]:
///   lambda_1 = a+b+c,  lambda_23 = a - (b+c)/2 +- i sqrt(3)/2 (b-c).
struct CirculantEigs {
    double lambda1;
    Complex lambda23;  ///< the +Im member of the pair
};
CirculantEigs circulant_eigenvalues(double a, double b, double c);

/// Roots of the characteristic polynomial by Durand-Kerner simultaneous
/// iteration, refined by inverse iteration with Rayleigh updates; each
/// eigenpair residual is certified below 1e-8 * ||M||.  n <= 5 only.
CVec eigenvalues(const Mat& M);

/// Best achievable ||Mv - lambda v|| over unit v for the given lambda.
double eigen_residual(const Mat& M, Complex lambda);

enum class SpinDirection { Clockwise, Anticlockwise };

/// Gene-peaking order of the oscillation born at the symmetric Hopf point,
/// from the sign of Im(lambda_23) of the circulant Jacobian.  Clockwise is
/// the alpha-loop-dominated direction (alpha > beta): gene i's peak is
/// followed by gene i+1's.  Throws SolveError when the imaginary part
/// vanishes (alpha == beta).
SpinDirection oscillation_direction(const ModelInstance& model);

}  // namespace grnlab
