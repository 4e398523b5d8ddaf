#pragma once

// Pseudo-arclength continuation of equilibria and (shooting-based) limit
// cycles, codimension-one test functions with bisection refinement, global
// bifurcation classification (fold-on-cycle vs saddle collision), curves in
// the (g, alpha) plane, and the codimension-two bracket between the two
// global-bifurcation regimes.

#include "grnlab/equilibrium.hpp"
#include "grnlab/integrate.hpp"

#include <functional>

namespace grnlab {

enum class BranchKind { Equilibrium, Cycle };
enum class BifKind { Hopf, SaddleNode, SNIC, Heteroclinic, CodimTwo, Inconclusive };
const char* bif_kind_name(BifKind k);

struct BranchPoint {
    double param = 0.0;
    double arclength = 0.0;
    Vec x;             ///< equilibrium state, or cycle anchor on the section
    CVec eigenvalues;  ///< Jacobian eigenvalues / Floquet multipliers
    Stability stability = Stability::Marginal;
    double residual = 0.0;
    // cycle-only fields
    double period = std::numeric_limits<double>::quiet_NaN();
    Vec cycle_min, cycle_max;
};

struct Branch {
    BranchKind kind = BranchKind::Equilibrium;
    std::string free_param;
    std::vector<BranchPoint> points;
    std::string termination;  ///< "range_end", "min_step", "period_blowup", ...

    double param_min() const;
    double param_max() const;
    const BranchPoint& closest_to(double p) const;
};

struct BifurcationPoint {
    BifKind kind = BifKind::Inconclusive;
    double param = std::numeric_limits<double>::quiet_NaN();
    double param2 = std::numeric_limits<double>::quiet_NaN();  ///< codim-two only
    Vec x;
    CVec eigenvalues;
    double lambda_plus = std::numeric_limits<double>::quiet_NaN();
    double terminal_period = std::numeric_limits<double>::quiet_NaN();
    double bracket_width = std::numeric_limits<double>::quiet_NaN();
    std::string note;
};

struct ContinuationOptions {
    double newton_tol = 1e-10;   ///< on the defining-system residual
    int max_newton = 10;
    double ds0 = 0.02;           ///< initial arclength step (scaled space)
    double ds_min = 1e-10;
    double ds_max = 0.25;
    int max_points = 20000;
    int direction = 0;           ///< initial parameter direction; 0 = auto
    Tolerances ode_tol{1e-10, 1e-12};  ///< cycle-shooting integrations
    double t_max_period = 5e4;   ///< period blow-up cutoff
    double hopf_im_guard = 1e-6;
};

/// Pseudo-arclength continuation of F(x, p) = 0 with a secant predictor and
/// bordered Newton corrector; traverses folds; eigenvalues at every point.
Branch continue_equilibria(const ModelInstance& model, const std::string& free_param,
                           double lo, double hi, const Vec& seed, double seed_param,
                           const ContinuationOptions& opt = {});

/// Sign-change monitoring of the fold (det J) and Hopf (Re of the complex
/// pair) test functions between consecutive branch points, refined by
/// parameter bisection (Hopf) and extremum search through the fold.
std::vector<BifurcationPoint> detect_bifurcations(const ModelInstance& model,
                                                  const Branch& branch,
                                                  const ContinuationOptions& opt = {});

/// Precise fold of the branch passing near (x0, p0): continuation with a
/// frozen state component plus golden-section extremum of the parameter.
BifurcationPoint locate_fold(const ModelInstance& model, const std::string& free_param,
                             const Vec& x0, double p0,
                             const ContinuationOptions& opt = {});

/// Hopf point refinement between two parameter values bracketing a sign
/// change of the complex pair's real part on the (unique) equilibrium branch.
BifurcationPoint refine_hopf(const ModelInstance& model, const std::string& free_param,
                             double p_lo, double p_hi, const Vec& x_near,
                             const ContinuationOptions& opt = {});

// ---------------------------------------------------------------------------
// Limit-cycle shooting and continuation.

/// A periodic orbit certified by (multiple-)shooting Newton at parameter p.
struct ShootResult {
    bool converged = false;
    double period = 0.0;
    Vec anchor;            ///< x(0), on the phase section
    CVec multipliers;      ///< Floquet multipliers of the monodromy matrix
    double residual = 0.0;
    double monodromy_cond = 0.0;
    int segments = 1;
    Vec cycle_min, cycle_max;
    std::vector<Vec> segment_states;
};

struct ShootOptions {
    Tolerances ode_tol{1e-10, 1e-12};
    double newton_tol = 1e-9;
    int max_newton = 14;
    int segments = 0;  ///< 0 = automatic (grow when the monodromy conditioning demands)
};

/// Polishes a near-periodic seed (e.g. from detect_limit_cycle) into a
/// certified orbit at the model's own parameters.
ShootResult shoot_cycle(const ModelInstance& model, const LimitCycle& seed,
                        const ShootOptions& opt = {});

/// Same with one parameter overridden (as in a continuation run).
ShootResult shoot_cycle_at(const ModelInstance& model, const std::string& free_param,
                           double p, const Vec& anchor, double period_guess,
                           const ShootOptions& opt = {});

/// Pseudo-arclength continuation of the cycle in (anchor, log-period, p),
/// starting from a certified Hopf point; continues toward increasing period
/// and stops at range exit, period > t_max_period, or corrector failure at
/// the minimum step (the last certified point brackets the global
/// bifurcation).
Branch continue_limit_cycle(const ModelInstance& model, const std::string& free_param,
                            const BifurcationPoint& hopf, double lo, double hi,
                            const ContinuationOptions& opt = {});

/// Same, but seeded directly from a detected cycle at seed_param.
Branch continue_limit_cycle_from(const ModelInstance& model, const std::string& free_param,
                                 const LimitCycle& seed, double seed_param, double lo,
                                 double hi, const ContinuationOptions& opt = {});

// ---------------------------------------------------------------------------
// Global bifurcations.

struct CycleExistence {
    bool exists = false;
    double period = 0.0;    ///< measured when oscillating
    Vec state;              ///< hand-off state for ladder continuation
    std::string outcome;    ///< "oscillating", "converged_to_equilibrium", "budget"
};

/// Long-run existence test for an attracting cycle at the given parameter
/// value, starting near the cycle; detects convergence onto a stable
/// equilibrium as the no-cycle outcome.
CycleExistence cycle_exists(const ModelInstance& model, const std::string& free_param,
                            double p, const Vec& near_cycle_state,
                            double time_budget = 6e4,
                            const Tolerances& tol = {1e-9, 1e-12});

/// Bisection on cycle existence between an oscillating parameter value and a
/// dead one.  Returns the bracket (lo oscillating, hi not).
struct TerminationBracket {
    double lo = 0.0, hi = 0.0;
    double period_at_lo = 0.0;
    Vec state_at_lo;
};
TerminationBracket find_cycle_termination(const ModelInstance& model,
                                          const std::string& free_param, double p_osc,
                                          double p_dead, const Vec& osc_state,
                                          double target_width = 1e-8,
                                          double time_budget = 6e4);

/// SNIC when the fold parameter and the cycle termination coincide (within
/// 1e-3 relative) and no stable equilibrium coexists with the cycle just
/// below termination; Heteroclinic when stable equilibria fill an open window
/// below termination.  Cross-checked against the period-scaling laws when the
/// tail data allows; disagreements return Inconclusive with a note.
BifurcationPoint classify_global_bifurcation(const ModelInstance& model,
                                             const Branch& cycle_branch,
                                             const Branch& eq_branch,
                                             const ContinuationOptions& opt = {});

// ---------------------------------------------------------------------------
// Two-parameter structure.

enum class CurveKind { HopfCurve, FoldCurve, GlobalCurve };

struct CurveInPlane {
    CurveKind kind = CurveKind::HopfCurve;
    std::string param1, param2;
    std::vector<double> p1, p2;      ///< curve coordinates, same length
    std::vector<Vec> states;
    std::string termination;
};

/// Continues the augmented defining system (equilibrium + eigenvalue
/// condition) in two parameters.  The Hopf curve terminates with a flagged
/// endpoint when the imaginary part falls under the guard.
CurveInPlane continue_codim1_curve(const ModelInstance& model, const BifurcationPoint& point,
                                   const std::string& param1, const std::string& param2,
                                   double p2_lo, double p2_hi,
                                   const ContinuationOptions& opt = {});

/// The global-bifurcation curve traced by repeated one-parameter cycle
/// terminations at sampled values of param2.
CurveInPlane trace_global_curve(const ModelInstance& model, const std::string& param1,
                                const std::string& param2,
                                const std::vector<double>& p2_samples,
                                const ContinuationOptions& opt = {});

/// Classification of the global bifurcation at a single alpha; helper for
/// locate_codim2 and the acceptance suite.
BifurcationPoint classify_global_at(const ModelInstance& base_model,
                                    const std::string& free_param, double alpha,
                                    const ContinuationOptions& opt = {});

/// Bisects param2 (alpha) on the SNIC <-> Heteroclinic classification change.
BifurcationPoint locate_codim2(const ModelInstance& base_model, const std::string& param1,
                               const std::string& param2, double alpha_lo, double alpha_hi,
                               double target_width, const ContinuationOptions& opt = {});

}  // namespace grnlab
