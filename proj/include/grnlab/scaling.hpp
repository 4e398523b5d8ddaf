#pragma once

// Least-squares fits of the period-scaling laws: the logarithmic and
// power-law dependence of the free-running period on rates, and the two
// asymptotic divergence laws that discriminate a fold-on-cycle termination
// (T ~ |p - p*|^{-1/2}) from a saddle-collision one (T ~ -(3/lambda+) ln|p - p*|).

#include <optional>
#include <string>
#include <vector>

namespace grnlab {

enum class ScalingLaw { LogInParam, PowerLaw, InverseSqrt, LogDivergence };
const char* scaling_law_name(ScalingLaw law);

struct PeriodSample {
    double param = 0.0;
    double period = 0.0;
};

struct ScalingFit {
    ScalingLaw law = ScalingLaw::LogInParam;
    // law-specific coefficients:
    //   LogInParam:    T = a0 + a1 ln(p)                       -> {a0, a1}
    //   PowerLaw:      T = a2 p^{-scaling_exponent}            -> {a2, scaling_exponent}
    //   InverseSqrt:   ln T = c + slope ln|p - p_star|         -> {c, slope}
    //   LogDivergence: T = c + slope ln(1/|p - p_star|)        -> {c, slope}
    double coeff0 = 0.0;
    double coeff1 = 0.0;
    double p_star = 0.0;             ///< divergence laws only
    bool p_star_fitted = false;
    double rms_residual = 0.0;       ///< in the law's linearized coordinates
    double window_lo = 0.0, window_hi = 0.0;
    std::string warning;
    // theory comparison, filled when lambda_plus is supplied
    double theory_slope = 0.0;
    double theory_discrepancy = 0.0;
};

/// T = a0 + a1 ln p.  Requires >= 5 samples spanning >= 2 decades of p.
ScalingFit fit_period_log(const std::vector<PeriodSample>& samples);

/// T = a2 p^{-beta}: least squares in (ln p, ln T).  Requires >= 5 samples
/// spanning >= 1.5 decades and positive values.
ScalingFit fit_period_power(const std::vector<PeriodSample>& samples);

/// ln T vs ln|p - p_star| (expected slope -1/2 at a fold-on-cycle).  All
/// samples must approach p_star from one side; when p_star is absent it is
/// fitted by golden-section search wrapped around the inner least squares.
ScalingFit fit_snic_scaling(const std::vector<PeriodSample>& samples,
                            std::optional<double> p_star = std::nullopt);

/// T vs ln(1/|p - p_star|); when lambda_plus is given the theoretical slope
/// 3/lambda_plus and its discrepancy are reported alongside.
ScalingFit fit_heteroclinic_scaling(const std::vector<PeriodSample>& samples,
                                    std::optional<double> p_star = std::nullopt,
                                    std::optional<double> lambda_plus = std::nullopt);

}  // namespace grnlab
