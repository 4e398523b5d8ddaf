#include "grnlab/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace grnlab {

const char* scaling_law_name(ScalingLaw law) {
    switch (law) {
        case ScalingLaw::LogInParam: return "log_in_param";
        case ScalingLaw::PowerLaw: return "power_law";
        case ScalingLaw::InverseSqrt: return "inverse_sqrt";
        case ScalingLaw::LogDivergence: return "log_divergence";
    }
    return "?";
}

namespace {

struct LineFit {
    double intercept = 0.0, slope = 0.0, rms = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    return f;
}

void window(const std::vector<PeriodSample>& s, ScalingFit& fit) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : s) {
        lo = std::min(lo, p.param);
        hi = std::max(hi, p.param);
    }
    fit.window_lo = lo;
    fit.window_hi = hi;
}

double decades(const std::vector<PeriodSample>& s) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& p : s) {
        if (p.param <= 0.0) return -1.0;
        lo = std::min(lo, p.param);
        hi = std::max(hi, p.param);
    }
    return std::log10(hi / lo);
}

}  // namespace

ScalingFit fit_period_log(const std::vector<PeriodSample>& samples) {
    if (samples.size() < 5) throw std::invalid_argument("fit_period_log: need >= 5 samples");
    if (decades(samples) < 2.0)
        throw std::invalid_argument("fit_period_log: need >= 2 decades of parameter span");
    std::vector<double> x, y;
    for (const auto& s : samples) {
        x.push_back(std::log(s.param));
        y.push_back(s.period);
    }
    LineFit lf = least_squares(x, y);
    ScalingFit fit;
    fit.law = ScalingLaw::LogInParam;
    fit.coeff0 = lf.intercept;
    fit.coeff1 = lf.slope;
    fit.rms_residual = lf.rms;
    window(samples, fit);
    return fit;
}

ScalingFit fit_period_power(const std::vector<PeriodSample>& samples) {
    if (samples.size() < 5) throw std::invalid_argument("fit_period_power: need >= 5 samples");
    for (const auto& s : samples)
        if (s.param <= 0.0 || s.period <= 0.0)
            throw std::invalid_argument("fit_period_power: samples must be positive");
    if (decades(samples) < 1.5)
        throw std::invalid_argument("fit_period_power: need >= 1.5 decades of parameter span");
    std::vector<double> x, y;
    for (const auto& s : samples) {
        x.push_back(std::log(s.param));
        y.push_back(std::log(s.period));
    }
    LineFit lf = least_squares(x, y);
    ScalingFit fit;
    fit.law = ScalingLaw::PowerLaw;
    fit.coeff0 = std::exp(lf.intercept);  // a2
    fit.coeff1 = -lf.slope;               // scaling exponent (positive)
    fit.rms_residual = lf.rms;
    window(samples, fit);
    return fit;
}

namespace {

/// Inner linear LS for the divergence laws at a fixed p_star; x-coordinate is
/// ln|p-p_star|; y is ln T (sqrt law) or T (log law).
LineFit divergence_ls(const std::vector<PeriodSample>& s, double p_star, bool log_y) {
    std::vector<double> x, y;
    for (const auto& q : s) {
        double d = std::abs(q.param - p_star);
        if (d <= 0.0) continue;
        x.push_back(std::log(d));
        y.push_back(log_y ? std::log(q.period) : q.period);
    }
    if (x.size() < 3) return LineFit{0.0, 0.0, std::numeric_limits<double>::infinity()};
    return least_squares(x, y);
}

/// Golden-section on p_star minimizing the inner LS residual (separable fit).
double fit_p_star(const std::vector<PeriodSample>& s, bool log_y) {
    // p_star must lie beyond the sample closest to divergence (largest T)
    double edge = s.front().param, far = s.front().param;
    double bigT = -1.0;
    for (const auto& q : s)
        if (q.period > bigT) {
            bigT = q.period;
            edge = q.param;
        }
    for (const auto& q : s)
        if (std::abs(q.param - edge) > std::abs(far - edge)) far = q.param;
    double dir = edge >= far ? +1.0 : -1.0;
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& q : s)
        if (q.param != edge) dmin = std::min(dmin, std::abs(q.param - edge));
    double lo = edge + dir * 1e-12 * (1.0 + std::abs(edge));
    double hi = edge + dir * 2.0 * dmin;
    auto obj = [&](double ps) { return divergence_ls(s, ps, log_y).rms; };
    if (dir < 0.0) std::swap(lo, hi);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = hi - gr * (hi - lo), c2 = lo + gr * (hi - lo);
    double f1 = obj(c1), f2 = obj(c2);
    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * (1.0 + std::abs(hi)); ++it) {
        if (f1 < f2) {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - gr * (hi - lo);
            f1 = obj(c1);
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + gr * (hi - lo);
            f2 = obj(c2);
        }
    }
    return 0.5 * (lo + hi);
}

void check_divergence_samples(const std::vector<PeriodSample>& s,
                              std::optional<double> p_star, ScalingFit& fit) {
    if (s.size() < 5) throw std::invalid_argument("divergence fit: need >= 5 samples");
    if (p_star) {
        bool below = true, above = true;
        for (const auto& q : s) {
            below = below && q.param < *p_star;
            above = above && q.param > *p_star;
        }
        if (!below && !above)
            throw std::invalid_argument("divergence fit: samples must approach p_star "
                                        "from one side");
    }
    // monotone period toward the divergence point; otherwise warn
    std::vector<PeriodSample> sorted = s;
    std::sort(sorted.begin(), sorted.end(),
              [](const PeriodSample& a, const PeriodSample& b) { return a.param < b.param; });
    bool inc = true, dec = true;
    for (size_t i = 1; i < sorted.size(); ++i) {
        inc = inc && sorted[i].period >= sorted[i - 1].period;
        dec = dec && sorted[i].period <= sorted[i - 1].period;
    }
    if (!inc && !dec) fit.warning = "periods not monotone in the parameter; "
                                    "samples may not be in the asymptotic regime";
}

}  // namespace

ScalingFit fit_snic_scaling(const std::vector<PeriodSample>& samples,
                            std::optional<double> p_star) {
    ScalingFit fit;
    fit.law = ScalingLaw::InverseSqrt;
    check_divergence_samples(samples, p_star, fit);
    double ps = p_star ? *p_star : fit_p_star(samples, true);
    LineFit lf = divergence_ls(samples, ps, true);
    fit.coeff0 = lf.intercept;
    fit.coeff1 = lf.slope;  // expected -1/2
    fit.p_star = ps;
    fit.p_star_fitted = !p_star.has_value();
    fit.rms_residual = lf.rms;
    window(samples, fit);
    return fit;
}

ScalingFit fit_heteroclinic_scaling(const std::vector<PeriodSample>& samples,
                                    std::optional<double> p_star,
                                    std::optional<double> lambda_plus) {
    ScalingFit fit;
    fit.law = ScalingLaw::LogDivergence;
    check_divergence_samples(samples, p_star, fit);
    double ps = p_star ? *p_star : fit_p_star(samples, false);
    LineFit lf = divergence_ls(samples, ps, false);
    // T = c + slope * ln(1/d) : the ln|d| regression slope is -slope
    fit.coeff0 = lf.intercept;
    fit.coeff1 = -lf.slope;
    fit.p_star = ps;
    fit.p_star_fitted = !p_star.has_value();
    fit.rms_residual = lf.rms;
    window(samples, fit);
    if (lambda_plus) {
        fit.theory_slope = 3.0 / *lambda_plus;
        fit.theory_discrepancy =
            std::abs(fit.coeff1 - fit.theory_slope) / fit.theory_slope;
    }
    return fit;
}

}  // namespace grnlab
