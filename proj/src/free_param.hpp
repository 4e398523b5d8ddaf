#pragma once

// Internal: a model with one writable parameter and a reusable ParamSet, plus
// the bifurcation test functions shared by the continuation translation units.

#include "grnlab/continuation.hpp"

#include <Eigen/LU>

#include <cmath>
#include <optional>

namespace grnlab::detail {

class FreeParamModel {
  public:
    FreeParamModel(const ModelInstance& model, const std::string& name)
        : model_(&model), addr_(resolve_param(model.spec(), name)), work_(model.params()) {}

    const ModelInstance& model() const { return *model_; }
    int dim() const { return model_->dim(); }

    void rhs(const Vec& x, double p, Vec& out) const {
        apply_param(model_->spec(), work_, addr_, p);
        model_->rhs_with(work_, x, out);
    }
    void jac(const Vec& x, double p, Mat& out) const {
        apply_param(model_->spec(), work_, addr_, p);
        model_->jacobian_with(work_, x, out);
    }
    /// dF/dp by central differences.
    void dfdp(const Vec& x, double p, Vec& out) const {
        double dp = 1e-7 * (1.0 + std::abs(p));
        Vec hi(dim()), lo(dim());
        rhs(x, p + dp, hi);
        rhs(x, p - dp, lo);
        out = (hi - lo) / (2.0 * dp);
    }
    ParamSet params_at(double p) const {
        apply_param(model_->spec(), work_, addr_, p);
        return work_;
    }

    /// Fixed-parameter Newton (damped with fallback halving).
    bool newton(Vec& x, double p, double tol, int iters = 30) const {
        const int n = dim();
        Vec F(n), xs(n), Fs(n);
        Mat J(n, n);
        rhs(x, p, F);
        double fn = F.lpNorm<Eigen::Infinity>();
        for (int it = 0; it < iters; ++it) {
            if (fn < tol * (1.0 + x.lpNorm<Eigen::Infinity>())) return true;
            jac(x, p, J);
            Vec dx = Eigen::PartialPivLU<Mat>(J).solve(-F);
            if (!dx.allFinite()) return false;
            double s = 1.0;
            bool moved = false;
            for (int bt = 0; bt < 25; ++bt) {
                xs = x + s * dx;
                rhs(xs, p, Fs);
                double fns = Fs.lpNorm<Eigen::Infinity>();
                if (std::isfinite(fns) && fns < fn) {
                    x = xs;
                    F = Fs;
                    fn = fns;
                    moved = true;
                    break;
                }
                s *= 0.5;
            }
            if (!moved) return fn < tol * (1.0 + x.lpNorm<Eigen::Infinity>());
        }
        return fn < tol * (1.0 + x.lpNorm<Eigen::Infinity>());
    }

  private:
    const ModelInstance* model_;
    ParamAddress addr_;
    mutable ParamSet work_;
};

inline double fold_test(const CVec& ev) {
    Complex det(1.0, 0.0);
    for (int i = 0; i < ev.size(); ++i) det *= ev[i];
    return det.real();
}

/// Product of the real parts of the complex-conjugate pairs (guarded);
/// nullopt when no pair is present.
inline std::optional<double> hopf_test(const CVec& ev, double im_guard) {
    double prod = 1.0;
    int pairs = 0;
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i].imag() > im_guard) {
            prod *= ev[i].real();
            ++pairs;
        }
    }
    if (pairs == 0) return std::nullopt;
    return prod;
}

}  // namespace grnlab::detail
