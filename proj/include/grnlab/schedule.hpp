#pragma once

// Time-dependent parameter laws for the differentiation scenarios: a
// saturating Hill ramp from zero and a gated drop that switches on at t0 and
// decays the target by one unit.  schedule_eval is exact and total on t >= 0.

#include "grnlab/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace grnlab {

enum class ScheduleKind { Constant, HillRamp, GatedHillDrop };

const char* schedule_kind_name(ScheduleKind k);
ScheduleKind schedule_kind_from_name(const std::string& name);

struct Schedule {
    ScheduleKind kind = ScheduleKind::Constant;
    std::string target;      ///< parameter name, resolved against the model family
    double value = 0.0;      ///< Constant level
    double ghat = 0.0;       ///< HillRamp saturation level
    double baseline = 0.0;   ///< GatedHillDrop starting level
    double p = 1.0;          ///< shape exponent
    double tau = 1.0;        ///< time scale
    double t_switch = 0.0;   ///< GatedHillDrop switch-on time
};

/// HillRamp:      ghat * t^p / (tau^p + t^p)
/// GatedHillDrop: baseline - H(t - t_switch) * (t-t_switch)^p / (tau^p + (t-t_switch)^p)
double schedule_eval(const Schedule& s, double t);

/// The schedule's discontinuity time, if it has one inside (t0, t1).
std::optional<double> schedule_discontinuity(const Schedule& s, double t0, double t1);

/// A model plus resolved schedules; evaluates the frozen-parameter vector
/// field at the schedule values for time t.  Copyable; each worker owns one.
class ScheduledSystem {
  public:
    ScheduledSystem(const ModelInstance& model, std::vector<Schedule> schedules);
    explicit ScheduledSystem(const ModelInstance& model)
        : ScheduledSystem(model, {}) {}

    int dim() const { return model_->dim(); }
    const ModelInstance& model() const { return *model_; }
    const std::vector<Schedule>& schedules() const { return schedules_; }
    bool autonomous() const;

    void rhs(double t, const Vec& x, Vec& out) const;
    void jacobian(double t, const Vec& x, Mat& out) const;
    /// Parameters with schedule values applied at time t.
    ParamSet params_at(double t) const;
    /// Schedule values at time t, in schedule order.
    Vec schedule_values(double t) const;

    std::vector<double> discontinuities(double t0, double t1) const;

  private:
    const ModelInstance* model_;
    std::vector<Schedule> schedules_;
    std::vector<ParamAddress> slots_;
    // reused per evaluation; copy the system per worker rather than sharing one
    mutable ParamSet work_;
};

}  // namespace grnlab
