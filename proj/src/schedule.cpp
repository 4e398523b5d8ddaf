#include "grnlab/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace grnlab {

const char* schedule_kind_name(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Constant: return "constant";
        case ScheduleKind::HillRamp: return "hill_ramp";
        case ScheduleKind::GatedHillDrop: return "gated_hill_drop";
    }
    return "?";
}

ScheduleKind schedule_kind_from_name(const std::string& name) {
    for (ScheduleKind k :
         {ScheduleKind::Constant, ScheduleKind::HillRamp, ScheduleKind::GatedHillDrop})
        if (name == schedule_kind_name(k)) return k;
    throw std::invalid_argument("unknown schedule kind: " + name);
}

double schedule_eval(const Schedule& s, double t) {
    switch (s.kind) {
        case ScheduleKind::Constant: return s.value;
        case ScheduleKind::HillRamp: {
            if (t <= 0.0) return 0.0;
            double tp = std::pow(t, s.p), taup = std::pow(s.tau, s.p);
            return s.ghat * tp / (taup + tp);
        }
        case ScheduleKind::GatedHillDrop: {
            if (t <= s.t_switch) return s.baseline;
            double u = t - s.t_switch;
            double up = std::pow(u, s.p), taup = std::pow(s.tau, s.p);
            return s.baseline - up / (taup + up);
        }
    }
    return 0.0;
}

std::optional<double> schedule_discontinuity(const Schedule& s, double t0, double t1) {
    if (s.kind == ScheduleKind::GatedHillDrop && s.t_switch > t0 && s.t_switch < t1)
        return s.t_switch;
    return std::nullopt;
}

ScheduledSystem::ScheduledSystem(const ModelInstance& model, std::vector<Schedule> schedules)
    : model_(&model), schedules_(std::move(schedules)) {
    slots_.reserve(schedules_.size());
    for (const Schedule& s : schedules_) slots_.push_back(resolve_param(model.spec(), s.target));
    work_ = model.params();
}

bool ScheduledSystem::autonomous() const {
    return std::all_of(schedules_.begin(), schedules_.end(),
                       [](const Schedule& s) { return s.kind == ScheduleKind::Constant; });
}

ParamSet ScheduledSystem::params_at(double t) const {
    for (size_t k = 0; k < schedules_.size(); ++k)
        apply_param(model_->spec(), work_, slots_[k], schedule_eval(schedules_[k], t));
    return work_;
}

Vec ScheduledSystem::schedule_values(double t) const {
    Vec v(schedules_.size());
    for (size_t k = 0; k < schedules_.size(); ++k) v[k] = schedule_eval(schedules_[k], t);
    return v;
}

void ScheduledSystem::rhs(double t, const Vec& x, Vec& out) const {
    if (schedules_.empty()) {
        model_->rhs(x, out);
    } else {
        params_at(t);
        model_->rhs_with(work_, x, out);
    }
}

void ScheduledSystem::jacobian(double t, const Vec& x, Mat& out) const {
    if (schedules_.empty()) {
        model_->jacobian(x, out);
    } else {
        params_at(t);
        model_->jacobian_with(work_, x, out);
    }
}

std::vector<double> ScheduledSystem::discontinuities(double t0, double t1) const {
    std::vector<double> ts;
    for (const Schedule& s : schedules_)
        if (auto t = schedule_discontinuity(s, t0, t1)) ts.push_back(*t);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

}  // namespace grnlab
