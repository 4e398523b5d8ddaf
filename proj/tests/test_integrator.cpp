#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grnlab/integrate.hpp"

#include <array>
#include <cmath>

using namespace grnlab;

namespace {

ModelSpec decay_only(double d = 0.2) {
    // all g = 0, b = 0: pure decay dx/dt = -d x
    std::array<double, 1> r{0.0};
    return make_symmetric_spec(Family::StandardRepressilator, r, 50.0, 0.0, d, 3.0);
}

ModelInstance or_model(double g, double alpha = 9.0) {
    std::array<double, 1> r{g};
    return build_model(
        make_symmetric_spec(Family::CrossRepressilatorOR, r, alpha, 0.1, 0.2, 3.0));
}

}  // namespace

TEST_CASE("pure decay is integrated to 1e-6 relative accuracy") {
    ModelInstance m = build_model(decay_only());
    Vec ic = Vec::Constant(3, 1.0);
    Trajectory tr = integrate(m, {}, ic, 0.0, 10.0);
    double expect = std::exp(-2.0);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(tr.back()[i] - expect) / expect < 1e-6);
    // dense output agrees mid-span
    Vec mid = tr.eval(5.0);
    CHECK(std::abs(mid[0] - std::exp(-1.0)) < 1e-6);
}

TEST_CASE("schedule evaluation closed forms") {
    Schedule ramp{ScheduleKind::HillRamp, "g"};
    ramp.ghat = 1.7;
    ramp.p = 1.25;
    ramp.tau = 1000.0;
    CHECK(schedule_eval(ramp, 0.0) == 0.0);
    CHECK(schedule_eval(ramp, 1000.0) == doctest::Approx(0.85));

    Schedule drop{ScheduleKind::GatedHillDrop, "alpha"};
    drop.baseline = 9.0;
    drop.p = 1.0;
    drop.tau = 1000.0;
    drop.t_switch = 500.0;
    CHECK(schedule_eval(drop, 100.0) == 9.0);
    CHECK(schedule_eval(drop, 499.999) == 9.0);
    CHECK(schedule_eval(drop, 1500.0) == doctest::Approx(8.5));
    CHECK(schedule_eval(drop, 1e13) == doctest::Approx(8.0));
}

TEST_CASE("integration splits exactly at the schedule discontinuity") {
    ModelInstance m = or_model(1.5);
    Schedule drop{ScheduleKind::GatedHillDrop, "alpha"};
    drop.baseline = 9.0;
    drop.p = 1.0;
    drop.tau = 1000.0;
    drop.t_switch = 123.456;
    Trajectory tr = integrate(m, {drop}, Vec::Constant(3, 1.0), 0.0, 300.0);
    REQUIRE(tr.events.size() == 1);
    CHECK(tr.events[0].t == 123.456);
    CHECK(std::count(tr.times.begin(), tr.times.end(), 123.456) == 1);
}

TEST_CASE("sustained oscillation vs equilibrium exit across the global bifurcation") {
    Vec ic(3);
    ic << 1.2, 0.9, 0.3;

    CycleDetectOptions opt;
    opt.settle_time = 1500.0;
    CycleDetection osc = detect_limit_cycle(or_model(1.5), ic, opt);
    REQUIRE(osc.found());
    CHECK(osc.cycle->period > 100.0);
    // all three genes peak high and drop low over the cycle
    for (int i = 0; i < 3; ++i) {
        CHECK(osc.cycle->max_levels[i] > 1.0);
        CHECK(osc.cycle->min_levels[i] < 0.2);
    }

    CycleDetectOptions opt2;
    opt2.settle_time = 3000.0;
    opt2.max_time = 3e4;
    CycleDetection dead = detect_limit_cycle(or_model(1.6), ic, opt2);
    CHECK(!dead.found());
    CHECK(dead.reason == "amplitude_floor");
}

TEST_CASE("period grows toward the global bifurcation") {
    Vec ic(3);
    ic << 1.2, 0.9, 0.3;
    CycleDetectOptions opt;
    opt.settle_time = 2500.0;
    CycleDetection a = detect_limit_cycle(or_model(1.40), ic, opt);
    CycleDetection b = detect_limit_cycle(or_model(1.51), ic, opt);
    REQUIRE(a.found());
    REQUIRE(b.found());
    CHECK(b.cycle->period > a.cycle->period);
}

TEST_CASE("limit cycle period is phase-invariant along the orbit") {
    ModelInstance m = or_model(1.45);
    Vec ic(3);
    ic << 1.2, 0.9, 0.3;
    CycleDetectOptions opt;
    opt.settle_time = 2000.0;
    CycleDetection c1 = detect_limit_cycle(m, ic, opt);
    REQUIRE(c1.found());
    // restart from a quarter-period state on the same orbit
    size_t k = c1.cycle->samples.size() / 4;
    CycleDetection c2 = detect_limit_cycle(m, c1.cycle->samples[k], opt);
    REQUIRE(c2.found());
    CHECK(std::abs(c1.cycle->period - c2.cycle->period) / c1.cycle->period < 1e-4);
}

TEST_CASE("anchor returns to itself under the period-T flow") {
    ModelInstance m = or_model(1.5);
    Vec ic(3);
    ic << 1.2, 0.9, 0.3;
    CycleDetectOptions opt;
    opt.settle_time = 2000.0;
    opt.tol = Tolerances{1e-10, 1e-12};
    CycleDetection c = detect_limit_cycle(m, ic, opt);
    REQUIRE(c.found());
    Trajectory tr = integrate(m, {}, c.cycle->anchor, 0.0, c.cycle->period,
                              IntegrateOptions{Tolerances{1e-10, 1e-12}, false});
    CHECK((tr.back() - c.cycle->anchor).norm() < 1e-4 * c.cycle->anchor.norm());
}

TEST_CASE("cyclic symmetry: equal per-gene dwell intervals") {
    ModelInstance m = or_model(1.5);
    Vec ic(3);
    ic << 1.2, 0.9, 0.3;
    CycleDetectOptions opt;
    opt.settle_time = 2000.0;
    CycleDetection c = detect_limit_cycle(m, ic, opt);
    REQUIRE(c.found());
    const LimitCycle& cyc = *c.cycle;
    // time above 50% of each gene's own max, from the one-period samples
    std::array<double, 3> dwell{0.0, 0.0, 0.0};
    for (size_t k = 1; k < cyc.samples.size(); ++k) {
        double dt = cyc.sample_times[k] - cyc.sample_times[k - 1];
        for (int i = 0; i < 3; ++i) {
            double mid = 0.5 * (cyc.samples[k][i] + cyc.samples[k - 1][i]);
            if (mid > 0.5 * cyc.max_levels[i]) dwell[i] += dt;
        }
    }
    double dmax = *std::max_element(dwell.begin(), dwell.end());
    double dmin = *std::min_element(dwell.begin(), dwell.end());
    CHECK((dmax - dmin) / dmax < 0.01);
}

TEST_CASE("tolerance refinement changes the terminal state consistently") {
    ModelInstance m = or_model(1.45);
    Vec ic(3);
    ic << 1.2, 0.9, 0.3;
    IntegrateOptions coarse;
    coarse.tol = Tolerances{1e-8, 1e-10};
    coarse.keep_dense = false;
    IntegrateOptions fine;
    fine.tol = Tolerances{5e-9, 5e-11};
    fine.keep_dense = false;
    // long run, but not chaotic: halving tolerances moves the endpoint by
    // less than 10 * rtol in relative norm
    Trajectory a = integrate(m, {}, ic, 0.0, 1e4, coarse);
    Trajectory b = integrate(m, {}, ic, 0.0, 1e4, fine);
    CHECK((a.back() - b.back()).norm() / b.back().norm() < 10.0 * coarse.tol.rtol);
}

TEST_CASE("trajectories stay non-negative") {
    ModelInstance m = or_model(1.6);
    Vec ic(3);
    ic << 2.0, 1e-8, 0.0;
    Trajectory tr = integrate(m, {}, ic, 0.0, 500.0);
    for (const Vec& x : tr.states) CHECK(x.minCoeff() >= 0.0);
}

TEST_CASE("integration rejects bad inputs") {
    ModelInstance m = or_model(1.5);
    Vec ic = Vec::Constant(3, 1.0);
    CHECK_THROWS_AS(integrate(m, {}, ic, 1.0, 0.5), std::invalid_argument);
    Vec neg(3);
    neg << -0.1, 0.5, 0.5;
    CHECK_THROWS_AS(integrate(m, {}, neg, 0.0, 1.0), std::invalid_argument);
    IntegrateOptions bad;
    bad.tol.rtol = 0.0;
    CHECK_THROWS_AS(integrate(m, {}, ic, 0.0, 1.0, bad), std::invalid_argument);
}
