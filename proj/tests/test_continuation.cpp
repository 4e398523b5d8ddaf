#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grnlab/continuation.hpp"

#include <array>

using namespace grnlab;

namespace {

ModelInstance fig2_model() {
    std::array<double, 1> r{0.2};
    ModelSpec spec =
        make_symmetric_spec(Family::StandardRepressilator, r, 50.0, 0.0, 0.01, 3.0, 1e-5);
    spec.params.g(1, 0) = 0.05;
    spec.params.g(2, 0) = 0.05;
    return build_model(spec);
}

ModelInstance or_model(double g, double alpha = 9.0) {
    std::array<double, 1> r{g};
    return build_model(
        make_symmetric_spec(Family::CrossRepressilatorOR, r, alpha, 0.1, 0.2, 3.0));
}

ModelInstance decay_model() {
    std::array<double, 1> r{0.0};
    return build_model(
        make_symmetric_spec(Family::StandardRepressilator, r, 50.0, 0.0, 0.2, 3.0));
}

}  // namespace

TEST_CASE("standard repressilator g1 branch: single branch, no folds, Hopf pair") {
    ModelInstance m = fig2_model();
    Equilibrium seed = find_equilibrium(m, Vec::Constant(3, 0.5));
    ContinuationOptions down;
    down.direction = -1;
    Branch br = continue_equilibria(m, "g1", 1e-3, 30.0, seed.x, 0.2, down);
    CHECK(br.termination == "range_end");
    CHECK(br.param_min() < 2e-3);

    // continue the other way to cover the full range
    ContinuationOptions up;
    up.direction = +1;
    Branch br_up = continue_equilibria(m, "g1", 1e-3, 30.0, seed.x, 0.2, up);
    CHECK(br_up.param_max() > 29.0);

    std::vector<BifurcationPoint> bd = detect_bifurcations(m, br);
    std::vector<BifurcationPoint> bu = detect_bifurcations(m, br_up);
    for (const auto& b : bu) bd.push_back(b);
    int folds = 0;
    std::vector<double> hopfs;
    for (const auto& b : bd) {
        if (b.kind == BifKind::SaddleNode) ++folds;
        if (b.kind == BifKind::Hopf) hopfs.push_back(b.param);
    }
    CHECK(folds == 0);
    REQUIRE(hopfs.size() == 2);
    std::sort(hopfs.begin(), hopfs.end());
    CHECK(std::abs(hopfs[0] - 0.00764) / 0.00764 < 1e-3);
    CHECK(std::abs(hopfs[1] - 15.7919) / 15.7919 < 1e-3);
}

TEST_CASE("Hopf frequency of the repressilator ring equals d*sqrt(3)") {
    ModelInstance m = fig2_model();
    Equilibrium seed = find_equilibrium(m, Vec::Constant(3, 0.5));
    Branch br = continue_equilibria(m, "g1", 1e-3, 30.0, seed.x, 0.2);
    std::vector<BifurcationPoint> bd = detect_bifurcations(m, br);
    bool saw_hopf = false;
    for (const auto& b : bd) {
        if (b.kind != BifKind::Hopf) continue;
        saw_hopf = true;
        double im = 0.0;
        for (int i = 0; i < b.eigenvalues.size(); ++i)
            im = std::max(im, b.eigenvalues[i].imag());
        CHECK(std::abs(im - 0.01 * std::sqrt(3.0)) < 1e-6);
    }
    CHECK(saw_hopf);
}

TEST_CASE("OR-gate branch folds at the fold-on-cycle parameter") {
    ModelInstance m = or_model(2.0);
    // seed on an asymmetric stable node at g=2
    std::vector<Equilibrium> eqs = find_all_equilibria(m);
    const Equilibrium* node = nullptr;
    for (const auto& e : eqs)
        if (e.stability == Stability::Stable && (!node || e.x.maxCoeff() > node->x.maxCoeff()))
            node = &e;
    REQUIRE(node != nullptr);

    ContinuationOptions opt;
    opt.direction = -1;
    Branch br = continue_equilibria(m, "g", 1.2, 3.0, node->x, 2.0, opt);
    // pseudo-arclength rounds the fold and climbs back up the saddle sheet
    CHECK(br.param_min() < 1.52);

    std::vector<BifurcationPoint> bd = detect_bifurcations(m, br);
    REQUIRE(!bd.empty());
    bool found = false;
    for (const auto& b : bd)
        if (b.kind == BifKind::SaddleNode && std::abs(b.param - 1.51449) < 1e-3) found = true;
    CHECK(found);
}

TEST_CASE("locate_fold polishes the fold parameter") {
    ModelInstance m = or_model(2.0);
    std::vector<Equilibrium> eqs = find_all_equilibria(m);
    const Equilibrium* node = nullptr;
    for (const auto& e : eqs)
        if (e.stability == Stability::Stable && (!node || e.x.maxCoeff() > node->x.maxCoeff()))
            node = &e;
    REQUIRE(node != nullptr);
    BifurcationPoint fold = locate_fold(m, "g", node->x, 2.0);
    CHECK(std::abs(fold.param - 1.51449) < 2e-4);
    // one eigenvalue sits at zero
    double minabs = 1e9;
    for (int i = 0; i < fold.eigenvalues.size(); ++i)
        minabs = std::min(minabs, std::abs(fold.eigenvalues[i]));
    CHECK(minabs < 1e-5);
}

TEST_CASE("decay system branch carries no bifurcations") {
    ModelInstance m = decay_model();
    Branch br = continue_equilibria(m, "d", 0.05, 1.0, Vec::Zero(3), 0.5);
    CHECK(detect_bifurcations(m, br).empty());
}

TEST_CASE("branch points satisfy the defining system") {
    ModelInstance m = or_model(2.0);
    Equilibrium seed = symmetric_equilibrium(m);
    ContinuationOptions opt;
    opt.direction = -1;
    Branch br = continue_equilibria(m, "g", 0.2, 3.0, seed.x, 2.0, opt);
    for (const auto& p : br.points) {
        CHECK(p.residual < 1e-8 * (1.0 + p.x.lpNorm<Eigen::Infinity>()));
    }
    CHECK(br.points.size() > 10);
}

TEST_CASE("OR-gate Hopf point near g = 0.34 on the symmetric branch") {
    ModelInstance m = or_model(0.2);
    Equilibrium seed = symmetric_equilibrium(m);
    ContinuationOptions opt;
    opt.direction = +1;
    Branch br = continue_equilibria(m, "g", 0.05, 1.2, seed.x, 0.2, opt);
    std::vector<BifurcationPoint> bd = detect_bifurcations(m, br);
    REQUIRE(!bd.empty());
    bool hopf_ok = false;
    for (const auto& b : bd)
        if (b.kind == BifKind::Hopf && b.param > 0.3 && b.param < 0.45) hopf_ok = true;
    CHECK(hopf_ok);
}

TEST_CASE("shooting certifies a detected cycle") {
    ModelInstance m = or_model(1.5);
    Vec ic(3);
    ic << 1.2, 0.9, 0.3;
    CycleDetectOptions det;
    det.settle_time = 2000.0;
    CycleDetection d = detect_limit_cycle(m, ic, det);
    REQUIRE(d.found());
    ShootResult r = shoot_cycle(m, *d.cycle);
    REQUIRE(r.converged);
    CHECK(std::abs(r.period - d.cycle->period) / r.period < 1e-5);
    // one Floquet multiplier sits at +1, the rest inside the unit circle
    int near_one = 0;
    for (int i = 0; i < r.multipliers.size(); ++i) {
        if (std::abs(r.multipliers[i] - Complex(1.0, 0.0)) < 1e-6) ++near_one;
        else CHECK(std::abs(r.multipliers[i]) < 1.0);
    }
    CHECK(near_one == 1);
}

TEST_CASE("cycle continuation from the Hopf point grows the period toward the fold") {
    ModelInstance m = or_model(0.2);
    Equilibrium seed = symmetric_equilibrium(m);
    ContinuationOptions eopt;
    eopt.direction = +1;
    Branch eq = continue_equilibria(m, "g", 0.05, 1.2, seed.x, 0.2, eopt);
    std::vector<BifurcationPoint> bd = detect_bifurcations(m, eq);
    const BifurcationPoint* hopf = nullptr;
    for (const auto& b : bd)
        if (b.kind == BifKind::Hopf) hopf = &b;
    REQUIRE(hopf != nullptr);

    ContinuationOptions copt;
    copt.t_max_period = 2000.0;  // keep the unit test quick
    Branch cyc = continue_limit_cycle(m, "g", *hopf, 0.3, 1.6, copt);
    REQUIRE(cyc.points.size() > 5);
    CHECK(cyc.termination == "period_blowup");
    // period grows monotonically toward the tail and the branch is stable
    const auto& pts = cyc.points;
    CHECK(pts.back().period > 2000.0 * 0.9);
    CHECK(pts.back().param > 1.4);
    CHECK(pts.back().param < 1.52);
    for (const auto& p : pts) CHECK(p.stability == Stability::Stable);
    // residuals certified
    for (const auto& p : pts) CHECK(p.residual < 1e-7 * (1.0 + p.x.maxCoeff()));
}

TEST_CASE("cycle existence flips across the global bifurcation") {
    ModelInstance m = or_model(1.0);
    Vec ic(3);
    ic << 1.2, 0.9, 0.3;
    CycleExistence a = cycle_exists(m, "g", 1.50, ic, 3e4);
    CHECK(a.exists);
    CHECK(a.period > 100.0);
    CycleExistence b = cycle_exists(m, "g", 1.53, a.state, 3e4);
    CHECK(!b.exists);
    CHECK(b.outcome == "converged_to_equilibrium");
}
