#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grnlab/equilibrium.hpp"
#include "grnlab/integrate.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <random>

using namespace grnlab;

namespace {

ModelSpec fig2_spec() {
    std::array<double, 1> r{0.2};
    ModelSpec spec =
        make_symmetric_spec(Family::StandardRepressilator, r, 50.0, 0.0, 0.01, 3.0, 1e-5);
    spec.params.g(1, 0) = 0.05;
    spec.params.g(2, 0) = 0.05;
    return spec;
}

ModelInstance or_model(double g, double alpha = 9.0, double beta = 0.1) {
    std::array<double, 1> r{g};
    return build_model(
        make_symmetric_spec(Family::CrossRepressilatorOR, r, alpha, beta, 0.2, 3.0));
}

std::mt19937 rng(7);

}  // namespace

TEST_CASE("reference saddle equilibrium to five decimals") {
    ModelInstance m = build_model(fig2_spec());
    Vec guess(3);
    guess << 0.6, 0.9, 0.5;
    Equilibrium eq = find_equilibrium(m, guess);
    CHECK(eq.x[0] == doctest::Approx(0.58469).epsilon(1e-5));
    CHECK(eq.x[1] == doctest::Approx(0.87298).epsilon(1e-5));
    CHECK(eq.x[2] == doctest::Approx(0.45578).epsilon(1e-5));
    CHECK(eq.stability == Stability::Saddle);
    CHECK(eq.residual < 1e-10 * (1.0 + eq.x.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("decay-only model converges to the stable origin from any guess") {
    std::array<double, 1> r{0.0};
    ModelInstance m =
        build_model(make_symmetric_spec(Family::StandardRepressilator, r, 50.0, 0.0, 0.3, 3.0));
    for (const auto& g0 : {0.01, 1.0, 17.0}) {
        Equilibrium eq = find_equilibrium(m, Vec::Constant(3, g0));
        CHECK(eq.x.norm() < 1e-10);
        CHECK(eq.stability == Stability::Stable);
    }
}

TEST_CASE("asymmetric OR equilibrium near an axis is stable with one gene high") {
    ModelInstance m = or_model(2.0);
    Vec guess(3);
    guess << 10.0, 0.1, 0.01;
    Equilibrium eq = find_equilibrium(m, guess);
    CHECK(eq.stability == Stability::Stable);
    CHECK(eq.x[0] > 5.0 * eq.x[1]);
    CHECK(eq.x[0] > 5.0 * eq.x[2]);
}

TEST_CASE("find_equilibrium is idempotent on a converged root") {
    ModelInstance m = build_model(fig2_spec());
    Vec guess(3);
    guess << 0.6, 0.9, 0.5;
    Equilibrium eq = find_equilibrium(m, guess);
    Equilibrium eq2 = find_equilibrium(m, eq.x);
    CHECK((eq.x - eq2.x).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("multistart finds the full equilibrium set past the global bifurcation") {
    ModelInstance m = or_model(2.0);
    std::vector<Equilibrium> eqs = find_all_equilibria(m);
    CHECK(eqs.size() == 7);
    int stable = 0, saddle = 0;
    for (const auto& e : eqs) {
        if (e.stability == Stability::Stable) ++stable;
        if (e.stability == Stability::Saddle) ++saddle;
    }
    CHECK(stable == 3);
    CHECK(saddle == 4);  // three asymmetric saddles plus the symmetric one
}

TEST_CASE("symmetric equilibrium: OR gate closed forms") {
    // alpha = beta = 0 reduces to x = g/d exactly
    std::array<double, 1> r{1.5};
    ModelInstance m0 =
        build_model(make_symmetric_spec(Family::CrossRepressilatorOR, r, 0.0, 0.0, 0.2, 3.0));
    Equilibrium e0 = symmetric_equilibrium(m0);
    CHECK(e0.x[0] == doctest::Approx(7.5).epsilon(1e-12));

    ModelInstance m = or_model(1.5);
    Equilibrium eq = symmetric_equilibrium(m);
    CHECK(eq.residual < 1e-12);
    // scalar-reduction root agrees with the full Newton solve
    Equilibrium eqn = find_equilibrium(m, eq.x + Vec::Constant(3, 1e-3));
    CHECK((eq.x - eqn.x).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("standard repressilator symmetric equilibrium cross-check") {
    std::array<double, 1> r{0.05};
    ModelInstance m =
        build_model(make_symmetric_spec(Family::StandardRepressilator, r, 50.0, 0.0, 0.01, 3.0, 1e-5));
    Equilibrium eq = symmetric_equilibrium(m);
    Equilibrium eqn = find_equilibrium(m, Vec::Constant(3, eq.x[0] * 1.01));
    CHECK((eq.x - eqn.x).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("circulant eigenvalue closed form") {
    CirculantEigs a = circulant_eigenvalues(-1.0, 0.0, 0.0);
    CHECK(a.lambda1 == -1.0);
    CHECK(a.lambda23 == Complex(-1.0, 0.0));

    CirculantEigs b = circulant_eigenvalues(0.0, 1.0, 0.0);
    CHECK(b.lambda1 == 1.0);
    CHECK(b.lambda23.real() == doctest::Approx(-0.5));
    CHECK(b.lambda23.imag() == doctest::Approx(std::sqrt(3.0) / 2.0));

    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 50; ++k) {
        double p = u(rng), q = u(rng), s = u(rng);
        Mat M(3, 3);
        M << p, q, s, s, p, q, q, s, p;
        CVec ev = eigenvalues(M);
        CirculantEigs ce = circulant_eigenvalues(p, q, s);
        std::vector<Complex> expect{Complex(ce.lambda1, 0.0), ce.lambda23,
                                    std::conj(ce.lambda23)};
        for (Complex e : expect) {
            double best = 1e9;
            for (int i = 0; i < 3; ++i) best = std::min(best, std::abs(ev[i] - e));
            CHECK(best < 1e-10);
        }
    }
}

TEST_CASE("characteristic-polynomial eigensolver on known spectra") {
    CVec id = eigenvalues(Mat::Identity(3, 3));
    for (int i = 0; i < 3; ++i) CHECK(std::abs(id[i] - Complex(1.0, 0.0)) < 1e-8);

    // companion matrix of z^3 - 1: cube roots of unity
    Mat C = Mat::Zero(3, 3);
    C(0, 2) = 1.0;
    C(1, 0) = 1.0;
    C(2, 1) = 1.0;
    CVec ev = eigenvalues(C);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(std::abs(ev[i]) - 1.0) < 1e-10);
    bool has_one = false;
    for (int i = 0; i < 3; ++i)
        if (std::abs(ev[i] - Complex(1.0, 0.0)) < 1e-10) has_one = true;
    CHECK(has_one);

    CHECK_THROWS_AS(eigenvalues(Mat::Identity(6, 6)), std::invalid_argument);
}

TEST_CASE("eigensolver agrees with a QR-based oracle on random matrices") {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int n = 2; n <= 5; ++n) {
        for (int k = 0; k < 30; ++k) {
            Mat M(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) M(i, j) = u(rng);
            CVec mine = eigenvalues(M);
            Eigen::EigenSolver<Mat> es(M);
            for (int i = 0; i < n; ++i) {
                double best = 1e9;
                for (int j = 0; j < n; ++j)
                    best = std::min(best, std::abs(mine[j] - es.eigenvalues()[i]));
                CHECK(best < 1e-7 * std::max(1.0, M.norm()));
            }
        }
    }
}

TEST_CASE("oscillation direction from the circulant pair") {
    CHECK(oscillation_direction(or_model(1.5, 9.0, 0.1)) == SpinDirection::Clockwise);
    CHECK(oscillation_direction(or_model(1.5, 0.1, 9.0)) == SpinDirection::Anticlockwise);
    CHECK_THROWS_AS(oscillation_direction(or_model(1.5, 1.0, 1.0)), SolveError);
}

TEST_CASE("oscillation direction matches the simulated peak order") {
    // clockwise (alpha-dominated): after gene i peaks, gene i+1 peaks next
    ModelInstance m = or_model(1.5, 9.0, 0.1);
    Vec ic(3);
    ic << 1.2, 0.9, 0.3;
    CycleDetectOptions opt;
    opt.settle_time = 2000.0;
    CycleDetection det = detect_limit_cycle(m, ic, opt);
    REQUIRE(det.found());
    const LimitCycle& cyc = *det.cycle;
    std::array<double, 3> peak_t{};
    for (int i = 0; i < 3; ++i) {
        double best = -1.0;
        for (size_t k = 0; k < cyc.samples.size(); ++k)
            if (cyc.samples[k][i] > best) {
                best = cyc.samples[k][i];
                peak_t[i] = cyc.sample_times[k];
            }
    }
    REQUIRE(oscillation_direction(m) == SpinDirection::Clockwise);
    double t12 = std::fmod(peak_t[1] - peak_t[0] + cyc.period, cyc.period);
    double t13 = std::fmod(peak_t[2] - peak_t[0] + cyc.period, cyc.period);
    CHECK(t12 < t13);

    // reversed constants reverse the order
    ModelInstance mr = or_model(1.5, 0.1, 9.0);
    REQUIRE(oscillation_direction(mr) == SpinDirection::Anticlockwise);
    CycleDetection detr = detect_limit_cycle(mr, ic, opt);
    REQUIRE(detr.found());
    std::array<double, 3> rpeak{};
    for (int i = 0; i < 3; ++i) {
        double best = -1.0;
        for (size_t k = 0; k < detr.cycle->samples.size(); ++k)
            if (detr.cycle->samples[k][i] > best) {
                best = detr.cycle->samples[k][i];
                rpeak[i] = detr.cycle->sample_times[k];
            }
    }
    double r12 = std::fmod(rpeak[1] - rpeak[0] + detr.cycle->period, detr.cycle->period);
    double r13 = std::fmod(rpeak[2] - rpeak[0] + detr.cycle->period, detr.cycle->period);
    CHECK(r13 < r12);
}

TEST_CASE("lambda1 is negative along the symmetric branch") {
    for (double g : {0.1, 0.3, 0.6, 1.0, 1.5, 2.5, 4.0}) {
        Equilibrium eq = symmetric_equilibrium(or_model(g));
        double lam1 = -1e9;
        for (int i = 0; i < 3; ++i)
            if (std::abs(eq.eigenvalues[i].imag()) < 1e-14)
                lam1 = std::max(lam1, eq.eigenvalues[i].real());
        CHECK(lam1 < 0.0);
    }
    std::array<double, 1> r{0.05};
    for (double g : {0.02, 0.05, 0.2, 1.0}) {
        ModelSpec spec =
            make_symmetric_spec(Family::StandardRepressilator, r, 50.0, 0.0, 0.01, 3.0, 1e-5);
        spec.params.g.setConstant(g);
        Equilibrium eq = symmetric_equilibrium(build_model(spec));
        CHECK(eq.eigenvalues[0].real() < 0.0);  // sorted: most negative first
    }
}
