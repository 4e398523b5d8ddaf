#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grnlab/equilibrium.hpp"
#include "grnlab/model.hpp"

#include <array>
#include <random>

using namespace grnlab;

namespace {

ModelSpec fig2_spec(double g1 = 0.2, double g2 = 0.05, double g3 = 0.05) {
    std::array<double, 1> r{g1};
    ModelSpec spec = make_symmetric_spec(Family::StandardRepressilator, r, 50.0, 0.0, 0.01,
                                         3.0, 1e-5);
    spec.params.g(1, 0) = g2;
    spec.params.g(2, 0) = g3;
    return spec;
}

ModelSpec or_spec(double g, double alpha = 9.0, double beta = 0.1, double d = 0.2) {
    std::array<double, 1> r{g};
    return make_symmetric_spec(Family::CrossRepressilatorOR, r, alpha, beta, d, 3.0);
}

Mat fd_jacobian(const ModelInstance& m, const Vec& x) {
    const int n = m.dim();
    Mat J(n, n);
    for (int j = 0; j < n; ++j) {
        double h = 1e-6 * (1.0 + std::abs(x[j]));
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        J.col(j) = (m.rhs(xp) - m.rhs(xm)) / (2.0 * h);
    }
    return J;
}

std::mt19937 rng(42);

Vec random_state(int n, double scale) {
    std::uniform_real_distribution<double> u(0.0, scale);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    return x;
}

ModelInstance random_family_instance(Family f) {
    std::uniform_real_distribution<double> u(0.1, 3.0);
    int nr = family_rate_count(f);
    std::vector<double> rates(nr);
    for (double& r : rates) r = u(rng);
    return build_model(make_symmetric_spec(f, rates, u(rng), u(rng), 0.1 + 0.2 * u(rng),
                                           1.0 + u(rng), 0.0, u(rng)));
}

}  // namespace

TEST_CASE("well-formed standard repressilator builds") {
    ModelInstance m = build_model(fig2_spec());
    CHECK(m.dim() == 3);
    Vec x = Vec::Zero(3);
    Vec f = m.rhs(x);
    // b=1e-5, Hill factors equal 1 at the origin
    CHECK(f[0] == doctest::Approx(1e-5 + 0.2));
    CHECK(f[1] == doctest::Approx(1e-5 + 0.05));
    CHECK(f[2] == doctest::Approx(1e-5 + 0.05));
}

TEST_CASE("inconsistent specs are rejected") {
    ModelSpec spec = fig2_spec();
    spec.n_genes = 4;
    CHECK_THROWS_AS(build_model(spec), std::invalid_argument);

    // FourGeneAND with only 3 rate entries per gene
    ModelSpec four = fig2_spec();
    four.family = Family::FourGeneAND;
    four.n_genes = 4;
    CHECK_THROWS_AS(build_model(four), std::invalid_argument);

    ModelSpec neg = fig2_spec();
    neg.params.d[1] = -0.1;
    CHECK_THROWS_AS(build_model(neg), std::invalid_argument);

    ModelSpec lowh = fig2_spec();
    lowh.params.h.setConstant(0.5);
    CHECK_THROWS_AS(build_model(lowh), std::invalid_argument);
}

TEST_CASE("saddle equilibrium of the reference bifurcation diagram") {
    ModelInstance m = build_model(fig2_spec());
    Vec xeq(3);
    xeq << 0.58469, 0.87298, 0.45578;
    CHECK(m.rhs(xeq).norm() < 1e-4);
}

TEST_CASE("symmetric OR equilibrium satisfies the scalar reduction") {
    ModelInstance m = build_model(or_spec(1.5));
    // bisection oracle on (1+a x^3)(1+b x^3) = g/(d x)
    auto f = [](double x) {
        return (1.0 + 9.0 * x * x * x) * (1.0 + 0.1 * x * x * x) * 0.2 * x - 1.5;
    };
    double lo = 1e-9, hi = 20.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    Vec x = Vec::Constant(3, 0.5 * (lo + hi));
    CHECK(m.rhs(x).norm() < 1e-10);
}

TEST_CASE("gate activation forms") {
    // OR with both inputs 0 -> full activation g
    std::array<GateInput, 2> in0{GateInput{0.0, 9.0, 3.0}, GateInput{0.0, 0.1, 3.0}};
    std::array<double, 1> g{1.7};
    CHECK(gate_activation(Gate::OR, in0, g) == doctest::Approx(1.7));

    // AND2 with A=0: (g1 + g3 b B^h)/(1 + b B^h), tends to g3 as B -> inf
    std::array<double, 3> r{0.5, 0.7, 0.9};
    std::array<GateInput, 2> inA{GateInput{0.0, 1.0, 3.0}, GateInput{2.0, 1.0, 3.0}};
    double v = gate_activation(Gate::AND2, inA, r);
    CHECK(v == doctest::Approx((0.5 + 0.9 * 8.0) / 9.0));
    std::array<GateInput, 2> inBig{GateInput{0.0, 1.0, 3.0}, GateInput{1e4, 1.0, 3.0}};
    CHECK(gate_activation(Gate::AND2, inBig, r) == doctest::Approx(0.9).epsilon(1e-6));

    // equal configuration rates: only the both-bound state is silent, so the
    // output is g (1+u+v)/((1+u)(1+v)), full activation only at the origin
    std::array<double, 3> re{1.3, 1.3, 1.3};
    for (double A : {0.0, 0.3, 2.0})
        for (double B : {0.1, 1.0, 7.0}) {
            double u = 2.0 * A * A * A, v = 0.5 * B * B;
            std::array<GateInput, 2> in{GateInput{A, 2.0, 3.0}, GateInput{B, 0.5, 2.0}};
            CHECK(gate_activation(Gate::AND2, in, re) ==
                  doctest::Approx(1.3 * (1.0 + u + v) / ((1.0 + u) * (1.0 + v))));
        }
    std::array<GateInput, 2> origin{GateInput{0.0, 2.0, 3.0}, GateInput{0.0, 0.5, 2.0}};
    CHECK(gate_activation(Gate::AND2, origin, re) == doctest::Approx(1.3));

    CHECK_THROWS_AS(gate_activation(Gate::AND3, in0, g), std::invalid_argument);
}

TEST_CASE("AND2 with g2=g3=0 collapses to the OR form with g=g1") {
    std::array<double, 3> and_rates{1.4, 0.0, 0.0};
    std::array<double, 1> or_rates{1.4};
    ModelInstance ma = build_model(
        make_symmetric_spec(Family::CrossRepressilatorAND, and_rates, 2.0, 0.3, 0.2, 3.0));
    ModelInstance mo =
        build_model(make_symmetric_spec(Family::CrossRepressilatorOR, or_rates, 2.0, 0.3, 0.2, 3.0));
    for (int k = 0; k < 50; ++k) {
        Vec x = random_state(3, 5.0);
        CHECK((ma.rhs(x) - mo.rhs(x)).lpNorm<Eigen::Infinity>() < 1e-14);
    }
}

TEST_CASE("OR rhs equals gate activation minus degradation") {
    ModelInstance m = build_model(or_spec(1.5));
    for (int k = 0; k < 50; ++k) {
        Vec x = random_state(3, 6.0);
        Vec f = m.rhs(x);
        for (int i = 0; i < 3; ++i) {
            std::array<GateInput, 2> in{GateInput{x[(i + 1) % 3], 9.0, 3.0},
                                        GateInput{x[(i + 2) % 3], 0.1, 3.0}};
            std::array<double, 1> g{1.5};
            CHECK(f[i] == doctest::Approx(gate_activation(Gate::OR, in, g) - 0.2 * x[i])
                              .epsilon(1e-12));
        }
    }
}

TEST_CASE("analytic Jacobian matches central differences across all families") {
    for (Family fam : {Family::StandardRepressilator, Family::CrossRepressilatorOR,
                       Family::CrossRepressilatorAND, Family::FourGeneAND,
                       Family::FiveGeneAND}) {
        ModelInstance m = random_family_instance(fam);
        for (int k = 0; k < 40; ++k) {
            Vec x = random_state(m.dim(), 4.0);
            Mat Ja = m.jacobian(x);
            Mat Jf = fd_jacobian(m, x);
            double scale = std::max(1.0, Ja.cwiseAbs().maxCoeff());
            CHECK((Ja - Jf).cwiseAbs().maxCoeff() / scale < 1e-6);
        }
    }
}

TEST_CASE("standard repressilator diagonal is -d everywhere") {
    ModelInstance m = build_model(fig2_spec());
    for (int k = 0; k < 20; ++k) {
        Mat J = m.jacobian(random_state(3, 3.0));
        for (int i = 0; i < 3; ++i) CHECK(J(i, i) == doctest::Approx(-0.01));
    }
}

TEST_CASE("cyclic equivariance of symmetric rhs") {
    for (Family fam : {Family::StandardRepressilator, Family::CrossRepressilatorOR,
                       Family::CrossRepressilatorAND, Family::FiveGeneAND}) {
        ModelInstance m = random_family_instance(fam);
        const int n = m.dim();
        for (int k = 0; k < 100; ++k) {
            Vec x = random_state(n, 5.0);
            Vec sx(n);
            for (int i = 0; i < n; ++i) sx[i] = x[(i + 1) % n];
            Vec f = m.rhs(x), sf = m.rhs(sx);
            for (int i = 0; i < n; ++i) CHECK(std::abs(sf[i] - f[(i + 1) % n]) < 1e-12);
        }
    }
}

TEST_CASE("circulant Jacobian at the symmetric OR equilibrium") {
    ModelInstance m = build_model(or_spec(1.5));
    Equilibrium eq = symmetric_equilibrium(m);
    Mat J = m.jacobian(eq.x);
    CHECK(J(0, 0) == doctest::Approx(J(1, 1)));
    CHECK(J(0, 1) == doctest::Approx(J(1, 2)));
    CHECK(J(0, 2) == doctest::Approx(J(2, 1)));
    CHECK(J(1, 0) == doctest::Approx(J(0, 2)));
}

TEST_CASE("non-negativity: rhs points inward on the boundary") {
    for (Family fam : {Family::StandardRepressilator, Family::CrossRepressilatorOR,
                       Family::CrossRepressilatorAND, Family::FourGeneAND,
                       Family::FiveGeneAND}) {
        ModelInstance m = random_family_instance(fam);
        for (int k = 0; k < 20; ++k) {
            Vec x = random_state(m.dim(), 5.0);
            for (int i = 0; i < m.dim(); ++i) {
                Vec xb = x;
                xb[i] = 0.0;
                CHECK(m.rhs(xb)[i] >= 0.0);
            }
        }
    }
}

TEST_CASE("parameter addressing") {
    ModelSpec spec = or_spec(1.5);
    ParamSet p = spec.params;
    apply_param(spec, p, resolve_param(spec, "g"), 2.0);
    CHECK(p.g(2, 0) == 2.0);
    apply_param(spec, p, resolve_param(spec, "alpha2"), 7.5);
    CHECK(p.alpha[1] == 7.5);
    CHECK(p.alpha[0] == 9.0);
    CHECK_THROWS_AS(resolve_param(spec, "gamma"), std::invalid_argument);
    CHECK_THROWS_AS(resolve_param(spec, "zeta"), std::invalid_argument);
    CHECK_THROWS_AS(resolve_param(spec, "alpha4"), std::invalid_argument);

    ModelSpec five = make_symmetric_spec(Family::FiveGeneAND, std::array<double, 3>{2.0, 0.35, 0.2},
                                         1.0, 1.0, 0.4, 3.0);
    ParamSet q = five.params;
    apply_param(five, q, resolve_param(five, "g1"), 2.5);
    for (int i = 0; i < 5; ++i) CHECK(q.g(i, 0) == 2.5);
    CHECK(q.g(0, 1) == 0.35);
}
