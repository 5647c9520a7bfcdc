#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "capremu/control_laws.hpp"
#include "oracles.hpp"

using namespace capremu;

namespace {

const ModelParams P = ModelParams::french_calibration();

double xt(double xc) { return std::min(xc, P.x_inf); }

}  // namespace

// ---------------------------------------------------------------------------
// Producer Hamiltonian and recommended effort

TEST(RecommendedEffort, Examples) {
    EXPECT_NEAR(recommended_effort(P, 90, P.kappa1), 0.0, 1e-15);
    EXPECT_NEAR(recommended_effort(P, 90, P.kappa1 + 9 * P.kappa2), 0.1, 1e-12);
    EXPECT_EQ(recommended_effort(P, 90, 1e12), P.alpha_max);
    EXPECT_EQ(recommended_effort(P, 90, -1e12), P.alpha_min);
    EXPECT_THROW(recommended_effort(P, 0.0, 1.0), DomainError);
    EXPECT_THROW(recommended_effort(P, 1e-7, 1.0), DomainError);
}

TEST(RecommendedEffort, MonotoneAndClippedOutsideAnInterval) {
    for (double xc : {20.0, 90.0, 205.0, 250.0}) {
        double prev = -10;
        for (double z = -3e5; z <= 3e5; z += 500) {
            const double a = recommended_effort(P, xc, z);
            EXPECT_GE(a, prev);
            prev = a;
        }
        EXPECT_EQ(recommended_effort(P, xc, -3e5), P.alpha_min);
        EXPECT_EQ(recommended_effort(P, xc, 3e5), P.alpha_max);
    }
}

TEST(HamiltonianH, ZeroSensitivity) {
    const State x{90, 60};
    EXPECT_NEAR(hamiltonian_h(P, x, {0, 0}, 0.0), spot_flow(P, x) - producer_cost(P, x, 0.0), 1e-9);
    // α̂ = −κ₁/(xᶜκ₂) is inside the bounds, so H gains κ₁²/(2κ₂).
    EXPECT_NEAR(hamiltonian_H(P, x, {0, 0}),
                spot_flow(P, x) - producer_base_cost(P, x) + P.kappa1 * P.kappa1 / (2 * P.kappa2), 1e-8);
    const auto scan = oracle::alpha_scan(P, x, {0, 0});
    EXPECT_NEAR(hamiltonian_H(P, x, {0, 0}), scan.value,
                0.5 * P.kappa2 * 90 * 90 * scan.step * scan.step + 1e-8);
}

TEST(HamiltonianH, ConcaveInEffort) {
    const double h = 0.01;
    for (const State x : oracle::sample_states(50, 11)) {
        const Vec2 z{1000.0, -20.0};
        const double d2 = hamiltonian_h(P, x, z, 0.5 + h) - 2 * hamiltonian_h(P, x, z, 0.5) +
                          hamiltonian_h(P, x, z, 0.5 - h);
        EXPECT_NEAR(d2, -P.kappa2 * xt(x.c) * xt(x.c) * h * h, 1e-6 * std::abs(d2) + 1e-6);
        EXPECT_LT(d2, 0.0);
    }
}

TEST(HamiltonianH, MatchesAlphaGridOnLattice) {
    // 20 × 20 × 20 lattice of (xᶜ, xᴰ, zᶜ), 2001-point α grid; zᴰ varies with
    // the lattice index so it is exercised too.
    const int n = 20, grid_points = 2001;
    for (int i = 0; i < n; ++i) {
        const double xc = 20 + i * 12.0;  // crosses x_inf
        for (int j = 0; j < n; ++j) {
            const double xd = 30 + j * 4.0;
            for (int k = 0; k < n; ++k) {
                const Vec2 z{-2e5 + k * 2e4, -500.0 + 50.0 * j};
                const State x{xc, xd};
                const auto scan = oracle::alpha_scan(P, x, z, grid_points);
                const double bound = 0.5 * P.kappa2 * xt(xc) * xt(xc) * scan.step * scan.step;
                const double H = hamiltonian_H(P, x, z);
                EXPECT_GE(H, scan.value - 1e-7 * std::abs(H) - 1e-6);
                EXPECT_LE(H - scan.value, bound + 1e-7 * std::abs(H) + 1e-6);
                EXPECT_NEAR(recommended_effort(P, xc, z.c), scan.arg, scan.step);
            }
        }
    }
}

TEST(HamiltonianH, DominatesAnyEffort) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> za(-1e5, 1e5), al(-3, 3);
    for (const State x : oracle::sample_states(100, 13)) {
        const Vec2 z{za(rng), za(rng) / 100};
        EXPECT_GE(hamiltonian_H(P, x, z), hamiltonian_h(P, x, z, 0.0));
        EXPECT_GE(hamiltonian_H(P, x, z), hamiltonian_h(P, x, z, al(rng)));
    }
}

// ---------------------------------------------------------------------------
// Consumer control ẑ and Hamiltonian Ḡ

TEST(OptimalZ, Examples) {
    const Vec2 z0 = optimal_z(P, State{90, 60}, Vec2{0, 0});
    EXPECT_EQ(z0.c, 0.0);
    EXPECT_EQ(z0.d, 0.0);
    const Vec2 zd = optimal_z(P, State{90, 60}, Vec2{0, 1});
    EXPECT_NEAR(zd.d, 0.8094e-5 / (0.852e-4 + 0.8094e-5), 1e-15);
    EXPECT_NEAR(zd.d, 0.08676, 5e-6);

    ModelParams risk_neutral_agent = P;
    risk_neutral_agent.eta_a = 0.0;
    for (const Vec2 p : {Vec2{1000, 3}, Vec2{-4e4, 20}, Vec2{2e5, -7}}) {
        const Vec2 z = optimal_z(risk_neutral_agent, State{90, 60}, p);
        EXPECT_DOUBLE_EQ(z.c, p.c);
        EXPECT_DOUBLE_EQ(z.d, p.d);
    }
}

TEST(OptimalZ, InteriorClosedFormWhenNoClippingBinds) {
    for (const State x : oracle::sample_states(100, 17, 50, 200)) {
        const double pc = 2000.0;  // effort stays well inside the bounds
        const Vec2 z = optimal_z(P, x, {pc, 0});
        EXPECT_NEAR(z.c, optimal_zc_interior(P, x, pc), 1e-9 * std::abs(z.c));
        const double a = recommended_effort(P, x.c, z.c);
        EXPECT_GT(a, P.alpha_min);
        EXPECT_LT(a, P.alpha_max);
    }
}

TEST(OptimalZ, StationaryPointOfGWhereUnclipped) {
    const Sym2 hess{-3.0, 0.0, 2.0};
    for (const State x : oracle::sample_states(100, 19, 50, 200)) {
        const Vec2 p{1500.0, 40.0};
        const Vec2 z = optimal_z(P, x, p);
        const double h = 1.0;  // ḡ is quadratic in z here, so central differences are exact
        const double gc = (consumer_g(P, x, p, hess, {z.c + h, z.d}) -
                           consumer_g(P, x, p, hess, {z.c - h, z.d})) / (2 * h);
        const double gd = (consumer_g(P, x, p, hess, {z.c, z.d + h}) -
                           consumer_g(P, x, p, hess, {z.c, z.d - h})) / (2 * h);
        EXPECT_LE(std::abs(gc), 1e-6);
        EXPECT_LE(std::abs(gd), 1e-6);
    }
}

TEST(ConsumerG, ZeroGradientClosedForm) {
    for (const State x : oracle::sample_states(50, 23, 50, 200)) {
        const double expect = consumer_flow(P, x) - producer_base_cost(P, x) +
                              P.kappa1 * P.kappa1 / (2 * P.kappa2);
        EXPECT_NEAR(consumer_hamiltonian_G(P, x, {0, 0}, {0, 0, 0}), expect, 1e-9 * std::abs(expect));
    }
}

TEST(ConsumerG, MatchesTwoDimensionalZScan) {
    // The module's primary oracle: sup over a z lattice of ḡ built from the
    // model primitives, with the agent's response found by an α scan.
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> upc(-3e5, 3e5), upd(-4e4, 4e4), uh(-50, 50);
    int states = 0, clipped_low = 0, clipped_high = 0, interior = 0;
    for (const State x : oracle::sample_states(400, 31)) {
        const Vec2 p{upc(rng), upd(rng)};
        const Sym2 hess{uh(rng), 0.0, uh(rng)};
        const double G = consumer_hamiltonian_G(P, x, p, hess);
        const Vec2 z = optimal_z(P, x, p);
        EXPECT_NEAR(consumer_g(P, x, p, hess, z), G, 1e-12 * std::abs(G));

        const auto scan = oracle::z_scan(P, x, p, hess, {4e5, 5e4});
        // Lattice error: the drop of ḡ one final lattice spacing away from ẑ
        // (O(step²) at a smooth maximum, O(step) at an effort-clipping kink).
        double drop = 0.0;
        for (const Vec2 dz : {Vec2{scan.step.c, 0}, Vec2{-scan.step.c, 0}, Vec2{0, scan.step.d},
                              Vec2{0, -scan.step.d}})
            drop = std::max(drop, G - consumer_g(P, x, p, hess, {z.c + dz.c, z.d + dz.d}));
        // The oracle's agent response is only as sharp as h can be resolved:
        // δα ≈ √(2ε|h|/(κ₂x̲²)) in extended precision. ḡ is first order in δα
        // with slope at most xᶜ|pᶜ − zᶜ| + κ₂x̲²|α| + κ₁x̲.
        const double h_mag = std::abs(hamiltonian_H(P, x, scan.arg)) + 1.0;
        const double d_alpha = std::sqrt(2 * 4 * std::numeric_limits<long double>::epsilon() * h_mag /
                                         (P.kappa2 * xt(x.c) * xt(x.c))) + 1e-11;
        const double alpha_err = d_alpha * (x.c * std::abs(p.c - scan.arg.c) +
                                            P.kappa2 * xt(x.c) * xt(x.c) * 3 + P.kappa1 * xt(x.c));
        const double tol = alpha_err + 1e-10 * std::abs(G);
        EXPECT_GE(scan.value, G - drop - tol) << "x=(" << x.c << "," << x.d << ") p=(" << p.c << "," << p.d << ")";
        EXPECT_LE(scan.value, G + tol) << "diff=" << scan.value - G << " tol=" << tol << " zhat=(" << z.c << "," << z.d << ") scan=(" << scan.arg.c << "," << scan.arg.d << ") x=(" << x.c << "," << x.d << ") p=(" << p.c << "," << p.d << ")";
        EXPECT_NEAR(z.d, scan.arg.d, 2 * scan.step.d + 1e-6 * std::abs(z.d));
        const double a = recommended_effort(P, x.c, z.c);
        if (a == P.alpha_min) ++clipped_low;
        else if (a == P.alpha_max) ++clipped_high;
        else ++interior;
        ++states;
    }
    EXPECT_EQ(states, 400);
    // All three effort regimes were exercised.
    EXPECT_GT(clipped_low, 20);
    EXPECT_GT(clipped_high, 20);
    EXPECT_GT(interior, 20);
}

TEST(ConsumerG, DominatesRandomControls) {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> uz(-2e5, 2e5), uzd(-1e3, 1e3);
    const State x{90, 60};
    const Vec2 p{3000, 200};
    const Sym2 hess{-1, 0, 1};
    const double G = consumer_hamiltonian_G(P, x, p, hess);
    for (int i = 0; i < 100; ++i)
        EXPECT_GE(G, consumer_g(P, x, p, hess, {uz(rng), uzd(rng)}));
}

TEST(ConsumerG, DemandPartIsCompletedSquare) {
    // zᴰ part of Ḡ minus the −(η_P/2)(σᴰxᴰ)²p² term equals ½ρ₂p².
    for (const State x : oracle::sample_states(50, 41)) {
        for (double pd : {-300.0, 17.0, 900.0}) {
            const double vd = std::pow(P.sigma_d * x.d, 2);
            const double zd = optimal_z(P, x, {0, pd}).d;
            const double part = -0.5 * (P.eta_a + P.eta_p) * zd * zd * vd + P.eta_p * zd * vd * pd;
            const double rho2 = approx_coefficients(P, x).rho.d;
            EXPECT_NEAR(rho2, -P.eta_a * P.eta_p * vd / (P.eta_a + P.eta_p), 1e-15);
            EXPECT_NEAR(part - 0.5 * P.eta_p * vd * pd * pd, 0.5 * rho2 * pd * pd,
                        1e-9 * std::abs(P.eta_p * vd * pd * pd));
        }
    }
}

// ---------------------------------------------------------------------------
// Approximating PDE

TEST(ApproxCoefficients, Examples) {
    const State x{90, 60};
    EXPECT_NEAR(approx_coefficients(P, x).f, P.a * 90 + (P.b - P.theta) * 60, 1e-6);
    for (const State s : oracle::sample_states(100, 43)) EXPECT_LT(approx_coefficients(P, s).rho.d, 0.0);
}

TEST(ApproxCoefficients, Rho1SignChangeAtItsRoot) {
    // Root of η_Aη_P v² = 1/κ₂² + (η_P/κ₂) v in v = (σᶜxᶜ)², located by
    // bisection on the residual alone.
    auto residual = [](double v) {
        return P.eta_a * P.eta_p * v * v - 1 / (P.kappa2 * P.kappa2) - P.eta_p / P.kappa2 * v;
    };
    double lo = 0, hi = 1e9;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (residual(mid) > 0 ? hi : lo) = mid;
    }
    const double x_root = std::sqrt(lo) / P.sigma_c;
    ModelParams wide = P;
    wide.x_inf = 10 * x_root;
    const double below = approx_coefficients(wide, State{x_root * 0.99, 60}).rho.c;
    const double above = approx_coefficients(wide, State{x_root * 1.01, 60}).rho.c;
    EXPECT_GT(below, 0.0);
    EXPECT_LT(above, 0.0);
}

TEST(ApproxHamiltonian, AgreesWithExactUpToTheRunningTermSign) {
    // With wide effort bounds and no truncation the exact Ḡ equals the
    // approximating right-hand side once its running term is taken as
    // c^P − c̃^A + κ₁²/(2κ₂) instead of its stated form f − κ₁²/(2κ₂).
    ModelParams wide = P;
    wide.alpha_min = -1e6;
    wide.alpha_max = 1e6;
    wide.x_inf = 1e4;
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> up(-5e4, 5e4), uh(-10, 10);
    for (const State x : oracle::sample_states(200, 53, 50, 210)) {
        const Vec2 p{up(rng), up(rng) / 10};
        const Sym2 hess{uh(rng), 0, uh(rng)};
        const double exact = consumer_hamiltonian_G(wide, x, p, hess);
        const double stated = approx_hamiltonian(wide, x, p, hess);
        const double f = approx_coefficients(wide, x).f;
        const double corrected = stated - 2 * f + wide.kappa1 * wide.kappa1 / wide.kappa2;
        EXPECT_NEAR(exact, corrected, 1e-9 * std::abs(exact));
        const Vec2 z = optimal_z(wide, x, p);
        const NodeCoefficients n = node_coefficients(wide, x);
        const Vec2 zl = optimal_z_approx(wide, n, p);
        EXPECT_NEAR(z.c, zl.c, 1e-9 * std::abs(z.c) + 1e-12);
        EXPECT_NEAR(z.d, zl.d, 1e-12 * std::abs(z.d) + 1e-15);
    }
}

// ---------------------------------------------------------------------------
// Producer acting alone

TEST(AgentSoloEffort, Examples) {
    EXPECT_NEAR(agent_solo_effort(P, 90, P.kappa1), 0.0, 1e-15);
    EXPECT_EQ(agent_solo_effort(P, 90, -1e12), P.alpha_min);
    EXPECT_EQ(agent_solo_effort(P, 90, 1e12), P.alpha_max);
    EXPECT_THROW(agent_solo_effort(P, 0.0, 1.0), DomainError);
}

TEST(AgentSoloEffort, MatchesAlphaScan) {
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> up(-3e5, 3e5), uh(-30, 30);
    for (const State x : oracle::sample_states(400, 61)) {
        const Vec2 p{up(rng), up(rng) / 50};
        const Sym2 hess{uh(rng), 0, uh(rng)};
        const auto scan = oracle::scan_1d(
            [&](double a) { return oracle::solo_direct(P, x, p, hess, a); }, P.alpha_min, P.alpha_max, 20001);
        const double a = agent_solo_effort(P, x.c, p.c);
        EXPECT_NEAR(a, scan.arg, scan.step);
        const double H = agent_solo_hamiltonian(P, x, p, hess);
        const double bound = 0.5 * P.kappa2 * xt(x.c) * xt(x.c) * scan.step * scan.step;
        EXPECT_GE(H, scan.value - 1e-9 * std::abs(H));
        EXPECT_LE(H - scan.value, bound + 1e-9 * std::abs(H));
    }
}

TEST(AgentSoloHamiltonian, SupremumProperties) {
    for (const State x : oracle::sample_states(50, 67)) {
        const Vec2 p{800, 3};
        const Sym2 hess{-2, 0, 1};
        const double at0 = agent_solo_h(P, x, p, hess, 0.0);
        EXPECT_NEAR(at0, oracle::solo_direct(P, x, p, hess, 0.0), 1e-9 * std::abs(at0));
        EXPECT_GE(agent_solo_hamiltonian(P, x, p, hess), at0);
    }
    EXPECT_THROW(agent_solo_h(P, State{90, 60}, {0, 0}, {0, 0, 0}, 4.0), DomainError);
}
