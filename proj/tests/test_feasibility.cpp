#include "dppc/errors.hpp"
#include "dppc/feasibility.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace dppc;
using Catch::Approx;

namespace {

FeasibilityInputs case1_inputs(double tau_s, double tau_u) {
    FeasibilityInputs in;
    in.m = 1;
    in.n = 2;
    in.alpha = 1.0;
    in.delays = DelaySpec::constant(tau_s, tau_u);
    in.d_bound = mass_on_car_case1()->d_bound();
    in.gamma1_bar = mass_on_car_case1()->gamma1_bar();
    in.theta = 0.0;
    in.s_norm = 1.0 / 9.0;
    in.s_star = 1.0 / 9.0;
    in.psi_n_inf = 0.5;
    in.psi_n_sup = 10.5;
    return in;
}

}  // namespace

TEST_CASE("block matrix A", "[feasibility]") {
    CHECK(build_A(1, 1, 2.0)(0, 0) == -2.0);
    Matrix two(2, 2);
    two << -1, 1, 0, -1;
    CHECK(build_A(1, 2, 1.0) == two);
    const Matrix four = build_A(2, 2, 1.0);
    CHECK(four.rows() == 4);
    CHECK(four.block(0, 0, 2, 2) == two);
    CHECK(four.block(2, 2, 2, 2) == two);
    CHECK(four.block(0, 2, 2, 2).isZero());
    CHECK(four.block(2, 0, 2, 2).isZero());
    CHECK_THROWS_AS(build_A(1, 2, 0.0), ConfigError);
}

TEST_CASE("spectral norm", "[feasibility]") {
    // singular values of [[-1,1],[0,-1]] are (sqrt5 +- 1)/2
    CHECK(spectral_norm(build_A(1, 2, 1.0)) == Approx((std::sqrt(5.0) + 1) / 2));
    CHECK(spectral_norm(build_A(3, 1, 0.7)) == Approx(0.7));
}

TEST_CASE("decay bound constants", "[feasibility]") {
    const auto one = estimate_M_mu(build_A(1, 1, 1.0), 1, 1.0);
    CHECK(one.M == 1.0);
    CHECK(one.mu == 1.0);
    const auto two = estimate_M_mu(build_A(1, 2, 1.0), 2, 1.0, 0.5);
    CHECK(two.mu == 0.5);
    CHECK(two.M == Approx(2.0 * std::exp(-0.5)).epsilon(1e-12));
    const auto dflt = estimate_M_mu(build_A(1, 2, 1.0), 2, 1.0);
    CHECK(dflt.mu == 0.5);
    CHECK_THROWS_AS(estimate_M_mu(build_A(1, 2, 1.0), 2, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(estimate_M_mu(build_A(1, 2, 1.0), 2, 1.0, -0.1), ConfigError);
}

TEST_CASE("decay bound holds for the sampled exponential", "[feasibility][property]") {
    for (int n : {1, 2, 3}) {
        for (int m : {1, 2}) {
            for (double alpha : {0.5, 1.0, 2.0}) {
                const Matrix A = build_A(m, n, alpha);
                const auto b = estimate_M_mu(A, n, alpha);
                const double T = n == 1 ? 20.0 / alpha : 20.0 * n / (alpha - b.mu);
                for (int k = 0; k < 200; ++k) {
                    const double t = 2.0 * T * k / 199.0;
                    const double norm = Eigen::JacobiSVD<Matrix>((A * t).exp()).singularValues()(0);
                    CHECK(norm <= b.M * std::exp(-b.mu * t) * (1 + 1e-12));
                }
            }
        }
    }
}

TEST_CASE("c tilde", "[feasibility]") {
    CHECK(c_tilde(1, 1.0, 1.0, false, 0.0) == 2.0);
    CHECK(c_tilde(2, 1.0, 0.0, false, 0.0) == 2.0);
    CHECK(c_tilde(2, 1.0, 0.0, true, 7.0) == c_tilde(2, 1.0, 0.0, false, 7.0));
    // 4 * 3 * 3 * 1.5 * 1.5 + 8 * 3
    CHECK(c_tilde(3, 2.0, 1.5, true, 0.5) == Approx(105.0));
    CHECK(c_tilde(3, 0.5, 1.5, false, 0.5) == Approx(1 * 3 * 3 * 1.5 + 1 * 3));
}

TEST_CASE("delay constant C", "[feasibility]") {
    CHECK(assumption3_C(case1_inputs(0.0, 0.0)) == 0.0);

    // direct evaluation for the case 1 design
    const auto in = case1_inputs(0.05, 0.05);
    const double phi = (std::sqrt(5.0) + 1) / 2;
    const double ct = 1 * 2 * 2 * in.d_bound * (1 + in.gamma1_bar) + 1 * 2;
    const double M = 2.0 * std::exp(-0.5);
    const double expected = ct * (1.0 / 9.0) * M / 0.5 * (2.0 * phi * 0.1 * std::exp(phi * 0.1));
    const double C = assumption3_C(in);
    CHECK(C > 0.0);
    CHECK(std::isfinite(C));
    CHECK(C == Approx(expected).epsilon(1e-10));

    // time-varying input delay: tau_u = 0.1 + 0.05 sin 2t, rate bound 0.1, tau_u_bar 0.15
    auto varying = in;
    varying.delays = DelaySpec::sinusoidal(0.0, 0.1, 0.05, 2.0);
    const double x = phi * 0.15;
    const double bracket = 0.1 / 0.9 + 1.9 / 0.9 * x * std::exp(x);
    CHECK(assumption3_C(varying) == Approx(ct / 9.0 * M / 0.5 * bracket).epsilon(1e-10));
}

TEST_CASE("C is monotone in each delay", "[feasibility][property]") {
    std::vector<std::vector<double>> grid(10, std::vector<double>(10));
    for (int a = 0; a < 10; ++a) {
        for (int b = 0; b < 10; ++b) {
            grid[a][b] = assumption3_C(case1_inputs(0.02 * a, 0.02 * b));
        }
    }
    for (int a = 0; a < 10; ++a) {
        for (int b = 0; b < 10; ++b) {
            if (a + 1 < 10) {
                CHECK(grid[a + 1][b] >= grid[a][b]);
            }
            if (b + 1 < 10) {
                CHECK(grid[a][b + 1] >= grid[a][b]);
            }
        }
    }
    // continuity at zero
    CHECK(assumption3_C(case1_inputs(1e-9, 1e-9)) < 1e-7);
}

TEST_CASE("feasibility verdicts", "[feasibility]") {
    FeasibilityInputs in = case1_inputs(0.0, 0.0);
    in.psi_n_inf = in.psi_n_sup = 1.0;
    auto r = check_feasibility(in);
    CHECK(r.feasible);
    CHECK(r.C == 0.0);
    CHECK(r.lhs == 0.0);
    CHECK(r.rhs == Approx(1.0 / 9.0));

    in.theta = 1.0 / 9.0;
    r = check_feasibility(in);
    CHECK_FALSE(r.feasible);
    CHECK(r.max_delay_sum == 0.0);

    in.theta = 0.2;
    CHECK_FALSE(check_feasibility(in).feasible);

    in.psi_n_inf = 2.0;
    CHECK_THROWS_AS(check_feasibility(in), ConfigError);
}

TEST_CASE("delay budget by bisection", "[feasibility]") {
    FeasibilityInputs in = case1_inputs(0.0, 0.0);
    const auto r = check_feasibility(in);
    REQUIRE(r.feasible);
    const double D = r.max_delay_sum;
    REQUIRE(D > 0.0);
    auto C_at = [&](double sum) {
        auto probe = in;
        probe.delays = DelaySpec::constant(sum, 0.0);
        return assumption3_C(probe);
    };
    CHECK(C_at(D) < r.rhs);
    CHECK(C_at(D + 1e-6) >= r.rhs);
    // the budget splits freely between tau_s and tau_u
    auto split = in;
    split.delays = DelaySpec::constant(0.3 * D, 0.7 * D);
    CHECK(check_feasibility(split).feasible);
    split.delays = DelaySpec::constant(0.3 * (D + 2e-6), 0.7 * (D + 2e-6));
    CHECK_FALSE(check_feasibility(split).feasible);

    const auto again = check_feasibility(in);
    CHECK(again == r);
}

TEST_CASE("reports for the shipped designs", "[feasibility]") {
    const auto r1 = check_feasibility(case1_inputs(0.05, 0.05));
    CHECK(std::isfinite(r1.C));
    CHECK(r1.feasible == (r1.lhs < r1.rhs));

    FeasibilityInputs in2;
    in2.m = 1;
    in2.n = 3;
    in2.alpha = 1.0;
    in2.delays = DelaySpec::constant(0.05, 0.05);
    in2.d_bound = mass_on_car_case2()->d_bound();
    in2.gamma1_bar = mass_on_car_case2()->gamma1_bar();
    in2.s_norm = in2.s_star = 0.25;
    in2.psi_n_inf = 0.5;
    in2.psi_n_sup = 10.5;
    const auto r2 = check_feasibility(in2);
    CHECK(std::isfinite(r2.C));
    CHECK(r2.rhs == Approx(0.25 * 0.5 / 10.5));
    const std::string js = to_json(r2);
    CHECK(js.find("\"feasible\"") != std::string::npos);
    CHECK(to_table(r2).find("feasible") != std::string::npos);
}
