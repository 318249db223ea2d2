#include "dppc/errors.hpp"
#include "dppc/perf_funnel.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace dppc;
using Catch::Approx;

TEST_CASE("exponential envelope values", "[perf-funnel]") {
    const auto psi = PerformanceFunction::exponential(5.0, 0.1, 2.0);
    CHECK(psi(0.0) == Approx(5.0).margin(1e-15));
    CHECK(psi(50.0) == Approx(0.1).margin(1e-15));
    CHECK(psi(0.3) == Approx(4.9 * std::exp(-0.6) + 0.1).epsilon(1e-15));
    // grows for negative times by the same closed form
    CHECK(psi(-0.05) == Approx(4.9 * std::exp(0.1) + 0.1).epsilon(1e-15));

    const auto flat = PerformanceFunction::exponential(1.0, 1.0, 3.0);
    for (double t : {-1.0, 0.0, 0.7, 100.0}) {
        CHECK(flat(t) == 1.0);
        CHECK(flat.derivative(t) == 0.0);
    }
}

TEST_CASE("envelope derivative", "[perf-funnel]") {
    const auto psi = PerformanceFunction::exponential(5.0, 0.1, 2.0);
    CHECK(psi.derivative(0.0) == Approx(-9.8).epsilon(1e-15));
    CHECK(std::abs(psi.derivative(40.0)) < 1e-30);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> pick(-0.05, 8.0);
    for (int k = 0; k < 200; ++k) {
        const double t = pick(rng);
        const double step = 1e-5;
        const double fd = (psi(t + step) - psi(t - step)) / (2 * step);
        CHECK(std::abs(fd - psi.derivative(t)) <= 1e-6 * std::abs(psi.derivative(t)));
    }
}

TEST_CASE("envelope bounds and monotonicity", "[perf-funnel]") {
    const auto psi = PerformanceFunction::exponential(10.5, 0.5, 2.0);
    CHECK(psi.infimum() == 0.5);
    CHECK(psi.supremum(0.0) == Approx(10.5));
    CHECK(psi.supremum(-0.05) == Approx(10.0 * std::exp(0.1) + 0.5));
    CHECK(psi.derivative_bound(-0.05) == Approx(2.0 * 10.0 * std::exp(0.1)));
    double prev = psi(-0.05);
    for (int k = 1; k <= 1000; ++k) {
        const double v = psi(-0.05 + 0.01 * k);
        CHECK(v <= prev);
        CHECK(v >= 0.5);
        prev = v;
    }
}

TEST_CASE("envelope construction is validated", "[perf-funnel]") {
    CHECK_THROWS_AS(PerformanceFunction::exponential(1.0, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(PerformanceFunction::exponential(1.0, -0.1, 1.0), ConfigError);
    CHECK_THROWS_AS(PerformanceFunction::exponential(0.5, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(PerformanceFunction::exponential(2.0, 1.0, -1.0), ConfigError);
}

TEST_CASE("custom envelope checks declared bounds", "[perf-funnel]") {
    auto value = [](double t) { return 2.0 + std::sin(t); };
    auto deriv = [](double t) { return std::cos(t); };
    const auto psi = PerformanceFunction::custom(value, deriv, {1.0, 3.0, 1.0}, -0.1, 20.0);
    CHECK(psi(1.0) == value(1.0));
    CHECK(psi.derivative(1.0) == deriv(1.0));
    CHECK(psi.infimum() == 1.0);
    CHECK_THROWS_AS(PerformanceFunction::custom(value, deriv, {1.5, 3.0, 1.0}, -0.1, 20.0),
                    ConfigError);
    CHECK_THROWS_AS(PerformanceFunction::custom(value, deriv, {0.0, 3.0, 1.0}, -0.1, 20.0),
                    ConfigError);
}

TEST_CASE("activation", "[perf-funnel]") {
    CHECK(Activation(0.0)(0.7) == Approx(0.7));
    CHECK(Activation(0.1)(0.05) == 0.0);
    CHECK(Activation(0.1)(0.6) == Approx(0.5));
    CHECK(Activation(0.1)(0.1) == 0.0);
    CHECK(Activation(0.25)(1.0) == Approx(0.75));

    CHECK_THROWS_AS(Activation(1.0), ConfigError);
    CHECK_THROWS_AS(Activation(-0.1), ConfigError);
    CHECK_THROWS_AS(Activation(0.0)(1.01), DomainError);
    CHECK_THROWS_AS(Activation(0.0)(-0.01), DomainError);
    CHECK(Activation(0.0)(1.0 + 2e-16) == 1.0);
    CHECK(Activation(0.0)(-1e-16) == 0.0);
}

TEST_CASE("activation is nondecreasing and 1-Lipschitz", "[perf-funnel]") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> dz(0.0, 0.99);
    for (int k = 0; k < 2000; ++k) {
        const Activation chi(dz(rng));
        double a = unit(rng);
        double b = unit(rng);
        if (a > b) {
            std::swap(a, b);
        }
        CHECK(chi(a) <= chi(b));
        CHECK(chi(b) - chi(a) <= b - a + 1e-15);
        CHECK(chi(b) <= 1.0 - chi.delta() + 1e-15);
    }
}

TEST_CASE("reference signals", "[perf-funnel]") {
    const auto cosine = ReferenceSignal::cosine(1.0, 1.0);
    CHECK(cosine.value(0.0) == 1.0);
    CHECK(cosine.derivative(0.3) == Approx(-std::sin(0.3)));
    CHECK(cosine.value_bound() == 1.0);
    CHECK(cosine.derivative_bound() == 1.0);

    const auto mix = ReferenceSignal::sum_of_sines({{2.0, 3.0, 0.5}, {0.5, 1.0, 0.0}}, 1.0);
    const double t = 0.77;
    CHECK(mix.value(t) == Approx(1.0 + 2.0 * std::sin(3.0 * t + 0.5) + 0.5 * std::sin(t)));
    CHECK(mix.derivative(t) == Approx(6.0 * std::cos(3.0 * t + 0.5) + 0.5 * std::cos(t)));
    CHECK(mix.value_bound() == Approx(3.5));
    CHECK(mix.derivative_bound() == Approx(6.5));
    CHECK_NOTHROW(mix.validate(-0.05, 20.0));

    const auto wrong = ReferenceSignal::custom([](double s) { return 2.0 * std::cos(s); },
                                               [](double s) { return -2.0 * std::sin(s); }, 1.0,
                                               2.0);
    CHECK_THROWS_AS(wrong.validate(-0.05, 10.0), ConfigError);
}
