#include "dppc/controller.hpp"
#include "dppc/errors.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace dppc;
using Catch::Approx;

namespace {

ControllerConfig scalar_config(double k_n, double delta, double s = 1.0) {
    ControllerParams p;
    p.S = Matrix::Constant(1, 1, s);
    p.alpha = 1.0;
    p.k_n = k_n;
    p.delta = delta;
    p.psi = {{}};
    p.psi_n = PerformanceFunction::constant(1.0);
    return ControllerConfig(p);
}

ControllerConfig case1_config() {
    ControllerParams p;
    p.S = Matrix::Constant(1, 1, 1.0 / 9.0);
    p.alpha = 1.0;
    p.k = Matrix::Constant(1, 1, 1.0);
    p.k_n = 1.0;
    p.psi = {{PerformanceFunction::exponential(5.1, 0.1, 2.0)}};
    p.psi_n = PerformanceFunction::exponential(10.5, 0.5, 2.0);
    return ControllerConfig(p);
}

double choose(int n, int k) {
    if (k < 0 || k > n) {
        return 0.0;
    }
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

}  // namespace

TEST_CASE("binomial correction sum", "[controller]") {
    const std::vector<double> seven{7.0, -3.0, 2.0};
    for (double alpha : {0.3, 1.0, 4.0}) {
        CHECK(binom_correction(1, alpha, seven) == 7.0);
    }
    CHECK(binom_correction(3, 1.0, std::vector<double>{1.0, 2.0, 3.0}) == 0.0);
    CHECK(binom_correction(2, 1.0, std::vector<double>{0.1, 0.3}) == Approx(0.2));
    // alpha = 2, j = 3: 4 I1 - 4 I2 + I3
    CHECK(binom_correction(3, 2.0, std::vector<double>{1.0, 1.0, 5.0}) == Approx(5.0));
}

TEST_CASE("telescoping identity of the correction sums", "[controller][property]") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> alpha_dist(1e-3, 5.0);
    std::uniform_real_distribution<double> I_dist(-10.0, 10.0);
    std::uniform_int_distribution<int> j_dist(1, 6);
    for (int trial = 0; trial < 1000; ++trial) {
        const int j = j_dist(rng);
        const double alpha = alpha_dist(rng);
        std::vector<double> I(static_cast<std::size_t>(j + 1));
        for (double& v : I) {
            v = I_dist(rng);
        }
        // left side written out term by term
        double lhs = 0.0;
        double scale = 0.0;
        for (int k = 1; k <= j; ++k) {
            const double c = choose(j - 1, j - k);
            const double t1 = c * std::pow(-alpha, j + 1 - k) * I[static_cast<std::size_t>(k - 1)];
            const double t2 = c * std::pow(-alpha, j - k) * I[static_cast<std::size_t>(k)];
            lhs += t1 + t2;
            scale += std::abs(t1) + std::abs(t2);
        }
        const double rhs = binom_correction(j + 1, alpha, I);
        INFO("j=" << j << " alpha=" << alpha);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * scale);
    }
}

TEST_CASE("z1 normalisation", "[controller]") {
    auto z1 = [](double x, double yd, double I, double psi) {
        return compute_z1(Vector::Constant(1, x), Vector::Constant(1, yd), Vector::Constant(1, I),
                          Vector::Constant(1, psi))(0);
    };
    CHECK(z1(1.0, 1.0, 0.0, 0.5) == 0.0);
    CHECK(z1(1.2, 1.0, 0.1, 0.6) == Approx(0.5));
    CHECK(z1(0.9, 1.0, 0.1, 0.4) == Approx(0.0).margin(1e-15));
}

TEST_CASE("zj normalisation", "[controller]") {
    RowMatrix I(1, 2);
    I << 0.1, 0.3;
    CHECK(compute_zj(2, Vector::Constant(1, 0.5), Vector::Constant(1, 0.2), I, 1.0,
                     Vector::Constant(1, 1.0))(0) == Approx(0.5));
    const RowMatrix zero = RowMatrix::Zero(1, 2);
    CHECK(compute_zj(2, Vector::Constant(1, 0.37), Vector::Constant(1, 0.37), zero, 1.0,
                     Vector::Constant(1, 3.0))(0) == 0.0);
    RowMatrix I3(1, 3);
    I3 << 1.0, 2.0, 3.0;
    CHECK(compute_zj(3, Vector::Constant(1, 1.0), Vector::Constant(1, 1.0), I3, 1.0,
                     Vector::Constant(1, 2.0))(0) == 0.0);
}

TEST_CASE("intermediate control barrier", "[controller]") {
    CHECK(compute_a(1, Vector::Constant(1, 0.0), Vector::Constant(1, 5.0))(0) == 0.0);
    CHECK(compute_a(1, Vector::Constant(1, 0.5), Vector::Constant(1, 1.0))(0) == Approx(-2.0 / 3));
    CHECK(compute_a(1, Vector::Constant(1, -0.5), Vector::Constant(1, 1.0))(0) == Approx(2.0 / 3));
    try {
        Vector z(2);
        z << 0.2, 1.0;
        (void)compute_a(2, z, Vector::Constant(2, 1.0));
        FAIL("expected a funnel violation");
    } catch (const FunnelViolation& v) {
        CHECK(v.row == 2);
        CHECK(v.level == 2);
        CHECK(v.value == 1.0);
    }
    CHECK_THROWS_AS(compute_a(1, Vector::Constant(1, -1.5), Vector::Constant(1, 1.0)),
                    FunnelViolation);
    CHECK_THROWS_AS(compute_a(1, Vector::Constant(1, std::nan("")), Vector::Constant(1, 1.0)),
                    FunnelViolation);
}

TEST_CASE("input law", "[controller]") {
    CHECK(compute_u(Vector::Constant(1, 0.6), scalar_config(2.0, 0.1))(0) == Approx(-0.9375));
    CHECK(compute_u(Vector::Constant(1, 0.0), scalar_config(2.0, 0.0))(0) == 0.0);
    CHECK(compute_u(Vector::Constant(1, 0.08), scalar_config(2.0, 0.1))(0) == 0.0);
    CHECK(compute_u(Vector::Constant(1, -0.08), scalar_config(2.0, 0.1))(0) == 0.0);
    // sigma = -1 flips the sign
    CHECK(compute_u(Vector::Constant(1, 0.6), scalar_config(2.0, 0.1, -3.0))(0) ==
          Approx(0.9375));
    CHECK_THROWS_AS(compute_u(Vector::Constant(1, 1.0), scalar_config(1.0, 0.0)), FunnelViolation);
}

TEST_CASE("input law is odd without dead zone", "[controller][property]") {
    ControllerParams p;
    p.S = Matrix::Identity(2, 2);
    p.alpha = 1.0;
    p.k_n = 3.0;
    p.psi = {{}, {}};
    p.psi_n = PerformanceFunction::constant(1.0);
    const ControllerConfig cfg(p);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> d(-0.7, 0.7);
    for (int k = 0; k < 500; ++k) {
        Vector z(2);
        z << d(rng), d(rng);
        const Vector u = compute_u(z, cfg);
        CHECK((compute_u(-z, cfg) + u).norm() == 0.0);
        // oracle: -k chi(|z|) z / (1 - |z|^2)
        const double r = z.norm();
        CHECK((u + 3.0 * r * z / (1 - r * r)).norm() <= 1e-12 * u.norm());
    }
}

TEST_CASE("correction dynamics", "[controller]") {
    const ControllerConfig s19 = scalar_config(1.0, 0.0, 1.0 / 9.0);
    CHECK(correction_rhs(Vector::Zero(1), Vector::Constant(1, 1.0), Vector::Zero(1), s19)(0) ==
          Approx(1.0 / 9.0));
    CHECK(correction_rhs(Vector::Zero(1), Vector::Constant(1, 2.5), Vector::Constant(1, 2.5), s19)(0) ==
          0.0);
    const ControllerConfig c1 = case1_config();
    Vector I(2);
    I << 1.0, 2.0;
    const Vector r = correction_rhs(I, Vector::Constant(1, 4.0), Vector::Constant(1, 4.0), c1);
    CHECK(r(0) == 1.0);
    CHECK(r(1) == -2.0);
}

TEST_CASE("correction dynamics are linear", "[controller][property]") {
    ControllerParams p;
    p.S = Matrix(2, 2);
    p.S << 2.0, 0.5, -0.3, 1.5;
    p.alpha = 0.7;
    p.k = Matrix::Constant(2, 2, 1.0);
    p.k_n = 1.0;
    const auto env = PerformanceFunction::constant(1.0);
    p.psi = {{env, env}, {env, env}};
    p.psi_n = env;
    const ControllerConfig cfg(p);
    std::mt19937 rng(9);
    std::normal_distribution<double> g;
    auto rnd = [&](int n) {
        Vector v(n);
        for (int i = 0; i < n; ++i) {
            v(i) = g(rng);
        }
        return v;
    };
    for (int k = 0; k < 200; ++k) {
        const Vector I1 = rnd(6), I2 = rnd(6), a1 = rnd(2), a2 = rnd(2), b1 = rnd(2), b2 = rnd(2);
        const double c = g(rng);
        const Vector lhs = correction_rhs(I1 + c * I2, a1 + c * a2, b1 + c * b2, cfg);
        const Vector rhs = correction_rhs(I1, a1, b1, cfg) + c * correction_rhs(I2, a2, b2, cfg);
        CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
}

TEST_CASE("sign definiteness", "[controller]") {
    const auto a = sign_definiteness(Matrix::Constant(1, 1, 1.0 / 9.0));
    CHECK(a.sigma == 1);
    CHECK(a.s_star == Approx(1.0 / 9.0));
    const auto b = sign_definiteness(Matrix::Constant(1, 1, -2.0));
    CHECK(b.sigma == -1);
    CHECK(b.s_star == Approx(2.0));
    Matrix skew(2, 2);
    skew << 0.0, 1.0, -1.0, 0.0;
    CHECK_THROWS_AS(sign_definiteness(skew), NotSignDefiniteError);
    Matrix nonsym(2, 2);
    nonsym << 2.0, 3.0, -1.0, 1.0;  // symmetric part [[2,1],[1,1]], eigenvalues (3 +- sqrt 5)/2
    CHECK(sign_definiteness(nonsym).s_star == Approx((3.0 - std::sqrt(5.0)) / 2.0));
}

TEST_CASE("configuration validation", "[controller]") {
    ControllerParams p;
    p.S = Matrix::Constant(1, 1, 0.25);
    p.alpha = 1.0;
    p.k = Matrix::Constant(1, 1, 1.0);
    p.k_n = 1.0;
    p.psi = {{PerformanceFunction::constant(1.0)}};
    p.psi_n = PerformanceFunction::constant(1.0);
    CHECK_NOTHROW(ControllerConfig(p));
    CHECK(ControllerConfig(p).n() == 2);

    auto bad = p;
    bad.k(0, 0) = 0.0;
    CHECK_THROWS_AS(ControllerConfig(bad), ConfigError);
    bad = p;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(ControllerConfig(bad), ConfigError);
    bad = p;
    bad.s_star = 0.5;  // larger than the true 0.25
    CHECK_THROWS_AS(ControllerConfig(bad), NotSignDefiniteError);
    bad = p;
    bad.sigma = -1;
    CHECK_THROWS_AS(ControllerConfig(bad), NotSignDefiniteError);
    auto ok = p;
    ok.s_star = 0.2;
    CHECK(ControllerConfig(ok).s_star() == 0.2);
}

TEST_CASE("controller step on the case 1 design", "[controller]") {
    const ControllerConfig cfg = case1_config();
    const std::vector<ReferenceSignal> refs{ReferenceSignal::cosine(1.0, 1.0)};
    const double tau_s = 0.05;
    const std::vector<double> x_hist{0.0, 0.0};
    const std::vector<double> I{0.0, 0.0};
    const ControllerOutput out = controller_step(cfg, 0.0, tau_s, x_hist, I, refs);

    // hand evaluation of the chain with the delayed reference and envelope
    const double psi11 = 5.0 * std::exp(0.1) + 0.1;
    const double z11 = -std::cos(-tau_s) / psi11;
    const double a11 = -z11 / (1 - z11 * z11);
    const double psi12 = 10.0 * std::exp(0.1) + 0.5;
    const double z12 = (0.0 - a11) / psi12;
    const double u = -std::abs(z12) * z12 / (1 - z12 * z12);
    CHECK(out.z(0, 0) == Approx(z11).epsilon(1e-14));
    CHECK(std::abs(out.z(0, 0)) < 1.0);
    CHECK(out.a(0, 0) == Approx(a11).epsilon(1e-14));
    CHECK(out.z(0, 1) == Approx(z12).epsilon(1e-14));
    CHECK(out.u(0) == Approx(u).epsilon(1e-13));
    CHECK(std::isfinite(out.u(0)));

    const ControllerOutput again = controller_step(cfg, 0.0, tau_s, x_hist, I, refs);
    CHECK(again.u(0) == out.u(0));
    CHECK(again.z == out.z);
}

TEST_CASE("controller step zero error gives zero input", "[controller]") {
    const ControllerConfig cfg = scalar_config(2.0, 0.0);
    const std::vector<ReferenceSignal> refs{ReferenceSignal::cosine(1.0, 1.0)};
    const double t = 0.4;
    const std::vector<double> x{std::cos(t)};
    const std::vector<double> I{0.0};
    CHECK(controller_step(cfg, t, 0.0, x, I, refs).u(0) == 0.0);

    const ControllerConfig dz = scalar_config(2.0, 0.3);
    const std::vector<double> near{std::cos(t) + 0.2};
    CHECK(controller_step(dz, t, 0.0, near, I, refs).u(0) == 0.0);
}

TEST_CASE("controller step reports the violation time", "[controller]") {
    const ControllerConfig cfg = case1_config();
    const std::vector<ReferenceSignal> refs{ReferenceSignal::constant(0.0)};
    const std::vector<double> x{20.0, 0.0};
    const std::vector<double> I{0.0, 0.0};
    try {
        (void)controller_step(cfg, 3.0, 0.0, x, I, refs);
        FAIL("expected a funnel violation");
    } catch (const FunnelViolation& v) {
        CHECK(v.time == 3.0);
        CHECK(v.row == 1);
        CHECK(v.level == 1);
    }
}

TEST_CASE("uncorrected step ignores I", "[controller]") {
    const ControllerConfig cfg = case1_config();
    const std::vector<ReferenceSignal> refs{ReferenceSignal::constant(0.0)};
    const std::vector<double> x{0.3, -0.1};
    const std::vector<double> I{0.2, 0.5};
    const std::vector<double> zero{0.0, 0.0};
    const auto a = controller_step(cfg, 1.0, 0.0, x, I, refs, false);
    const auto b = controller_step(cfg, 1.0, 0.0, x, zero, refs, true);
    CHECK(a.u(0) == b.u(0));
    const auto c = controller_step(cfg, 1.0, 0.0, x, I, refs, true);
    CHECK(c.z(0, 0) == Approx((0.3 + 0.2) / cfg.envelope(0, 1)(1.0)));
}
