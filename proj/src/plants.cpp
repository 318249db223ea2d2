#include "dppc/plants.hpp"

#include "dppc/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <numbers>

namespace dppc {

namespace {

constexpr double kBetaTol = 1e-12;

bool is_case1(double beta) { return std::abs(beta - std::numbers::pi / 4) < kBetaTol; }
bool is_case2(double beta) { return std::abs(beta) < kBetaTol; }

}  // namespace

void MassOnCarParams::validate() const {
    if (!(m1 > 0.0 && m2 > 0.0 && k_spring > 0.0 && d_damper > 0.0)) {
        throw ConfigError("mass on car: masses, spring and damper must be positive");
    }
    if (!(beta >= 0.0 && beta < std::numbers::pi / 2)) {
        throw ConfigError("mass on car: beta must lie in [0, pi/2)");
    }
}

double MassOnCarParams::mass_determinant() const {
    const double sb = std::sin(beta);
    return m2 * (m1 + m2 * sb * sb);
}

MassOnCarState mass_on_car_physical_rhs(const MassOnCarState& x, double u,
                                        const MassOnCarParams& p) {
    const double c = std::cos(p.beta);
    const double det = p.mass_determinant();
    const double spring = p.k_spring * x[2] + p.d_damper * x[3];
    // inverse of [[m1+m2, m2 c], [m2 c, m2]] applied to (u, -spring)
    const double xdd = (p.m2 * u + p.m2 * c * spring) / det;
    const double sdd = (-p.m2 * c * u - (p.m1 + p.m2) * spring) / det;
    return {x[1], xdd, x[3], sdd};
}

std::vector<double> mass_on_car_chain(const MassOnCarParams& p, const MassOnCarState& x,
                                      double u) {
    const double c = std::cos(p.beta);
    const double y = x[0] + x[2] * c;
    const double yd = x[1] + x[3] * c;
    if (is_case1(p.beta)) {
        return {y, yd};
    }
    if (is_case2(p.beta)) {
        const double sb = std::sin(p.beta);
        const double spring = p.k_spring * x[2] + p.d_damper * x[3];
        const double ydd = (p.m2 * sb * sb * u - c * p.m1 * spring) / p.mass_determinant();
        return {y, yd, ydd};
    }
    throw ConfigError("mass on car: only beta = pi/4 and beta = 0 are supported");
}

double mass_on_car_energy(const MassOnCarState& x, const MassOnCarParams& p) {
    const double c = std::cos(p.beta);
    const double kinetic = 0.5 * ((p.m1 + p.m2) * x[1] * x[1] + 2.0 * p.m2 * c * x[1] * x[3] +
                                  p.m2 * x[3] * x[3]);
    return kinetic + 0.5 * p.k_spring * x[2] * x[2];
}

MassOnCarPlant::MassOnCarPlant(MassOnCarParams params) : params_(params) {
    params_.validate();
    const double det = params_.mass_determinant();
    const double k = params_.k_spring;
    const double d = params_.d_damper;
    const double m1 = params_.m1;
    const double m2 = params_.m2;
    if (is_case1(params_.beta)) {
        n_ = 2;
        // Internal coordinates eta = (s, s' + kappa y') remove u from the internal dynamics.
        const double c = std::cos(params_.beta);
        const double sb = std::sin(params_.beta);
        const double kappa = c / (sb * sb);
        // f_{1,2} = -c m1 (k eta1 + d eta2 - d kappa x2) / det
        d_bound_ = c * m1 * std::sqrt(k * k + d * d * (1.0 + kappa * kappa)) / det;
        const double rho = ((m1 + m2) + kappa * c * m1) / det;
        Matrix H(2, 2);
        H << 0.0, 1.0, -rho * k, -rho * d;
        Matrix B(2, 1);
        B << -kappa, rho * d * kappa;
        gamma1_bar_ = linear_iss_gain(H, B);
    } else if (is_case2(params_.beta)) {
        n_ = 3;
        // eta = s, with s' = -(m2 x3 + k s) / d and f_{1,3} = a x3 + b s.
        const double a = k / d - d * (m1 + m2) / det;
        const double b = k * k / (m2 * d);
        d_bound_ = std::hypot(a, b);
        gamma1_bar_ = m2 / k;
    } else {
        throw ConfigError("mass on car: only beta = pi/4 and beta = 0 are supported");
    }
}

std::string MassOnCarPlant::name() const {
    return n_ == 2 ? "mass_on_car_case1" : "mass_on_car_case2";
}

void MassOnCarPlant::rhs(double, std::span<const double> x, std::span<const double> u,
                         std::span<double> dx) const {
    const MassOnCarState s{x[0], x[1], x[2], x[3]};
    const MassOnCarState r = mass_on_car_physical_rhs(s, u[0], params_);
    std::copy(r.begin(), r.end(), dx.begin());
}

void MassOnCarPlant::chain(std::span<const double> x, std::span<double> xbar) const {
    const auto c = mass_on_car_chain(params_, {x[0], x[1], x[2], x[3]});
    std::copy(c.begin(), c.end(), xbar.begin());
}

Matrix MassOnCarPlant::input_matrix() const {
    const double det = params_.mass_determinant();
    Matrix G(1, 1);
    if (n_ == 2) {
        const double sb = std::sin(params_.beta);
        G(0, 0) = params_.m2 * sb * sb / det;
    } else {
        G(0, 0) = params_.d_damper / det;
    }
    return G;
}

std::shared_ptr<Plant> mass_on_car_case1(MassOnCarParams params) {
    params.beta = std::numbers::pi / 4;
    return std::make_shared<MassOnCarPlant>(params);
}

std::shared_ptr<Plant> mass_on_car_case2(MassOnCarParams params) {
    params.beta = 0.0;
    return std::make_shared<MassOnCarPlant>(params);
}

StrictFeedbackPlant::StrictFeedbackPlant(Definition def) : def_(std::move(def)) {
    if (def_.m < 1 || def_.n < 1 || def_.q < 0) {
        throw ConfigError("strict feedback plant: invalid dimensions");
    }
    if (!def_.f_top || !def_.g || (def_.q > 0 && !def_.h)) {
        throw ConfigError("strict feedback plant: missing drift, input or internal map");
    }
    if (def_.g_nominal.rows() != def_.m || def_.g_nominal.cols() != def_.m) {
        throw ConfigError("strict feedback plant: nominal input matrix must be m x m");
    }
}

void StrictFeedbackPlant::rhs(double t, std::span<const double> x, std::span<const double> u,
                              std::span<double> dx) const {
    const int m = def_.m;
    const int n = def_.n;
    const std::size_t mn = static_cast<std::size_t>(m * n);
    const auto xbar = x.first(mn);
    const auto eta = x.subspan(mn);
    Vector top(m);
    def_.f_top(t, xbar, eta, {top.data(), static_cast<std::size_t>(m)});
    const Matrix G = def_.g(t, xbar, eta);
    const Vector gu = G * Eigen::Map<const Vector>(u.data(), m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n - 1; ++j) {
            dx[i * n + j] = x[i * n + j + 1];
        }
        dx[i * n + n - 1] = top(i) + gu(i);
    }
    if (def_.q > 0) {
        def_.h(t, xbar, eta, dx.subspan(mn));
    }
}

void StrictFeedbackPlant::chain(std::span<const double> x, std::span<double> xbar) const {
    const std::size_t mn = static_cast<std::size_t>(def_.m * def_.n);
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mn), xbar.begin());
}

std::shared_ptr<Plant> blow_up_plant() {
    StrictFeedbackPlant::Definition def;
    def.name = "blow_up";
    def.f_top = [](double, std::span<const double> xbar, std::span<const double>,
                   std::span<double> out) { out[0] = xbar[0] * xbar[0]; };
    def.g = [](double, std::span<const double>, std::span<const double>) {
        return Matrix::Identity(1, 1);
    };
    def.g_nominal = Matrix::Identity(1, 1);
    def.d_bound = std::numeric_limits<double>::infinity();
    def.gamma1_bar = 0.0;
    def.linear_growth = false;
    return std::make_shared<StrictFeedbackPlant>(std::move(def));
}

double linear_iss_gain(const Matrix& H, const Matrix& B) {
    Eigen::EigenSolver<Matrix> es(H, false);
    const double decay = -es.eigenvalues().real().maxCoeff();
    if (!(decay > 0.0)) {
        throw ConfigError("linear_iss_gain: H is not Hurwitz");
    }
    const double horizon = 60.0 / decay;
    const int steps = 60000;
    const double ds = horizon / steps;
    const Matrix step = (H * ds).exp();
    Matrix impulse = B;
    double integral = 0.5 * impulse.norm();
    for (int k = 1; k <= steps; ++k) {
        impulse = step * impulse;
        integral += (k == steps ? 0.5 : 1.0) * impulse.norm();
    }
    return integral * ds;
}

std::shared_ptr<Plant> make_plant(const std::string& name, const MassOnCarParams& params) {
    if (name == "mass_on_car_case1") {
        return mass_on_car_case1(params);
    }
    if (name == "mass_on_car_case2") {
        return mass_on_car_case2(params);
    }
    if (name == "blow_up") {
        return blow_up_plant();
    }
    throw ConfigError("unknown plant '" + name + "'");
}

}  // namespace dppc
