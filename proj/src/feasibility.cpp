#include "dppc/feasibility.hpp"

#include "dppc/errors.hpp"

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <iomanip>
#include <sstream>

namespace dppc {

namespace {

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

// e^{mu t} e^{-alpha t} sum_{k<n} t^k / k!
double decay_envelope(double t, int n, double alpha, double mu) {
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < n; ++k) {
        term *= t / k;
        sum += term;
    }
    return std::exp((mu - alpha) * t) * sum;
}

double c_of_sum(const FeasibilityInputs& in, double A_norm, const DecayBound& mb, double ct,
                double delay_sum) {
    const double rate = in.delays.tau_u_dot_bar();
    const double x = A_norm * delay_sum;
    const double bracket = rate / (1.0 - rate) + (2.0 - rate) / (1.0 - rate) * x * std::exp(x);
    return ct * in.s_norm * mb.M / mb.mu * bracket;
}

}  // namespace

Matrix build_A(int m, int n, double alpha) {
    if (m < 1 || n < 1 || !(alpha > 0.0)) {
        throw ConfigError("build_A: need m, n >= 1 and alpha > 0");
    }
    Matrix A = Matrix::Zero(m * n, m * n);
    for (int b = 0; b < m; ++b) {
        for (int j = 0; j < n; ++j) {
            A(b * n + j, b * n + j) = -alpha;
            if (j + 1 < n) {
                A(b * n + j, b * n + j + 1) = 1.0;
            }
        }
    }
    return A;
}

double spectral_norm(const Matrix& A) {
    if (A.size() == 0) {
        return 0.0;
    }
    return Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
}

DecayBound estimate_M_mu(const Matrix& A, int n, double alpha, std::optional<double> mu_choice) {
    if (!(alpha > 0.0) || n < 1) {
        throw ConfigError("estimate_M_mu: need alpha > 0 and n >= 1");
    }
    double mu = n == 1 ? alpha : 0.5 * alpha;
    if (mu_choice) {
        mu = *mu_choice;
        if (!(mu > 0.0) || mu > alpha || (n > 1 && mu >= alpha)) {
            throw ConfigError("estimate_M_mu: mu must satisfy 0 < mu < alpha for n > 1");
        }
    }
    double M = 1.0;
    double t_star = 20.0 / alpha;
    if (n > 1) {
        t_star = 20.0 * n / (alpha - mu);
        const int grid = 20000;
        int best = 0;
        for (int k = 0; k <= grid; ++k) {
            const double v = decay_envelope(t_star * k / grid, n, alpha, mu);
            if (v > M) {
                M = v;
                best = k;
            }
        }
        // golden-section polish around the best grid point
        double lo = t_star * std::max(0, best - 1) / grid;
        double hi = t_star * std::min(grid, best + 1) / grid;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 80; ++it) {
            const double a = hi - g * (hi - lo);
            const double b = lo + g * (hi - lo);
            if (decay_envelope(a, n, alpha, mu) > decay_envelope(b, n, alpha, mu)) {
                hi = b;
            } else {
                lo = a;
            }
        }
        M = std::max(M, decay_envelope(0.5 * (lo + hi), n, alpha, mu));
    } else if (mu < alpha) {
        M = 1.0;
    }

    for (int k = 0; k < 200; ++k) {
        const double t = 2.0 * t_star * k / 199.0;
        const Matrix E = (A * t).exp();
        const double bound = M * std::exp(-mu * t);
        if (spectral_norm(E) > bound * (1.0 + 1e-10) + 1e-300) {
            std::ostringstream os;
            os << "estimate_M_mu: bound fails at t=" << t;
            throw Error(os.str());
        }
    }
    return {M, mu};
}

double c_tilde(int n, double alpha, double d_bound, bool include_gamma, double gamma1_bar) {
    if (n < 1) {
        throw ConfigError("c_tilde: n must be positive");
    }
    const double central = binomial(n, n / 2);
    double first = std::max(std::pow(alpha, n - 1), 1.0) * central * n * d_bound;
    if (include_gamma) {
        first *= 1.0 + gamma1_bar;
    }
    return first + std::max(std::pow(alpha, n), 1.0) * central;
}

void FeasibilityInputs::validate() const {
    if (m < 1 || n < 1 || !(alpha > 0.0)) {
        throw ConfigError("feasibility: need m, n >= 1 and alpha > 0");
    }
    if (!(d_bound >= 0.0) || !(gamma1_bar >= 0.0) || !(theta >= 0.0) || !(s_norm >= 0.0) ||
        !(s_star >= 0.0)) {
        throw ConfigError("feasibility: bounds must be nonnegative");
    }
    if (!(psi_n_inf > 0.0) || !(psi_n_inf <= psi_n_sup)) {
        throw ConfigError("feasibility: need 0 < psi_n_inf <= psi_n_sup");
    }
    if (!(delays.tau_u_dot_bar() < 1.0)) {
        throw InfeasibleDelayError("feasibility: sup tau_u' must be < 1");
    }
}

FeasibilityInputs feasibility_inputs(const Plant& plant, const ControllerConfig& cfg,
                                     const DelaySpec& delays) {
    FeasibilityInputs in;
    in.m = cfg.m();
    in.n = cfg.n();
    in.alpha = cfg.alpha();
    in.delays = delays;
    in.d_bound = plant.d_bound();
    in.gamma1_bar = plant.gamma1_bar();
    in.theta = spectral_norm(plant.input_matrix() - cfg.S());
    in.s_norm = spectral_norm(cfg.S());
    in.s_star = cfg.s_star();
    in.psi_n_inf = cfg.psi_n().infimum();
    in.psi_n_sup = cfg.psi_n().supremum(0.0);
    return in;
}

double assumption3_C(const FeasibilityInputs& in) {
    in.validate();
    const Matrix A = build_A(in.m, in.n, in.alpha);
    const double A_norm = spectral_norm(A);
    const DecayBound mb = estimate_M_mu(A, in.n, in.alpha, in.mu);
    const double ct = c_tilde(in.n, in.alpha, in.d_bound, in.include_gamma, in.gamma1_bar);
    return c_of_sum(in, A_norm, mb, ct, in.delays.tau_s() + in.delays.tau_u_bar());
}

FeasibilityReport check_feasibility(const FeasibilityInputs& in) {
    in.validate();
    FeasibilityReport r;
    const Matrix A = build_A(in.m, in.n, in.alpha);
    r.A_norm = spectral_norm(A);
    const DecayBound mb = estimate_M_mu(A, in.n, in.alpha, in.mu);
    r.M = mb.M;
    r.mu = mb.mu;
    r.c_tilde = c_tilde(in.n, in.alpha, in.d_bound, in.include_gamma, in.gamma1_bar);
    const double sum = in.delays.tau_s() + in.delays.tau_u_bar();
    r.C = c_of_sum(in, r.A_norm, mb, r.c_tilde, sum);
    r.lhs = in.theta + r.C;
    r.rhs = in.s_star * in.psi_n_inf / in.psi_n_sup;
    r.feasible = r.lhs < r.rhs;

    auto ok = [&](double D) { return in.theta + c_of_sum(in, r.A_norm, mb, r.c_tilde, D) < r.rhs; };
    if (!ok(0.0)) {
        r.max_delay_sum = 0.0;
        return r;
    }
    double lo = 0.0;
    double hi = 1.0;
    while (ok(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) {
            r.max_delay_sum = std::numeric_limits<double>::infinity();
            return r;
        }
    }
    while (hi - lo > 1e-7) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    r.max_delay_sum = lo;
    return r;
}

std::string to_json(const FeasibilityReport& r, int indent) {
    nlohmann::ordered_json j;
    j["A_norm"] = r.A_norm;
    j["M"] = r.M;
    j["mu"] = r.mu;
    j["c_tilde"] = r.c_tilde;
    j["C"] = r.C;
    j["lhs"] = r.lhs;
    j["rhs"] = r.rhs;
    j["feasible"] = r.feasible;
    if (std::isfinite(r.max_delay_sum)) {
        j["max_delay_sum"] = r.max_delay_sum;
    } else {
        j["max_delay_sum"] = "inf";
    }
    return j.dump(indent);
}

std::string to_table(const FeasibilityReport& r) {
    std::ostringstream os;
    os << std::setprecision(6);
    auto row = [&os](const char* key, const auto& v) {
        os << std::left << std::setw(24) << key << v << '\n';
    };
    row("||A||", r.A_norm);
    row("M", r.M);
    row("mu", r.mu);
    row("c_tilde", r.c_tilde);
    row("C", r.C);
    row("Theta + C", r.lhs);
    row("s* psi_inf / psi_sup", r.rhs);
    row("feasible", r.feasible ? "yes" : "no");
    row("max tau_s + tau_u_bar", r.max_delay_sum);
    return os.str();
}

}  // namespace dppc
