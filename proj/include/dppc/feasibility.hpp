#pragma once

// Delay budget certificate: the constants (A, M, mu, c~, C) and the inequality
// Theta + C < s* inf(psi_n) / sup(psi_n).

#include "dppc/closed_loop.hpp"
#include "dppc/controller.hpp"
#include "dppc/plants.hpp"

#include <optional>
#include <string>

namespace dppc {

/// Block diagonal of m copies of the n x n matrix with -alpha on the diagonal and 1 above it.
Matrix build_A(int m, int n, double alpha);

/// Largest singular value.
double spectral_norm(const Matrix& A);

struct DecayBound {
    double M;
    double mu;
};

/// (M, mu) with ||exp(A t)|| <= M exp(-mu t). n is the block size of A. mu defaults to alpha
/// for n = 1 and alpha/2 otherwise. The result is checked against the sampled matrix
/// exponential; a failed check throws Error.
DecayBound estimate_M_mu(const Matrix& A, int n, double alpha,
                         std::optional<double> mu = std::nullopt);

/// max{alpha^(n-1),1} C(n,n/2) n d [(1+gamma1)] + max{alpha^n,1} C(n,n/2)
double c_tilde(int n, double alpha, double d_bound, bool include_gamma, double gamma1_bar);

struct FeasibilityInputs {
    int m = 1;
    int n = 1;
    double alpha = 1.0;
    DelaySpec delays;
    double d_bound = 0.0;
    double gamma1_bar = 0.0;
    double theta = 0.0;  // sup ||G - S||
    double s_norm = 0.0;
    double s_star = 0.0;
    double psi_n_inf = 1.0;
    double psi_n_sup = 1.0;
    bool include_gamma = true;
    std::optional<double> mu;

    /// Throws ConfigError on negative bounds or psi_n_inf > psi_n_sup.
    void validate() const;
};

/// Inputs for a closed-loop design; Theta uses the plant's nominal input matrix.
FeasibilityInputs feasibility_inputs(const Plant& plant, const ControllerConfig& cfg,
                                     const DelaySpec& delays);

/// C for the given delays; throws InfeasibleDelayError when sup tau_u' >= 1.
double assumption3_C(const FeasibilityInputs& in);

struct FeasibilityReport {
    double A_norm = 0.0;
    double M = 0.0;
    double mu = 0.0;
    double c_tilde = 0.0;
    double C = 0.0;
    double lhs = 0.0;  // Theta + C
    double rhs = 0.0;  // s* psi_inf / psi_sup
    bool feasible = false;
    double max_delay_sum = 0.0;  // largest tau_s + tau_u_bar keeping the inequality

    bool operator==(const FeasibilityReport&) const = default;
};

FeasibilityReport check_feasibility(const FeasibilityInputs& in);

/// Structured-text (JSON) rendering.
std::string to_json(const FeasibilityReport& r, int indent = 2);
/// Two-column human-readable table.
std::string to_table(const FeasibilityReport& r);

}  // namespace dppc
