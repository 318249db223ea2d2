#pragma once

// Delay-compensated prescribed-performance control law.
//
// Indices follow the control law: row i = 1..m (output channel), level j = 1..n (position in
// the integrator chain). Functions that take a level use that 1-based convention; storage is
// 0-based. Flattened chain states and correction states are row-major, i.e.
// (x_{1,1}, ..., x_{1,n}, ..., x_{m,1}, ..., x_{m,n}).

#include "dppc/perf_funnel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace dppc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SignDefiniteness {
    int sigma;      // +1 or -1
    double s_star;  // min eigenvalue of sigma*(S + S^T)/2
};

/// Chooses sigma so that the symmetric part of sigma*S is positive definite.
/// Throws NotSignDefiniteError if neither sign works.
SignDefiniteness sign_definiteness(const Matrix& S);

struct ControllerParams {
    Matrix S;
    double alpha = 1.0;
    Matrix k;  // m x (n-1) gains k_{i,j}
    double k_n = 1.0;
    double delta = 0.0;
    std::vector<std::vector<PerformanceFunction>> psi;  // m rows of n-1 envelopes psi_{i,j}
    PerformanceFunction psi_n;                          // shared by every row at level n
    std::optional<int> sigma;                           // overrides, checked against S
    std::optional<double> s_star;
};

/// Validated, immutable design parameters.
class ControllerConfig {
public:
    explicit ControllerConfig(ControllerParams params);

    int m() const { return m_; }
    int n() const { return n_; }
    const Matrix& S() const { return S_; }
    int sigma() const { return sigma_; }
    double s_star() const { return s_star_; }
    double alpha() const { return alpha_; }
    /// k_{i,j}, 0-based row, 1-based level j < n.
    double gain(int row, int level) const { return k_(row, level - 1); }
    const Matrix& gains() const { return k_; }
    double k_n() const { return k_n_; }
    const Activation& activation() const { return activation_; }
    /// psi_{i,j}; level n returns the shared psi_n.
    const PerformanceFunction& envelope(int row, int level) const;
    const PerformanceFunction& psi_n() const { return psi_n_; }

    /// Same design with different gains (used by the baseline comparison controller).
    ControllerConfig with_gains(const Matrix& k, double k_n) const;

private:
    int m_;
    int n_;
    Matrix S_;
    int sigma_;
    double s_star_;
    double alpha_;
    Matrix k_;
    double k_n_;
    Activation activation_;
    std::vector<std::vector<PerformanceFunction>> psi_;
    PerformanceFunction psi_n_;
};

/// sum_{k=1}^{j} C(j-1, j-k) (-alpha)^{j-k} I_k over the first j entries of `row`.
double binom_correction(int level, double alpha, std::span<const double> row);

/// z_{i,1} = (x_{i,1}(t-tau_s) - y_{d,i}(t-tau_s) + I_{i,1}(t)) / psi_{i,1}(t-tau_s)
Vector compute_z1(const Vector& x1_delayed, const Vector& yd_delayed, const Vector& I_level1,
                  const Vector& psi1_delayed);

/// z_{i,j} for 2 <= j <= n; `I` is the m x n correction matrix.
Vector compute_zj(int level, const Vector& xj_delayed, const Vector& a_prev, const RowMatrix& I,
                  double alpha, const Vector& psij_delayed);

/// a_{i,j} = -k_{i,j} z_{i,j} / (1 - z_{i,j}^2). Throws FunnelViolation if |z_{i,j}| >= 1.
Vector compute_a(int level, const Vector& z, const Vector& k);

/// u_i = -sigma k_n chi(|z_n|) z_{i,n} / (1 - |z_n|^2). Throws FunnelViolation if |z_n| >= 1.
Vector compute_u(const Vector& z_n, const ControllerConfig& cfg);

/// Right-hand side of the correction dynamics, flattened row-major (length m*n).
Vector correction_rhs(const Vector& I, const Vector& u_now, const Vector& u_delayed,
                      const ControllerConfig& cfg);

struct ControllerOutput {
    Matrix z;  // m x n
    Matrix a;  // m x (n-1)
    Vector u;  // m
};

/// Evaluates z_1 -> a_1 -> z_2 -> ... -> z_n -> u at time t.
///
/// `xbar_delayed` is the measured chain x(t - tau_s) (row-major, m*n) and `I` the current
/// correction state. With `use_correction == false` the chain is built with I = 0, which is
/// the uncorrected prescribed-performance law. Funnel violations are rethrown stamped with t.
ControllerOutput controller_step(const ControllerConfig& cfg, double t, double tau_s,
                                 std::span<const double> xbar_delayed, std::span<const double> I,
                                 const std::vector<ReferenceSignal>& refs,
                                 bool use_correction = true);

}  // namespace dppc
