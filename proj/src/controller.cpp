#include "dppc/controller.hpp"

#include "dppc/errors.hpp"

#include <cmath>
#include <sstream>

namespace dppc {

namespace {

double binomial(int n, int k) {
    if (k < 0 || k > n) {
        return 0.0;
    }
    double c = 1.0;
    for (int r = 1; r <= k; ++r) {
        c = c * (n - k + r) / r;
    }
    return c;
}

}  // namespace

SignDefiniteness sign_definiteness(const Matrix& S) {
    if (S.rows() == 0 || S.rows() != S.cols()) {
        throw ConfigError("S must be a nonempty square matrix");
    }
    const Matrix sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo > 0.0) {
        return {+1, lo};
    }
    if (hi < 0.0) {
        return {-1, -hi};
    }
    std::ostringstream os;
    os << "S is not sign definite (symmetric part has eigenvalues in [" << lo << ", " << hi
       << "])";
    throw NotSignDefiniteError(os.str());
}

ControllerConfig::ControllerConfig(ControllerParams p)
    : m_(static_cast<int>(p.S.rows())),
      n_(static_cast<int>(p.k.cols()) + 1),
      S_(std::move(p.S)),
      sigma_(0),
      s_star_(0.0),
      alpha_(p.alpha),
      k_(std::move(p.k)),
      k_n_(p.k_n),
      activation_(p.delta),
      psi_(std::move(p.psi)),
      psi_n_(std::move(p.psi_n)) {
    if (k_.size() == 0) {
        k_.resize(m_, 0);
    }
    const SignDefiniteness sd = sign_definiteness(S_);
    sigma_ = sd.sigma;
    s_star_ = sd.s_star;
    if (p.sigma && *p.sigma != sigma_) {
        throw NotSignDefiniteError("sigma override disagrees with the sign of S");
    }
    if (p.s_star) {
        if (!(*p.s_star > 0.0) || *p.s_star > sd.s_star * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "s_star override " << *p.s_star << " not in (0, " << sd.s_star << "]";
            throw NotSignDefiniteError(os.str());
        }
        s_star_ = *p.s_star;
    }
    if (k_.rows() != m_) {
        throw ConfigError("gain matrix k must have m rows");
    }
    if (!(alpha_ > 0.0) || !(k_n_ > 0.0)) {
        throw ConfigError("alpha and k_n must be positive");
    }
    if (k_.size() > 0 && !(k_.minCoeff() > 0.0)) {
        throw ConfigError("all gains k_{i,j} must be positive");
    }
    if (static_cast<int>(psi_.size()) != m_) {
        throw ConfigError("psi must have one row per output");
    }
    for (const auto& row : psi_) {
        if (static_cast<int>(row.size()) != n_ - 1) {
            throw ConfigError("each psi row must hold n-1 envelopes");
        }
        for (const auto& pf : row) {
            if (!(pf.infimum() > 0.0)) {
                throw ConfigError("auxiliary envelopes must be bounded away from zero");
            }
        }
    }
}

const PerformanceFunction& ControllerConfig::envelope(int row, int level) const {
    return level == n_ ? psi_n_ : psi_[row][level - 1];
}

ControllerConfig ControllerConfig::with_gains(const Matrix& k, double k_n) const {
    ControllerConfig copy = *this;
    if (k.rows() != k_.rows() || k.cols() != k_.cols()) {
        throw ConfigError("replacement gains have the wrong shape");
    }
    if ((k.size() > 0 && !(k.minCoeff() > 0.0)) || !(k_n > 0.0)) {
        throw ConfigError("replacement gains must be positive");
    }
    copy.k_ = k;
    copy.k_n_ = k_n;
    return copy;
}

double binom_correction(int level, double alpha, std::span<const double> row) {
    const int j = level;
    double sum = 0.0;
    for (int k = 1; k <= j; ++k) {
        sum += binomial(j - 1, j - k) * std::pow(-alpha, j - k) * row[k - 1];
    }
    return sum;
}

Vector compute_z1(const Vector& x1_delayed, const Vector& yd_delayed, const Vector& I_level1,
                  const Vector& psi1_delayed) {
    return ((x1_delayed - yd_delayed + I_level1).array() / psi1_delayed.array()).matrix();
}

Vector compute_zj(int level, const Vector& xj_delayed, const Vector& a_prev, const RowMatrix& I,
                  double alpha, const Vector& psij_delayed) {
    const Eigen::Index m = xj_delayed.size();
    Vector z(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::span<const double> row(I.row(i).data(), static_cast<std::size_t>(I.cols()));
        z(i) = (xj_delayed(i) - a_prev(i) + binom_correction(level, alpha, row)) /
               psij_delayed(i);
    }
    return z;
}

Vector compute_a(int level, const Vector& z, const Vector& k) {
    Vector a(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (!(std::abs(z(i)) < 1.0)) {
            throw FunnelViolation(static_cast<int>(i) + 1, level, z(i));
        }
        a(i) = -k(i) * z(i) / (1.0 - z(i) * z(i));
    }
    return a;
}

Vector compute_u(const Vector& z_n, const ControllerConfig& cfg) {
    const double norm = z_n.norm();
    if (!(norm < 1.0)) {
        throw FunnelViolation(0, cfg.n(), norm);
    }
    const double gain = cfg.sigma() * cfg.k_n() * cfg.activation()(norm) / (1.0 - norm * norm);
    return -gain * z_n;
}

Vector correction_rhs(const Vector& I, const Vector& u_now, const Vector& u_delayed,
                      const ControllerConfig& cfg) {
    const int m = cfg.m();
    const int n = cfg.n();
    const double alpha = cfg.alpha();
    const Vector forcing = cfg.S() * (u_now - u_delayed);
    Vector dI(m * n);
    for (int i = 0; i < m; ++i) {
        const int base = i * n;
        for (int j = 0; j < n - 1; ++j) {
            dI(base + j) = I(base + j + 1) - alpha * I(base + j);
        }
        dI(base + n - 1) = -alpha * I(base + n - 1) + forcing(i);
    }
    return dI;
}

ControllerOutput controller_step(const ControllerConfig& cfg, double t, double tau_s,
                                 std::span<const double> xbar_delayed, std::span<const double> I,
                                 const std::vector<ReferenceSignal>& refs, bool use_correction) {
    const int m = cfg.m();
    const int n = cfg.n();
    const Eigen::Map<const RowMatrix> X(xbar_delayed.data(), m, n);
    const RowMatrix Imat =
        use_correction ? RowMatrix(Eigen::Map<const RowMatrix>(I.data(), m, n))
                       : RowMatrix(RowMatrix::Zero(m, n));
    const double td = t - tau_s;

    ControllerOutput out{Matrix(m, n), Matrix(m, n - 1), Vector(m)};
    Vector yd(m);
    Vector psi(m);
    for (int i = 0; i < m; ++i) {
        yd(i) = refs[static_cast<std::size_t>(i)].value(td);
        psi(i) = cfg.envelope(i, 1).value(td);
    }
    try {
        out.z.col(0) = compute_z1(X.col(0), yd, Imat.col(0), psi);
        for (int level = 2; level <= n; ++level) {
            const int j = level - 1;
            out.a.col(j - 1) = compute_a(j, out.z.col(j - 1), cfg.gains().col(j - 1));
            for (int i = 0; i < m; ++i) {
                psi(i) = cfg.envelope(i, level).value(td);
            }
            out.z.col(j) = compute_zj(level, X.col(j), out.a.col(j - 1), Imat, cfg.alpha(), psi);
        }
        out.u = compute_u(out.z.col(n - 1), cfg);
    } catch (const FunnelViolation& v) {
        throw v.at_time(t);
    }
    return out;
}

}  // namespace dppc
