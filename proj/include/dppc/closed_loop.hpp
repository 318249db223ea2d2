#pragma once

// Plant + delay-compensated controller + correction dynamics as one retarded system.

#include "dppc/controller.hpp"
#include "dppc/dde_engine.hpp"
#include "dppc/plants.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace dppc {

/// Constant state-measurement delay tau_s and input delay tau_u(t) with bounds
/// tau_u(t) <= tau_u_bar and tau_u'(t) <= tau_u_dot_bar < 1.
class DelaySpec {
public:
    DelaySpec() = default;

    static DelaySpec constant(double tau_s, double tau_u);
    /// tau_u(t) = mean + amplitude sin(omega t), amplitude <= mean.
    static DelaySpec sinusoidal(double tau_s, double mean, double amplitude, double omega);

    double tau_s() const { return tau_s_; }
    double tau_u(double t) const;
    double tau_u_dot(double t) const;
    double tau_u_bar() const { return mean_ + std::abs(amplitude_); }
    double tau_u_inf() const { return mean_ - std::abs(amplitude_); }
    double tau_u_dot_bar() const { return std::abs(amplitude_ * omega_); }
    bool input_delay_identically_zero() const { return mean_ == 0.0 && amplitude_ == 0.0; }
    bool is_constant() const { return amplitude_ == 0.0 || omega_ == 0.0; }

    /// Smallest strictly positive lag among tau_s, tau_u and tau_s + tau_u; 0 if none.
    double min_positive_lag() const;

    /// Grid check of 0 <= tau_u <= tau_u_bar and tau_u' <= tau_u_dot_bar < 1 on [0, t_end].
    void validate(double t_end, int samples = 2000) const;

    /// True if 0, tau_s and tau_s + tau_u(0) are integer multiples of h (constant tau_u).
    bool aligned_with(double h) const;

private:
    double tau_s_ = 0.0;
    double mean_ = 0.0;
    double amplitude_ = 0.0;
    double omega_ = 0.0;
};

/// Constant initial history for the physical state on [-tau_s - tau_u_bar, 0].
using InitialHistoryFn = std::function<void(double t, std::span<double> out)>;

enum class ControlMode {
    Corrected,    // the delay-compensated law with correction states I
    Uncorrected,  // same law with I = 0 (baseline / nominal prescribed performance)
    OpenLoop,     // u = 0
};

/// Closed loop state layout: [physical plant state | I (m*n, row-major)].
class ClosedLoop : public DdeSystem {
public:
    ClosedLoop(std::shared_ptr<const Plant> plant, ControllerConfig cfg, DelaySpec delays,
               std::vector<ReferenceSignal> refs, InitialHistoryFn phi,
               ControlMode mode = ControlMode::Corrected);

    std::size_t state_dim() const override { return plant_dim_ + correction_dim_; }
    std::size_t input_dim() const override { return static_cast<std::size_t>(cfg_.m()); }
    double min_positive_lag() const override { return delays_.min_positive_lag(); }

    void rhs(double t, std::span<const double> y, const HistoryBuffer& history, Side side,
             std::span<double> dy, std::span<double> u) const override;

    /// Fresh history buffer starting at -tau_s - tau_u_bar with I = 0 and u = 0 before 0.
    HistoryBuffer make_history() const;

    /// Measured chain x(t - tau_s), taken from `y` when tau_s = 0.
    std::vector<double> delayed_chain(double t, std::span<const double> y,
                                      const HistoryBuffer& history) const;

    /// (u(t - tau_u(t)), u(t - tau_s - tau_u(t - tau_s))); lookups at times <= 0 give 0.
    /// `u_now` is used for zero lags.
    std::pair<Vector, Vector> delayed_input(double t, const HistoryBuffer& history,
                                            const Vector& u_now, Side side = Side::Right) const;

    /// Controller signals at a committed sample.
    ControllerOutput controller_at(double t, std::span<const double> y,
                                   const HistoryBuffer& history) const;

    /// Checks |z_{i,j}| < 1 and ||z_n|| < 1 on `points` grid points of [-tau_u_bar, 0] with
    /// I = 0. Throws ConfigError naming the first offending time.
    void check_admissibility(int points = 1000) const;

    const Plant& plant() const { return *plant_; }
    const ControllerConfig& config() const { return cfg_; }
    const DelaySpec& delays() const { return delays_; }
    const std::vector<ReferenceSignal>& references() const { return refs_; }
    ControlMode mode() const { return mode_; }
    std::size_t plant_dim() const { return plant_dim_; }

private:
    std::shared_ptr<const Plant> plant_;
    ControllerConfig cfg_;
    DelaySpec delays_;
    std::vector<ReferenceSignal> refs_;
    InitialHistoryFn phi_;
    ControlMode mode_;
    std::size_t plant_dim_;
    std::size_t correction_dim_;
};

}  // namespace dppc
