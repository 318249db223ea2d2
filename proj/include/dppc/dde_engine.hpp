#pragma once

// Method-of-steps integration for retarded systems y'(t) = F(t, y(t), y(t - lags), u(t - lags)).
//
// The integrator marches with classical RK4 on a fixed grid. Every committed step appends
// (t, y, y', u) to a HistoryBuffer, which answers delayed lookups with cubic Hermite dense
// output for the state and linear interpolation for the input. Delayed lookups inside a step
// only ever touch committed samples, which is what the precondition h <= lag_min / 2 buys.
// With a positive tolerance each grid interval is covered by step-doubling substeps instead,
// which keeps the barrier terms of the control law stable near the funnel boundary.

#include "dppc/errors.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace dppc {

/// Which one-sided limit to use at a jump of the input history (the switch-on at t = 0).
/// RK stages at the start of a step look forward (Right), the final stage looks back (Left).
enum class Side { Left, Right };

class HistoryBuffer {
public:
    using InitialHistory = std::function<void(double t, std::span<double> out)>;

    /// `phi` supplies the state on [t_start, t_origin]; the input is zero there.
    HistoryBuffer(std::size_t state_dim, std::size_t input_dim, double t_start,
                  InitialHistory phi, double t_origin = 0.0);

    std::size_t state_dim() const { return state_dim_; }
    std::size_t input_dim() const { return input_dim_; }
    double t_start() const { return t_start_; }
    double t_origin() const { return t_origin_; }
    /// Last committed time (t_origin before the first sample).
    double t_current() const { return times_.empty() ? t_origin_ : times_.back(); }
    std::size_t size() const { return times_.size(); }
    bool empty() const { return times_.empty(); }

    /// Appends a sample; times must be strictly increasing and start at t_origin.
    void append(double t, std::span<const double> state, std::span<const double> derivative,
                std::span<const double> input);

    /// Dense state at t in [t_start, t_current].
    void state(double t, std::span<double> out) const;
    std::vector<double> state(double t) const;

    /// Input at t: zero before t_origin (and at t_origin from the left), linear between
    /// samples otherwise.
    void input(double t, std::span<double> out, Side side = Side::Right) const;
    std::vector<double> input(double t, Side side = Side::Right) const;

    double time(std::size_t k) const { return times_[k]; }
    std::span<const double> state_sample(std::size_t k) const;
    std::span<const double> derivative_sample(std::size_t k) const;
    std::span<const double> input_sample(std::size_t k) const;

private:
    double snap(double t) const;
    std::size_t bracket(double t) const;

    std::size_t state_dim_;
    std::size_t input_dim_;
    double t_start_;
    double t_origin_;
    InitialHistory phi_;
    std::vector<double> times_;
    std::vector<double> states_;
    std::vector<double> derivatives_;
    std::vector<double> inputs_;
};

/// Interface of a retarded system handled by the integrator.
class DdeSystem {
public:
    virtual ~DdeSystem() = default;

    virtual std::size_t state_dim() const = 0;
    virtual std::size_t input_dim() const { return 0; }
    /// Smallest strictly positive lag used by any lookup; 0 if the system is delay free.
    virtual double min_positive_lag() const { return 0.0; }

    /// Evaluates y'(t) and the current input u(t). Lookups go through `history`.
    virtual void rhs(double t, std::span<const double> y, const HistoryBuffer& history, Side side,
                     std::span<double> dy, std::span<double> u) const = 0;
};

/// Adapter for systems given as a lambda.
class FunctionalDde : public DdeSystem {
public:
    using Rhs = std::function<void(double, std::span<const double>, const HistoryBuffer&, Side,
                                   std::span<double>, std::span<double>)>;

    FunctionalDde(std::size_t state_dim, std::size_t input_dim, double min_lag, Rhs rhs)
        : state_dim_(state_dim), input_dim_(input_dim), min_lag_(min_lag), rhs_(std::move(rhs)) {}

    std::size_t state_dim() const override { return state_dim_; }
    std::size_t input_dim() const override { return input_dim_; }
    double min_positive_lag() const override { return min_lag_; }
    void rhs(double t, std::span<const double> y, const HistoryBuffer& history, Side side,
             std::span<double> dy, std::span<double> u) const override {
        rhs_(t, y, history, side, dy, u);
    }

private:
    std::size_t state_dim_;
    std::size_t input_dim_;
    double min_lag_;
    Rhs rhs_;
};

struct IntegrationOptions {
    double t_end = 1.0;
    double h = 1e-3;
    double escape_threshold = 1e9;
    /// Width to which the escape bracket is refined by step halving.
    double escape_tolerance = 1e-3;
    /// Local error tolerance for substeps inside a grid interval. 0 keeps classical
    /// fixed-step RK4 with one step per grid interval; a positive value subdivides each
    /// interval by step doubling and rejects substeps whose stages leave the funnel.
    double tolerance = 0.0;
    /// Smallest substep, as a fraction of h, before a rejection becomes final.
    double min_substep_ratio = 0x1p-30;
};

enum class IntegrationStatus { Completed, FunnelViolation, Escape };

struct EscapeReport {
    double t_lo;  // last time with finite state below the threshold
    double t_hi;  // first attempted time at which the threshold was exceeded
    double estimate() const { return 0.5 * (t_lo + t_hi); }
};

struct IntegrationResult {
    IntegrationStatus status = IntegrationStatus::Completed;
    double t_final = 0.0;  // last committed time
    std::size_t steps = 0;
    std::optional<FunnelViolation> violation;
    std::optional<EscapeReport> escape;
};

/// Called after every committed sample. `grid_index` counts fixed-grid steps from t_origin;
/// it is -1 for substeps and for samples produced while refining an escape bracket.
using StepObserver = std::function<void(long grid_index, double t, std::span<const double> y,
                                        std::span<const double> u, const HistoryBuffer&)>;

/// Integrates from history.t_origin() to opts.t_end. The history must be empty on entry and is
/// left holding the committed trajectory. Throws ConfigError on an invalid step size.
IntegrationResult integrate(const DdeSystem& system, HistoryBuffer& history,
                            const IntegrationOptions& opts, const StepObserver& observer = {});

/// Number of fixed-grid steps used to cover `span` with step h (last step may be shorter).
long grid_steps(double span, double h);

}  // namespace dppc
