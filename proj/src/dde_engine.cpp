#include "dppc/dde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace dppc {

HistoryBuffer::HistoryBuffer(std::size_t state_dim, std::size_t input_dim, double t_start,
                             InitialHistory phi, double t_origin)
    : state_dim_(state_dim),
      input_dim_(input_dim),
      t_start_(t_start),
      t_origin_(t_origin),
      phi_(std::move(phi)) {
    if (!(t_start <= t_origin)) {
        throw ConfigError("history: t_start must not exceed t_origin");
    }
    if (!phi_) {
        throw ConfigError("history: initial history function required");
    }
}

void HistoryBuffer::append(double t, std::span<const double> state,
                           std::span<const double> derivative, std::span<const double> input) {
    if (state.size() != state_dim_ || derivative.size() != state_dim_ ||
        input.size() != input_dim_) {
        throw ConfigError("history: sample has wrong dimension");
    }
    if (times_.empty() ? t != t_origin_ : !(t > times_.back())) {
        std::ostringstream os;
        os << "history: sample time " << t << " out of order";
        throw ConfigError(os.str());
    }
    times_.push_back(t);
    states_.insert(states_.end(), state.begin(), state.end());
    derivatives_.insert(derivatives_.end(), derivative.begin(), derivative.end());
    inputs_.insert(inputs_.end(), input.begin(), input.end());
}

double HistoryBuffer::snap(double t) const {
    // Lookup times are formed as t - tau and may miss grid points by a few ulps.
    const double eps = 1e-12 * (1.0 + std::abs(t_current()));
    if (std::abs(t - t_origin_) < eps) {
        return t_origin_;
    }
    const double tc = t_current();
    if (t > tc && t - tc < eps) {
        return tc;
    }
    if (t < t_start_ && t_start_ - t < eps) {
        return t_start_;
    }
    return t;
}

std::size_t HistoryBuffer::bracket(double t) const {
    // largest k with times_[k] <= t
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return static_cast<std::size_t>(it - times_.begin()) - 1;
}

std::span<const double> HistoryBuffer::state_sample(std::size_t k) const {
    return {states_.data() + k * state_dim_, state_dim_};
}

std::span<const double> HistoryBuffer::derivative_sample(std::size_t k) const {
    return {derivatives_.data() + k * state_dim_, state_dim_};
}

std::span<const double> HistoryBuffer::input_sample(std::size_t k) const {
    return {inputs_.data() + k * input_dim_, input_dim_};
}

void HistoryBuffer::state(double t, std::span<double> out) const {
    t = snap(t);
    if (t < t_start_ || t > t_current() || std::isnan(t)) {
        throw MissingHistoryError(t, t_start_, t_current());
    }
    if (t < t_origin_ || times_.empty()) {
        phi_(t, out);
        return;
    }
    const std::size_t k = bracket(t);
    const auto y0 = state_sample(k);
    if (times_[k] == t) {
        std::copy(y0.begin(), y0.end(), out.begin());
        return;
    }
    const auto y1 = state_sample(k + 1);
    const auto d0 = derivative_sample(k);
    const auto d1 = derivative_sample(k + 1);
    const double h = times_[k + 1] - times_[k];
    const double s = (t - times_[k]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    for (std::size_t i = 0; i < state_dim_; ++i) {
        out[i] = h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i];
    }
}

std::vector<double> HistoryBuffer::state(double t) const {
    std::vector<double> out(state_dim_);
    state(t, out);
    return out;
}

void HistoryBuffer::input(double t, std::span<double> out, Side side) const {
    t = snap(t);
    if (t < t_start_ || t > t_current() || std::isnan(t)) {
        throw MissingHistoryError(t, t_start_, t_current());
    }
    if (t < t_origin_ || (t == t_origin_ && side == Side::Left)) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    if (times_.empty()) {
        throw MissingHistoryError(t, t_start_, t_current());
    }
    const std::size_t k = bracket(t);
    const auto u0 = input_sample(k);
    if (times_[k] == t) {
        std::copy(u0.begin(), u0.end(), out.begin());
        return;
    }
    const auto u1 = input_sample(k + 1);
    const double s = (t - times_[k]) / (times_[k + 1] - times_[k]);
    for (std::size_t i = 0; i < input_dim_; ++i) {
        out[i] = (1.0 - s) * u0[i] + s * u1[i];
    }
}

std::vector<double> HistoryBuffer::input(double t, Side side) const {
    std::vector<double> out(input_dim_);
    input(t, out, side);
    return out;
}

long grid_steps(double span, double h) {
    const double ratio = span / h;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) {
        return static_cast<long>(nearest);
    }
    return static_cast<long>(std::ceil(ratio));
}

namespace {

struct Workspace {
    explicit Workspace(std::size_t dim, std::size_t udim)
        : k2(dim), k3(dim), k4(dim), stage(dim), u(udim) {}
    std::vector<double> k2, k3, k4, stage, u;
};

// One classical RK4 step. k1 is the committed right-limit derivative at t.
void rk4_step(const DdeSystem& sys, const HistoryBuffer& hist, double t, double h,
              std::span<const double> y, std::span<const double> k1, std::span<double> y_next,
              Workspace& w) {
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) {
        w.stage[i] = y[i] + 0.5 * h * k1[i];
    }
    sys.rhs(t + 0.5 * h, w.stage, hist, Side::Right, w.k2, w.u);
    for (std::size_t i = 0; i < n; ++i) {
        w.stage[i] = y[i] + 0.5 * h * w.k2[i];
    }
    sys.rhs(t + 0.5 * h, w.stage, hist, Side::Right, w.k3, w.u);
    for (std::size_t i = 0; i < n; ++i) {
        w.stage[i] = y[i] + h * w.k3[i];
    }
    sys.rhs(t + h, w.stage, hist, Side::Left, w.k4, w.u);
    for (std::size_t i = 0; i < n; ++i) {
        y_next[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
}

bool escaped(std::span<const double> y, double threshold) {
    double sq = 0.0;
    for (double v : y) {
        if (!std::isfinite(v)) {
            return true;
        }
        sq += v * v;
    }
    return !(std::sqrt(sq) <= threshold);
}


// Step-doubling march: each grid interval is covered by substeps whose local error estimate
// |y_half - y_full| / 15 stays below the tolerance. Rejected substeps (error, funnel or escape)
// are halved; at the minimum substep a funnel or escape rejection becomes final.
template <class Commit>
IntegrationResult march_adaptive(const DdeSystem& sys, HistoryBuffer& history,
                                 const IntegrationOptions& opts, long steps,
                                 std::vector<double>& y, std::vector<double>& d,
                                 std::vector<double>& u, IntegrationResult& result,
                                 const Commit& commit) {
    const std::size_t dim = y.size();
    const double t0 = history.t_origin();
    const double tol = opts.tolerance;
    const double h_min = opts.h * opts.min_substep_ratio;
    Workspace w(dim, u.size());
    std::vector<double> y_full(dim), y_mid(dim), y_end(dim);
    std::vector<double> d_mid(dim), d_end(dim), u_mid(u.size()), u_end(u.size());
    double hs = opts.h;

    for (long k = 0; k < steps; ++k) {
        const double t_grid = (k + 1 == steps) ? opts.t_end : t0 + static_cast<double>(k + 1) * opts.h;
        double t = result.t_final;
        while (t < t_grid) {
            bool last = false;
            if (hs >= t_grid - t || t_grid - t - hs < 1e-9 * opts.h) {
                hs = t_grid - t;
                last = true;
            }
            enum class Outcome { Accept, Error, Violation, Escape } outcome = Outcome::Accept;
            std::optional<FunnelViolation> violation;
            double err = 0.0;
            try {
                rk4_step(sys, history, t, hs, y, d, y_full, w);
                rk4_step(sys, history, t, 0.5 * hs, y, d, y_mid, w);
                if (escaped(y_full, opts.escape_threshold) || escaped(y_mid, opts.escape_threshold)) {
                    outcome = Outcome::Escape;
                } else {
                    sys.rhs(t + 0.5 * hs, y_mid, history, Side::Right, d_mid, u_mid);
                    rk4_step(sys, history, t + 0.5 * hs, 0.5 * hs, y_mid, d_mid, y_end, w);
                    if (escaped(y_end, opts.escape_threshold)) {
                        outcome = Outcome::Escape;
                    } else {
                        for (std::size_t i = 0; i < dim; ++i) {
                            const double scale = tol * (1.0 + std::abs(y_end[i]));
                            err = std::max(err, std::abs(y_end[i] - y_full[i]) / 15.0 / scale);
                        }
                        if (err > 1.0) {
                            outcome = Outcome::Error;
                        } else {
                            sys.rhs(last ? t_grid : t + hs, y_end, history, Side::Right, d_end,
                                    u_end);
                        }
                    }
                }
            } catch (const FunnelViolation& v) {
                outcome = Outcome::Violation;
                violation = v;
            }

            if (outcome != Outcome::Accept) {
                if (hs > h_min) {
                    hs *= outcome == Outcome::Error
                              ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.5)
                              : 0.5;
                    continue;
                }
                if (outcome == Outcome::Violation) {
                    result.status = IntegrationStatus::FunnelViolation;
                    result.violation = violation;
                    return result;
                }
                if (outcome == Outcome::Escape) {
                    result.status = IntegrationStatus::Escape;
                    result.escape = EscapeReport{t, t + hs};
                    return result;
                }
                // Error estimate still above tolerance at the floor: accept.
                try {
                    sys.rhs(last ? t_grid : t + hs, y_end, history, Side::Right, d_end, u_end);
                } catch (const FunnelViolation& v) {
                    result.status = IntegrationStatus::FunnelViolation;
                    result.violation = v;
                    return result;
                }
            }

            y.swap(y_mid);
            d.swap(d_mid);
            u.swap(u_mid);
            commit(-1, t + 0.5 * hs);
            const double t_new = last ? t_grid : t + hs;
            y.swap(y_end);
            d.swap(d_end);
            u.swap(u_end);
            commit(last ? k + 1 : -1, t_new);
            ++result.steps;
            t = t_new;
            const double grow = err > 0.0 ? std::clamp(0.9 * std::pow(err, -0.2), 1.0, 2.0) : 2.0;
            hs = std::min(opts.h, hs * grow);
        }
    }
    return result;
}

}  // namespace

IntegrationResult integrate(const DdeSystem& sys, HistoryBuffer& history,
                            const IntegrationOptions& opts, const StepObserver& observer) {
    if (!(opts.h > 0.0) || !std::isfinite(opts.h)) {
        throw ConfigError("integrate: step h must be positive");
    }
    const double lag = sys.min_positive_lag();
    if (lag > 0.0 && opts.h > 0.5 * lag * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "integrate: step h=" << opts.h << " exceeds half the smallest delay (" << lag
           << ")";
        throw ConfigError(os.str());
    }
    if (!history.empty()) {
        throw ConfigError("integrate: history must be empty on entry");
    }
    if (history.state_dim() != sys.state_dim() || history.input_dim() != sys.input_dim()) {
        throw ConfigError("integrate: history dimensions do not match the system");
    }
    const double t0 = history.t_origin();
    if (!(opts.t_end >= t0)) {
        throw ConfigError("integrate: t_end precedes the initial time");
    }

    const std::size_t dim = sys.state_dim();
    IntegrationResult result;
    std::vector<double> y = history.state(t0);
    std::vector<double> d(dim);
    std::vector<double> u(sys.input_dim());
    std::vector<double> y_next(dim);
    Workspace w(dim, sys.input_dim());

    auto commit = [&](long index, double t) {
        history.append(t, y, d, u);
        result.t_final = t;
        if (observer) {
            observer(index, t, y, u, history);
        }
    };

    try {
        sys.rhs(t0, y, history, Side::Right, d, u);
    } catch (const FunnelViolation& v) {
        result.status = IntegrationStatus::FunnelViolation;
        result.violation = v;
        result.t_final = t0;
        return result;
    }
    if (escaped(y, opts.escape_threshold)) {
        result.status = IntegrationStatus::Escape;
        result.escape = EscapeReport{t0, t0};
        return result;
    }
    commit(0, t0);

    const long steps = grid_steps(opts.t_end - t0, opts.h);
    if (opts.tolerance > 0.0) {
        return march_adaptive(sys, history, opts, steps, y, d, u, result, commit);
    }
    for (long k = 0; k < steps; ++k) {
        const double t = t0 + static_cast<double>(k) * opts.h;
        const double t_next = (k + 1 == steps) ? opts.t_end : t0 + static_cast<double>(k + 1) * opts.h;
        try {
            rk4_step(sys, history, t, t_next - t, y, d, y_next, w);
            if (escaped(y_next, opts.escape_threshold)) {
                // Refine [t_lo, t_hi] by halving from the last good state.
                double t_lo = t;
                double t_hi = t_next;
                double hs = 0.5 * (t_hi - t_lo);
                while (t_hi - t_lo > opts.escape_tolerance && hs > 1e-14 * (1.0 + t_hi)) {
                    hs = std::min(hs, 0.5 * (t_hi - t_lo));
                    rk4_step(sys, history, t_lo, hs, y, d, y_next, w);
                    if (escaped(y_next, opts.escape_threshold)) {
                        t_hi = t_lo + hs;
                        hs *= 0.5;
                        continue;
                    }
                    y.swap(y_next);
                    t_lo += hs;
                    sys.rhs(t_lo, y, history, Side::Right, d, u);
                    commit(-1, t_lo);
                    ++result.steps;
                }
                result.status = IntegrationStatus::Escape;
                result.escape = EscapeReport{t_lo, t_hi};
                return result;
            }
            y.swap(y_next);
            sys.rhs(t_next, y, history, Side::Right, d, u);
        } catch (const FunnelViolation& v) {
            result.status = IntegrationStatus::FunnelViolation;
            result.violation = v;
            return result;
        }
        ++result.steps;
        commit(k + 1, t_next);
    }
    return result;
}

}  // namespace dppc
