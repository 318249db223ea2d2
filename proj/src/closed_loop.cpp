#include "dppc/closed_loop.hpp"

#include "dppc/errors.hpp"

#include <cmath>
#include <sstream>

namespace dppc {

DelaySpec DelaySpec::constant(double tau_s, double tau_u) {
    return sinusoidal(tau_s, tau_u, 0.0, 0.0);
}

DelaySpec DelaySpec::sinusoidal(double tau_s, double mean, double amplitude, double omega) {
    if (!(tau_s >= 0.0) || !(mean >= 0.0) || !std::isfinite(tau_s) || !std::isfinite(mean)) {
        throw ConfigError("delays: tau_s and tau_u must be finite and nonnegative");
    }
    if (!(std::abs(amplitude) <= mean) || !std::isfinite(omega)) {
        throw ConfigError("delays: sinusoidal tau_u needs |amplitude| <= mean");
    }
    DelaySpec d;
    d.tau_s_ = tau_s;
    d.mean_ = mean;
    d.amplitude_ = amplitude;
    d.omega_ = omega;
    if (!(d.tau_u_dot_bar() < 1.0)) {
        throw InfeasibleDelayError("delays: sup tau_u' must be < 1");
    }
    return d;
}

double DelaySpec::tau_u(double t) const { return mean_ + amplitude_ * std::sin(omega_ * t); }

double DelaySpec::tau_u_dot(double t) const {
    return amplitude_ * omega_ * std::cos(omega_ * t);
}

double DelaySpec::min_positive_lag() const {
    double lag = 0.0;
    auto consider = [&lag](double v) {
        if (v > 0.0 && (lag == 0.0 || v < lag)) {
            lag = v;
        }
    };
    consider(tau_s_);
    if (!input_delay_identically_zero()) {
        consider(tau_u_inf());
    }
    consider(tau_s_ + tau_u_inf());
    return lag;
}

void DelaySpec::validate(double t_end, int samples) const {
    if (!input_delay_identically_zero() && !(tau_u_inf() > 0.0)) {
        throw ConfigError(
            "delays: a time-varying tau_u must stay bounded away from zero (mean > |amplitude|)");
    }
    const double slack = 1e-12;
    for (int k = 0; k < samples; ++k) {
        const double t = samples > 1 ? t_end * k / (samples - 1) : 0.0;
        const double v = tau_u(t);
        if (v < -slack || v > tau_u_bar() + slack || tau_u_dot(t) > tau_u_dot_bar() + slack) {
            std::ostringstream os;
            os << "delays: tau_u bounds violated at t=" << t;
            throw ConfigError(os.str());
        }
    }
}

bool DelaySpec::aligned_with(double h) const {
    if (!is_constant()) {
        return false;
    }
    auto multiple = [h](double v) {
        const double r = v / h;
        return std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, r);
    };
    return multiple(tau_s_) && multiple(tau_s_ + tau_u(0.0)) && multiple(tau_u(0.0));
}

ClosedLoop::ClosedLoop(std::shared_ptr<const Plant> plant, ControllerConfig cfg, DelaySpec delays,
                       std::vector<ReferenceSignal> refs, InitialHistoryFn phi, ControlMode mode)
    : plant_(std::move(plant)),
      cfg_(std::move(cfg)),
      delays_(delays),
      refs_(std::move(refs)),
      phi_(std::move(phi)),
      mode_(mode),
      plant_dim_(plant_->physical_dim()),
      correction_dim_(static_cast<std::size_t>(cfg_.m() * cfg_.n())) {
    if (plant_->m() != cfg_.m() || plant_->n() != cfg_.n()) {
        std::ostringstream os;
        os << "closed loop: controller dimensions (m=" << cfg_.m() << ", n=" << cfg_.n()
           << ") do not match plant " << plant_->name() << " (m=" << plant_->m()
           << ", n=" << plant_->n() << ")";
        throw ConfigError(os.str());
    }
    if (static_cast<int>(refs_.size()) != cfg_.m()) {
        throw ConfigError("closed loop: one reference signal per output required");
    }
    if (!phi_) {
        throw ConfigError("closed loop: initial history required");
    }
}

HistoryBuffer ClosedLoop::make_history() const {
    const std::size_t p = plant_dim_;
    auto phi = [p, f = phi_](double t, std::span<double> out) {
        f(t, out.first(p));
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(p), out.end(), 0.0);
    };
    return HistoryBuffer(state_dim(), input_dim(), -delays_.tau_s() - delays_.tau_u_bar(), phi);
}

std::vector<double> ClosedLoop::delayed_chain(double t, std::span<const double> y,
                                              const HistoryBuffer& history) const {
    std::vector<double> xbar(correction_dim_);
    if (delays_.tau_s() == 0.0) {
        plant_->chain(y.first(plant_dim_), xbar);
    } else {
        const std::vector<double> past = history.state(t - delays_.tau_s());
        plant_->chain(std::span<const double>(past).first(plant_dim_), xbar);
    }
    return xbar;
}

std::pair<Vector, Vector> ClosedLoop::delayed_input(double t, const HistoryBuffer& history,
                                                    const Vector& u_now, Side side) const {
    const std::size_t m = input_dim();
    std::pair<Vector, Vector> out{Vector(m), Vector(m)};
    if (delays_.input_delay_identically_zero()) {
        out.first = u_now;
    } else {
        history.input(t - delays_.tau_u(t), {out.first.data(), m}, side);
    }
    const double lag = delays_.tau_s() + delays_.tau_u(t - delays_.tau_s());
    if (lag == 0.0) {
        out.second = u_now;
    } else {
        history.input(t - lag, {out.second.data(), m}, side);
    }
    return out;
}

void ClosedLoop::rhs(double t, std::span<const double> y, const HistoryBuffer& history, Side side,
                     std::span<double> dy, std::span<double> u) const {
    const std::size_t p = plant_dim_;
    const auto I = y.subspan(p, correction_dim_);
    Vector u_now = Vector::Zero(cfg_.m());
    if (mode_ != ControlMode::OpenLoop) {
        const std::vector<double> xd = delayed_chain(t, y, history);
        u_now = controller_step(cfg_, t, delays_.tau_s(), xd, I, refs_,
                                mode_ == ControlMode::Corrected)
                    .u;
    }
    const auto [u_plant, u_corr] = delayed_input(t, history, u_now, side);
    plant_->rhs(t, y.first(p), {u_plant.data(), input_dim()}, dy.first(p));
    auto dI = dy.subspan(p, correction_dim_);
    if (mode_ == ControlMode::Corrected) {
        const Vector Ivec = Eigen::Map<const Vector>(I.data(), static_cast<Eigen::Index>(I.size()));
        const Vector rate = correction_rhs(Ivec, u_now, u_corr, cfg_);
        std::copy(rate.data(), rate.data() + rate.size(), dI.begin());
    } else {
        std::fill(dI.begin(), dI.end(), 0.0);
    }
    std::copy(u_now.data(), u_now.data() + u_now.size(), u.begin());
}

ControllerOutput ClosedLoop::controller_at(double t, std::span<const double> y,
                                           const HistoryBuffer& history) const {
    const std::vector<double> xd = delayed_chain(t, y, history);
    return controller_step(cfg_, t, delays_.tau_s(), xd, y.subspan(plant_dim_, correction_dim_),
                           refs_, mode_ == ControlMode::Corrected);
}

void ClosedLoop::check_admissibility(int points) const {
    if (mode_ == ControlMode::OpenLoop) {
        return;
    }
    const double t0 = -delays_.tau_u_bar();
    const int count = t0 < 0.0 ? std::max(points, 2) : 1;
    std::vector<double> phys(plant_dim_);
    std::vector<double> xbar(correction_dim_);
    const std::vector<double> zeros(correction_dim_, 0.0);
    for (int k = 0; k < count; ++k) {
        const double t = count > 1 ? t0 - t0 * k / (count - 1) : 0.0;
        phi_(t - delays_.tau_s(), phys);
        plant_->chain(phys, xbar);
        try {
            controller_step(cfg_, t, delays_.tau_s(), xbar, zeros, refs_, false);
        } catch (const FunnelViolation& v) {
            std::ostringstream os;
            os << "initial history is not admissible: " << v.what();
            throw ConfigError(os.str());
        }
    }
}

}  // namespace dppc
