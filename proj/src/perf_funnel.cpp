#include "dppc/perf_funnel.hpp"

#include "dppc/errors.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace dppc {

PerformanceFunction PerformanceFunction::exponential(double lambda0, double lambda_inf,
                                                     double rate) {
    if (!(lambda_inf > 0.0)) {
        throw ConfigError("performance function: lambda_inf must be positive");
    }
    if (!(lambda0 >= lambda_inf)) {
        throw ConfigError("performance function: lambda0 must be >= lambda_inf");
    }
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw ConfigError("performance function: rate must be finite and nonnegative");
    }
    PerformanceFunction pf;
    pf.lambda0_ = lambda0;
    pf.lambda_inf_ = lambda_inf;
    pf.rate_ = rate;
    return pf;
}

PerformanceFunction PerformanceFunction::custom(std::function<double(double)> value,
                                                std::function<double(double)> derivative,
                                                Bounds bounds, double t_from, double t_to,
                                                int samples) {
    if (!value || !derivative) {
        throw ConfigError("performance function: custom envelope needs value and derivative");
    }
    if (!(bounds.inf_value > 0.0) || bounds.sup_value < bounds.inf_value) {
        throw ConfigError("performance function: declared bounds need 0 < inf <= sup");
    }
    if (samples < 2 || !(t_to > t_from)) {
        throw ConfigError("performance function: invalid validation grid");
    }
    for (int k = 0; k < samples; ++k) {
        const double t = t_from + (t_to - t_from) * k / (samples - 1);
        const double v = value(t);
        const double dv = derivative(t);
        if (!(v >= bounds.inf_value && v <= bounds.sup_value) ||
            !(std::abs(dv) <= bounds.sup_abs_derivative)) {
            std::ostringstream os;
            os << "performance function: declared bounds violated at t=" << t << " (psi=" << v
               << ", psi'=" << dv << ")";
            throw ConfigError(os.str());
        }
    }
    PerformanceFunction pf;
    pf.custom_value_ = std::move(value);
    pf.custom_derivative_ = std::move(derivative);
    pf.bounds_ = bounds;
    pf.lambda0_ = bounds.sup_value;
    pf.lambda_inf_ = bounds.inf_value;
    return pf;
}

double PerformanceFunction::value(double t) const {
    if (custom_value_) {
        return custom_value_(t);
    }
    return (lambda0_ - lambda_inf_) * std::exp(-rate_ * t) + lambda_inf_;
}

double PerformanceFunction::derivative(double t) const {
    if (custom_derivative_) {
        return custom_derivative_(t);
    }
    return -rate_ * (lambda0_ - lambda_inf_) * std::exp(-rate_ * t);
}

double PerformanceFunction::infimum() const {
    if (custom_value_) {
        return bounds_.inf_value;
    }
    return rate_ > 0.0 ? lambda_inf_ : lambda0_;
}

double PerformanceFunction::supremum(double t_from) const {
    if (custom_value_) {
        return bounds_.sup_value;
    }
    return value(t_from);
}

double PerformanceFunction::derivative_bound(double t_from) const {
    if (custom_value_) {
        return bounds_.sup_abs_derivative;
    }
    return std::abs(derivative(t_from));
}

bool PerformanceFunction::operator==(const PerformanceFunction& other) const {
    if (custom_value_ || other.custom_value_) {
        // callables cannot be compared
        return false;
    }
    return lambda0_ == other.lambda0_ && lambda_inf_ == other.lambda_inf_ &&
           rate_ == other.rate_;
}

ReferenceSignal::ReferenceSignal(std::function<double(double)> value,
                                 std::function<double(double)> derivative, double value_bound,
                                 double derivative_bound)
    : value_(std::move(value)),
      derivative_(std::move(derivative)),
      value_bound_(value_bound),
      derivative_bound_(derivative_bound) {}

ReferenceSignal ReferenceSignal::cosine(double amplitude, double omega, double phase,
                                        double offset) {
    return ReferenceSignal(
        [=](double t) { return offset + amplitude * std::cos(omega * t + phase); },
        [=](double t) { return -amplitude * omega * std::sin(omega * t + phase); },
        std::abs(offset) + std::abs(amplitude), std::abs(amplitude * omega));
}

ReferenceSignal ReferenceSignal::constant(double value) {
    return ReferenceSignal([=](double) { return value; }, [](double) { return 0.0; },
                           std::abs(value), 0.0);
}

ReferenceSignal ReferenceSignal::sum_of_sines(std::vector<Sinusoid> terms, double offset) {
    double vb = std::abs(offset);
    double db = 0.0;
    for (const auto& s : terms) {
        vb += std::abs(s.amplitude);
        db += std::abs(s.amplitude * s.omega);
    }
    auto value = [terms, offset](double t) {
        double v = offset;
        for (const auto& s : terms) {
            v += s.amplitude * std::sin(s.omega * t + s.phase);
        }
        return v;
    };
    auto derivative = [terms](double t) {
        double v = 0.0;
        for (const auto& s : terms) {
            v += s.amplitude * s.omega * std::cos(s.omega * t + s.phase);
        }
        return v;
    };
    return ReferenceSignal(value, derivative, vb, db);
}

ReferenceSignal ReferenceSignal::custom(std::function<double(double)> value,
                                        std::function<double(double)> derivative,
                                        double value_bound, double derivative_bound) {
    if (!value || !derivative) {
        throw ConfigError("reference: custom signal needs value and derivative");
    }
    return ReferenceSignal(std::move(value), std::move(derivative), value_bound,
                           derivative_bound);
}

void ReferenceSignal::validate(double t_from, double t_to, int samples) const {
    // Slack for rounding in the analytic bounds of built-in signals.
    const double slack = 1e-12;
    for (int k = 0; k < samples; ++k) {
        const double t = samples > 1 ? t_from + (t_to - t_from) * k / (samples - 1) : t_from;
        const double v = value(t);
        const double dv = derivative(t);
        if (!(std::abs(v) <= value_bound_ * (1 + slack) + slack) ||
            !(std::abs(dv) <= derivative_bound_ * (1 + slack) + slack)) {
            std::ostringstream os;
            os << "reference: declared bounds violated at t=" << t;
            throw ConfigError(os.str());
        }
    }
}

Activation::Activation(double delta) : delta_(delta) {
    if (!(delta >= 0.0 && delta < 1.0)) {
        throw ConfigError("activation: delta must lie in [0, 1)");
    }
}

double Activation::operator()(double s) const {
    constexpr double tol = 10.0 * std::numeric_limits<double>::epsilon();
    if (s < 0.0 || s > 1.0) {
        if (s < -tol || s > 1.0 + tol || std::isnan(s)) {
            std::ostringstream os;
            os << "activation: argument " << s << " outside [0, 1]";
            throw DomainError(os.str());
        }
        std::cerr << "warning: activation argument " << s << " clamped to [0, 1]\n";
        s = s < 0.0 ? 0.0 : 1.0;
    }
    return s <= delta_ ? 0.0 : s - delta_;
}

}  // namespace dppc
