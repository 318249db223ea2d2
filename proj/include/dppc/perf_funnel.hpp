#pragma once

#include <functional>
#include <vector>

namespace dppc {

/// Performance envelope psi(t) > 0 with bounded derivative.
///
/// The built-in family is psi(t) = (lambda0 - lambda_inf) * exp(-rate * t) + lambda_inf,
/// evaluated by the same closed form for negative times (where it grows). Any other
/// W^{1,inf} envelope can be supplied through custom(), together with declared bounds that
/// are checked on a sample grid at construction.
class PerformanceFunction {
public:
    struct Bounds {
        double inf_value;       // inf psi on the declared domain, must be > 0
        double sup_value;       // sup psi
        double sup_abs_derivative;
    };

    PerformanceFunction() = default;

    static PerformanceFunction exponential(double lambda0, double lambda_inf, double rate);
    static PerformanceFunction constant(double value) { return exponential(value, value, 0.0); }

    /// Throws ConfigError when a sample on [t_from, t_to] breaks the declared bounds.
    static PerformanceFunction custom(std::function<double(double)> value,
                                      std::function<double(double)> derivative, Bounds bounds,
                                      double t_from, double t_to, int samples = 2000);

    double value(double t) const;
    double derivative(double t) const;
    double operator()(double t) const { return value(t); }

    /// inf over t >= 0.
    double infimum() const;
    /// sup over t >= t_from (t_from may be negative, e.g. -tau_s).
    double supremum(double t_from = 0.0) const;
    double derivative_bound(double t_from = 0.0) const;

    bool is_exponential() const { return !custom_value_; }
    double lambda0() const { return lambda0_; }
    double lambda_inf() const { return lambda_inf_; }
    double rate() const { return rate_; }

    bool operator==(const PerformanceFunction& other) const;

private:
    double lambda0_ = 1.0;
    double lambda_inf_ = 1.0;
    double rate_ = 0.0;
    std::function<double(double)> custom_value_;
    std::function<double(double)> custom_derivative_;
    Bounds bounds_{1.0, 1.0, 0.0};
};

/// Reference signal y_d with analytic derivative and declared sup bounds on |y_d|, |dy_d/dt|.
class ReferenceSignal {
public:
    struct Sinusoid {
        double amplitude;
        double omega;
        double phase = 0.0;
    };

    ReferenceSignal() : ReferenceSignal(constant(0.0)) {}

    static ReferenceSignal cosine(double amplitude, double omega, double phase = 0.0,
                                  double offset = 0.0);
    static ReferenceSignal constant(double value);
    /// offset + sum_k a_k sin(w_k t + phi_k)
    static ReferenceSignal sum_of_sines(std::vector<Sinusoid> terms, double offset = 0.0);
    static ReferenceSignal custom(std::function<double(double)> value,
                                  std::function<double(double)> derivative, double value_bound,
                                  double derivative_bound);

    double value(double t) const { return value_(t); }
    double derivative(double t) const { return derivative_(t); }
    double value_bound() const { return value_bound_; }
    double derivative_bound() const { return derivative_bound_; }

    /// Checks the declared bounds on an evenly spaced grid; throws ConfigError on failure.
    void validate(double t_from, double t_to, int samples = 2000) const;

private:
    ReferenceSignal(std::function<double(double)> value, std::function<double(double)> derivative,
                    double value_bound, double derivative_bound);

    std::function<double(double)> value_;
    std::function<double(double)> derivative_;
    double value_bound_;
    double derivative_bound_;
};

/// Dead-zone activation chi(s) = max(s - delta, 0) on [0, 1].
class Activation {
public:
    explicit Activation(double delta = 0.0);

    double delta() const { return delta_; }

    /// Values below 0 or above 1 by at most 10 machine epsilons are clamped (with a warning on
    /// stderr); anything further out throws DomainError.
    double operator()(double s) const;

private:
    double delta_;
};

}  // namespace dppc
