#pragma once

// Plants of strict-feedback form with delayed input
//
//   x_{i,j}' = f_{i,j}(t, xbar_j) + x_{i,j+1},                     j < n
//   x_{i,n}' = f_{i,n}(t, xbar, eta) + sum_k g_{i,k}(t, xbar, eta) u_k(t - tau_u(t))
//   eta'     = h(t, xbar, eta)
//
// A plant integrates in its own (physical) coordinates and exposes a measurement map to the
// chain xbar = (x_{1,1}..x_{1,n}, ..., x_{m,1}..x_{m,n}).

#include "dppc/controller.hpp"

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dppc {

class Plant {
public:
    virtual ~Plant() = default;

    virtual std::string name() const = 0;
    virtual int m() const = 0;
    virtual int n() const = 0;
    virtual int q() const = 0;
    virtual std::size_t physical_dim() const = 0;

    /// Physical-coordinate right-hand side given the (already delayed) input.
    virtual void rhs(double t, std::span<const double> x, std::span<const double> u,
                     std::span<double> dx) const = 0;
    /// Measurement map to the chain states, row-major m*n.
    virtual void chain(std::span<const double> x, std::span<double> xbar) const = 0;

    /// Nominal control input matrix G (used to pick S and to bound ||G - S||).
    virtual Matrix input_matrix() const = 0;
    /// d with |f_{i,n}| <= d (||xbar|| + ||eta|| + 1); +inf if no such bound exists.
    virtual double d_bound() const = 0;
    /// Linear ISS gain bound gamma_1 of the internal dynamics.
    virtual double gamma1_bar() const = 0;
    /// False when the top-level drift grows faster than linearly (finite escape possible).
    virtual bool linear_growth() const { return true; }
};

struct MassOnCarParams {
    double m1 = 4.0;
    double m2 = 1.0;
    double k_spring = 2.0;
    double d_damper = 1.0;
    double beta = 0.0;

    /// Throws ConfigError on nonpositive coefficients or beta outside [0, pi/2).
    void validate() const;
    /// det of the mass matrix, m2 (m1 + m2 sin^2 beta).
    double mass_determinant() const;
};

/// Physical state (x, x', s, s') of the car/mass pair.
using MassOnCarState = std::array<double, 4>;

/// Returns (x', x'', s', s'') from the equations of motion.
MassOnCarState mass_on_car_physical_rhs(const MassOnCarState& state, double u,
                                        const MassOnCarParams& p);

/// Output y = x + s cos(beta) and its derivatives up to the relative degree:
/// (y, y') for beta = pi/4 and (y, y', y'') for beta = 0. Throws ConfigError otherwise.
std::vector<double> mass_on_car_chain(const MassOnCarParams& p, const MassOnCarState& state,
                                      double u = 0.0);

/// Total mechanical energy (kinetic + spring).
double mass_on_car_energy(const MassOnCarState& state, const MassOnCarParams& p);

/// Mass-on-car plant for one of the two supported inclinations.
class MassOnCarPlant : public Plant {
public:
    explicit MassOnCarPlant(MassOnCarParams params);

    std::string name() const override;
    int m() const override { return 1; }
    int n() const override { return n_; }
    int q() const override { return 4 - n_; }
    std::size_t physical_dim() const override { return 4; }
    void rhs(double t, std::span<const double> x, std::span<const double> u,
             std::span<double> dx) const override;
    void chain(std::span<const double> x, std::span<double> xbar) const override;
    Matrix input_matrix() const override;
    double d_bound() const override { return d_bound_; }
    double gamma1_bar() const override { return gamma1_bar_; }

    const MassOnCarParams& params() const { return params_; }

private:
    MassOnCarParams params_;
    int n_;
    double d_bound_;
    double gamma1_bar_;
};

/// beta = pi/4, relative degree 2, G = m2 sin^2(beta) / det (1/9 for the default masses).
std::shared_ptr<Plant> mass_on_car_case1(MassOnCarParams params = {});
/// beta = 0, relative degree 3, G = d / det (1/4 for the default parameters).
std::shared_ptr<Plant> mass_on_car_case2(MassOnCarParams params = {});

/// Plant whose physical state is (xbar, eta) directly.
class StrictFeedbackPlant : public Plant {
public:
    using TopDrift = std::function<void(double, std::span<const double> xbar,
                                        std::span<const double> eta, std::span<double> out)>;
    using InputMatrix =
        std::function<Matrix(double, std::span<const double> xbar, std::span<const double> eta)>;
    using Internal = TopDrift;

    struct Definition {
        std::string name;
        int m = 1;
        int n = 1;
        int q = 0;
        TopDrift f_top;     // f_{i,n}, length m
        InputMatrix g;      // m x m
        Internal h;         // length q (may be empty when q = 0)
        Matrix g_nominal;   // reported by input_matrix()
        double d_bound = 0.0;
        double gamma1_bar = 0.0;
        bool linear_growth = true;
    };

    explicit StrictFeedbackPlant(Definition def);

    std::string name() const override { return def_.name; }
    int m() const override { return def_.m; }
    int n() const override { return def_.n; }
    int q() const override { return def_.q; }
    std::size_t physical_dim() const override {
        return static_cast<std::size_t>(def_.m * def_.n + def_.q);
    }
    void rhs(double t, std::span<const double> x, std::span<const double> u,
             std::span<double> dx) const override;
    void chain(std::span<const double> x, std::span<double> xbar) const override;
    Matrix input_matrix() const override { return def_.g_nominal; }
    double d_bound() const override { return def_.d_bound; }
    double gamma1_bar() const override { return def_.gamma1_bar; }
    bool linear_growth() const override { return def_.linear_growth; }

private:
    Definition def_;
};

/// x' = x^2 + u(t - tau): scalar example with finite escape time 1/x0 under u = 0.
std::shared_ptr<Plant> blow_up_plant();

/// sup_t of the L1 norm of the impulse response of eta' = H eta + B xi, i.e.
/// int_0^inf ||exp(H s) B|| ds, by trapezoidal quadrature. H must be Hurwitz.
double linear_iss_gain(const Matrix& H, const Matrix& B);

/// Creates a built-in plant by scenario name ("mass_on_car_case1", "mass_on_car_case2",
/// "blow_up"). Throws ConfigError for unknown names.
std::shared_ptr<Plant> make_plant(const std::string& name, const MassOnCarParams& params = {});

}  // namespace dppc
