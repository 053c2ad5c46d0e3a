#pragma once

/**
 * @file scheme.hpp
 * @brief Scharfetter-Gummel finite-volume discretization in space.
 *
 * Each dual cell [x_j, x_{j+1}] carries a two-point flux obtained by
 * solving the local constant-coefficient advection-diffusion problem
 * exactly, with coefficients frozen at an interpolated state. A central
 * finite-difference operator is provided for comparison.
 */

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "uptake/errors.hpp"
#include "uptake/model.hpp"

namespace uptake {

/// Uniform grid of n_cells cells on [0, 1]; nodes x_j = j dx, j = 0..n_cells.
struct Grid {
    std::size_t n_cells = 0;
    double dx = 0.0;

    Grid() = default;
    explicit Grid(std::size_t n_cells);
    /// Grid with spacing dx; throws DomainError unless 1/dx is an integer
    /// up to a relative 1e-9.
    static Grid with_spacing(double dx);

    std::size_t nodes() const noexcept { return n_cells + 1; }
    double x(std::size_t j) const noexcept { return static_cast<double>(j) * dx; }
    bool operator==(const Grid&) const = default;
};

/// Rules used to freeze a coefficient at the half point j+1/2.
enum class InterpolationRule {
    MeanOfU,              ///< f((u_l + u_r) / 2)
    ArithmeticMeanOfK,    ///< (f_l + f_r) / 2
    HarmonicMean,         ///< 2 f_l f_r / (f_l + f_r)
    HeronianMean,         ///< (f_l + sqrt(f_l f_r) + f_r) / 3
    GeometricMean,        ///< sqrt(f_l f_r)
    CubicPowerMean,       ///< cbrt((f_l^3 + f_r^3) / 2)
    QuadraticPowerMean,   ///< sqrt((f_l^2 + f_r^2) / 2)
};

inline constexpr InterpolationRule kAllInterpolationRules[] = {
    InterpolationRule::MeanOfU,       InterpolationRule::ArithmeticMeanOfK, InterpolationRule::HarmonicMean,
    InterpolationRule::HeronianMean,  InterpolationRule::GeometricMean,     InterpolationRule::CubicPowerMean,
    InterpolationRule::QuadraticPowerMean,
};

std::string to_string(InterpolationRule r);
InterpolationRule interpolation_rule_from_string(const std::string& name);

enum class SchemeKind { ScharfetterGummel, CentralFiniteDifference };

std::string to_string(SchemeKind k);
SchemeKind scheme_kind_from_string(const std::string& name);

/// B(theta) = theta / (exp(theta) - 1), B(0) = 1.
double bernoulli(double theta) noexcept;
/// dB/dtheta, series near 0.
double bernoulli_prime(double theta) noexcept;

/// Two-point flux (d/dx)(B(theta) u_right - B(-theta) u_left) - k_half with
/// theta = a dx / d. Throws DomainError for d <= 0 or dx <= 0.
double sg_flux(double u_left, double u_right, double a, double d, double k_half, double dx);

/// Combine the end-point values f_l = f(u_l), f_r = f(u_r) with one of the
/// mean rules (every rule except MeanOfU, which needs f itself).
double combine_half(InterpolationRule rule, double f_left, double f_right);

template <class F>
double interp_half(InterpolationRule rule, F&& f, double u_left, double u_right) {
    if (rule == InterpolationRule::MeanOfU) return f(0.5 * (u_left + u_right));
    return combine_half(rule, f(u_left), f(u_right));
}

/// du/dt for the state u at time t, written into dudt (same length).
/// Dirichlet nodes get 0; a homogeneous-Neumann end gets a half cell with
/// zero boundary flux.
void rhs_sg(std::span<const double> u, double t, const TransportSystem& sys, const Grid& grid,
            InterpolationRule rule, std::span<double> dudt);
std::vector<double> rhs_sg(const Field& field, const TransportSystem& sys, const Grid& grid,
                           InterpolationRule rule = InterpolationRule::MeanOfU);

/// Central differences in conservative form: arithmetic-mean d at the half
/// points and centered advective/gravity fluxes.
void rhs_central_fd(std::span<const double> u, double t, const TransportSystem& sys, const Grid& grid,
                    std::span<double> dudt);
std::vector<double> rhs_central_fd(const Field& field, const TransportSystem& sys, const Grid& grid);

/// Either operator, selected by kind (rule only applies to SG).
void rhs(SchemeKind kind, std::span<const double> u, double t, const TransportSystem& sys, const Grid& grid,
         InterpolationRule rule, std::span<double> dudt);

/// dx tanh(p dx / (2 d)) / p with p = a + k'_max; dx^2 / (2 d) when p = 0.
double cfl_dt_linear(double a, double d, double k_prime_max, double dx);

/// Largest dt with dt max_j D_j max_j[(P/D) coth(P dx / (2 D))] <= dx, where
/// D = Fo d and P = Fo (Pe (a + u a') + Bo k') at the half points. With
/// strict = true the max_j D_j factor is dropped.
double cfl_dt_nonlinear(std::span<const double> u, const TransportSystem& sys, const Grid& grid,
                        bool strict = false);
double cfl_dt_nonlinear(const Field& field, const TransportSystem& sys, const Grid& grid, bool strict = false);

/// Exact local profile on [x_j, x_j + dx] at offset x_local.
double reconstruct_cell(double u_left, double u_right, double a, double d, double dx, double x_local);

}  // namespace uptake
