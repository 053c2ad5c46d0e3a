#pragma once

/**
 * @file integrate.hpp
 * @brief Time integration of the semi-discrete system.
 *
 * Two integrators: explicit Euler with a fixed step or a step recomputed
 * from the CFL bound on every step, and a variable-step, variable-order
 * (1-4) Adams-Bashforth-Moulton predictor-corrector in PECE mode.
 */

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "uptake/model.hpp"
#include "uptake/scheme.hpp"

namespace uptake {

struct IntegratorSpec {
    enum class Kind { EulerExplicit, AdaptiveMultistep };

    Kind kind = Kind::AdaptiveMultistep;
    double t_end = 1.0;
    /// Euler step; 0 selects the CFL-derived step (recomputed every step).
    double dt = 0.0;
    double safety_factor = 0.9;
    /// Drop the max_j d_j factor from the nonlinear CFL bound.
    bool cfl_strict = false;
    double abs_tol = 1e-4;
    double rel_tol = 1e-4;
    double initial_dt = 1e-6;
    int max_order = 4;

    static IntegratorSpec euler(double dt, double t_end);
    static IntegratorSpec euler_auto(double t_end, double safety_factor = 0.9);
    static IntegratorSpec adaptive(double abs_tol, double rel_tol, double t_end);

    bool is_euler() const noexcept { return kind == Kind::EulerExplicit; }
    /// Throws DomainError on non-positive tolerances, negative t_end, etc.
    void validate() const;
    bool operator==(const IntegratorSpec&) const = default;
};

/// Generic first-order system y' = f(t, y) with pinned components.
struct OdeProblem {
    std::size_t size = 0;
    std::function<void(double t, std::span<const double> y, std::span<double> dydt)> rhs;
    /// Overwrites pinned components (Dirichlet nodes) with their values at t.
    std::function<void(double t, std::span<double> y)> impose;
    /// Largest stable explicit Euler step at (t, y), used by the auto step.
    std::function<double(double t, std::span<const double> y)> max_stable_dt;
};

struct OdeSolution {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::size_t step_count = 0;
    std::size_t rejected_steps = 0;
    std::size_t rhs_eval_count = 0;
};

/// Integrates from t = 0 and reports the state at each sample time (linear
/// interpolation between accepted steps). Throws NumericalBlowup when an
/// Euler step produces a non-finite value and StiffnessError when the
/// adaptive step falls below 1e-12.
OdeSolution solve_ode(const OdeProblem& problem, const IntegratorSpec& spec, std::span<const double> y0,
                      std::span<const double> sample_times);

struct Trajectory {
    std::vector<double> times;
    std::vector<Field> states;
    std::vector<double> heights;  ///< integral heights of the states
    std::size_t step_count = 0;
    std::size_t rhs_eval_count = 0;
};

/// Semi-discrete transport equation as an OdeProblem.
OdeProblem transport_problem(const TransportSystem& sys, const Grid& grid, InterpolationRule rule,
                             SchemeKind kind = SchemeKind::ScharfetterGummel, bool cfl_strict = false);

/// Imposes the Dirichlet boundary values of sys at time t.
void impose_boundaries(const TransportSystem& sys, double t, std::span<double> u);

/// Uniform initial field with the boundary values at t = 0 imposed.
Field initial_field(const TransportSystem& sys, const Grid& grid);

/// One explicit Euler step from field.time to field.time + dt.
Field step_euler(const Field& field, const TransportSystem& sys, const Grid& grid, InterpolationRule rule, double dt,
                 SchemeKind kind = SchemeKind::ScharfetterGummel);

Trajectory integrate(const IntegratorSpec& spec, const TransportSystem& sys, const Grid& grid,
                     InterpolationRule rule, SchemeKind kind, const Field& initial,
                     std::span<const double> sample_times);

/// n + 1 equally spaced times 0, t_end/n, ..., t_end.
std::vector<double> uniform_times(double t_end, std::size_t n);

}  // namespace uptake
