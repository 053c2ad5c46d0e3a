#pragma once

/**
 * @file sensitivity.hpp
 * @brief Local sensitivity of the water-uptake solution to d4, k3 and a0.
 *
 * X_P = du/dP solves the linearized transport equation with homogeneous
 * boundary and initial data. Its spatial operator is the exact derivative
 * of the discrete SG operator (mean-of-u interpolation) in the direction
 * (X, P), so the stacked system is the tangent of the forward solver.
 * The state and the sensitivities are integrated together as one system.
 */

#include <iosfwd>
#include <span>
#include <vector>

#include "uptake/integrate.hpp"
#include "uptake/model.hpp"

namespace uptake {

struct SensitivityField {
    Parameter parameter = Parameter::K3;
    std::vector<double> values;
    double time = 0.0;
};

/// dX/dt for one parameter given the state u at the same time.
void rhs_sensitivity(Parameter p, std::span<const double> x, std::span<const double> u, double t,
                     const TransportSystem& sys, const Grid& grid, std::span<double> dxdt);
std::vector<double> rhs_sensitivity(const SensitivityField& x, const Field& u, const TransportSystem& sys,
                                    const Grid& grid);

struct SensitivityTrajectory {
    Trajectory state;
    std::vector<Parameter> parameters;
    /// fields[p][i] is X for parameters[p] at state.times[i].
    std::vector<std::vector<SensitivityField>> fields;
};

/// Integrates the state and the sensitivities of `parameters` as one stacked system.
SensitivityTrajectory solve_sensitivities(const IntegratorSpec& spec, const TransportSystem& sys, const Grid& grid,
                                          std::span<const Parameter> parameters,
                                          std::span<const double> sample_times);

/// Y(t) = (sigma_p / sigma_h) * trapezoid integral of X over [0, 1].
std::vector<double> scaled_Y(std::span<const SensitivityField> x, double sigma_p, double sigma_h);

struct FisherMatrix {
    std::vector<Parameter> parameters;
    std::vector<double> values;  ///< row-major, size n x n
    double sigma_h = 1.0;

    std::size_t size() const noexcept { return parameters.size(); }
    double operator()(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
};

/// F_ij = (1 / sigma_h^2) * trapezoid integral over [0, t_max] of Y_i Y_j.
/// Samples after t_max are ignored.
FisherMatrix fisher(std::span<const Parameter> parameters, const std::vector<std::vector<double>>& y,
                    std::span<const double> times, double sigma_h, double t_max);

/// Smallest eigenvalue of F (positive semi-definiteness check).
double min_eigenvalue(const FisherMatrix& f);

/// eta_i = sqrt((F^-1)_ii). Throws IdentifiabilityError when the condition
/// number reaches 1e12, naming the direction of the smallest eigenvalue.
std::vector<double> error_estimators(const FisherMatrix& f);

inline constexpr double kMaxFisherCondition = 1e12;

/// CSV with header t,Y_d4,Y_k3,Y_a0 (missing parameters are written as 0).
void write_sensitivity_csv(std::ostream& os, std::span<const double> times, std::span<const Parameter> parameters,
                           const std::vector<std::vector<double>>& y);

}  // namespace uptake
