#pragma once

/**
 * @file cases.hpp
 * @brief Verification problems with all dimensionless numbers set to one.
 */

#include "uptake/model.hpp"

namespace uptake {

/// d = 0.05, a = 0.02, k = 0.5 u; u(0,t) = 0.2 sin^2(pi t), u(1,t) = 0.3 sin^2(pi t).
TransportSystem linear_validation_system();
inline constexpr double kLinearValidationEnd = 3.0;

/// d = 0.05 + 0.03 u^2, a = 0.02 + 0.01 u^2, k = 0.05 u^2 with
/// sums of slow sines on both ends.
TransportSystem nonlinear_validation_system();
inline constexpr double kNonlinearValidationEnd = 15.0;

}  // namespace uptake
