#include "uptake/cases.hpp"

#include <numbers>

namespace uptake {

TransportSystem linear_validation_system() {
    constexpr double pi = std::numbers::pi;
    CoefficientModel c(Polynomial({0.05}), LocalAdvection{Polynomial({0.02})}, Polynomial({0.0, 0.5}), 0.0);
    return {DimensionlessNumbers(1.0, 1.0, 1.0), std::move(c),
            BoundaryCondition::dirichlet(SineSeries{{{0.2, pi, 2}}}),
            BoundaryCondition::dirichlet(SineSeries{{{0.3, pi, 2}}}), 0.0};
}

TransportSystem nonlinear_validation_system() {
    constexpr double pi = std::numbers::pi;
    CoefficientModel c(Polynomial({0.05, 0.0, 0.03}), LocalAdvection{Polynomial({0.02, 0.0, 0.01})},
                       Polynomial({0.0, 0.0, 0.05}), 0.0);
    return {DimensionlessNumbers(1.0, 1.0, 1.0), std::move(c),
            BoundaryCondition::dirichlet(SineSeries{{{0.8, pi / 3.0, 1}, {0.2, pi / 5.0, 1}}}),
            BoundaryCondition::dirichlet(SineSeries{{{0.5, pi / 4.0, 1}, {0.3, pi / 7.0, 1}}}), 0.0};
}

}  // namespace uptake
