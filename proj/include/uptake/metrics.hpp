#pragma once

/**
 * @file metrics.hpp
 * @brief Error measures against a fine-grid reference and convergence fits.
 */

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "uptake/integrate.hpp"

namespace uptake {

/// A trajectory computed on a fine grid, together with how it was made.
struct ReferenceSolution {
    Trajectory trajectory;
    Grid grid;
    SchemeKind scheme = SchemeKind::ScharfetterGummel;
    IntegratorSpec integrator;

    std::string provenance() const;
};

/// SG solve on `grid` with the given integrator, sampled at sample_times.
ReferenceSolution build_reference(const TransportSystem& sys, const Grid& grid, const IntegratorSpec& integrator,
                                  std::span<const double> sample_times,
                                  InterpolationRule rule = InterpolationRule::MeanOfU);

/// Values of `field` (on `fine`) at the nodes of `coarse`. Throws
/// AlignmentError unless fine.n_cells is a multiple of coarse.n_cells.
std::vector<double> restrict_to(std::span<const double> field, const Grid& fine, const Grid& coarse);

/// eps2(x_j) = sqrt(mean_t (u_test - u_ref)^2) on the nodes of test_grid.
/// The two trajectories must share their sample times.
std::vector<double> eps2_profile(const Trajectory& test, const Grid& test_grid, const Trajectory& ref,
                                 const Grid& ref_grid);
/// As above; additionally requires the reference spacing to be at most a
/// quarter of the test spacing.
std::vector<double> eps2_profile(const Trajectory& test, const Grid& test_grid, const ReferenceSolution& ref);

/// max of the profile; DomainError when empty.
double eps_inf(std::span<const double> profile);

/// Significant correct digits -log10 max_j |u_j - r_j| / |r_j| over nodes
/// with |r_j| >= 1e-8; capped at 16. DegenerateReference when no node
/// passes the guard.
double scd(std::span<const double> test, std::span<const double> ref);

inline constexpr double kScdGuard = 1e-8;
inline constexpr double kScdCap = 16.0;

/// Least-squares slope of log(error) against log(step).
double convergence_order(std::span<const double> errors, std::span<const double> steps);

struct ConvergenceRow {
    double delta = 0.0;
    double eps_inf = 0.0;
    double scd = 0.0;
    double cpu_seconds = 0.0;
    std::size_t rhs_evals = 0;
};

/// Header `delta,eps_inf,scd,cpu_seconds,rhs_evals`, 17 significant digits.
void write_convergence_csv(std::ostream& os, std::span<const ConvergenceRow> rows);

}  // namespace uptake
