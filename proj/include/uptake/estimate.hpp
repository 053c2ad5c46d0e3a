#pragma once

/**
 * @file estimate.hpp
 * @brief Box-constrained least-squares estimation of (d4, k3, a0) from
 * water-front height observations.
 *
 * The cost is J = || H_model(t_obs) - H_obs ||_2 with the model trajectory
 * interpolated linearly onto the observation times. The default optimizer
 * is Nelder-Mead with reflect-and-clip projection onto the box.
 */

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uptake/integrate.hpp"
#include "uptake/sensitivity.hpp"

namespace uptake {

/// 0.5 cm on a 0.22 m brick.
inline constexpr double kDefaultSigmaH = 0.005 / 0.22;

struct ObservationSample {
    double t = 0.0;
    double h = 0.0;
    double sigma = kDefaultSigmaH;
    bool operator==(const ObservationSample&) const = default;
};

struct ObservationSeries {
    std::vector<ObservationSample> samples;
    std::string provenance;

    /// Throws IngestionError (row = 1-based sample index) on negative or
    /// non-increasing t, H outside [0, 1] or sigma <= 0, and on an empty series.
    void validate() const;
    std::vector<double> times() const;
    std::vector<double> heights() const;
    bool operator==(const ObservationSeries&) const = default;
};

struct Bounds {
    double lower = 0.0;
    double upper = 2.0;
    bool operator==(const Bounds&) const = default;
};

enum class OptimizerKind { NelderMead, ProjectedGradient };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct EstimationProblem {
    ObservationSeries observations;
    TransportSystem system = apriori_uptake_system();  ///< free parameters are overwritten
    std::vector<Parameter> free;
    std::vector<Bounds> bounds;   ///< one per free parameter
    std::vector<double> initial;  ///< one per free parameter
    Grid grid = Grid(20);
    IntegratorSpec integrator = IntegratorSpec::adaptive(1e-4, 1e-4, 1.0);
    InterpolationRule rule = InterpolationRule::MeanOfU;
    HeightDefinition height = HeightDefinition::integral();

    OptimizerKind optimizer = OptimizerKind::NelderMead;
    int max_iterations = 500;
    double step_tolerance = 1e-6;
    double cost_tolerance = 1e-8;
    /// Relative size of the initial simplex (fraction of each box width).
    double initial_step = 0.1;

    /// Throws DomainError for an empty or repeated free set, bad bounds or an
    /// initial guess outside the box.
    void validate() const;
    /// The template system with the free parameters set to `values`.
    TransportSystem system_at(std::span<const double> values) const;
};

/// Model heights at the observation times.
std::vector<double> model_heights(std::span<const double> values, const EstimationProblem& problem);

/// J for the free-parameter values; +inf when the forward solve fails
/// numerically. Throws DomainError when values leave the box.
double cost_J(std::span<const double> values, const EstimationProblem& problem);

struct PathPoint {
    std::size_t iterate = 0;
    std::array<double, 3> values{};  ///< d4, k3, a0
    double cost = 0.0;
};

struct EstimationResult {
    std::vector<Parameter> free;
    std::array<double, 3> initial{};    ///< d4, k3, a0 at the start
    std::array<double, 3> estimated{};  ///< d4, k3, a0 at the optimum
    double initial_cost = 0.0;
    double residual = 0.0;
    std::size_t iterations = 0;
    std::size_t forward_solves = 0;
    std::string stop_reason;
    std::vector<PathPoint> path;  ///< best point after every iteration
    FisherMatrix fisher;          ///< over the free parameters
    std::array<double, 3> eta{};  ///< NaN for fixed or unidentifiable parameters

    std::vector<double> free_values() const;
};

/// Local minimizer of cost_J inside the box. Throws EstimationFailed when
/// no evaluated point has a finite cost.
EstimationResult minimize(const EstimationProblem& problem);

/// One minimize() per start (values for the free parameters), run in parallel.
std::vector<EstimationResult> multi_start(const EstimationProblem& problem,
                                          const std::vector<std::vector<double>>& starts);

/// Largest relative spread (max - min) / |mean| over the free parameters.
double estimate_spread(const std::vector<EstimationResult>& results);

/// Fisher matrix and eta of the free parameters at `values`, with sigma_h
/// the mean observation sigma and the time integral over [0, last obs].
FisherMatrix fisher_at(std::span<const double> values, const EstimationProblem& problem);

/// Forward solve of `truth`, H sampled at sample_dt, 2 sample_dt, ... <= t_max,
/// plus N(0, noise_sigma^2) noise (Box-Muller on mt19937_64), clipped to [0, 1].
ObservationSeries synthesize_observations(const TransportSystem& truth, const Grid& grid,
                                          const IntegratorSpec& integrator, double noise_sigma, double sample_dt,
                                          double t_max, std::uint64_t seed,
                                          HeightDefinition height = HeightDefinition::integral());

/// Standard normal deviates, identical on every platform for a given seed.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed);
    double next();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// parameter,a_priori,estimated,eta rows for d4, k3, a0 then J.
void write_estimate_report(std::ostream& os, const EstimationResult& result);
/// iterate,d4,k3,a0,J
void write_path_csv(std::ostream& os, const EstimationResult& result);

}  // namespace uptake
