#pragma once

/**
 * @file cli_io.hpp
 * @brief Run configuration, observation CSV ingestion, result writers and
 * the subcommand driver behind the command-line tool.
 *
 * Configurations are JSON documents. Every key is optional; missing keys
 * take the defaults below and unknown keys are rejected.
 */

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "uptake/estimate.hpp"
#include "uptake/metrics.hpp"

namespace uptake {

struct ProblemConfig {
    DimensionlessNumbers numbers{0.074, 2.2e-4, 0.7};
    std::vector<double> d{0.0067, -0.04, 0.0, 0.0, 0.6};  ///< ascending powers of u
    bool nonlocal_advection = true;
    double a0 = 0.7;                   ///< nonlocal form a0 (1 - H)
    std::vector<double> a_local{0.0};  ///< local form, ascending powers
    std::vector<double> k{0.0, 0.0, 0.0, 0.8};
    double diffusivity_floor = kDefaultDiffusivityFloor;
    BoundaryCondition left = BoundaryCondition::dirichlet(StepFunction{1.0});
    BoundaryCondition right = BoundaryCondition::dirichlet(ConstantFunction{0.0});
    HeightDefinition height = HeightDefinition::integral();
    double initial_value = 0.0;

    TransportSystem system() const;
    bool operator==(const ProblemConfig&) const = default;
};

struct DiscretizationConfig {
    double dx = 0.05;
    SchemeKind scheme = SchemeKind::ScharfetterGummel;
    InterpolationRule rule = InterpolationRule::MeanOfU;
    IntegratorSpec integrator = IntegratorSpec::adaptive(1e-4, 1e-4, 1.0);  ///< t_end comes from the task
    bool operator==(const DiscretizationConfig&) const = default;
};

struct SimulateTask {
    double t_end = 15.0;
    std::size_t samples = 150;
    bool operator==(const SimulateTask&) const = default;
};

struct ValidateTask {
    double t_end = 15.0;
    std::size_t samples = 150;
    double reference_dx = 0.002;
    double reference_tol = 1e-8;
    /// Euler step for the Euler rows; 0 uses the CFL-derived step.
    double euler_dt = 0.0;
    /// Spacings of the SG convergence sweep (Euler rows), empty to skip.
    std::vector<double> sweep_dx;
    bool compare_rules = false;
    bool operator==(const ValidateTask&) const = default;
};

struct SensitivityTask {
    double t_end = 15.0;
    std::size_t samples = 300;
    std::vector<Parameter> parameters{Parameter::D4, Parameter::K3, Parameter::A0};
    double sigma_h = kDefaultSigmaH;
    bool operator==(const SensitivityTask&) const = default;
};

struct SyntheticObservations {
    double d4 = 1.0;
    double k3 = 0.8257;
    double a0 = 0.0052;
    double noise = kDefaultSigmaH;
    double sample_dt = 0.05;
    double t_max = 15.0;
    std::uint64_t seed = 1;
    bool operator==(const SyntheticObservations&) const = default;
};

struct EstimateTask {
    /// CSV path, relative to the config file; empty means `synthetic`.
    std::string observations;
    SyntheticObservations synthetic;
    std::vector<Parameter> free{Parameter::D4, Parameter::K3, Parameter::A0};
    std::vector<Bounds> bounds{{0.0, 2.0}, {0.0, 2.0}, {0.0, 2.0}};
    /// Starting values; empty means the problem's values of the free parameters.
    std::vector<double> initial;
    OptimizerKind optimizer = OptimizerKind::NelderMead;
    int max_iterations = 500;
    double step_tolerance = 1e-6;
    double cost_tolerance = 1e-8;
    bool operator==(const EstimateTask&) const = default;
};

enum class TaskKind { Simulate, Validate, Sensitivity, Estimate, Scales };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& name);

struct RunConfig {
    TaskKind task = TaskKind::Simulate;
    ProblemConfig problem;
    DiscretizationConfig discretization;
    SimulateTask simulate;
    ValidateTask validate;
    SensitivityTask sensitivity;
    EstimateTask estimate;
    ReferenceScales scales;
    std::string output_dir = ".";
    /// Directory of the file the config came from (not serialized).
    std::filesystem::path base_dir;

    Grid grid() const;
    bool operator==(const RunConfig& o) const;
};

/// Parses and validates a JSON document. Throws ConfigError naming the
/// field, or with line/column for syntax errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Full JSON form of the config (every field written).
std::string serialize_config(const RunConfig& config);

/// Reads `t,H,sigma` (sigma optional). Throws IngestionError with the
/// 1-based file line.
ObservationSeries parse_observations(const std::string& text);
ObservationSeries load_observations(const std::filesystem::path& path);
void write_observations(std::ostream& os, const ObservationSeries& series);

/// t,H rows.
void write_heights_csv(std::ostream& os, const Trajectory& trajectory, const HeightDefinition& height);
/// t,x_0,...,x_N rows with a header of node positions.
void write_profiles_csv(std::ostream& os, const Trajectory& trajectory, const Grid& grid);

struct RunOptions {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    bool cfl_strict = false;
};

/// Runs the task of `config` and writes its CSV files. Returns the exit
/// status (0 ok, 1 numerical failure, 2 config or input error); errors are
/// reported on `err` as "ERROR[<code>]: <message>".
int run(TaskKind task, const RunConfig& config, const RunOptions& options, std::ostream& err);

}  // namespace uptake
