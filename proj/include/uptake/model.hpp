#pragma once

/**
 * @file model.hpp
 * @brief Problem definition for one-dimensional capillary water uptake.
 *
 * Solves the dimensionless transport equation
 *
 *   du/dt = Fo * d/dx ( d(u) du/dx - Pe a u - Bo k(u) ),   x in [0, 1]
 *
 * where u is the saturation (theta / theta_sat), d the liquid diffusivity,
 * a the advection coefficient (either a local polynomial in u or the
 * nonlocal form a0 (1 - H) driven by the integral height H) and k the
 * liquid conductivity.
 */

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace uptake {

/// Default lower bound applied to d(u) inside the discrete operators. The
/// literature fit d = d4 u^4 + d1 u + d0 is negative on part of [0, 1] for
/// small d4, which makes the equation backward-parabolic there.
inline constexpr double kDefaultDiffusivityFloor = 1.0e-4;

struct DimensionlessNumbers {
    double fo = 1.0;  ///< Fourier number
    double pe = 1.0;  ///< Peclet number
    double bo = 1.0;  ///< Bond number

    DimensionlessNumbers() = default;
    DimensionlessNumbers(double fo, double pe, double bo);

    bool operator==(const DimensionlessNumbers&) const = default;
};

/// SI reference scales used to derive the dimensionless numbers.
struct ReferenceScales {
    double length = 0.22;     // m
    double t_ref = 3600.0;    // s
    double d_ref = 1.0e-6;    // m^2/s
    double k_ref = 1.0e-10;   // m/s
    double a_ref = 1.0e-9;    // m/s
    double theta_sat = 0.3065;
};

/// Dense polynomial with ascending coefficients c[0] + c[1] u + ...
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coefficients);

    double operator()(double u) const noexcept;
    double derivative(double u) const noexcept;
    /// Coefficient of u^power, zero past the stored degree.
    double coefficient(std::size_t power) const noexcept;
    Polynomial with_coefficient(std::size_t power, double value) const;

    const std::vector<double>& coefficients() const noexcept { return c_; }
    bool operator==(const Polynomial&) const = default;

private:
    std::vector<double> c_;
};

/// a(u) given as a polynomial in the local saturation.
struct LocalAdvection {
    Polynomial a;
    bool operator==(const LocalAdvection&) const = default;
};

/// a = a0 (1 - H), uniform in space at each instant.
struct NonlocalAdvection {
    double a0 = 0.0;
    bool operator==(const NonlocalAdvection&) const = default;
};

using AdvectionModel = std::variant<LocalAdvection, NonlocalAdvection>;

/// Parameters that the sensitivity and estimation modules may vary.
enum class Parameter { D4, K3, A0 };

std::string to_string(Parameter p);
Parameter parameter_from_string(const std::string& name);

class CoefficientModel {
public:
    /// d = d4 u^4 + d1 u + d0, a = a0 (1 - H), k = k3 u^3.
    static CoefficientModel physical(double d0, double d1, double d4, double a0, double k3,
                                     double diffusivity_floor = kDefaultDiffusivityFloor);

    /// A floor of zero requests the strict check d(u) > 0 on [0, 1];
    /// a positive floor accepts any d and clamps it inside the operators.
    CoefficientModel(Polynomial d, AdvectionModel a, Polynomial k,
                     double diffusivity_floor = kDefaultDiffusivityFloor);

    const Polynomial& diffusivity() const noexcept { return d_; }
    const AdvectionModel& advection() const noexcept { return a_; }
    const Polynomial& conductivity() const noexcept { return k_; }
    double diffusivity_floor() const noexcept { return floor_; }

    bool nonlocal() const noexcept { return std::holds_alternative<NonlocalAdvection>(a_); }
    /// Magnitude of the nonlocal advection; throws DomainError for a local model.
    double a0() const;

    /// d(u) as used by the discrete operators: max(d(u), floor).
    double effective_d(double u) const noexcept;
    /// Derivative of effective_d with respect to u (zero where clamped).
    double effective_d_prime(double u) const noexcept;
    bool clamped(double u) const noexcept;

    /// a at saturation u for the current integral height h.
    double advection_at(double u, double h) const;
    /// da/du; zero for the nonlocal form.
    double advection_prime(double u) const noexcept;

    /// Minimum of the raw polynomial d over 101 samples of [0, 1].
    double min_diffusivity() const noexcept;

    double value_of(Parameter p) const;
    CoefficientModel with(Parameter p, double value) const;

    bool operator==(const CoefficientModel&) const = default;

private:
    Polynomial d_;
    AdvectionModel a_;
    Polynomial k_;
    double floor_;
};

/// Time-dependent boundary value.
struct ConstantFunction {
    double value = 0.0;
    bool operator==(const ConstantFunction&) const = default;
};

/// 0 at t <= 0, `value` for t > 0 (sudden wetting of the base).
struct StepFunction {
    double value = 1.0;
    bool operator==(const StepFunction&) const = default;
};

/// sum_i amplitude_i * sin(omega_i t)^power_i
struct SineSeries {
    struct Term {
        double amplitude = 0.0;
        double omega = 0.0;
        int power = 1;
        bool operator==(const Term&) const = default;
    };
    std::vector<Term> terms;
    bool operator==(const SineSeries&) const = default;
};

using BoundaryFunction = std::variant<ConstantFunction, StepFunction, SineSeries>;

double evaluate(const BoundaryFunction& f, double t) noexcept;

struct BoundaryCondition {
    enum class Kind { Dirichlet, HomogeneousNeumann };
    Kind kind = Kind::Dirichlet;
    BoundaryFunction value = ConstantFunction{0.0};  ///< used for Dirichlet only

    static BoundaryCondition dirichlet(BoundaryFunction f) { return {Kind::Dirichlet, std::move(f)}; }
    static BoundaryCondition neumann() { return {Kind::HomogeneousNeumann, ConstantFunction{0.0}}; }

    bool is_dirichlet() const noexcept { return kind == Kind::Dirichlet; }
    bool operator==(const BoundaryCondition&) const = default;
};

/// Nodal values u_j at x_j = j dx, j = 0..N.
struct Field {
    std::vector<double> values;
    double time = 0.0;

    Field() = default;
    Field(std::vector<double> v, double t);

    std::size_t size() const noexcept { return values.size(); }
    std::span<const double> view() const noexcept { return values; }
};

struct HeightDefinition {
    enum class Kind { Integral, Threshold };
    Kind kind = Kind::Integral;
    double u_hat = 0.5;

    static HeightDefinition integral() { return {}; }
    static HeightDefinition threshold(double u_hat);
    bool operator==(const HeightDefinition&) const = default;
};

/// The complete dimensionless problem: numbers, coefficients, boundary and
/// initial data.
struct TransportSystem {
    DimensionlessNumbers numbers;
    CoefficientModel coefficients;
    BoundaryCondition left;
    BoundaryCondition right;
    double initial_value = 0.0;

    TransportSystem with(Parameter p, double value) const;
};

/// The a-priori water-uptake problem: saturated base, dry top, dry start.
TransportSystem apriori_uptake_system();

// ---------------------------------------------------------------------------

double eval_d(const CoefficientModel& c, double u) noexcept;
double eval_k(const CoefficientModel& c, double u) noexcept;
/// Nonlocal advection a0 (1 - h). Throws DomainError when h leaves [0, 1]
/// by more than 1e-9 or when the model has local advection.
double eval_a(const CoefficientModel& c, double h);

/// Integral (trapezoidal) or threshold water-front height on the unit interval.
double height_of(std::span<const double> u, const HeightDefinition& def);
double height_of(const Field& field, const HeightDefinition& def);

DimensionlessNumbers dimensionless_numbers(const ReferenceScales& s);

struct DiffusivityTerms {
    double d4_term;
    double d1_term;
    double d0_term;
};

/// Normalized derivatives d_i * dd/dd_i = (d4 u^4, d1 u, d0).
DiffusivityTerms normalized_derivatives_d(const CoefficientModel& c, double u);

/// Poincare constant of the unit interval with zero boundary values.
inline constexpr double kPoincareUnitInterval = 0.31830988618379067154;  // 1/pi

/// Energy-method uniqueness margin: min d - max_{u0} (a + k(u0)/u0) C.
/// Non-negative means the linearized problem has a unique solution.
double uniqueness_margin(const CoefficientModel& c, std::span<const double> u0_samples);

}  // namespace uptake
