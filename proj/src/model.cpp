#include "uptake/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "uptake/errors.hpp"

namespace uptake {

namespace {

constexpr int kPositivitySamples = 101;

void require_positive_finite(double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) {
        std::ostringstream os;
        os << name << " must be strictly positive and finite, got " << v;
        throw DomainError(os.str());
    }
}

}  // namespace

DimensionlessNumbers::DimensionlessNumbers(double fo_, double pe_, double bo_) : fo(fo_), pe(pe_), bo(bo_) {
    require_positive_finite(fo, "fo");
    require_positive_finite(pe, "pe");
    require_positive_finite(bo, "bo");
}

// ---------------------------------------------------------------------------

Polynomial::Polynomial(std::vector<double> coefficients) : c_(std::move(coefficients)) {
    for (double v : c_) {
        if (!std::isfinite(v)) throw DomainError("polynomial coefficient is not finite");
    }
}

double Polynomial::operator()(double u) const noexcept {
    double r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * u + *it;
    return r;
}

double Polynomial::derivative(double u) const noexcept {
    double r = 0.0;
    for (std::size_t i = c_.size(); i-- > 1;) r = r * u + static_cast<double>(i) * c_[i];
    return r;
}

double Polynomial::coefficient(std::size_t power) const noexcept {
    return power < c_.size() ? c_[power] : 0.0;
}

Polynomial Polynomial::with_coefficient(std::size_t power, double value) const {
    auto c = c_;
    if (c.size() <= power) c.resize(power + 1, 0.0);
    c[power] = value;
    return Polynomial(std::move(c));
}

// ---------------------------------------------------------------------------

std::string to_string(Parameter p) {
    switch (p) {
        case Parameter::D4: return "d4";
        case Parameter::K3: return "k3";
        case Parameter::A0: return "a0";
    }
    return "?";
}

Parameter parameter_from_string(const std::string& name) {
    if (name == "d4") return Parameter::D4;
    if (name == "k3") return Parameter::K3;
    if (name == "a0") return Parameter::A0;
    throw DomainError("unknown parameter '" + name + "' (expected d4, k3 or a0)");
}

CoefficientModel CoefficientModel::physical(double d0, double d1, double d4, double a0, double k3,
                                            double diffusivity_floor) {
    return CoefficientModel(Polynomial({d0, d1, 0.0, 0.0, d4}), NonlocalAdvection{a0},
                            Polynomial({0.0, 0.0, 0.0, k3}), diffusivity_floor);
}

CoefficientModel::CoefficientModel(Polynomial d, AdvectionModel a, Polynomial k, double diffusivity_floor)
    : d_(std::move(d)), a_(std::move(a)), k_(std::move(k)), floor_(diffusivity_floor) {
    if (!(std::isfinite(floor_) && floor_ >= 0.0)) throw DomainError("diffusivity floor must be >= 0");
    if (const auto* nl = std::get_if<NonlocalAdvection>(&a_)) {
        if (!(std::isfinite(nl->a0) && nl->a0 >= 0.0)) throw DomainError("a0 must be >= 0");
    }
    for (int i = 0; i < kPositivitySamples; ++i) {
        const double u = static_cast<double>(i) / (kPositivitySamples - 1);
        if (k_(u) < 0.0) {
            std::ostringstream os;
            os << "conductivity k(u) is negative at u = " << u;
            throw DomainError(os.str());
        }
        if (floor_ == 0.0 && !(d_(u) > 0.0)) {
            std::ostringstream os;
            os << "diffusivity d(u) = " << d_(u) << " is not positive at u = " << u;
            throw DomainError(os.str());
        }
    }
}

double CoefficientModel::a0() const {
    if (const auto* nl = std::get_if<NonlocalAdvection>(&a_)) return nl->a0;
    throw DomainError("a0 is only defined for the nonlocal advection model");
}

double CoefficientModel::effective_d(double u) const noexcept { return std::max(d_(u), floor_); }

double CoefficientModel::effective_d_prime(double u) const noexcept {
    return clamped(u) ? 0.0 : d_.derivative(u);
}

bool CoefficientModel::clamped(double u) const noexcept { return d_(u) < floor_; }

double CoefficientModel::advection_at(double u, double h) const {
    if (const auto* local = std::get_if<LocalAdvection>(&a_)) return local->a(u);
    return eval_a(*this, h);
}

double CoefficientModel::advection_prime(double u) const noexcept {
    if (const auto* local = std::get_if<LocalAdvection>(&a_)) return local->a.derivative(u);
    return 0.0;
}

double CoefficientModel::min_diffusivity() const noexcept {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kPositivitySamples; ++i) m = std::min(m, d_(static_cast<double>(i) / (kPositivitySamples - 1)));
    return m;
}

double CoefficientModel::value_of(Parameter p) const {
    switch (p) {
        case Parameter::D4: return d_.coefficient(4);
        case Parameter::K3: return k_.coefficient(3);
        case Parameter::A0: return a0();
    }
    return 0.0;
}

CoefficientModel CoefficientModel::with(Parameter p, double value) const {
    switch (p) {
        case Parameter::D4: return {d_.with_coefficient(4, value), a_, k_, floor_};
        case Parameter::K3: return {d_, a_, k_.with_coefficient(3, value), floor_};
        case Parameter::A0:
            if (!nonlocal()) throw DomainError("a0 is only defined for the nonlocal advection model");
            return {d_, NonlocalAdvection{value}, k_, floor_};
    }
    return *this;
}

// ---------------------------------------------------------------------------

double evaluate(const BoundaryFunction& f, double t) noexcept {
    struct Visitor {
        double t;
        double operator()(const ConstantFunction& c) const { return c.value; }
        double operator()(const StepFunction& s) const { return t > 0.0 ? s.value : 0.0; }
        double operator()(const SineSeries& s) const {
            double r = 0.0;
            for (const auto& term : s.terms) r += term.amplitude * std::pow(std::sin(term.omega * t), term.power);
            return r;
        }
    };
    return std::visit(Visitor{t}, f);
}

Field::Field(std::vector<double> v, double t) : values(std::move(v)), time(t) {
    if (values.size() < 3) throw DomainError("a field needs at least 3 nodes");
    for (double x : values) {
        if (!std::isfinite(x)) throw DomainError("field contains a non-finite value");
    }
}

HeightDefinition HeightDefinition::threshold(double u_hat) {
    if (!(u_hat > 0.0 && u_hat < 1.0)) throw DomainError("height threshold must lie strictly inside (0, 1)");
    return {Kind::Threshold, u_hat};
}

TransportSystem TransportSystem::with(Parameter p, double value) const {
    TransportSystem s = *this;
    s.coefficients = coefficients.with(p, value);
    return s;
}

TransportSystem apriori_uptake_system() {
    TransportSystem s{DimensionlessNumbers(0.074, 2.2e-4, 0.7),
                      CoefficientModel::physical(0.0067, -0.04, 0.6, 0.7, 0.8),
                      BoundaryCondition::dirichlet(StepFunction{1.0}),
                      BoundaryCondition::dirichlet(ConstantFunction{0.0}),
                      0.0};
    return s;
}

// ---------------------------------------------------------------------------

double eval_d(const CoefficientModel& c, double u) noexcept { return c.diffusivity()(u); }

double eval_k(const CoefficientModel& c, double u) noexcept { return c.conductivity()(u); }

double eval_a(const CoefficientModel& c, double h) {
    constexpr double tol = 1e-9;
    if (!(h >= -tol && h <= 1.0 + tol)) {
        std::ostringstream os;
        os << "height " << h << " lies outside [0, 1]";
        throw DomainError(os.str());
    }
    return c.a0() * (1.0 - h);
}

double height_of(std::span<const double> u, const HeightDefinition& def) {
    const std::size_t n = u.size();
    if (n < 2) throw DomainError("height of a field with fewer than 2 nodes");
    const double dx = 1.0 / static_cast<double>(n - 1);
    if (def.kind == HeightDefinition::Kind::Integral) {
        double s = 0.5 * (u.front() + u.back());
        for (std::size_t j = 1; j + 1 < n; ++j) s += u[j];
        return s * dx;
    }
    for (std::size_t j = n; j-- > 0;) {
        if (u[j] >= def.u_hat) return static_cast<double>(j) * dx;
    }
    return 0.0;
}

double height_of(const Field& field, const HeightDefinition& def) { return height_of(field.view(), def); }

DimensionlessNumbers dimensionless_numbers(const ReferenceScales& s) {
    require_positive_finite(s.length, "length");
    require_positive_finite(s.t_ref, "t_ref");
    require_positive_finite(s.d_ref, "d_ref");
    require_positive_finite(s.k_ref, "k_ref");
    require_positive_finite(s.a_ref, "a_ref");
    require_positive_finite(s.theta_sat, "theta_sat");
    if (s.theta_sat > 1.0) throw DomainError("theta_sat must not exceed 1");
    return {s.t_ref * s.d_ref / (s.length * s.length), s.a_ref * s.length / s.d_ref,
            s.k_ref * s.length / (s.theta_sat * s.d_ref)};
}

DiffusivityTerms normalized_derivatives_d(const CoefficientModel& c, double u) {
    const auto& d = c.diffusivity();
    return {d.coefficient(4) * std::pow(u, 4), d.coefficient(1) * u, d.coefficient(0)};
}

double uniqueness_margin(const CoefficientModel& c, std::span<const double> u0_samples) {
    if (u0_samples.empty()) throw DomainError("uniqueness_margin needs at least one u0 sample");
    double worst = -std::numeric_limits<double>::infinity();
    for (double u0 : u0_samples) {
        if (!(u0 > 0.0)) throw DomainError("uniqueness_margin: u0 must be strictly positive");
        const double a = c.nonlocal() ? c.a0() : c.advection_at(u0, 0.0);
        worst = std::max(worst, a + eval_k(c, u0) / u0);
    }
    return c.min_diffusivity() - worst * kPoincareUnitInterval;
}

}  // namespace uptake
