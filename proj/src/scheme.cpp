#include "uptake/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace uptake {

Grid::Grid(std::size_t n) : n_cells(n), dx(1.0 / static_cast<double>(n)) {
    if (n < 2) throw DomainError("a grid needs at least 2 cells");
}

Grid Grid::with_spacing(double dx) {
    if (!(dx > 0.0 && dx <= 0.5)) throw DomainError("grid spacing must lie in (0, 0.5]");
    const double n = std::round(1.0 / dx);
    if (std::abs(n * dx - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "grid spacing " << dx << " does not divide the unit interval";
        throw DomainError(os.str());
    }
    return Grid(static_cast<std::size_t>(n));
}

std::string to_string(InterpolationRule r) {
    switch (r) {
        case InterpolationRule::MeanOfU: return "mean_of_u";
        case InterpolationRule::ArithmeticMeanOfK: return "arithmetic";
        case InterpolationRule::HarmonicMean: return "harmonic";
        case InterpolationRule::HeronianMean: return "heronian";
        case InterpolationRule::GeometricMean: return "geometric";
        case InterpolationRule::CubicPowerMean: return "cubic";
        case InterpolationRule::QuadraticPowerMean: return "quadratic";
    }
    return "?";
}

InterpolationRule interpolation_rule_from_string(const std::string& name) {
    for (auto r : kAllInterpolationRules) {
        if (to_string(r) == name) return r;
    }
    throw DomainError("unknown interpolation rule '" + name + "'");
}

std::string to_string(SchemeKind k) {
    return k == SchemeKind::ScharfetterGummel ? "sg" : "central_fd";
}

SchemeKind scheme_kind_from_string(const std::string& name) {
    if (name == "sg") return SchemeKind::ScharfetterGummel;
    if (name == "central_fd") return SchemeKind::CentralFiniteDifference;
    throw DomainError("unknown scheme '" + name + "' (expected sg or central_fd)");
}

double bernoulli(double theta) noexcept {
    if (std::abs(theta) < 1e-5) return 1.0 - theta / 2.0 + theta * theta / 12.0;
    // For large positive theta exp(theta) overflows; rewrite with exp(-theta).
    if (theta > 50.0) return theta * std::exp(-theta) / -std::expm1(-theta);
    return theta / std::expm1(theta);
}

double bernoulli_prime(double theta) noexcept {
    if (std::abs(theta) < 1e-2) return -0.5 + theta / 6.0 - theta * theta * theta / 180.0;
    const double b = bernoulli(theta);
    return b * (1.0 - b) / theta - b;
}

double sg_flux(double u_left, double u_right, double a, double d, double k_half, double dx) {
    if (!(d > 0.0)) throw DomainError("sg_flux: diffusivity must be positive");
    if (!(dx > 0.0)) throw DomainError("sg_flux: spacing must be positive");
    const double theta = a * dx / d;
    return d / dx * (bernoulli(theta) * u_right - bernoulli(-theta) * u_left) - k_half;
}

double combine_half(InterpolationRule rule, double fl, double fr) {
    if (fl == fr) return fl;
    auto root_of = [rule](double v) {
        if (v < 0.0) throw DomainError("interpolation rule '" + to_string(rule) + "': negative product under a square root");
        return std::sqrt(v);
    };
    switch (rule) {
        case InterpolationRule::MeanOfU:
        case InterpolationRule::ArithmeticMeanOfK: return 0.5 * (fl + fr);
        case InterpolationRule::HarmonicMean: {
            if (fl * fr == 0.0) return 0.0;
            const double s = fl + fr;
            if (s == 0.0) throw DomainError("interpolation rule 'harmonic': values sum to zero");
            return 2.0 * fl * fr / s;
        }
        case InterpolationRule::HeronianMean: return (fl + root_of(fl * fr) + fr) / 3.0;
        case InterpolationRule::GeometricMean: return root_of(fl * fr);
        case InterpolationRule::CubicPowerMean: return std::cbrt(0.5 * (fl * fl * fl + fr * fr * fr));
        case InterpolationRule::QuadraticPowerMean: return std::sqrt(0.5 * (fl * fl + fr * fr));
    }
    return 0.5 * (fl + fr);
}

namespace {

void check_sizes(std::span<const double> u, const Grid& grid, std::span<double> dudt) {
    if (u.size() != grid.nodes() || dudt.size() != grid.nodes()) {
        std::ostringstream os;
        os << "state has " << u.size() << " nodes, grid expects " << grid.nodes();
        throw DomainError(os.str());
    }
}

/// Spatially uniform advection for the nonlocal model, evaluated once per call.
double uniform_advection(std::span<const double> u, const CoefficientModel& c, double t) {
    const double h = height_of(u, HeightDefinition::integral());
    // A state whose height leaves [0, 1] is a failed step, not bad input.
    if (!(h >= -1e-6 && h <= 1.0 + 1e-6)) {
        std::ostringstream os;
        os << "integral height " << h << " left [0, 1] at t = " << t;
        throw NumericalBlowup(0, t, os.str());
    }
    return eval_a(c, std::clamp(h, 0.0, 1.0));
}

/// Turn half-point fluxes J[0..N-1] (J[j] between nodes j and j+1) into dudt.
void assemble(std::span<const double> flux, const TransportSystem& sys, const Grid& grid, double t,
              std::span<double> dudt) {
    const std::size_t n = grid.n_cells;
    const double fo = sys.numbers.fo;
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(flux[j])) {
            std::ostringstream os;
            os << "non-finite flux between nodes " << j << " and " << j + 1 << " at t = " << t;
            throw NumericalBlowup(j, t, os.str());
        }
    }
    for (std::size_t j = 1; j < n; ++j) dudt[j] = fo * (flux[j] - flux[j - 1]) / grid.dx;
    dudt[0] = sys.left.is_dirichlet() ? 0.0 : fo * flux[0] / (0.5 * grid.dx);
    dudt[n] = sys.right.is_dirichlet() ? 0.0 : -fo * flux[n - 1] / (0.5 * grid.dx);
}

}  // namespace

void rhs_sg(std::span<const double> u, double t, const TransportSystem& sys, const Grid& grid,
            InterpolationRule rule, std::span<double> dudt) {
    check_sizes(u, grid, dudt);
    const auto& c = sys.coefficients;
    const double pe = sys.numbers.pe;
    const double bo = sys.numbers.bo;
    const bool nonlocal = c.nonlocal();
    const double a_uniform = nonlocal ? uniform_advection(u, c, t) : 0.0;
    const auto& kp = c.conductivity();
    const auto d_eff = [&c](double v) { return c.effective_d(v); };
    const auto k_of = [&kp](double v) { return kp(v); };

    std::vector<double> flux(grid.n_cells);
    for (std::size_t j = 0; j < grid.n_cells; ++j) {
        const double ul = u[j];
        const double ur = u[j + 1];
        const double d = interp_half(rule, d_eff, ul, ur);
        const double k = interp_half(rule, k_of, ul, ur);
        double a = a_uniform;
        if (!nonlocal) {
            const auto& ap = std::get<LocalAdvection>(c.advection()).a;
            a = interp_half(rule, [&ap](double v) { return ap(v); }, ul, ur);
        }
        if (!(d > 0.0)) {
            std::ostringstream os;
            os << "non-positive diffusivity " << d << " between nodes " << j << " and " << j + 1;
            throw DomainError(os.str());
        }
        flux[j] = sg_flux(ul, ur, pe * a, d, bo * k, grid.dx);
    }
    assemble(flux, sys, grid, t, dudt);
}

std::vector<double> rhs_sg(const Field& field, const TransportSystem& sys, const Grid& grid,
                           InterpolationRule rule) {
    std::vector<double> out(field.size());
    rhs_sg(field.view(), field.time, sys, grid, rule, out);
    return out;
}

void rhs_central_fd(std::span<const double> u, double t, const TransportSystem& sys, const Grid& grid,
                    std::span<double> dudt) {
    check_sizes(u, grid, dudt);
    const auto& c = sys.coefficients;
    const double pe = sys.numbers.pe;
    const double bo = sys.numbers.bo;
    const bool nonlocal = c.nonlocal();
    const double a_uniform = nonlocal ? uniform_advection(u, c, t) : 0.0;

    // Nodal advective + gravity flux F_j = Pe a_j u_j + Bo k(u_j); averaging it
    // to the half points gives centered first differences after assembly.
    std::vector<double> adv(u.size());
    std::vector<double> dnode(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        const double a = nonlocal ? a_uniform : c.advection_at(u[j], 0.0);
        adv[j] = pe * a * u[j] + bo * c.conductivity()(u[j]);
        dnode[j] = c.effective_d(u[j]);
    }
    std::vector<double> flux(grid.n_cells);
    for (std::size_t j = 0; j < grid.n_cells; ++j) {
        const double d = 0.5 * (dnode[j] + dnode[j + 1]);
        flux[j] = d * (u[j + 1] - u[j]) / grid.dx - 0.5 * (adv[j] + adv[j + 1]);
    }
    assemble(flux, sys, grid, t, dudt);
}

std::vector<double> rhs_central_fd(const Field& field, const TransportSystem& sys, const Grid& grid) {
    std::vector<double> out(field.size());
    rhs_central_fd(field.view(), field.time, sys, grid, out);
    return out;
}

void rhs(SchemeKind kind, std::span<const double> u, double t, const TransportSystem& sys, const Grid& grid,
         InterpolationRule rule, std::span<double> dudt) {
    if (kind == SchemeKind::ScharfetterGummel)
        rhs_sg(u, t, sys, grid, rule, dudt);
    else
        rhs_central_fd(u, t, sys, grid, dudt);
}

namespace {

/// tanh(p dx / (2 d)) / p, continuous at p = 0.
double tanh_ratio(double p, double d, double dx) {
    p = std::abs(p);
    const double z = p * dx / (2.0 * d);
    if (z < 1e-8) return dx / (2.0 * d);
    return std::tanh(z) / p;
}

}  // namespace

double cfl_dt_linear(double a, double d, double k_prime_max, double dx) {
    if (!(d > 0.0)) throw DomainError("cfl_dt_linear: diffusivity must be positive");
    if (!(dx > 0.0)) throw DomainError("cfl_dt_linear: spacing must be positive");
    return dx * tanh_ratio(a + k_prime_max, d, dx);
}

double cfl_dt_nonlinear(std::span<const double> u, const TransportSystem& sys, const Grid& grid, bool strict) {
    if (u.size() != grid.nodes()) throw DomainError("cfl_dt_nonlinear: state does not match grid");
    const auto& c = sys.coefficients;
    const auto& n = sys.numbers;
    const double a_uniform = c.nonlocal() ? uniform_advection(u, c, 0.0) : 0.0;
    const double dx = grid.dx;

    double d_max = 0.0;
    for (double v : u) d_max = std::max(d_max, n.fo * c.effective_d(v));

    // (P/D) coth(P dx / 2D) = 1 / tanh_ratio(P, D, dx) / D
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.n_cells; ++j) {
        const double um = 0.5 * (u[j] + u[j + 1]);
        const double d = n.fo * c.effective_d(um);
        if (!(d > 0.0)) throw DomainError("cfl_dt_nonlinear: non-positive diffusivity at a half point");
        const double a = c.nonlocal() ? a_uniform : c.advection_at(um, 0.0);
        const double p = n.fo * (n.pe * (a + um * c.advection_prime(um)) + n.bo * c.conductivity().derivative(um));
        worst = std::max(worst, 1.0 / (tanh_ratio(p, d, dx) * d));
    }
    const double factor = strict ? 1.0 : d_max;
    return dx / (factor * worst);
}

double cfl_dt_nonlinear(const Field& field, const TransportSystem& sys, const Grid& grid, bool strict) {
    return cfl_dt_nonlinear(field.view(), sys, grid, strict);
}

double reconstruct_cell(double u_left, double u_right, double a, double d, double dx, double x_local) {
    if (!(d > 0.0)) throw DomainError("reconstruct_cell: diffusivity must be positive");
    if (!(x_local >= 0.0 && x_local <= dx)) throw DomainError("reconstruct_cell: offset outside the cell");
    const double theta = a * dx / d;
    const double s = a * x_local / d;
    double w;
    if (std::abs(theta) < 1e-12)
        w = x_local / dx;
    else if (theta > 0.0)
        w = (std::exp(s - theta) - std::exp(-theta)) / -std::expm1(-theta);
    else
        w = std::expm1(s) / std::expm1(theta);
    return u_left + (u_right - u_left) * w;
}

}  // namespace uptake
