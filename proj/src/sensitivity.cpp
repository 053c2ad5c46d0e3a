#include "uptake/sensitivity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "uptake/errors.hpp"
#include "uptake/scheme.hpp"

namespace uptake {

namespace {

double trapezoid(std::span<const double> v, double dx) {
    double s = 0.5 * (v.front() + v.back());
    for (std::size_t j = 1; j + 1 < v.size(); ++j) s += v[j];
    return s * dx;
}

}  // namespace

void rhs_sensitivity(Parameter p, std::span<const double> x, std::span<const double> u, double t,
                     const TransportSystem& sys, const Grid& grid, std::span<double> dxdt) {
    if (x.size() != grid.nodes() || u.size() != grid.nodes() || dxdt.size() != grid.nodes())
        throw DomainError("rhs_sensitivity: field sizes do not match the grid");
    const auto& c = sys.coefficients;
    const auto& n = sys.numbers;
    const bool nonlocal = c.nonlocal();
    if (p == Parameter::A0 && !nonlocal) throw DomainError("a0 sensitivity needs the nonlocal advection model");

    const double dx = grid.dx;
    const double h = std::clamp(trapezoid(u, dx), 0.0, 1.0);
    const double ix = trapezoid(x, dx);
    const double a0 = nonlocal ? c.a0() : 0.0;
    // variation of the uniform advection: -a0 dH, plus (1 - H) for a0 itself
    const double da_uniform = nonlocal ? -a0 * ix + (p == Parameter::A0 ? 1.0 - h : 0.0) : 0.0;

    std::vector<double> flux(grid.n_cells);
    for (std::size_t j = 0; j < grid.n_cells; ++j) {
        const double ul = u[j], ur = u[j + 1];
        const double um = 0.5 * (ul + ur);
        const double xm = 0.5 * (x[j] + x[j + 1]);

        const double d = c.effective_d(um);
        const double a = nonlocal ? a0 * (1.0 - h) : c.advection_at(um, 0.0);
        const double big_a = n.pe * a;
        const double theta = big_a * dx / d;
        const double bp = bernoulli(theta), bm = bernoulli(-theta);

        double dd = c.effective_d_prime(um) * xm;
        if (p == Parameter::D4 && !c.clamped(um)) dd += um * um * um * um;
        const double da = nonlocal ? da_uniform : c.advection_prime(um) * xm;
        double dk = c.conductivity().derivative(um) * xm;
        if (p == Parameter::K3) dk += um * um * um;

        // J = (d/dx)(B(theta) ur - B(-theta) ul) - Bo k, theta = Pe a dx / d
        const double dtheta = dx * (n.pe * da * d - big_a * dd) / (d * d);
        const double jd = (bp * ur - bm * ul) / dx;
        const double jtheta = d / dx * (bernoulli_prime(theta) * ur + bernoulli_prime(-theta) * ul);
        flux[j] = jd * dd + jtheta * dtheta + d / dx * (bp * x[j + 1] - bm * x[j]) - n.bo * dk;
        if (!std::isfinite(flux[j])) {
            std::ostringstream os;
            os << "non-finite sensitivity flux between nodes " << j << " and " << j + 1 << " at t = " << t;
            throw NumericalBlowup(j, t, os.str());
        }
    }
    const std::size_t last = grid.n_cells;
    for (std::size_t j = 1; j < last; ++j) dxdt[j] = n.fo * (flux[j] - flux[j - 1]) / dx;
    dxdt[0] = sys.left.is_dirichlet() ? 0.0 : n.fo * flux[0] / (0.5 * dx);
    dxdt[last] = sys.right.is_dirichlet() ? 0.0 : -n.fo * flux[last - 1] / (0.5 * dx);
}

std::vector<double> rhs_sensitivity(const SensitivityField& x, const Field& u, const TransportSystem& sys,
                                    const Grid& grid) {
    std::vector<double> out(grid.nodes());
    rhs_sensitivity(x.parameter, x.values, u.view(), u.time, sys, grid, out);
    return out;
}

SensitivityTrajectory solve_sensitivities(const IntegratorSpec& spec, const TransportSystem& sys, const Grid& grid,
                                          std::span<const Parameter> parameters,
                                          std::span<const double> sample_times) {
    const std::size_t m = grid.nodes();
    const std::size_t np = parameters.size();
    const std::vector<Parameter> params(parameters.begin(), parameters.end());

    OdeProblem p;
    p.size = m * (np + 1);
    p.rhs = [sys, grid, params, m](double t, std::span<const double> y, std::span<double> f) {
        const auto u = y.subspan(0, m);
        rhs_sg(u, t, sys, grid, InterpolationRule::MeanOfU, f.subspan(0, m));
        for (std::size_t k = 0; k < params.size(); ++k)
            rhs_sensitivity(params[k], y.subspan((k + 1) * m, m), u, t, sys, grid, f.subspan((k + 1) * m, m));
    };
    p.impose = [sys, m, np](double t, std::span<double> y) {
        impose_boundaries(sys, t, y.subspan(0, m));
        for (std::size_t k = 1; k <= np; ++k) {
            if (sys.left.is_dirichlet()) y[k * m] = 0.0;
            if (sys.right.is_dirichlet()) y[k * m + m - 1] = 0.0;
        }
    };
    p.max_stable_dt = [sys, grid, m, strict = spec.cfl_strict](double, std::span<const double> y) {
        return cfl_dt_nonlinear(y.subspan(0, m), sys, grid, strict);
    };

    std::vector<double> y0(p.size, 0.0);
    const Field init = initial_field(sys, grid);
    std::copy(init.values.begin(), init.values.end(), y0.begin());
    OdeSolution sol = solve_ode(p, spec, y0, sample_times);

    SensitivityTrajectory out;
    out.parameters = params;
    out.fields.resize(np);
    out.state.step_count = sol.step_count;
    out.state.rhs_eval_count = sol.rhs_eval_count;
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
        const auto& y = sol.states[i];
        const double t = sol.times[i];
        std::vector<double> u(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(m));
        out.state.times.push_back(t);
        out.state.heights.push_back(height_of(u, HeightDefinition::integral()));
        out.state.states.emplace_back(std::move(u), t);
        for (std::size_t k = 0; k < np; ++k) {
            const auto first = y.begin() + static_cast<std::ptrdiff_t>((k + 1) * m);
            out.fields[k].push_back({params[k], std::vector<double>(first, first + static_cast<std::ptrdiff_t>(m)), t});
        }
    }
    return out;
}

std::vector<double> scaled_Y(std::span<const SensitivityField> x, double sigma_p, double sigma_h) {
    if (!(sigma_h > 0.0)) throw DomainError("sigma_h must be positive");
    std::vector<double> y;
    y.reserve(x.size());
    for (const auto& f : x) {
        if (f.values.size() < 2) throw DomainError("sensitivity field needs at least 2 nodes");
        const double dx = 1.0 / static_cast<double>(f.values.size() - 1);
        y.push_back(sigma_p / sigma_h * trapezoid(f.values, dx));
    }
    return y;
}

FisherMatrix fisher(std::span<const Parameter> parameters, const std::vector<std::vector<double>>& y,
                    std::span<const double> times, double sigma_h, double t_max) {
    if (!(sigma_h > 0.0)) throw DomainError("sigma_h must be positive");
    const std::size_t n = parameters.size();
    if (y.size() != n) throw DomainError("fisher: one Y series per parameter required");
    for (const auto& s : y) {
        if (s.size() != times.size()) throw DomainError("fisher: Y series and times differ in length");
    }
    FisherMatrix f;
    f.parameters.assign(parameters.begin(), parameters.end());
    f.sigma_h = sigma_h;
    f.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 1; k < times.size() && times[k] <= t_max * (1 + 1e-12); ++k)
                s += 0.5 * (times[k] - times[k - 1]) * (y[i][k] * y[j][k] + y[i][k - 1] * y[j][k - 1]);
            f.values[i * n + j] = f.values[j * n + i] = s / (sigma_h * sigma_h);
        }
    }
    return f;
}

namespace {

Eigen::MatrixXd as_matrix(const FisherMatrix& f) {
    const auto n = static_cast<Eigen::Index>(f.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = f(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return m;
}

}  // namespace

double min_eigenvalue(const FisherMatrix& f) {
    if (f.size() == 0) throw DomainError("empty Fisher matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(as_matrix(f));
    return es.eigenvalues().minCoeff();
}

std::vector<double> error_estimators(const FisherMatrix& f) {
    if (f.size() == 0) throw DomainError("empty Fisher matrix");
    const Eigen::MatrixXd m = as_matrix(f);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const auto& ev = es.eigenvalues();
    const double largest = ev.cwiseAbs().maxCoeff();
    const double smallest = ev(0);
    if (!(largest > 0.0) || !(smallest > 0.0) || largest / smallest >= kMaxFisherCondition) {
        std::ostringstream os;
        os << "Fisher matrix is singular (condition number "
           << (smallest > 0.0 ? largest / smallest : INFINITY) << "); weakest direction:";
        const auto v = es.eigenvectors().col(0);
        for (std::size_t i = 0; i < f.size(); ++i)
            os << ' ' << (v(static_cast<Eigen::Index>(i)) >= 0 ? "+" : "") << v(static_cast<Eigen::Index>(i)) << '*'
               << to_string(f.parameters[i]);
        throw IdentifiabilityError(os.str());
    }
    const Eigen::MatrixXd inv = m.partialPivLu().inverse();
    std::vector<double> eta(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        eta[i] = std::sqrt(inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    return eta;
}

void write_sensitivity_csv(std::ostream& os, std::span<const double> times, std::span<const Parameter> parameters,
                           const std::vector<std::vector<double>>& y) {
    const Parameter order[] = {Parameter::D4, Parameter::K3, Parameter::A0};
    int column[3] = {-1, -1, -1};
    for (std::size_t k = 0; k < parameters.size(); ++k) column[static_cast<int>(parameters[k])] = static_cast<int>(k);
    const auto old = os.precision(17);
    os << "t,Y_d4,Y_k3,Y_a0\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
        os << times[i];
        for (auto p : order) {
            const int c = column[static_cast<int>(p)];
            os << ',' << (c < 0 ? 0.0 : y[static_cast<std::size_t>(c)][i]);
        }
        os << '\n';
    }
    os.precision(old);
}

}  // namespace uptake
