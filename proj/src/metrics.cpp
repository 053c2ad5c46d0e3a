#include "uptake/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "uptake/errors.hpp"

namespace uptake {

std::string ReferenceSolution::provenance() const {
    std::ostringstream os;
    os.precision(17);
    os << "scheme=" << to_string(scheme) << " n_cells=" << grid.n_cells << " dx=" << grid.dx;
    if (integrator.is_euler())
        os << " integrator=euler dt=" << integrator.dt;
    else
        os << " integrator=adaptive abs_tol=" << integrator.abs_tol << " rel_tol=" << integrator.rel_tol;
    return os.str();
}

ReferenceSolution build_reference(const TransportSystem& sys, const Grid& grid, const IntegratorSpec& integrator,
                                  std::span<const double> sample_times, InterpolationRule rule) {
    ReferenceSolution ref;
    ref.grid = grid;
    ref.integrator = integrator;
    ref.scheme = SchemeKind::ScharfetterGummel;
    ref.trajectory =
        integrate(integrator, sys, grid, rule, SchemeKind::ScharfetterGummel, initial_field(sys, grid), sample_times);
    return ref;
}

std::vector<double> restrict_to(std::span<const double> field, const Grid& fine, const Grid& coarse) {
    if (field.size() != fine.nodes()) throw AlignmentError("field does not match its grid");
    if (fine.n_cells % coarse.n_cells != 0) {
        std::ostringstream os;
        os << "grid of " << fine.n_cells << " cells does not contain the nodes of a grid of " << coarse.n_cells
           << " cells";
        throw AlignmentError(os.str());
    }
    const std::size_t ratio = fine.n_cells / coarse.n_cells;
    std::vector<double> out(coarse.nodes());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = field[j * ratio];
    return out;
}

std::vector<double> eps2_profile(const Trajectory& test, const Grid& test_grid, const Trajectory& ref,
                                 const Grid& ref_grid) {
    if (test.times.size() != ref.times.size() || test.times.empty())
        throw AlignmentError("trajectories have different numbers of samples");
    for (std::size_t i = 0; i < test.times.size(); ++i) {
        if (std::abs(test.times[i] - ref.times[i]) > 1e-12 * std::max(1.0, std::abs(ref.times[i])))
            throw AlignmentError("trajectories are sampled at different times");
    }
    std::vector<double> sum(test_grid.nodes(), 0.0);
    for (std::size_t i = 0; i < test.times.size(); ++i) {
        if (test.states[i].size() != test_grid.nodes()) throw AlignmentError("test state does not match its grid");
        const auto r = restrict_to(ref.states[i].view(), ref_grid, test_grid);
        for (std::size_t j = 0; j < sum.size(); ++j) {
            const double e = test.states[i].values[j] - r[j];
            sum[j] += e * e;
        }
    }
    for (double& s : sum) s = std::sqrt(s / static_cast<double>(test.times.size()));
    return sum;
}

std::vector<double> eps2_profile(const Trajectory& test, const Grid& test_grid, const ReferenceSolution& ref) {
    if (ref.grid.n_cells < 4 * test_grid.n_cells) {
        std::ostringstream os;
        os << "reference spacing " << ref.grid.dx << " is coarser than a quarter of " << test_grid.dx;
        throw AlignmentError(os.str());
    }
    return eps2_profile(test, test_grid, ref.trajectory, ref.grid);
}

double eps_inf(std::span<const double> profile) {
    if (profile.empty()) throw DomainError("eps_inf of an empty profile");
    return *std::max_element(profile.begin(), profile.end());
}

double scd(std::span<const double> test, std::span<const double> ref) {
    if (test.size() != ref.size()) throw AlignmentError("scd: fields have different sizes");
    double worst = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < ref.size(); ++j) {
        if (std::abs(ref[j]) < kScdGuard) continue;
        any = true;
        worst = std::max(worst, std::abs((test[j] - ref[j]) / ref[j]));
    }
    if (!any) throw DegenerateReference("every reference value is below the 1e-8 guard");
    if (worst == 0.0) return kScdCap;
    return std::min(kScdCap, -std::log10(worst));
}

double convergence_order(std::span<const double> errors, std::span<const double> steps) {
    if (errors.size() != steps.size() || errors.size() < 3)
        throw DomainError("convergence_order needs at least 3 (error, step) pairs");
    const std::size_t n = errors.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(errors[i] > 0.0 && steps[i] > 0.0)) throw DomainError("convergence_order needs positive values");
        mx += std::log(steps[i]);
        my += std::log(errors[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(steps[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(errors[i]) - my);
    }
    if (sxx < 1e-12) throw DomainError("convergence_order: steps do not spread");
    return sxy / sxx;
}

void write_convergence_csv(std::ostream& os, std::span<const ConvergenceRow> rows) {
    const auto old = os.precision(17);
    os << "delta,eps_inf,scd,cpu_seconds,rhs_evals\n";
    for (const auto& r : rows)
        os << r.delta << ',' << r.eps_inf << ',' << r.scd << ',' << r.cpu_seconds << ',' << r.rhs_evals << '\n';
    os.precision(old);
}

}  // namespace uptake
