// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uptake/cases.hpp"
#include "uptake/errors.hpp"
#include "uptake/estimate.hpp"
#include "uptake/metrics.hpp"
#include "uptake/sensitivity.hpp"

using namespace uptake;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Notes {
public:
    template <class... A>
    void add(const char* fmt, A... args) {
        if (!text_.empty()) text_ += "; ";
        if constexpr (sizeof...(A) == 0) {
            text_ += fmt;
        } else {
            char buf[256];
            std::snprintf(buf, sizeof buf, fmt, args...);
            text_ += buf;
        }
    }
    const std::string& str() const { return text_; }

private:
    std::string text_;
};

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Trajectory solve(const IntegratorSpec& spec, const TransportSystem& sys, const Grid& g, SchemeKind kind,
                 std::span<const double> times, InterpolationRule rule = InterpolationRule::MeanOfU) {
    return integrate(spec, sys, g, rule, kind, initial_field(sys, g), times);
}

const char* scheme_name(SchemeKind k) { return k == SchemeKind::ScharfetterGummel ? "SG" : "FD"; }

// Shared fine-grid oracles.
const ReferenceSolution& linear_reference() {
    static const ReferenceSolution ref = build_reference(
        linear_validation_system(), Grid(800), IntegratorSpec::adaptive(1e-8, 1e-8, kLinearValidationEnd),
        uniform_times(kLinearValidationEnd, 300));
    return ref;
}

// Four times finer than the smallest spacing of the spatial sweep.
const ReferenceSolution& linear_sweep_reference() {
    static const ReferenceSolution ref = build_reference(
        linear_validation_system(), Grid(1600), IntegratorSpec::adaptive(1e-8, 1e-8, kLinearValidationEnd),
        uniform_times(kLinearValidationEnd, 300));
    return ref;
}

const ReferenceSolution& nonlinear_reference() {
    static const ReferenceSolution ref = build_reference(
        nonlinear_validation_system(), Grid(500), IntegratorSpec::adaptive(1e-8, 1e-8, kNonlinearValidationEnd),
        uniform_times(kNonlinearValidationEnd, 150));
    return ref;
}

TransportSystem benchmark_truth() {
    return apriori_uptake_system().with(Parameter::D4, 1.0).with(Parameter::K3, 0.8257).with(Parameter::A0, 0.0052);
}

EstimationProblem benchmark_problem() {
    EstimationProblem p;
    p.grid = Grid::with_spacing(0.05);
    p.integrator = IntegratorSpec::adaptive(1e-4, 1e-4, 15.0);
    p.observations = synthesize_observations(benchmark_truth(), p.grid, p.integrator, 0.0227, 0.05, 15.0, 1);
    p.system = apriori_uptake_system();
    p.free = {Parameter::D4, Parameter::K3, Parameter::A0};
    p.bounds.assign(3, Bounds{0.0, 2.0});
    p.initial = {0.6, 0.8, 0.7};
    return p;
}

struct Benchmark {
    EstimationResult result;
    double seconds = 0.0;
};

const Benchmark& benchmark() {
    static const Benchmark b = [] {
        const auto t0 = Clock::now();
        Benchmark out;
        out.result = minimize(benchmark_problem());
        out.seconds = seconds_since(t0);
        return out;
    }();
    return b;
}

// ---------------------------------------------------------------------------

Outcome linear_accuracy() {
    const auto t0 = Clock::now();
    const auto& ref = linear_reference();
    const auto sys = linear_validation_system();
    const Grid g(100);
    const auto times = uniform_times(kLinearValidationEnd, 300);
    const auto tr = solve(IntegratorSpec::adaptive(1e-4, 1e-4, kLinearValidationEnd), sys, g,
                          SchemeKind::ScharfetterGummel, times);
    const double e = eps_inf(eps2_profile(tr, g, ref));
    const double secs = seconds_since(t0);
    Notes n;
    n.add("max eps2 = %.3e (limit 5e-4), %.1f s incl. reference (limit 60 s)", e, secs);
    return {e <= 5e-4 && secs <= 60.0, n.str()};
}

Outcome cfl_formula() {
    const double dt = cfl_dt_linear(0.02, 0.05, 0.5, 1e-2);
    bool blew_up = false;
    try {
        const auto sys = linear_validation_system();
        (void)solve(IntegratorSpec::euler(2e-3, kLinearValidationEnd), sys, Grid(100), SchemeKind::ScharfetterGummel,
                    uniform_times(kLinearValidationEnd, 30));
    } catch (const NumericalBlowup&) {
        blew_up = true;
    }
    Notes n;
    n.add("cfl dt = %.4e (range [9.5e-4, 1.05e-3]), Euler dt=2e-3 %s", dt, blew_up ? "blows up" : "stays bounded");
    return {dt >= 9.5e-4 && dt <= 1.05e-3 && blew_up, n.str()};
}

Outcome spatial_order() {
    const auto& ref = linear_sweep_reference();
    const auto sys = linear_validation_system();
    const auto times = uniform_times(kLinearValidationEnd, 300);
    Outcome out;
    Notes n;
    std::vector<double> steps, errors[2];
    for (double dx : {1e-2, 5e-3, 2.5e-3}) {
        const auto g = Grid::with_spacing(dx);
        steps.push_back(dx);
        for (auto kind : {SchemeKind::ScharfetterGummel, SchemeKind::CentralFiniteDifference}) {
            try {
                const auto tr = solve(IntegratorSpec::euler(1e-4, kLinearValidationEnd), sys, g, kind, times);
                errors[kind == SchemeKind::ScharfetterGummel ? 0 : 1].push_back(
                    eps_inf(eps2_profile(tr, g, ref)));
            } catch (const NumericalBlowup& e) {
                out.pass = false;
                n.add("%s dx=%g blows up at t=%.4f", scheme_name(kind), dx, e.time());
                errors[kind == SchemeKind::ScharfetterGummel ? 0 : 1].push_back(NAN);
            }
        }
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        n.add("dx=%g SG %.3e FD %.3e", steps[i], errors[0][i], errors[1][i]);
        if (!(errors[1][i] > errors[0][i])) out.pass = false;
    }
    std::vector<double> fit_steps, fit_errors;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (std::isfinite(errors[0][i])) fit_steps.push_back(steps[i]), fit_errors.push_back(errors[0][i]);
    }
    if (fit_steps.size() == steps.size()) {
        const double order = convergence_order(fit_errors, fit_steps);
        n.add("SG order %.2f (range [1.7, 2.3])", order);
        if (!(order >= 1.7 && order <= 2.3)) out.pass = false;
    } else {
        out.pass = false;
        n.add("SG order not fitted, sweep incomplete");
    }
    out.detail = n.str();
    return out;
}

Outcome temporal_order() {
    const auto sys = linear_validation_system();
    const Grid g(100);
    const auto times = uniform_times(kLinearValidationEnd, 300);
    // same grid, converged in time: isolates the temporal error
    const auto ref = solve(IntegratorSpec::adaptive(1e-10, 1e-10, kLinearValidationEnd), sys, g,
                           SchemeKind::ScharfetterGummel, times);
    std::vector<double> steps, errors;
    Notes n;
    for (double dt : {1e-3, 5e-4, 2.5e-4}) {
        const auto tr =
            solve(IntegratorSpec::euler(dt, kLinearValidationEnd), sys, g, SchemeKind::ScharfetterGummel, times);
        steps.push_back(dt);
        errors.push_back(eps_inf(eps2_profile(tr, g, ref, g)));
        n.add("dt=%g eps_inf %.3e", dt, errors.back());
    }
    const double order = convergence_order(errors, steps);
    n.add("order %.2f (range [0.7, 1.3])", order);
    return {order >= 0.7 && order <= 1.3, n.str()};
}

Outcome nonlinear_table() {
    const auto t0 = Clock::now();
    const auto& ref = nonlinear_reference();
    const auto sys = nonlinear_validation_system();
    const Grid g(100);
    const auto times = uniform_times(kNonlinearValidationEnd, 150);
    const auto adaptive = IntegratorSpec::adaptive(1e-4, 1e-4, kNonlinearValidationEnd);
    const auto euler = IntegratorSpec::euler_auto(kNonlinearValidationEnd);
    double eps[2][2];
    std::size_t evals[2][2];
    for (int s = 0; s < 2; ++s) {
        for (int i = 0; i < 2; ++i) {
            const auto kind = s == 0 ? SchemeKind::ScharfetterGummel : SchemeKind::CentralFiniteDifference;
            const auto tr = solve(i == 0 ? adaptive : euler, sys, g, kind, times);
            eps[s][i] = eps_inf(eps2_profile(tr, g, ref));
            evals[s][i] = tr.rhs_eval_count;
        }
    }
    const double limits[2][2] = {{6e-4, 2e-4}, {3.5e-3, 6e-2}};
    Outcome out;
    Notes n;
    const char* names[2][2] = {{"SG adaptive", "SG Euler"}, {"FD adaptive", "FD Euler"}};
    for (int s = 0; s < 2; ++s) {
        for (int i = 0; i < 2; ++i) {
            n.add("%s %.3e (limit %.1e)", names[s][i], eps[s][i], limits[s][i]);
            if (!(eps[s][i] <= limits[s][i])) out.pass = false;
        }
    }
    for (int i = 0; i < 2; ++i) {
        if (!(eps[0][i] < eps[1][i])) {
            out.pass = false;
            n.add("ordering SG < FD violated for %s", i == 0 ? "adaptive" : "Euler");
        }
    }
    const double ratio = static_cast<double>(evals[0][0]) / static_cast<double>(evals[0][1]);
    n.add("SG rhs evals adaptive/Euler = %zu/%zu = %.2f (limit 0.8)", evals[0][0], evals[0][1], ratio);
    if (!(ratio < 0.8)) out.pass = false;
    const double secs = seconds_since(t0);
    n.add("%.1f s (limit 600 s)", secs);
    if (secs > 600.0) out.pass = false;
    out.detail = n.str();
    return out;
}

Outcome interpolation_rules() {
    const auto& ref = nonlinear_reference();
    const auto sys = nonlinear_validation_system();
    const auto g = Grid::with_spacing(0.05);
    const auto times = uniform_times(kNonlinearValidationEnd, 150);
    std::vector<double> eps;
    Notes n;
    Outcome out;
    for (auto rule : kAllInterpolationRules) {
        const auto tr = solve(IntegratorSpec::adaptive(1e-4, 1e-4, kNonlinearValidationEnd), sys, g,
                              SchemeKind::ScharfetterGummel, times, rule);
        eps.push_back(eps_inf(eps2_profile(tr, g, ref)));
        n.add("%s %.3e", to_string(rule).c_str(), eps.back());
        if (!(eps.back() >= 0.7e-3 && eps.back() <= 4e-3)) out.pass = false;
    }
    const auto [lo, hi] = std::minmax_element(eps.begin(), eps.end());
    n.add("range [0.7e-3, 4e-3], max/min %.2f (limit 2)", *hi / *lo);
    if (!(*hi / *lo <= 2.0)) out.pass = false;
    out.detail = n.str();
    return out;
}

Outcome sensitivity_correctness() {
    const auto sys = apriori_uptake_system();
    const Grid g(20);
    const double t_end = 15.0;
    const auto times = uniform_times(t_end, 60);
    const std::vector<Parameter> all{Parameter::D4, Parameter::K3, Parameter::A0};
    // fixed step inside the CFL bound of every constant state, so perturbed
    // solves share the step sequence with the sensitivity solve
    double dt = INFINITY;
    for (int i = 0; i <= 100; ++i)
        dt = std::min(dt, cfl_dt_nonlinear(std::vector<double>(g.nodes(), 0.01 * i), sys, g));
    const auto spec = IntegratorSpec::euler(0.5 * dt, t_end);
    const auto st = solve_sensitivities(spec, sys, g, all, times);
    Outcome out;
    Notes n;
    for (std::size_t k = 0; k < all.size(); ++k) {
        const auto y = scaled_Y(st.fields[k], 1.0, 1.0);
        const double v = sys.coefficients.value_of(all[k]);
        const double dv = 1e-4 * v;
        const auto hp = solve(spec, sys.with(all[k], v + dv), g, SchemeKind::ScharfetterGummel, times).heights;
        const auto hm = solve(spec, sys.with(all[k], v - dv), g, SchemeKind::ScharfetterGummel, times).heights;
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double fd = (hp[i] - hm[i]) / (2.0 * dv);
            err = std::max(err, std::abs(fd - y[i]));
            scale = std::max(scale, std::abs(fd));
        }
        n.add("%s rel %.2e", to_string(all[k]).c_str(), err / scale);
        if (!(err <= 1e-2 * scale)) out.pass = false;
    }

    const auto adaptive = IntegratorSpec::adaptive(1e-4, 1e-4, t_end);
    const auto base = solve_sensitivities(adaptive, sys, g, all, times);
    const double yk = max_abs(scaled_Y(base.fields[1], 1.0, 1.0));
    const double ya = max_abs(scaled_Y(base.fields[2], 1.0, 1.0));
    n.add("max|Y_a0|/max|Y_k3| = %.2e (limit 1e-2)", ya / yk);
    if (!(ya <= 1e-2 * yk)) out.pass = false;

    const auto scaled = sys.with(Parameter::A0, 100.0 * sys.coefficients.value_of(Parameter::A0));
    const auto big = solve_sensitivities(adaptive, scaled, g, std::vector<Parameter>{Parameter::A0}, times);
    const double ya100 = max_abs(scaled_Y(big.fields[0], 1.0, 1.0));
    const double change = std::max(ya100 / ya, ya / ya100);
    n.add("a0 x100 changes max|Y_a0| by %.3f (limit 10)", change);
    if (!(change < 10.0)) out.pass = false;
    out.detail = n.str();
    return out;
}

Outcome fisher_ordering() {
    const auto& r = benchmark().result;
    const double d = r.eta[0], k = r.eta[1], a = r.eta[2];
    Notes n;
    n.add("eta d4 %.3g, k3 %.3g, a0 %.3g", d, k, a);
    const bool first = a > 10.0 * k;
    const bool second = 10.0 * k > 10.0 * d;
    n.add("eta(a0) > 10 eta(k3): %s; 10 eta(k3) > 10 eta(d4): %s", first ? "yes" : "no", second ? "yes" : "no");
    return {first && second, n.str()};
}

Outcome synthetic_recovery() {
    const auto& b = benchmark();
    const auto& r = b.result;
    const double ed = std::abs(r.estimated[0] - 1.0) / 1.0;
    const double ek = std::abs(r.estimated[1] - 0.8257) / 0.8257;
    Notes n;
    n.add("d4 %.4f (%.1f%%), k3 %.4f (%.1f%%), a0 %.3g, %zu forward solves (limit 300), %.1f s (limit 900 s)",
          r.estimated[0], 100 * ed, r.estimated[1], 100 * ek, r.estimated[2], r.forward_solves, b.seconds);
    return {ed <= 0.05 && ek <= 0.05 && r.forward_solves <= 300 && b.seconds <= 900.0, n.str()};
}

Outcome multi_start_convergence() {
    auto p = benchmark_problem();
    p.system = apriori_uptake_system().with(Parameter::A0, 0.0052);
    p.free = {Parameter::D4, Parameter::K3};
    p.bounds.assign(2, Bounds{0.0, 2.0});
    p.initial = {0.6, 0.8};
    const std::vector<std::vector<double>> starts{{0.5, 0.5}, {1.5, 0.5}, {0.5, 1.5}, {1.5, 1.5}, {1.0, 1.0}};
    const auto results = multi_start(p, starts);
    Notes n;
    for (const auto& r : results) n.add("(%.4f, %.4f)", r.estimated[0], r.estimated[1]);
    const double spread = estimate_spread(results);
    n.add("spread %.2e (limit 2e-2)", spread);
    return {spread <= 2e-2, n.str()};
}

Outcome boundary_insensitivity() {
    const auto& r = benchmark().result;
    auto dirichlet = apriori_uptake_system();
    for (auto p : {Parameter::D4, Parameter::K3, Parameter::A0})
        dirichlet = dirichlet.with(p, r.estimated[static_cast<std::size_t>(p)]);
    auto neumann = dirichlet;
    neumann.right = BoundaryCondition::neumann();
    const auto g = Grid::with_spacing(0.05);
    const auto times = uniform_times(15.0, 300);
    const auto spec = IntegratorSpec::adaptive(1e-4, 1e-4, 15.0);
    const auto a = solve(spec, dirichlet, g, SchemeKind::ScharfetterGummel, times);
    const auto b = solve(spec, neumann, g, SchemeKind::ScharfetterGummel, times);
    const double e = eps_inf(eps2_profile(a, g, b, g));
    Notes n;
    n.add("max eps2 difference %.3e (limit 1e-4), H(15) = %.3f", e, a.heights.back());
    return {e < 1e-4, n.str()};
}

Outcome conservation() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    const double t_end = 2.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = trial % 2 ? apriori_uptake_system() : nonlinear_validation_system();
        sys.left = BoundaryCondition::neumann();
        sys.right = BoundaryCondition::neumann();
        const Grid g(10 + rng() % 40);
        std::vector<double> u(g.nodes());
        for (auto& x : u) x = unit(rng);
        const auto rule = kAllInterpolationRules[rng() % 7];
        const auto kind = rng() % 2 ? SchemeKind::ScharfetterGummel : SchemeKind::CentralFiniteDifference;
        const auto spec = rng() % 2 ? IntegratorSpec::adaptive(1e-6, 1e-6, t_end) : IntegratorSpec::euler_auto(t_end);
        const auto tr = integrate(spec, sys, g, rule, kind, Field(u, 0.0), uniform_times(t_end, 10));
        const double m0 = tr.heights.front();
        for (std::size_t i = 1; i < tr.times.size(); ++i)
            worst = std::max(worst, std::abs(tr.heights[i] - m0) / tr.times[i]);
    }
    Notes n;
    n.add("worst mass drift %.2e per unit time over 20 random cases (limit 1e-10)", worst);
    return {worst <= 1e-10, n.str()};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> check;
    };
    const std::vector<Criterion> criteria{
        {1, "linear-case accuracy", linear_accuracy},
        {2, "linear CFL bound and blowup", cfl_formula},
        {3, "spatial order and SG vs FD", spatial_order},
        {4, "temporal order", temporal_order},
        {5, "nonlinear method table", nonlinear_table},
        {6, "interpolation rules", interpolation_rules},
        {7, "sensitivity correctness", sensitivity_correctness},
        {8, "fisher eta ordering", fisher_ordering},
        {9, "synthetic recovery", synthetic_recovery},
        {10, "multi-start convergence", multi_start_convergence},
        {11, "boundary-condition insensitivity", boundary_insensitivity},
        {12, "mass conservation", conservation},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
