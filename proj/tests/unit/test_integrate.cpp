#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "uptake/cases.hpp"
#include "uptake/errors.hpp"
#include "uptake/integrate.hpp"

using namespace uptake;

namespace {

OdeProblem scalar_problem(double lambda) {
    OdeProblem p;
    p.size = 1;
    p.rhs = [lambda](double, std::span<const double> y, std::span<double> f) { f[0] = lambda * y[0]; };
    p.impose = [](double, std::span<double>) {};
    p.max_stable_dt = [lambda](double, std::span<const double>) { return 2.0 / std::abs(lambda); };
    return p;
}

}  // namespace

TEST_CASE("spec validation") {
    CHECK_NOTHROW(IntegratorSpec::adaptive(1e-4, 1e-4, 1.0).validate());
    CHECK_THROWS_AS(IntegratorSpec::adaptive(0.0, 1e-4, 1.0).validate(), DomainError);
    CHECK_THROWS_AS(IntegratorSpec::euler(-1.0, 1.0).validate(), DomainError);
    CHECK_THROWS_AS(IntegratorSpec::euler_auto(1.0, 1.5).validate(), DomainError);
}

TEST_CASE("zero horizon returns the initial state") {
    const auto sys = linear_validation_system();
    Grid g(10);
    const auto init = initial_field(sys, g);
    for (auto spec : {IntegratorSpec::adaptive(1e-4, 1e-4, 0.0), IntegratorSpec::euler(1e-3, 0.0)}) {
        const std::vector<double> samples{0.0};
        const auto tr = integrate(spec, sys, g, InterpolationRule::MeanOfU, SchemeKind::ScharfetterGummel, init, samples);
        REQUIRE(tr.times.size() == 1);
        CHECK(tr.states[0].values == init.values);
        CHECK(tr.heights[0] == 0.0);
    }
}

TEST_CASE("euler step matches the explicit update formula") {
    const auto sys = linear_validation_system();
    Grid g(100);
    const double dt = 1e-4, dx = 0.01;
    const auto f0 = initial_field(sys, g);
    auto u = f0.values;
    u[0] = 0.05;  // a non-trivial state near the left end
    u[1] = 0.02;
    const Field f(u, 0.0);
    const auto next = step_euler(f, sys, g, InterpolationRule::MeanOfU, dt);
    // u_j + dt/dx [ (d/dx)(B(t)u_{j+1} - B(-t)u_j) - k(...) - (d/dx)(B(t)u_j - B(-t)u_{j-1}) + k(...) ]
    const double th = 0.02 * dx / 0.05;
    const double bp = th / (std::exp(th) - 1.0), bm = bp + th;
    for (std::size_t j = 1; j < 100; ++j) {
        const double jp = 0.05 / dx * (bp * u[j + 1] - bm * u[j]) - 0.5 * 0.5 * (u[j] + u[j + 1]);
        const double jm = 0.05 / dx * (bp * u[j] - bm * u[j - 1]) - 0.5 * 0.5 * (u[j - 1] + u[j]);
        CHECK(next.values[j] == doctest::Approx(u[j] + dt / dx * (jp - jm)).epsilon(1e-12).scale(1e-8));
    }
    const double s = std::sin(M_PI * dt);
    CHECK(next.values[0] == doctest::Approx(0.2 * s * s).epsilon(1e-14));
    CHECK(next.values[100] == doctest::Approx(0.3 * s * s).epsilon(1e-14));
    CHECK(next.time == dt);
}

TEST_CASE("stationary state is unchanged by a step") {
    auto sys = apriori_uptake_system();
    sys.left = BoundaryCondition::dirichlet(ConstantFunction{0.0});
    Grid g(20);
    const Field f(std::vector<double>(21, 0.0), 0.0);
    CHECK(step_euler(f, sys, g, InterpolationRule::MeanOfU, 1e-3).values == f.values);
}

TEST_CASE("euler beyond the cfl bound blows up") {
    const auto sys = linear_validation_system();
    Grid g(100);
    const double dt = 10.0 * cfl_dt_linear(0.02, 0.05, 0.5, 0.01);
    const auto times = uniform_times(3.0, 3);
    CHECK_THROWS_AS(integrate(IntegratorSpec::euler(dt, 3.0), sys, g, InterpolationRule::MeanOfU,
                              SchemeKind::ScharfetterGummel, initial_field(sys, g), times),
                    NumericalBlowup);
}

TEST_CASE("euler under the cfl bound stays within the data range") {
    const auto sys = linear_validation_system();
    Grid g(100);
    const double dt = 0.99 * cfl_dt_linear(0.02, 0.05, 0.5, 0.01);
    const auto times = uniform_times(3.0, 300);
    const auto tr = integrate(IntegratorSpec::euler(dt, 3.0), sys, g, InterpolationRule::MeanOfU,
                              SchemeKind::ScharfetterGummel, initial_field(sys, g), times);
    for (const auto& f : tr.states) {
        for (double v : f.values) {
            CHECK(v >= -1e-9);
            CHECK(v <= 0.3 + 1e-9);
        }
    }
}

TEST_CASE("adams-bashforth-moulton converges with tolerance on y' = -y") {
    const auto p = scalar_problem(-1.0);
    const std::vector<double> y0{1.0};
    const std::vector<double> samples{0.0, 1.0, 2.0};
    double prev = 1.0;
    for (double tol : {1e-4, 1e-6, 1e-8}) {
        const auto sol = solve_ode(p, IntegratorSpec::adaptive(tol, tol, 2.0), y0, samples);
        const double err = std::abs(sol.states[2][0] - std::exp(-2.0));
        CHECK(err < 50.0 * tol);
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("high order is reached on smooth problems") {
    // with order 4 the step count scales like tol^(-1/5), far below tol^(-1/2)
    const auto p = scalar_problem(-1.0);
    const std::vector<double> y0{1.0};
    const std::vector<double> samples{0.0, 5.0};
    const auto coarse = solve_ode(p, IntegratorSpec::adaptive(1e-6, 1e-6, 5.0), y0, samples);
    const auto fine = solve_ode(p, IntegratorSpec::adaptive(1e-10, 1e-10, 5.0), y0, samples);
    CHECK(static_cast<double>(fine.step_count) < 10.0 * static_cast<double>(coarse.step_count));
    CHECK(std::abs(fine.states[1][0] - std::exp(-5.0)) < 1e-8);
}

TEST_CASE("samples are linearly interpolated between accepted steps") {
    OdeProblem p;
    p.size = 1;
    p.rhs = [](double, std::span<const double>, std::span<double> f) { f[0] = 2.0; };
    p.impose = [](double, std::span<double>) {};
    p.max_stable_dt = [](double, std::span<const double>) { return 1.0; };
    const std::vector<double> y0{0.0};
    const std::vector<double> samples{0.0, 0.123, 0.5, 1.0};
    for (auto spec : {IntegratorSpec::euler(0.1, 1.0), IntegratorSpec::adaptive(1e-6, 1e-6, 1.0)}) {
        const auto sol = solve_ode(p, spec, y0, samples);
        REQUIRE(sol.times == samples);
        for (std::size_t i = 0; i < samples.size(); ++i) CHECK(sol.states[i][0] == doctest::Approx(2.0 * samples[i]));
    }
}

TEST_CASE("adaptive and euler agree on the linear case") {
    const auto sys = linear_validation_system();
    Grid g(50);
    const auto times = uniform_times(1.0, 20);
    const auto init = initial_field(sys, g);
    const auto a = integrate(IntegratorSpec::adaptive(1e-6, 1e-6, 1.0), sys, g, InterpolationRule::MeanOfU,
                             SchemeKind::ScharfetterGummel, init, times);
    const auto e = integrate(IntegratorSpec::euler(1e-5, 1.0), sys, g, InterpolationRule::MeanOfU,
                             SchemeKind::ScharfetterGummel, init, times);
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        for (std::size_t j = 0; j < g.nodes(); ++j)
            worst = std::max(worst, std::abs(a.states[i].values[j] - e.states[i].values[j]));
    }
    CHECK(worst < 5e-5);
}

TEST_CASE("auto euler step follows the cfl bound") {
    const auto sys = nonlinear_validation_system();
    Grid g(20);
    const auto times = uniform_times(1.0, 4);
    const auto tr = integrate(IntegratorSpec::euler_auto(1.0), sys, g, InterpolationRule::MeanOfU,
                              SchemeKind::ScharfetterGummel, initial_field(sys, g), times);
    const double dt0 = cfl_dt_nonlinear(initial_field(sys, g), sys, g);
    CHECK(tr.step_count > static_cast<std::size_t>(0.9 / (0.9 * dt0) * 0.5));
    CHECK(tr.rhs_eval_count == tr.step_count);
}

TEST_CASE("uptake heights do not decrease") {
    const auto sys = apriori_uptake_system();
    Grid g(20);
    const auto times = uniform_times(15.0, 60);
    const auto tr = integrate(IntegratorSpec::adaptive(1e-4, 1e-4, 15.0), sys, g, InterpolationRule::MeanOfU,
                              SchemeKind::ScharfetterGummel, initial_field(sys, g), times);
    for (std::size_t i = 1; i < tr.heights.size(); ++i) CHECK(tr.heights[i] >= tr.heights[i - 1] - 1e-9);
    CHECK(tr.heights.back() > 0.05);
    CHECK(tr.heights.back() < 1.0);
}
