#include "doctest.h"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "uptake/errors.hpp"
#include "uptake/estimate.hpp"

using namespace uptake;

namespace {

TransportSystem no_pressure_truth() {
    return apriori_uptake_system().with(Parameter::D4, 1.0).with(Parameter::K3, 0.8257).with(Parameter::A0, 0.0052);
}

// Small, fast problem: 10 cells, horizon 3.
EstimationProblem small_problem(std::vector<Parameter> free, std::vector<double> initial, double noise = 0.0) {
    EstimationProblem p;
    p.grid = Grid(10);
    p.integrator = IntegratorSpec::adaptive(1e-4, 1e-4, 3.0);
    p.observations = synthesize_observations(no_pressure_truth(), p.grid, p.integrator, noise, 0.1, 3.0, 5);
    p.system = no_pressure_truth();
    p.free = std::move(free);
    p.bounds.assign(p.free.size(), Bounds{0.0, 2.0});
    p.initial = std::move(initial);
    return p;
}

std::string golden_path(const char* name) { return std::string(UPTAKE_GOLDEN_DIR) + "/" + name; }

}  // namespace

TEST_CASE("observation series validation") {
    ObservationSeries s;
    CHECK_THROWS_AS(s.validate(), IngestionError);
    s.samples = {{0.5, 0.1, 0.02}, {1.0, 0.2, 0.02}};
    CHECK_NOTHROW(s.validate());
    auto bad = s;
    bad.samples.push_back({1.0, 0.3, 0.02});
    try {
        bad.validate();
        FAIL("expected an ingestion error");
    } catch (const IngestionError& e) {
        CHECK(e.row() == 3);
    }
    bad = s;
    bad.samples[1].h = 1.2;
    CHECK_THROWS_AS(bad.validate(), IngestionError);
    bad = s;
    bad.samples[0].sigma = 0.0;
    CHECK_THROWS_AS(bad.validate(), IngestionError);
    bad = s;
    bad.samples[0].t = -0.1;
    CHECK_THROWS_AS(bad.validate(), IngestionError);
}

TEST_CASE("problem validation") {
    auto p = small_problem({Parameter::D4}, {0.6});
    CHECK_NOTHROW(p.validate());
    auto q = p;
    q.free.clear(), q.bounds.clear(), q.initial.clear();
    CHECK_THROWS_AS(q.validate(), DomainError);
    q = p;
    q.initial = {2.5};
    CHECK_THROWS_AS(q.validate(), DomainError);
    q = p;
    q.bounds = {{1.0, 1.0}};
    CHECK_THROWS_AS(q.validate(), DomainError);
    q = small_problem({Parameter::D4, Parameter::D4}, {0.6, 0.7});
    CHECK_THROWS_AS(q.validate(), DomainError);
}

TEST_CASE("cost of noiseless observations at the generating parameters") {
    const auto p = small_problem({Parameter::D4, Parameter::K3, Parameter::A0}, {1.0, 0.8257, 0.0052});
    const double n = static_cast<double>(p.observations.samples.size());
    CHECK(cost_J(p.initial, p) <= 1e-4 * std::sqrt(n));
}

TEST_CASE("constant observation offset") {
    auto p = small_problem({Parameter::D4}, {1.0});
    const double delta = 0.01;
    for (auto& s : p.observations.samples) s.h += delta;
    const double n = static_cast<double>(p.observations.samples.size());
    CHECK(cost_J(p.initial, p) == doctest::Approx(delta * std::sqrt(n)).epsilon(1e-9));
}

TEST_CASE("a-priori parameters do not fit no-pressure observations") {
    auto p = small_problem({Parameter::D4, Parameter::K3, Parameter::A0}, {0.6, 0.8, 0.7});
    p.system = apriori_uptake_system();
    p.grid = Grid(20);
    p.integrator.t_end = 15.0;
    p.observations = synthesize_observations(no_pressure_truth(), p.grid, p.integrator, 0.0, 0.5, 15.0, 1);
    CHECK(cost_J(p.initial, p) > 0.05);
}

TEST_CASE("cost outside the box and failed solves") {
    auto p = small_problem({Parameter::D4}, {1.0});
    CHECK_THROWS_AS(cost_J(std::vector<double>{2.1}, p), DomainError);
    p.grid = Grid(40);
    p.integrator = IntegratorSpec::euler(0.05, 3.0);
    CHECK(std::isinf(cost_J(p.initial, p)));
    CHECK_THROWS_AS(minimize(p), EstimationFailed);
}

TEST_CASE("noiseless single-parameter recovery") {
    for (auto kind : {OptimizerKind::NelderMead, OptimizerKind::ProjectedGradient}) {
        auto p = small_problem({Parameter::D4}, {0.6});
        p.optimizer = kind;
        const auto r = minimize(p);
        INFO(to_string(kind));
        CHECK(std::abs(r.estimated[0] - 1.0) < 1e-3);
        CHECK(r.estimated[1] == 0.8257);  // fixed at the template value
        CHECK(r.forward_solves > r.iterations);
    }
}

TEST_CASE("iterates stay in the box and the cost never increases") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> start(0.0, 2.0);
    for (int trial = 0; trial < 4; ++trial) {
        for (auto kind : {OptimizerKind::NelderMead, OptimizerKind::ProjectedGradient}) {
            auto p = small_problem({Parameter::D4, Parameter::K3}, {start(rng), start(rng)}, 0.02);
            p.optimizer = kind;
            p.max_iterations = 40;
            const auto r = minimize(p);
            for (std::size_t i = 0; i < r.path.size(); ++i) {
                for (double v : {r.path[i].values[0], r.path[i].values[1]}) {
                    CHECK(v >= 0.0);
                    CHECK(v <= 2.0);
                }
                if (i > 0) CHECK(r.path[i].cost <= r.path[i - 1].cost);
            }
            CHECK(r.residual == r.path.back().cost);
            CHECK(r.residual <= r.initial_cost);
        }
    }
}

TEST_CASE("residual is reproducible") {
    const auto p = small_problem({Parameter::D4, Parameter::K3}, {0.6, 0.8}, 0.02);
    const auto r = minimize(p);
    CHECK(std::abs(cost_J(r.free_values(), p) - r.residual) <= 1e-10);
    CHECK(r.fisher.size() == 2);
    CHECK(std::isnan(r.eta[2]));
    CHECK(r.eta[0] > 0.0);
}

TEST_CASE("synthetic observations") {
    const auto truth = no_pressure_truth();
    const Grid g(10);
    const auto spec = IntegratorSpec::adaptive(1e-4, 1e-4, 10.0);
    const auto clean = synthesize_observations(truth, g, spec, 0.0, 0.04, 10.0, 9);
    CHECK(clean.samples.size() == 250);
    CHECK(clean.samples.front().t == doctest::Approx(0.04));
    const auto model = integrate(spec, truth, g, InterpolationRule::MeanOfU, SchemeKind::ScharfetterGummel,
                                 initial_field(truth, g), clean.times());
    for (std::size_t i = 0; i < clean.samples.size(); ++i) CHECK(clean.samples[i].h == model.heights[i]);
    CHECK(clean.provenance.find("seed=9") != std::string::npos);

    const auto a = synthesize_observations(truth, g, spec, 0.0227, 0.04, 10.0, 9);
    const auto b = synthesize_observations(truth, g, spec, 0.0227, 0.04, 10.0, 9);
    CHECK(a == b);
    CHECK_FALSE(a == synthesize_observations(truth, g, spec, 0.0227, 0.04, 10.0, 10));
    a.validate();

    double s2 = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) s2 += std::pow(a.samples[i].h - model.heights[i], 2);
    const double sd = std::sqrt(s2 / static_cast<double>(a.samples.size()));
    CHECK(std::abs(sd - 0.0227) <= 0.15 * 0.0227);
    CHECK_THROWS_AS(synthesize_observations(truth, g, spec, -1.0, 0.04, 10.0, 9), DomainError);
}

TEST_CASE("gaussian stream") {
    GaussianStream a(42), b(42);
    double m = 0.0, v = 0.0;
    int mismatches = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = a.next();
        mismatches += x != b.next();
        m += x / n;
        v += x * x / n;
    }
    CHECK(mismatches == 0);
    CHECK(std::abs(m) < 0.01);
    CHECK(std::abs(v - 1.0) < 0.02);
}

TEST_CASE("estimate spread") {
    EstimationResult r1, r2;
    r1.free = r2.free = {Parameter::D4, Parameter::K3};
    r1.estimated = {1.0, 0.8, 0.0};
    r2.estimated = {1.01, 0.8, 5.0};
    CHECK(estimate_spread({r1, r2}) == doctest::Approx(0.01 / 1.005).epsilon(1e-12));
}

TEST_CASE("report and path csv") {
    EstimationResult r;
    r.free = {Parameter::D4};
    r.initial = {0.6, 0.8, 0.7};
    r.estimated = {1.0, 0.8, 0.7};
    r.eta = {0.5, NAN, NAN};
    r.initial_cost = 0.25;
    r.residual = 0.125;
    r.path = {{0, {0.6, 0.8, 0.7}, 0.25}, {1, {1.0, 0.8, 0.7}, 0.125}};
    std::ostringstream rep, path;
    write_estimate_report(rep, r);
    write_path_csv(path, r);
    CHECK(rep.str() ==
          "parameter,a_priori,estimated,eta\n"
          "d4,0.59999999999999998,1,0.5\n"
          "k3,0.80000000000000004,0.80000000000000004,\n"
          "a0,0.69999999999999996,0.69999999999999996,\n"
          "J,0.25,0.125,\n");
    CHECK(path.str() ==
          "iterate,d4,k3,a0,J\n"
          "0,0.59999999999999998,0.80000000000000004,0.69999999999999996,0.25\n"
          "1,1,0.80000000000000004,0.69999999999999996,0.125\n");
}

TEST_CASE("fixture estimate matches the golden report") {
    const auto p = small_problem({Parameter::D4, Parameter::K3}, {0.6, 0.8}, 0.0227);
    std::ostringstream os;
    write_estimate_report(os, minimize(p));
    std::ifstream in(golden_path("estimate_report.csv"), std::ios::binary);
    REQUIRE(in.good());
    std::stringstream golden;
    golden << in.rdbuf();
    CHECK(os.str() == golden.str());
}
