#include "uptake/cli_io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "uptake/errors.hpp"

namespace uptake {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// JSON reading helpers. Each object is checked against its allowed keys and
// every error names the dotted path of the offending field.

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, path_name() + " must be an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!ok.count(it.key())) throw ConfigError(field(it.key()), "unknown key '" + field(it.key()) + "'");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& at(const char* key) const { return j_.at(key); }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(field(key), "'" + field(key) + "' must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(field(key), "'" + field(key) + "' must be finite");
        return d;
    }

    double positive(const char* key, double fallback) const {
        const double d = number(key, fallback);
        if (!(d > 0.0)) throw ConfigError(field(key), "'" + field(key) + "' must be positive");
        return d;
    }

    double non_negative(const char* key, double fallback) const {
        const double d = number(key, fallback);
        if (!(d >= 0.0)) throw ConfigError(field(key), "'" + field(key) + "' must be non-negative");
        return d;
    }

    std::uint64_t count(const char* key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw ConfigError(field(key), "'" + field(key) + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_boolean()) throw ConfigError(field(key), "'" + field(key) + "' must be true or false");
        return j_.at(key).get<bool>();
    }

    std::string text(const char* key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_string()) throw ConfigError(field(key), "'" + field(key) + "' must be a string");
        return j_.at(key).get<std::string>();
    }

    std::vector<double> numbers(const char* key, const std::vector<double>& fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(field(key), "'" + field(key) + "' must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(field(key), "'" + field(key) + "' must be an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    Reader child(const char* key) const { return Reader(j_.at(key), field(key)); }

    /// Maps a DomainError from a parser callback to a ConfigError on `key`.
    template <class T, class F>
    T convert(const char* key, T fallback, F&& parse) const {
        if (!has(key)) return fallback;
        const std::string s = text(key, "");
        try {
            return parse(s);
        } catch (const DomainError& e) {
            throw ConfigError(field(key), field(key) + ": " + e.what());
        }
    }

private:
    std::string path_name() const { return path_.empty() ? "the configuration" : "'" + path_ + "'"; }
    const json& j_;
    std::string path_;
};

Parameter parse_parameter(const std::string& s, const std::string& field) {
    try {
        return parameter_from_string(s);
    } catch (const DomainError& e) {
        throw ConfigError(field, field + ": " + e.what());
    }
}

std::vector<Parameter> parameter_list(const Reader& r, const char* key, const std::vector<Parameter>& fallback) {
    if (!r.has(key)) return fallback;
    const auto& v = r.at(key);
    if (!v.is_array()) throw ConfigError(r.field(key), "'" + r.field(key) + "' must be an array of parameter names");
    std::vector<Parameter> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw ConfigError(r.field(key), "'" + r.field(key) + "' must contain parameter names");
        out.push_back(parse_parameter(e.get<std::string>(), r.field(key)));
    }
    if (std::set<Parameter>(out.begin(), out.end()).size() != out.size())
        throw ConfigError(r.field(key), "'" + r.field(key) + "' repeats a parameter");
    return out;
}

BoundaryFunction parse_function(const Reader& r) {
    r.allow({"kind", "value", "terms"});
    const std::string kind = r.text("kind", "constant");
    if (kind == "constant") return ConstantFunction{r.number("value", 0.0)};
    if (kind == "step") return StepFunction{r.number("value", 1.0)};
    if (kind == "sine") {
        SineSeries s;
        if (!r.has("terms") || !r.at("terms").is_array())
            throw ConfigError(r.field("terms"), "'" + r.field("terms") + "' must be an array");
        for (std::size_t i = 0; i < r.at("terms").size(); ++i) {
            const Reader t(r.at("terms")[i], r.field("terms") + "[" + std::to_string(i) + "]");
            t.allow({"amplitude", "omega", "power"});
            const auto power = t.count("power", 1);
            if (power < 1 || power > 8) throw ConfigError(t.field("power"), "'" + t.field("power") + "' must be 1..8");
            s.terms.push_back({t.number("amplitude", 0.0), t.number("omega", 0.0), static_cast<int>(power)});
        }
        return s;
    }
    throw ConfigError(r.field("kind"), "'" + r.field("kind") + "' must be constant, step or sine");
}

BoundaryCondition parse_boundary(const Reader& r) {
    r.allow({"kind", "value"});
    const std::string kind = r.text("kind", "dirichlet");
    if (kind == "neumann") return BoundaryCondition::neumann();
    if (kind != "dirichlet") throw ConfigError(r.field("kind"), "'" + r.field("kind") + "' must be dirichlet or neumann");
    if (!r.has("value")) return BoundaryCondition::dirichlet(ConstantFunction{0.0});
    return BoundaryCondition::dirichlet(parse_function(r.child("value")));
}

ProblemConfig parse_problem(const Reader& r) {
    r.allow({"fo", "pe", "bo", "d", "advection", "k", "diffusivity_floor", "left", "right", "height",
             "initial_value"});
    ProblemConfig p;
    p.numbers.fo = r.positive("fo", p.numbers.fo);
    p.numbers.pe = r.non_negative("pe", p.numbers.pe);
    p.numbers.bo = r.non_negative("bo", p.numbers.bo);
    p.d = r.numbers("d", p.d);
    p.k = r.numbers("k", p.k);
    if (p.d.empty()) throw ConfigError(r.field("d"), "'" + r.field("d") + "' needs at least one coefficient");
    if (p.k.empty()) throw ConfigError(r.field("k"), "'" + r.field("k") + "' needs at least one coefficient");
    p.diffusivity_floor = r.non_negative("diffusivity_floor", p.diffusivity_floor);
    if (r.has("advection")) {
        const auto a = r.child("advection");
        a.allow({"kind", "a0", "coefficients"});
        const std::string kind = a.text("kind", "nonlocal");
        if (kind == "nonlocal") {
            p.nonlocal_advection = true;
            p.a0 = a.non_negative("a0", p.a0);
        } else if (kind == "local") {
            p.nonlocal_advection = false;
            p.a_local = a.numbers("coefficients", p.a_local);
            if (p.a_local.empty())
                throw ConfigError(a.field("coefficients"), "'" + a.field("coefficients") + "' needs a coefficient");
        } else {
            throw ConfigError(a.field("kind"), "'" + a.field("kind") + "' must be local or nonlocal");
        }
    }
    if (r.has("left")) p.left = parse_boundary(r.child("left"));
    if (r.has("right")) p.right = parse_boundary(r.child("right"));
    if (r.has("height")) {
        const auto h = r.child("height");
        h.allow({"kind", "u_hat"});
        const std::string kind = h.text("kind", "integral");
        if (kind == "integral") {
            p.height = HeightDefinition::integral();
        } else if (kind == "threshold") {
            try {
                p.height = HeightDefinition::threshold(h.number("u_hat", 0.5));
            } catch (const DomainError& e) {
                throw ConfigError(h.field("u_hat"), h.field("u_hat") + ": " + e.what());
            }
        } else {
            throw ConfigError(h.field("kind"), "'" + h.field("kind") + "' must be integral or threshold");
        }
    }
    p.initial_value = r.number("initial_value", p.initial_value);
    if (p.initial_value < 0.0 || p.initial_value > 1.0)
        throw ConfigError(r.field("initial_value"), "'" + r.field("initial_value") + "' must lie in [0, 1]");
    try {
        (void)p.system();
    } catch (const DomainError& e) {
        throw ConfigError(r.field("d"), std::string("problem coefficients rejected: ") + e.what());
    }
    return p;
}

IntegratorSpec parse_integrator(const Reader& r) {
    r.allow({"kind", "abs_tol", "rel_tol", "initial_dt", "max_order", "dt", "safety_factor", "cfl_strict"});
    IntegratorSpec s = IntegratorSpec::adaptive(1e-4, 1e-4, 1.0);
    const std::string kind = r.text("kind", "adaptive");
    if (kind == "euler") s.kind = IntegratorSpec::Kind::EulerExplicit;
    else if (kind != "adaptive")
        throw ConfigError(r.field("kind"), "'" + r.field("kind") + "' must be adaptive or euler");
    s.abs_tol = r.positive("abs_tol", s.abs_tol);
    s.rel_tol = r.positive("rel_tol", s.rel_tol);
    s.initial_dt = r.positive("initial_dt", s.initial_dt);
    s.max_order = static_cast<int>(r.count("max_order", static_cast<std::uint64_t>(s.max_order)));
    if (s.max_order < 1 || s.max_order > 4)
        throw ConfigError(r.field("max_order"), "'" + r.field("max_order") + "' must be 1..4");
    s.dt = r.non_negative("dt", s.dt);
    s.safety_factor = r.positive("safety_factor", s.safety_factor);
    if (s.safety_factor > 1.0)
        throw ConfigError(r.field("safety_factor"), "'" + r.field("safety_factor") + "' must not exceed 1");
    s.cfl_strict = r.boolean("cfl_strict", s.cfl_strict);
    return s;
}

void check_dx(const Reader& r, const char* key, double dx) {
    try {
        (void)Grid::with_spacing(dx);
    } catch (const DomainError& e) {
        throw ConfigError(r.field(key), r.field(key) + ": " + e.what());
    }
}

double horizon(const Reader& r, double fallback) { return r.non_negative("t_end", fallback); }

std::size_t sample_count(const Reader& r, std::size_t fallback) {
    const auto n = r.count("samples", fallback);
    if (n < 1) throw ConfigError(r.field("samples"), "'" + r.field("samples") + "' must be at least 1");
    return n;
}

json function_json(const BoundaryFunction& f) {
    if (const auto* c = std::get_if<ConstantFunction>(&f)) return {{"kind", "constant"}, {"value", c->value}};
    if (const auto* s = std::get_if<StepFunction>(&f)) return {{"kind", "step"}, {"value", s->value}};
    json terms = json::array();
    for (const auto& t : std::get<SineSeries>(f).terms)
        terms.push_back({{"amplitude", t.amplitude}, {"omega", t.omega}, {"power", t.power}});
    return {{"kind", "sine"}, {"terms", terms}};
}

json boundary_json(const BoundaryCondition& b) {
    if (!b.is_dirichlet()) return {{"kind", "neumann"}};
    return {{"kind", "dirichlet"}, {"value", function_json(b.value)}};
}

json parameter_list_json(const std::vector<Parameter>& ps) {
    json a = json::array();
    for (auto p : ps) a.push_back(to_string(p));
    return a;
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') ++line, col = 1;
        else ++col;
    }
    return {line, col};
}

std::string read_file(const std::filesystem::path& path, bool config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        const std::string msg = "cannot open '" + path.string() + "'";
        if (config) throw ConfigError("", msg);
        throw IngestionError(0, msg);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_double(const std::string& s, std::size_t line, const char* what) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        throw IngestionError(line, "line " + std::to_string(line) + ": " + what + " '" + s + "' is not a number");
    return v;
}

void write_number(std::ostream& os, double v) {
    const auto old = os.precision(17);
    os << v;
    os.precision(old);
}

// ---------------------------------------------------------------------------
// Task drivers.

IntegratorSpec task_integrator(const RunConfig& c, double t_end, bool cfl_strict) {
    IntegratorSpec s = c.discretization.integrator;
    s.t_end = t_end;
    s.cfl_strict = s.cfl_strict || cfl_strict;
    return s;
}

std::vector<double> sample_grid(double t_end, std::size_t samples) {
    if (t_end == 0.0) return {0.0};
    return uniform_times(t_end, samples);
}

std::ofstream open_output(const std::filesystem::path& dir, const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ConfigError("output.dir", "cannot write '" + (dir / name).string() + "'");
    return out;
}

struct Row {
    std::string name;
    double eps_inf = 0.0;
    double scd = 0.0;
    double cpu = 0.0;
    std::size_t rhs_evals = 0;
};

Row measure(const std::string& name, const TransportSystem& sys, const Grid& grid, const IntegratorSpec& spec,
            InterpolationRule rule, SchemeKind kind, const ReferenceSolution& ref, std::span<const double> times) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto tr = integrate(spec, sys, grid, rule, kind, initial_field(sys, grid), times);
    const double cpu = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Row r{name, eps_inf(eps2_profile(tr, grid, ref)), 0.0, cpu, tr.rhs_eval_count};
    try {
        r.scd = scd(tr.states.back().values, restrict_to(ref.trajectory.states.back().values, ref.grid, grid));
    } catch (const DegenerateReference&) {
        r.scd = std::nan("");
    }
    return r;
}

void write_rows(std::ostream& os, const char* first, const std::vector<Row>& rows) {
    os << first << ",eps_inf,scd,cpu_seconds,rhs_evals\n";
    for (const auto& r : rows) {
        os << r.name << ',';
        write_number(os, r.eps_inf);
        os << ',';
        write_number(os, r.scd);
        os << ',';
        write_number(os, r.cpu);
        os << ',' << r.rhs_evals << '\n';
    }
}

void run_simulate(const RunConfig& c, const RunOptions& o, const std::filesystem::path& dir) {
    const auto sys = c.problem.system();
    const Grid grid = c.grid();
    const auto times = sample_grid(c.simulate.t_end, c.simulate.samples);
    const auto tr = integrate(task_integrator(c, c.simulate.t_end, o.cfl_strict), sys, grid, c.discretization.rule,
                              c.discretization.scheme, initial_field(sys, grid), times);
    auto h = open_output(dir, "heights.csv");
    write_heights_csv(h, tr, c.problem.height);
    auto p = open_output(dir, "profiles.csv");
    write_profiles_csv(p, tr, grid);
}

void run_validate(const RunConfig& c, const RunOptions& o, const std::filesystem::path& dir) {
    const auto& v = c.validate;
    const auto sys = c.problem.system();
    const auto times = uniform_times(v.t_end, v.samples);
    const auto ref_spec = IntegratorSpec::adaptive(v.reference_tol, v.reference_tol, v.t_end);
    const auto ref = build_reference(sys, Grid::with_spacing(v.reference_dx), ref_spec, times, c.discretization.rule);
    const Grid grid = c.grid();
    auto adaptive = task_integrator(c, v.t_end, o.cfl_strict);
    adaptive.kind = IntegratorSpec::Kind::AdaptiveMultistep;
    IntegratorSpec euler = v.euler_dt > 0.0 ? IntegratorSpec::euler(v.euler_dt, v.t_end)
                                            : IntegratorSpec::euler_auto(v.t_end, adaptive.safety_factor);
    euler.cfl_strict = adaptive.cfl_strict;

    const auto rule = c.discretization.rule;
    std::vector<Row> rows;
    rows.push_back(measure("sg_adaptive", sys, grid, adaptive, rule, SchemeKind::ScharfetterGummel, ref, times));
    rows.push_back(measure("sg_euler", sys, grid, euler, rule, SchemeKind::ScharfetterGummel, ref, times));
    rows.push_back(measure("fd_adaptive", sys, grid, adaptive, rule, SchemeKind::CentralFiniteDifference, ref, times));
    rows.push_back(measure("fd_euler", sys, grid, euler, rule, SchemeKind::CentralFiniteDifference, ref, times));
    auto m = open_output(dir, "methods.csv");
    write_rows(m, "method", rows);

    if (v.compare_rules) {
        std::vector<Row> rules;
        for (auto r : kAllInterpolationRules)
            rules.push_back(measure(to_string(r), sys, grid, adaptive, r, SchemeKind::ScharfetterGummel, ref, times));
        auto f = open_output(dir, "rules.csv");
        write_rows(f, "rule", rules);
    }
    if (!v.sweep_dx.empty()) {
        std::vector<ConvergenceRow> conv;
        for (double dx : v.sweep_dx) {
            const auto r = measure("", sys, Grid::with_spacing(dx), euler, rule, SchemeKind::ScharfetterGummel, ref,
                                   times);
            conv.push_back({dx, r.eps_inf, r.scd, r.cpu, r.rhs_evals});
        }
        auto f = open_output(dir, "convergence.csv");
        write_convergence_csv(f, conv);
    }
}

void run_sensitivity(const RunConfig& c, const RunOptions& o, const std::filesystem::path& dir) {
    const auto& s = c.sensitivity;
    const auto sys = c.problem.system();
    const auto times = uniform_times(s.t_end, s.samples);
    const auto st =
        solve_sensitivities(task_integrator(c, s.t_end, o.cfl_strict), sys, c.grid(), s.parameters, times);
    std::vector<std::vector<double>> y, raw;
    for (const auto& f : st.fields) {
        y.push_back(scaled_Y(f, 1.0, s.sigma_h));
        raw.push_back(scaled_Y(f, 1.0, 1.0));
    }
    auto out = open_output(dir, "sensitivity.csv");
    write_sensitivity_csv(out, times, s.parameters, y);

    const auto f = fisher(s.parameters, raw, times, s.sigma_h, s.t_end);
    std::vector<double> eta(f.size(), std::nan(""));
    try {
        eta = error_estimators(f);
    } catch (const IdentifiabilityError&) {
    }
    auto fo = open_output(dir, "fisher.csv");
    fo << "parameter";
    for (auto p : s.parameters) fo << ",F_" << to_string(p);
    fo << ",eta\n";
    for (std::size_t i = 0; i < f.size(); ++i) {
        fo << to_string(s.parameters[i]);
        for (std::size_t j = 0; j < f.size(); ++j) {
            fo << ',';
            write_number(fo, f(i, j));
        }
        fo << ',';
        if (!std::isnan(eta[i])) write_number(fo, eta[i]);
        fo << '\n';
    }
}

void run_estimate(const RunConfig& c, const RunOptions& o, const std::filesystem::path& dir) {
    const auto& e = c.estimate;
    if (!c.problem.nonlocal_advection && std::find(e.free.begin(), e.free.end(), Parameter::A0) != e.free.end())
        throw ConfigError("estimate.free", "a0 is free but the problem uses local advection");
    EstimationProblem p;
    p.system = c.problem.system();
    p.grid = c.grid();
    p.integrator = task_integrator(c, 1.0, o.cfl_strict);
    p.rule = c.discretization.rule;
    p.height = c.problem.height;
    if (e.observations.empty()) {
        const auto& s = e.synthetic;
        auto truth = p.system.with(Parameter::D4, s.d4).with(Parameter::K3, s.k3);
        if (truth.coefficients.nonlocal()) truth = truth.with(Parameter::A0, s.a0);
        auto spec = p.integrator;
        spec.t_end = s.t_max;
        p.observations = synthesize_observations(truth, p.grid, spec, s.noise, s.sample_dt, s.t_max,
                                                 o.seed.value_or(s.seed), p.height);
        auto obs = open_output(dir, "observations.csv");
        write_observations(obs, p.observations);
    } else {
        p.observations = load_observations(c.base_dir / e.observations);
    }
    p.free = e.free;
    p.bounds = e.bounds;
    p.initial = e.initial;
    if (p.initial.empty()) {
        for (auto f : p.free) p.initial.push_back(p.system.coefficients.value_of(f));
    }
    p.optimizer = e.optimizer;
    p.max_iterations = e.max_iterations;
    p.step_tolerance = e.step_tolerance;
    p.cost_tolerance = e.cost_tolerance;
    try {
        p.validate();
    } catch (const DomainError& err) {
        throw ConfigError("estimate", err.what());
    }
    const auto r = minimize(p);
    auto rep = open_output(dir, "estimate.csv");
    write_estimate_report(rep, r);
    auto path = open_output(dir, "path.csv");
    write_path_csv(path, r);
}

void run_scales(const RunConfig& c, const std::filesystem::path& dir) {
    const auto n = dimensionless_numbers(c.scales);
    auto out = open_output(dir, "scales.csv");
    out << "fo,pe,bo\n";
    write_number(out, n.fo);
    out << ',';
    write_number(out, n.pe);
    out << ',';
    write_number(out, n.bo);
    out << '\n';
}

}  // namespace

TransportSystem ProblemConfig::system() const {
    AdvectionModel a = nonlocal_advection ? AdvectionModel{NonlocalAdvection{a0}}
                                          : AdvectionModel{LocalAdvection{Polynomial(a_local)}};
    return {numbers, CoefficientModel(Polynomial(d), a, Polynomial(k), diffusivity_floor), left, right,
            initial_value};
}

std::string to_string(TaskKind k) {
    switch (k) {
        case TaskKind::Simulate: return "simulate";
        case TaskKind::Validate: return "validate";
        case TaskKind::Sensitivity: return "sensitivity";
        case TaskKind::Estimate: return "estimate";
        case TaskKind::Scales: return "scales";
    }
    return "?";
}

TaskKind task_kind_from_string(const std::string& name) {
    for (auto k : {TaskKind::Simulate, TaskKind::Validate, TaskKind::Sensitivity, TaskKind::Estimate,
                   TaskKind::Scales}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("task", "unknown task '" + name + "'");
}

Grid RunConfig::grid() const { return Grid::with_spacing(discretization.dx); }

bool RunConfig::operator==(const RunConfig& o) const {
    return task == o.task && problem == o.problem && discretization == o.discretization && simulate == o.simulate &&
           validate == o.validate && sensitivity == o.sensitivity && estimate == o.estimate &&
           scales.length == o.scales.length && scales.t_ref == o.scales.t_ref && scales.d_ref == o.scales.d_ref &&
           scales.k_ref == o.scales.k_ref && scales.a_ref == o.scales.a_ref &&
           scales.theta_sat == o.scales.theta_sat && output_dir == o.output_dir;
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        std::string detail = e.what();
        const auto col_at = detail.find("column");
        if (const auto colon = detail.find(": ", col_at); col_at != std::string::npos && colon != std::string::npos)
            detail = detail.substr(colon + 2);
        std::ostringstream os;
        os << "line " << line << ", column " << col << ": " << detail;
        throw ConfigError("", os.str());
    }
    const Reader root(j, "");
    root.allow({"task", "problem", "discretization", "simulate", "validate", "sensitivity", "estimate", "scales",
                "output"});
    RunConfig c;
    c.task = task_kind_from_string(root.text("task", "simulate"));
    if (root.has("problem")) c.problem = parse_problem(root.child("problem"));

    if (root.has("discretization")) {
        const auto r = root.child("discretization");
        r.allow({"dx", "scheme", "rule", "integrator"});
        auto& d = c.discretization;
        d.dx = r.positive("dx", d.dx);
        check_dx(r, "dx", d.dx);
        d.scheme = r.convert("scheme", d.scheme, scheme_kind_from_string);
        d.rule = r.convert("rule", d.rule, interpolation_rule_from_string);
        if (r.has("integrator")) d.integrator = parse_integrator(r.child("integrator"));
    }
    if (root.has("simulate")) {
        const auto r = root.child("simulate");
        r.allow({"t_end", "samples"});
        c.simulate.t_end = horizon(r, c.simulate.t_end);
        c.simulate.samples = sample_count(r, c.simulate.samples);
    }
    if (root.has("validate")) {
        const auto r = root.child("validate");
        r.allow({"t_end", "samples", "reference_dx", "reference_tol", "euler_dt", "sweep_dx", "compare_rules"});
        auto& v = c.validate;
        v.t_end = r.positive("t_end", v.t_end);
        v.samples = sample_count(r, v.samples);
        v.reference_dx = r.positive("reference_dx", v.reference_dx);
        check_dx(r, "reference_dx", v.reference_dx);
        v.reference_tol = r.positive("reference_tol", v.reference_tol);
        v.euler_dt = r.non_negative("euler_dt", v.euler_dt);
        v.sweep_dx = r.numbers("sweep_dx", v.sweep_dx);
        for (double dx : v.sweep_dx) {
            try {
                (void)Grid::with_spacing(dx);
            } catch (const DomainError& e) {
                throw ConfigError(r.field("sweep_dx"), r.field("sweep_dx") + ": " + e.what());
            }
        }
        v.compare_rules = r.boolean("compare_rules", v.compare_rules);
    }
    if (root.has("sensitivity")) {
        const auto r = root.child("sensitivity");
        r.allow({"t_end", "samples", "parameters", "sigma_h"});
        auto& s = c.sensitivity;
        s.t_end = r.positive("t_end", s.t_end);
        s.samples = sample_count(r, s.samples);
        s.parameters = parameter_list(r, "parameters", s.parameters);
        if (s.parameters.empty())
            throw ConfigError(r.field("parameters"), "'" + r.field("parameters") + "' must not be empty");
        s.sigma_h = r.positive("sigma_h", s.sigma_h);
    }
    if (root.has("estimate")) {
        const auto r = root.child("estimate");
        r.allow({"observations", "synthetic", "free", "bounds", "initial", "optimizer", "max_iterations",
                 "step_tolerance", "cost_tolerance"});
        auto& e = c.estimate;
        e.observations = r.text("observations", e.observations);
        if (r.has("synthetic")) {
            const auto s = r.child("synthetic");
            s.allow({"d4", "k3", "a0", "noise", "sample_dt", "t_max", "seed"});
            auto& y = e.synthetic;
            y.d4 = s.number("d4", y.d4);
            y.k3 = s.number("k3", y.k3);
            y.a0 = s.number("a0", y.a0);
            y.noise = s.non_negative("noise", y.noise);
            y.sample_dt = s.positive("sample_dt", y.sample_dt);
            y.t_max = s.positive("t_max", y.t_max);
            if (y.t_max < y.sample_dt) throw ConfigError(s.field("t_max"), "'" + s.field("t_max") + "' < sample_dt");
            y.seed = s.count("seed", y.seed);
        }
        e.free = parameter_list(r, "free", e.free);
        if (e.free.empty()) throw ConfigError(r.field("free"), "'" + r.field("free") + "' must not be empty");
        e.bounds.assign(e.free.size(), Bounds{});
        e.initial.clear();
        if (r.has("bounds")) {
            const auto b = r.child("bounds");
            for (auto it = r.at("bounds").begin(); it != r.at("bounds").end(); ++it) {
                const auto p = parse_parameter(it.key(), b.field(it.key()));
                const auto pos = std::find(e.free.begin(), e.free.end(), p) - e.free.begin();
                if (static_cast<std::size_t>(pos) == e.free.size())
                    throw ConfigError(b.field(it.key()), "bounds given for '" + it.key() + "', which is not free");
                const auto v = b.numbers(it.key().c_str(), {});
                if (v.size() != 2 || !(v[0] < v[1]))
                    throw ConfigError(b.field(it.key()), "'" + b.field(it.key()) + "' must be [lower, upper]");
                e.bounds[static_cast<std::size_t>(pos)] = {v[0], v[1]};
            }
        }
        if (r.has("initial")) {
            const auto in = r.child("initial");
            e.initial.assign(e.free.size(), std::nan(""));
            for (auto it = r.at("initial").begin(); it != r.at("initial").end(); ++it) {
                const auto p = parse_parameter(it.key(), in.field(it.key()));
                const auto pos = std::find(e.free.begin(), e.free.end(), p) - e.free.begin();
                if (static_cast<std::size_t>(pos) == e.free.size())
                    throw ConfigError(in.field(it.key()), "initial value given for '" + it.key() + "', which is not free");
                e.initial[static_cast<std::size_t>(pos)] = in.number(it.key().c_str(), 0.0);
            }
            for (std::size_t i = 0; i < e.free.size(); ++i) {
                if (std::isnan(e.initial[i]))
                    throw ConfigError(in.field(to_string(e.free[i])), "missing initial value for " + to_string(e.free[i]));
            }
        }
        for (std::size_t i = 0; i < e.free.size(); ++i) {
            if (!e.initial.empty() && !(e.initial[i] >= e.bounds[i].lower && e.initial[i] <= e.bounds[i].upper))
                throw ConfigError(r.field("initial"), "initial " + to_string(e.free[i]) + " lies outside its bounds");
        }
        e.optimizer = r.convert("optimizer", e.optimizer, optimizer_kind_from_string);
        const auto it = r.count("max_iterations", static_cast<std::uint64_t>(e.max_iterations));
        if (it < 1 || it > 1000000)
            throw ConfigError(r.field("max_iterations"), "'" + r.field("max_iterations") + "' must be 1..1000000");
        e.max_iterations = static_cast<int>(it);
        e.step_tolerance = r.positive("step_tolerance", e.step_tolerance);
        e.cost_tolerance = r.positive("cost_tolerance", e.cost_tolerance);
    }
    if (root.has("scales")) {
        const auto r = root.child("scales");
        r.allow({"length", "t_ref", "d_ref", "k_ref", "a_ref", "theta_sat"});
        auto& s = c.scales;
        s.length = r.positive("length", s.length);
        s.t_ref = r.positive("t_ref", s.t_ref);
        s.d_ref = r.positive("d_ref", s.d_ref);
        s.k_ref = r.positive("k_ref", s.k_ref);
        s.a_ref = r.positive("a_ref", s.a_ref);
        s.theta_sat = r.positive("theta_sat", s.theta_sat);
        if (s.theta_sat > 1.0) throw ConfigError(r.field("theta_sat"), "'scales.theta_sat' must not exceed 1");
    }
    if (root.has("output")) {
        const auto r = root.child("output");
        r.allow({"dir"});
        c.output_dir = r.text("dir", c.output_dir);
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig c = parse_config(read_file(path, true));
    c.base_dir = path.parent_path();
    return c;
}

std::string serialize_config(const RunConfig& c) {
    const auto& p = c.problem;
    json problem = {{"fo", p.numbers.fo},
                    {"pe", p.numbers.pe},
                    {"bo", p.numbers.bo},
                    {"d", p.d},
                    {"k", p.k},
                    {"diffusivity_floor", p.diffusivity_floor},
                    {"left", boundary_json(p.left)},
                    {"right", boundary_json(p.right)},
                    {"initial_value", p.initial_value}};
    problem["advection"] = p.nonlocal_advection ? json{{"kind", "nonlocal"}, {"a0", p.a0}}
                                                : json{{"kind", "local"}, {"coefficients", p.a_local}};
    problem["height"] = p.height.kind == HeightDefinition::Kind::Integral
                            ? json{{"kind", "integral"}}
                            : json{{"kind", "threshold"}, {"u_hat", p.height.u_hat}};

    const auto& d = c.discretization;
    const auto& s = d.integrator;
    json integrator = {{"kind", s.is_euler() ? "euler" : "adaptive"},
                       {"abs_tol", s.abs_tol},
                       {"rel_tol", s.rel_tol},
                       {"initial_dt", s.initial_dt},
                       {"max_order", s.max_order},
                       {"dt", s.dt},
                       {"safety_factor", s.safety_factor},
                       {"cfl_strict", s.cfl_strict}};
    json discretization = {
        {"dx", d.dx}, {"scheme", to_string(d.scheme)}, {"rule", to_string(d.rule)}, {"integrator", integrator}};

    const auto& v = c.validate;
    json validate = {{"t_end", v.t_end},
                     {"samples", v.samples},
                     {"reference_dx", v.reference_dx},
                     {"reference_tol", v.reference_tol},
                     {"euler_dt", v.euler_dt},
                     {"sweep_dx", v.sweep_dx},
                     {"compare_rules", v.compare_rules}};
    const auto& se = c.sensitivity;
    json sensitivity = {{"t_end", se.t_end},
                        {"samples", se.samples},
                        {"parameters", parameter_list_json(se.parameters)},
                        {"sigma_h", se.sigma_h}};
    const auto& e = c.estimate;
    const auto& y = e.synthetic;
    json bounds = json::object(), initial = json::object();
    for (std::size_t i = 0; i < e.free.size(); ++i) {
        bounds[to_string(e.free[i])] = {e.bounds[i].lower, e.bounds[i].upper};
        if (!e.initial.empty()) initial[to_string(e.free[i])] = e.initial[i];
    }
    json estimate = {{"observations", e.observations},
                     {"synthetic",
                      {{"d4", y.d4},
                       {"k3", y.k3},
                       {"a0", y.a0},
                       {"noise", y.noise},
                       {"sample_dt", y.sample_dt},
                       {"t_max", y.t_max},
                       {"seed", y.seed}}},
                     {"free", parameter_list_json(e.free)},
                     {"bounds", bounds},
                     {"optimizer", to_string(e.optimizer)},
                     {"max_iterations", e.max_iterations},
                     {"step_tolerance", e.step_tolerance},
                     {"cost_tolerance", e.cost_tolerance}};
    if (!e.initial.empty()) estimate["initial"] = initial;
    const auto& sc = c.scales;
    json scales = {{"length", sc.length}, {"t_ref", sc.t_ref},   {"d_ref", sc.d_ref},
                   {"k_ref", sc.k_ref},   {"a_ref", sc.a_ref},   {"theta_sat", sc.theta_sat}};

    json j = {{"task", to_string(c.task)},
              {"problem", problem},
              {"discretization", discretization},
              {"simulate", {{"t_end", c.simulate.t_end}, {"samples", c.simulate.samples}}},
              {"validate", validate},
              {"sensitivity", sensitivity},
              {"estimate", estimate},
              {"scales", scales},
              {"output", {{"dir", c.output_dir}}}};
    return j.dump(2) + "\n";
}

ObservationSeries parse_observations(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    bool has_sigma = false;
    bool header = false;
    ObservationSeries s;
    while (std::getline(in, line)) {
        ++n;
        if (n == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        const auto cols = split(line);
        if (!header) {
            if (cols == std::vector<std::string>{"t", "H"}) has_sigma = false;
            else if (cols == std::vector<std::string>{"t", "H", "sigma"}) has_sigma = true;
            else throw IngestionError(n, "line " + std::to_string(n) + ": header must be 't,H' or 't,H,sigma'");
            header = true;
            continue;
        }
        const std::size_t want = has_sigma ? 3 : 2;
        if (cols.size() != want) {
            // an empty sigma cell falls back to the default
            if (!(has_sigma && cols.size() == 2))
                throw IngestionError(n, "line " + std::to_string(n) + ": expected " + std::to_string(want) + " columns");
        }
        ObservationSample o;
        o.t = parse_double(cols[0], n, "t");
        o.h = parse_double(cols[1], n, "H");
        if (has_sigma && cols.size() == 3 && !cols[2].empty()) o.sigma = parse_double(cols[2], n, "sigma");
        const std::string where = "line " + std::to_string(n) + ": ";
        if (o.t < 0.0) throw IngestionError(n, where + "negative time");
        if (!s.samples.empty() && o.t == s.samples.back().t) throw IngestionError(n, where + "duplicate time");
        if (!s.samples.empty() && o.t < s.samples.back().t) throw IngestionError(n, where + "times are not sorted");
        if (o.h < 0.0 || o.h > 1.0) throw IngestionError(n, where + "H outside [0, 1]");
        if (!(o.sigma > 0.0)) throw IngestionError(n, where + "sigma must be positive");
        s.samples.push_back(o);
    }
    if (!header) throw IngestionError(1, "line 1: missing header 't,H,sigma'");
    if (s.samples.empty()) throw IngestionError(n + 1, "no observations after the header");
    return s;
}

ObservationSeries load_observations(const std::filesystem::path& path) {
    auto s = parse_observations(read_file(path, false));
    s.provenance = "file:" + path.string();
    return s;
}

void write_observations(std::ostream& os, const ObservationSeries& series) {
    os << "t,H,sigma\n";
    for (const auto& s : series.samples) {
        write_number(os, s.t);
        os << ',';
        write_number(os, s.h);
        os << ',';
        write_number(os, s.sigma);
        os << '\n';
    }
}

void write_heights_csv(std::ostream& os, const Trajectory& tr, const HeightDefinition& height) {
    os << "t,H\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        write_number(os, tr.times[i]);
        os << ',';
        write_number(os, height_of(tr.states[i], height));
        os << '\n';
    }
}

void write_profiles_csv(std::ostream& os, const Trajectory& tr, const Grid& grid) {
    os << 't';
    for (std::size_t j = 0; j < grid.nodes(); ++j) {
        os << ",x=";
        write_number(os, grid.x(j));
    }
    os << '\n';
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        write_number(os, tr.times[i]);
        for (double u : tr.states[i].values) {
            os << ',';
            write_number(os, u);
        }
        os << '\n';
    }
}

int run(TaskKind task, const RunConfig& config, const RunOptions& options, std::ostream& err) {
    try {
        const std::filesystem::path dir = options.out_dir.value_or(config.output_dir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw ConfigError("output.dir", "cannot create '" + dir.string() + "': " + ec.message());
        switch (task) {
            case TaskKind::Simulate: run_simulate(config, options, dir); break;
            case TaskKind::Validate: run_validate(config, options, dir); break;
            case TaskKind::Sensitivity: run_sensitivity(config, options, dir); break;
            case TaskKind::Estimate: run_estimate(config, options, dir); break;
            case TaskKind::Scales: run_scales(config, dir); break;
        }
        return 0;
    } catch (const Error& e) {
        err << "ERROR[" << e.code() << "]: " << e.what() << '\n';
        return e.numerical() ? 1 : 2;
    } catch (const std::exception& e) {
        err << "ERROR[internal]: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace uptake
