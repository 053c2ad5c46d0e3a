#include "uptake/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "uptake/errors.hpp"

namespace uptake {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kFisherIntervals = 200;

std::size_t slot(Parameter p) { return static_cast<std::size_t>(p); }

std::array<double, 3> all_values(const TransportSystem& sys) {
    std::array<double, 3> out{kNaN, kNaN, kNaN};
    for (auto p : {Parameter::D4, Parameter::K3, Parameter::A0}) {
        if (p == Parameter::A0 && !sys.coefficients.nonlocal()) continue;
        out[slot(p)] = sys.coefficients.value_of(p);
    }
    return out;
}

IntegratorSpec until(IntegratorSpec spec, double t_end) {
    spec.t_end = t_end;
    return spec;
}

std::vector<double> heights_of(const Trajectory& tr, const HeightDefinition& def) {
    std::vector<double> h;
    h.reserve(tr.states.size());
    for (const auto& s : tr.states) h.push_back(height_of(s, def));
    return h;
}

/// Counts forward solves and records every finite evaluation.
class Objective {
public:
    explicit Objective(const EstimationProblem& p) : problem_(p) {}

    double operator()(std::span<const double> x) {
        ++solves_;
        return cost_J(x, problem_);
    }
    std::size_t solves() const noexcept { return solves_; }

private:
    const EstimationProblem& problem_;
    std::size_t solves_ = 0;
};

/// Reflect across a violated bound, then clip.
void project(std::vector<double>& x, const std::vector<Bounds>& b) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < b[i].lower) x[i] = 2.0 * b[i].lower - x[i];
        if (x[i] > b[i].upper) x[i] = 2.0 * b[i].upper - x[i];
        x[i] = std::clamp(x[i], b[i].lower, b[i].upper);
    }
}

struct Search {
    std::vector<double> best;
    double best_cost = kInf;
    std::size_t iterations = 0;
    std::string stop_reason;
    std::vector<std::pair<std::vector<double>, double>> path;
};

Search nelder_mead(const EstimationProblem& p, Objective& f) {
    const std::size_t n = p.free.size();
    std::vector<std::vector<double>> v(n + 1, p.initial);
    for (std::size_t i = 0; i < n; ++i) {
        const double width = p.bounds[i].upper - p.bounds[i].lower;
        const double h = p.initial_step * width;
        // step towards the interior when the start sits near the upper bound
        v[i + 1][i] += v[i + 1][i] + h <= p.bounds[i].upper ? h : -h;
    }
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(v[i]);

    Search s;
    std::vector<std::size_t> order(n + 1);
    auto sort = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    };
    sort();
    if (!std::isfinite(fv[order[0]])) throw EstimationFailed("every point of the initial simplex failed to solve");
    s.path.emplace_back(v[0], fv[0]);
    if (order[0] != 0) s.path.emplace_back(v[order[0]], fv[order[0]]);

    auto point = [&](const std::vector<double>& c, const std::vector<double>& w, double coef) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = c[i] + coef * (w[i] - c[i]);
        project(x, p.bounds);
        return x;
    };

    for (;;) {
        const std::size_t b = order[0], w = order[n], sw = order[n > 0 ? n - 1 : 0];
        double spread = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j) spread = std::max(spread, std::abs(v[i][j] - v[b][j]));
        if (spread < p.step_tolerance) {
            s.stop_reason = "step";
            break;
        }
        if (fv[w] - fv[b] < p.cost_tolerance) {
            s.stop_reason = "cost";
            break;
        }
        if (s.iterations >= static_cast<std::size_t>(p.max_iterations)) {
            s.stop_reason = "iterations";
            break;
        }
        ++s.iterations;

        std::vector<double> c(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == w) continue;
            for (std::size_t j = 0; j < n; ++j) c[j] += v[i][j] / static_cast<double>(n);
        }
        const auto xr = point(c, v[w], -1.0);
        const double fr = f(xr);
        if (fr < fv[b]) {
            const auto xe = point(c, v[w], -2.0);
            const double fe = f(xe);
            if (fe < fr) {
                v[w] = xe, fv[w] = fe;
            } else {
                v[w] = xr, fv[w] = fr;
            }
        } else if (fr < fv[sw]) {
            v[w] = xr, fv[w] = fr;
        } else {
            const bool outside = fr < fv[w];
            const auto xc = outside ? point(c, xr, 0.5) : point(c, v[w], 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[w])) {
                v[w] = xc, fv[w] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == b) continue;
                    v[i] = point(v[b], v[i], 0.5);
                    fv[i] = f(v[i]);
                }
            }
        }
        sort();
        s.path.emplace_back(v[order[0]], fv[order[0]]);
    }
    s.best = v[order[0]];
    s.best_cost = fv[order[0]];
    return s;
}

Search projected_gradient(const EstimationProblem& p, Objective& f) {
    const std::size_t n = p.free.size();
    Search s;
    std::vector<double> x = p.initial;
    double fx = f(x);
    if (!std::isfinite(fx)) throw EstimationFailed("the initial guess failed to solve");
    s.path.emplace_back(x, fx);
    double width = kInf;
    for (const auto& b : p.bounds) width = std::min(width, b.upper - b.lower);
    double alpha = 0.0;

    for (;;) {
        if (s.iterations >= static_cast<std::size_t>(p.max_iterations)) {
            s.stop_reason = "iterations";
            break;
        }
        ++s.iterations;
        std::vector<double> g(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double h = 1e-6 * (p.bounds[i].upper - p.bounds[i].lower);
            std::vector<double> xp(x), xm(x);
            xp[i] = std::min(x[i] + h, p.bounds[i].upper);
            xm[i] = std::max(x[i] - h, p.bounds[i].lower);
            g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i]);
        }
        double gmax = 0.0;
        for (double gi : g) gmax = std::max(gmax, std::abs(gi));
        if (!std::isfinite(gmax) || gmax == 0.0) {
            s.stop_reason = "step";
            break;
        }
        if (alpha == 0.0) alpha = p.initial_step * width / gmax;

        bool accepted = false;
        std::vector<double> xn(n);
        double fn = kInf, step = 0.0;
        for (int k = 0; k < 40; ++k) {
            for (std::size_t i = 0; i < n; ++i) xn[i] = std::clamp(x[i] - alpha * g[i], p.bounds[i].lower, p.bounds[i].upper);
            double d2 = 0.0;
            step = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                d2 += (xn[i] - x[i]) * (xn[i] - x[i]);
                step = std::max(step, std::abs(xn[i] - x[i]));
            }
            if (step < p.step_tolerance) break;
            fn = f(xn);
            if (fn <= fx - 1e-4 / alpha * d2) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            s.stop_reason = "step";
            break;
        }
        const double gain = fx - fn;
        x = xn;
        fx = fn;
        s.path.emplace_back(x, fx);
        alpha *= 2.0;
        if (step < p.step_tolerance) {
            s.stop_reason = "step";
            break;
        }
        if (gain < p.cost_tolerance) {
            s.stop_reason = "cost";
            break;
        }
    }
    s.best = x;
    s.best_cost = fx;
    return s;
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void ObservationSeries::validate() const {
    if (samples.empty()) throw IngestionError(0, "observation series is empty");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        std::ostringstream os;
        os << "observation " << i + 1 << ": ";
        if (!std::isfinite(s.t) || s.t < 0.0) os << "time must be finite and non-negative";
        else if (i > 0 && !(s.t > samples[i - 1].t)) os << "times must be strictly increasing";
        else if (!(s.h >= 0.0 && s.h <= 1.0)) os << "height " << s.h << " outside [0, 1]";
        else if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) os << "sigma must be positive";
        else continue;
        throw IngestionError(i + 1, os.str());
    }
}

std::vector<double> ObservationSeries::times() const {
    std::vector<double> t;
    for (const auto& s : samples) t.push_back(s.t);
    return t;
}

std::vector<double> ObservationSeries::heights() const {
    std::vector<double> h;
    for (const auto& s : samples) h.push_back(s.h);
    return h;
}

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::NelderMead ? "nelder_mead" : "projected_gradient";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "nelder_mead") return OptimizerKind::NelderMead;
    if (name == "projected_gradient") return OptimizerKind::ProjectedGradient;
    throw DomainError("unknown optimizer '" + name + "' (expected nelder_mead or projected_gradient)");
}

void EstimationProblem::validate() const {
    if (free.empty()) throw DomainError("no free parameters to estimate");
    if (std::set<Parameter>(free.begin(), free.end()).size() != free.size())
        throw DomainError("free parameters must not repeat");
    if (bounds.size() != free.size() || initial.size() != free.size())
        throw DomainError("one bound and one initial value per free parameter required");
    for (std::size_t i = 0; i < free.size(); ++i) {
        const auto name = to_string(free[i]);
        if (free[i] == Parameter::A0 && !system.coefficients.nonlocal())
            throw DomainError("a0 can only be estimated for the nonlocal advection model");
        if (!(bounds[i].lower < bounds[i].upper)) throw DomainError("bounds of " + name + " must satisfy lower < upper");
        if (!(initial[i] >= bounds[i].lower && initial[i] <= bounds[i].upper))
            throw DomainError("initial " + name + " lies outside its bounds");
    }
    if (max_iterations < 1) throw DomainError("max_iterations must be at least 1");
    if (!(initial_step > 0.0 && initial_step <= 1.0)) throw DomainError("initial_step must lie in (0, 1]");
    observations.validate();
    integrator.validate();
}

TransportSystem EstimationProblem::system_at(std::span<const double> values) const {
    if (values.size() != free.size()) throw DomainError("one value per free parameter required");
    TransportSystem s = system;
    for (std::size_t i = 0; i < free.size(); ++i) s = s.with(free[i], values[i]);
    return s;
}

std::vector<double> model_heights(std::span<const double> values, const EstimationProblem& problem) {
    const auto sys = problem.system_at(values);
    const auto times = problem.observations.times();
    const auto tr = integrate(until(problem.integrator, times.back()), sys, problem.grid, problem.rule,
                              SchemeKind::ScharfetterGummel, initial_field(sys, problem.grid), times);
    return heights_of(tr, problem.height);
}

double cost_J(std::span<const double> values, const EstimationProblem& problem) {
    for (std::size_t i = 0; i < values.size() && i < problem.bounds.size(); ++i) {
        if (!(values[i] >= problem.bounds[i].lower && values[i] <= problem.bounds[i].upper))
            throw DomainError(to_string(problem.free[i]) + " outside its bounds");
    }
    std::vector<double> h;
    try {
        h = model_heights(values, problem);
    } catch (const Error& e) {
        if (e.numerical()) return kInf;
        throw;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double r = h[i] - problem.observations.samples[i].h;
        s += r * r;
    }
    return std::sqrt(s);
}

std::vector<double> EstimationResult::free_values() const {
    std::vector<double> v;
    for (auto p : free) v.push_back(estimated[slot(p)]);
    return v;
}

FisherMatrix fisher_at(std::span<const double> values, const EstimationProblem& problem) {
    const auto sys = problem.system_at(values);
    const double t_end = problem.observations.samples.back().t;
    const auto times = uniform_times(t_end, kFisherIntervals);
    const auto st = solve_sensitivities(until(problem.integrator, t_end), sys, problem.grid, problem.free, times);
    std::vector<std::vector<double>> y;
    for (const auto& f : st.fields) y.push_back(scaled_Y(f, 1.0, 1.0));
    double sigma = 0.0;
    for (const auto& s : problem.observations.samples) sigma += s.sigma;
    sigma /= static_cast<double>(problem.observations.samples.size());
    return fisher(problem.free, y, times, sigma, t_end);
}

EstimationResult minimize(const EstimationProblem& problem) {
    problem.validate();
    Objective f(problem);
    const Search s = problem.optimizer == OptimizerKind::NelderMead ? nelder_mead(problem, f)
                                                                     : projected_gradient(problem, f);
    if (!std::isfinite(s.best_cost)) throw EstimationFailed("no evaluated point produced a finite cost");

    EstimationResult r;
    r.free = problem.free;
    r.initial = all_values(problem.system_at(problem.initial));
    r.estimated = all_values(problem.system_at(s.best));
    r.initial_cost = s.path.front().second;
    r.residual = s.best_cost;
    r.iterations = s.iterations;
    r.forward_solves = f.solves();
    r.stop_reason = s.stop_reason;
    for (std::size_t i = 0; i < s.path.size(); ++i)
        r.path.push_back({i, all_values(problem.system_at(s.path[i].first)), s.path[i].second});

    r.eta = {kNaN, kNaN, kNaN};
    try {
        r.fisher = fisher_at(s.best, problem);
        const auto eta = error_estimators(r.fisher);
        for (std::size_t i = 0; i < problem.free.size(); ++i) r.eta[slot(problem.free[i])] = eta[i];
    } catch (const Error& e) {
        if (!e.numerical()) throw;
    }
    return r;
}

std::vector<EstimationResult> multi_start(const EstimationProblem& problem,
                                          const std::vector<std::vector<double>>& starts) {
    std::vector<std::future<EstimationResult>> jobs;
    for (const auto& x0 : starts) {
        EstimationProblem p = problem;
        p.initial = x0;
        jobs.push_back(std::async(std::launch::async, [p = std::move(p)] { return minimize(p); }));
    }
    std::vector<EstimationResult> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

double estimate_spread(const std::vector<EstimationResult>& results) {
    if (results.empty()) throw DomainError("no results to compare");
    double worst = 0.0;
    for (auto p : results.front().free) {
        double lo = kInf, hi = -kInf, mean = 0.0;
        for (const auto& r : results) {
            const double v = r.estimated[slot(p)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            mean += v / static_cast<double>(results.size());
        }
        worst = std::max(worst, (hi - lo) / std::abs(mean));
    }
    return worst;
}

GaussianStream::GaussianStream(std::uint64_t seed) : engine_(seed) {}

double GaussianStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 53-bit uniforms; u1 in (0, 1] keeps the logarithm finite
    const double u1 = 1.0 - static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
}

ObservationSeries synthesize_observations(const TransportSystem& truth, const Grid& grid,
                                          const IntegratorSpec& integrator, double noise_sigma, double sample_dt,
                                          double t_max, std::uint64_t seed, HeightDefinition height) {
    if (!(noise_sigma >= 0.0)) throw DomainError("noise sigma must be non-negative");
    if (!(sample_dt > 0.0) || !(t_max >= sample_dt)) throw DomainError("need 0 < sample_dt <= t_max");
    std::vector<double> times;
    for (std::size_t k = 1; static_cast<double>(k) * sample_dt <= t_max * (1.0 + 1e-12); ++k)
        times.push_back(static_cast<double>(k) * sample_dt);
    const auto tr = integrate(until(integrator, times.back()), truth, grid, InterpolationRule::MeanOfU,
                              SchemeKind::ScharfetterGummel, initial_field(truth, grid), times);
    const auto h = heights_of(tr, height);

    GaussianStream noise(seed);
    ObservationSeries out;
    const double sigma = noise_sigma > 0.0 ? noise_sigma : kDefaultSigmaH;
    for (std::size_t i = 0; i < times.size(); ++i)
        out.samples.push_back({times[i], std::clamp(h[i] + noise_sigma * noise.next(), 0.0, 1.0), sigma});

    const auto v = all_values(truth);
    std::ostringstream os;
    os.precision(17);
    os << "synthetic(seed=" << seed << ",d4=" << v[0] << ",k3=" << v[1] << ",a0=" << csv_number(v[2])
       << ",noise=" << noise_sigma << ")";
    out.provenance = os.str();
    return out;
}

void write_estimate_report(std::ostream& os, const EstimationResult& r) {
    os << "parameter,a_priori,estimated,eta\n";
    const char* names[] = {"d4", "k3", "a0"};
    for (std::size_t i = 0; i < 3; ++i)
        os << names[i] << ',' << csv_number(r.initial[i]) << ',' << csv_number(r.estimated[i]) << ','
           << csv_number(r.eta[i]) << '\n';
    os << "J," << csv_number(r.initial_cost) << ',' << csv_number(r.residual) << ",\n";
}

void write_path_csv(std::ostream& os, const EstimationResult& r) {
    os << "iterate,d4,k3,a0,J\n";
    for (const auto& p : r.path)
        os << p.iterate << ',' << csv_number(p.values[0]) << ',' << csv_number(p.values[1]) << ','
           << csv_number(p.values[2]) << ',' << csv_number(p.cost) << '\n';
}

}  // namespace uptake
