#include "uptake/integrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "uptake/errors.hpp"

namespace uptake {

IntegratorSpec IntegratorSpec::euler(double dt, double t_end) {
    IntegratorSpec s;
    s.kind = Kind::EulerExplicit;
    s.dt = dt;
    s.t_end = t_end;
    return s;
}

IntegratorSpec IntegratorSpec::euler_auto(double t_end, double safety_factor) {
    IntegratorSpec s;
    s.kind = Kind::EulerExplicit;
    s.dt = 0.0;
    s.safety_factor = safety_factor;
    s.t_end = t_end;
    return s;
}

IntegratorSpec IntegratorSpec::adaptive(double abs_tol, double rel_tol, double t_end) {
    IntegratorSpec s;
    s.kind = Kind::AdaptiveMultistep;
    s.abs_tol = abs_tol;
    s.rel_tol = rel_tol;
    s.t_end = t_end;
    return s;
}

void IntegratorSpec::validate() const {
    if (!(std::isfinite(t_end) && t_end >= 0.0)) throw DomainError("t_end must be >= 0");
    if (kind == Kind::EulerExplicit) {
        if (!(std::isfinite(dt) && dt >= 0.0)) throw DomainError("Euler dt must be positive (or 0 for auto)");
        if (!(safety_factor > 0.0 && safety_factor <= 1.0)) throw DomainError("safety_factor must lie in (0, 1]");
    } else {
        if (!(abs_tol > 0.0)) throw DomainError("abs_tol must be positive");
        if (!(rel_tol > 0.0)) throw DomainError("rel_tol must be positive");
        if (!(initial_dt > 0.0)) throw DomainError("initial_dt must be positive");
        if (max_order < 1 || max_order > 4) throw DomainError("max_order must lie in 1..4");
    }
}

std::vector<double> uniform_times(double t_end, std::size_t n) {
    std::vector<double> t(n + 1);
    for (std::size_t i = 0; i <= n; ++i) t[i] = t_end * static_cast<double>(i) / static_cast<double>(n);
    t[n] = t_end;
    return t;
}

namespace {

constexpr double kMinStep = 1e-12;

void check_samples(std::span<const double> samples, double t_end) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!(samples[i] >= 0.0 && samples[i] <= t_end * (1.0 + 1e-12)))
            throw DomainError("sample times must lie inside [0, t_end]");
        if (i > 0 && !(samples[i] > samples[i - 1])) throw DomainError("sample times must be strictly increasing");
    }
}

/// Collects samples that fall inside (t0, t1] by linear interpolation.
class Sampler {
public:
    Sampler(std::span<const double> samples, OdeSolution& out, double t_end)
        : samples_(samples), out_(out), t_end_(t_end) {}

    void initial(std::span<const double> y0) {
        while (next_ < samples_.size() && samples_[next_] <= 0.0) emit(samples_[next_], y0, y0, 0.0);
    }

    void advance(double t0, std::span<const double> y0, double t1, std::span<const double> y1) {
        const bool last = t1 >= t_end_;
        while (next_ < samples_.size() && (samples_[next_] <= t1 || last)) {
            const double s = samples_[next_];
            const double w = t1 > t0 ? std::clamp((s - t0) / (t1 - t0), 0.0, 1.0) : 1.0;
            emit(s, y0, y1, w);
        }
    }

private:
    void emit(double s, std::span<const double> y0, std::span<const double> y1, double w) {
        std::vector<double> y(y0.size());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = w == 1.0 ? y1[i] : (1.0 - w) * y0[i] + w * y1[i];
        out_.times.push_back(s);
        out_.states.push_back(std::move(y));
        ++next_;
    }

    std::span<const double> samples_;
    OdeSolution& out_;
    double t_end_;
    std::size_t next_ = 0;
};

void check_finite(std::span<const double> y, double t) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i])) {
            std::ostringstream os;
            os << "solution became non-finite at node " << i << ", t = " << t;
            throw NumericalBlowup(i, t, os.str());
        }
    }
}

OdeSolution solve_euler(const OdeProblem& p, const IntegratorSpec& spec, std::span<const double> y0,
                        std::span<const double> samples) {
    OdeSolution out;
    Sampler sampler(samples, out, spec.t_end);
    std::vector<double> y(y0.begin(), y0.end());
    std::vector<double> y_next(y.size());
    std::vector<double> f(y.size());
    p.impose(0.0, y);
    sampler.initial(y);

    const bool fixed = spec.dt > 0.0;
    const std::size_t n_fixed =
        fixed ? static_cast<std::size_t>(std::ceil(spec.t_end / spec.dt - 1e-9)) : 0;
    double t = 0.0;
    for (std::size_t n = 0; t < spec.t_end; ++n) {
        double t_next;
        if (fixed) {
            t_next = n + 1 >= n_fixed ? spec.t_end : static_cast<double>(n + 1) * spec.dt;
        } else {
            const double dt = spec.safety_factor * p.max_stable_dt(t, y);
            if (!(dt > kMinStep)) throw StiffnessError(t, "CFL step fell below 1e-12");
            t_next = t + dt >= spec.t_end ? spec.t_end : t + dt;
        }
        const double dt = t_next - t;
        p.rhs(t, y, f);
        ++out.rhs_eval_count;
        for (std::size_t i = 0; i < y.size(); ++i) y_next[i] = y[i] + dt * f[i];
        p.impose(t_next, y_next);
        check_finite(y_next, t_next);
        sampler.advance(t, y, t_next, y_next);
        y.swap(y_next);
        t = t_next;
        ++out.step_count;
    }
    sampler.advance(t, y, t, y);
    return out;
}

/// h-normalized integrals over [t, t + h] of the Lagrange basis on `nodes`.
/// Up to 5 nodes: the 3-point Gauss-Legendre rule is exact for degree 5.
template <std::size_t M>
void lagrange_weights(std::span<const double> nodes, double t, double h, std::array<double, M>& w) {
    static constexpr double gp[3] = {0.5 - 0.3872983346207416885, 0.5, 0.5 + 0.3872983346207416885};
    static constexpr double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    const std::size_t m = nodes.size();
    std::array<double, M> s{};
    for (std::size_t i = 0; i < m; ++i) s[i] = (nodes[i] - t) / h;
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int g = 0; g < 3; ++g) {
            double l = 1.0;
            for (std::size_t k = 0; k < m; ++k) {
                if (k != i) l *= (gp[g] - s[k]) / (s[i] - s[k]);
            }
            acc += gw[g] * l;
        }
        w[i] = acc;
    }
}

class AdamsPece {
public:
    AdamsPece(const OdeProblem& p, const IntegratorSpec& spec) : p_(p), spec_(spec), n_(p.size) {
        yp_.resize(n_);
        yc_.resize(n_);
        fp_.resize(n_);
        alt_p_.resize(n_);
        alt_c_.resize(n_);
    }

    OdeSolution run(std::span<const double> y0, std::span<const double> samples) {
        OdeSolution out;
        Sampler sampler(samples, out, spec_.t_end);
        std::vector<double> y(y0.begin(), y0.end());
        p_.impose(0.0, y);
        sampler.initial(y);
        if (spec_.t_end <= 0.0) return out;

        std::vector<double> f0(n_);
        p_.rhs(0.0, y, f0);
        ++out.rhs_eval_count;
        ts_.push_front(0.0);
        fs_.push_front(std::move(f0));

        const double h_max = 0.1 * spec_.t_end;
        double t = 0.0;
        double h = std::min(spec_.initial_dt, spec_.t_end);
        int k = 1;
        int failures = 0;
        while (t < spec_.t_end) {
            bool clipped = false;
            if (t + h >= spec_.t_end) {
                h = spec_.t_end - t;
                clipped = true;
            }
            const double t_next = clipped ? spec_.t_end : t + h;
            const double err = attempt(t, y, h, t_next, k, out);
            if (!(err <= 1.0)) {
                ++out.rejected_steps;
                ++failures;
                const double fac = std::isfinite(err) ? 0.9 * std::pow(err, -1.0 / (k + 1)) : 0.2;
                h *= std::clamp(fac, 0.2, 0.9);
                if (failures >= 3 && k > 1) --k;
                if (h < kMinStep) {
                    std::ostringstream os;
                    os << "adaptive step fell below 1e-12 at t = " << t;
                    throw StiffnessError(t, os.str());
                }
                continue;
            }
            failures = 0;

            // Candidate orders share the evaluated predictor slope fp.
            double best_h = h * growth(err, k);
            int best_k = k;
            const int hist = static_cast<int>(ts_.size());
            for (int q : {k - 1, k + 1}) {
                if (q < 1 || q > spec_.max_order || q > hist) continue;
                const double e = estimate(t, y, h, t_next, q);
                const double hq = h * growth(e, q);
                if (hq > (q > k ? 1.1 : 1.0) * best_h) {
                    best_h = hq;
                    best_k = q;
                }
            }

            std::vector<double> f_new(n_);
            p_.rhs(t_next, yc_, f_new);
            ++out.rhs_eval_count;
            ++out.step_count;
            sampler.advance(t, y, t_next, yc_);
            y.assign(yc_.begin(), yc_.end());
            t = t_next;
            ts_.push_front(t);
            fs_.push_front(std::move(f_new));
            if (ts_.size() > static_cast<std::size_t>(spec_.max_order + 1)) {
                ts_.pop_back();
                fs_.pop_back();
            }
            k = std::min(best_k, static_cast<int>(ts_.size()));
            h = std::min(best_h, h_max);
        }
        sampler.advance(t, y, t, y);
        return out;
    }

private:
    static double growth(double err, int k) {
        if (err <= 0.0) return 5.0;
        return std::clamp(0.9 * std::pow(err, -1.0 / (k + 1)), 0.2, 5.0);
    }

    /// PEC part of a step of order k; returns the scaled error norm and
    /// leaves the corrected state in yc_.
    double attempt(double t, std::span<const double> y, double h, double t_next, int k, OdeSolution& out) {
        predict(t, y, h, k, yp_);
        p_.impose(t_next, yp_);
        for (double v : yp_) {
            if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
        }
        try {
            p_.rhs(t_next, yp_, fp_);
        } catch (const NumericalBlowup&) {
            ++out.rhs_eval_count;
            return std::numeric_limits<double>::infinity();
        }
        ++out.rhs_eval_count;
        correct(t, y, h, t_next, k, yc_);
        p_.impose(t_next, yc_);
        return norm(y, yp_, yc_);
    }

    double estimate(double t, std::span<const double> y, double h, double t_next, int q) {
        predict(t, y, h, q, alt_p_);
        correct(t, y, h, t_next, q, alt_c_);
        p_.impose(t_next, alt_p_);
        p_.impose(t_next, alt_c_);
        return norm(y, alt_p_, alt_c_);
    }

    void predict(double t, std::span<const double> y, double h, int k, std::vector<double>& out) const {
        std::array<double, 5> nodes{};
        std::array<double, 5> w{};
        for (int i = 0; i < k; ++i) nodes[i] = ts_[i];
        lagrange_weights<5>(std::span<const double>(nodes.data(), k), t, h, w);
        for (std::size_t j = 0; j < n_; ++j) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += w[i] * fs_[i][j];
            out[j] = y[j] + h * acc;
        }
    }

    void correct(double t, std::span<const double> y, double h, double t_next, int k,
                 std::vector<double>& out) const {
        std::array<double, 5> nodes{};
        std::array<double, 5> w{};
        nodes[0] = t_next;
        for (int i = 0; i < k; ++i) nodes[i + 1] = ts_[i];
        lagrange_weights<5>(std::span<const double>(nodes.data(), k + 1), t, h, w);
        for (std::size_t j = 0; j < n_; ++j) {
            double acc = w[0] * fp_[j];
            for (int i = 0; i < k; ++i) acc += w[i + 1] * fs_[i][j];
            out[j] = y[j] + h * acc;
        }
    }

    double norm(std::span<const double> y, std::span<const double> yp, std::span<const double> yc) const {
        double e = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            const double scale = spec_.abs_tol + spec_.rel_tol * std::max(std::abs(y[j]), std::abs(yc[j]));
            const double r = std::abs(yc[j] - yp[j]) / scale;
            if (!(r <= e)) e = r;  // propagates NaN as a rejection
        }
        return std::isnan(e) ? std::numeric_limits<double>::infinity() : e;
    }

    const OdeProblem& p_;
    const IntegratorSpec& spec_;
    std::size_t n_;
    std::deque<double> ts_;
    std::deque<std::vector<double>> fs_;
    std::vector<double> yp_, yc_, fp_, alt_p_, alt_c_;
};

}  // namespace

OdeSolution solve_ode(const OdeProblem& problem, const IntegratorSpec& spec, std::span<const double> y0,
                      std::span<const double> sample_times) {
    spec.validate();
    if (y0.size() != problem.size) throw DomainError("initial state does not match the problem size");
    check_samples(sample_times, spec.t_end);
    if (spec.is_euler()) return solve_euler(problem, spec, y0, sample_times);
    return AdamsPece(problem, spec).run(y0, sample_times);
}

void impose_boundaries(const TransportSystem& sys, double t, std::span<double> u) {
    if (sys.left.is_dirichlet()) u.front() = evaluate(sys.left.value, t);
    if (sys.right.is_dirichlet()) u.back() = evaluate(sys.right.value, t);
}

Field initial_field(const TransportSystem& sys, const Grid& grid) {
    std::vector<double> u(grid.nodes(), sys.initial_value);
    impose_boundaries(sys, 0.0, u);
    return Field(std::move(u), 0.0);
}

OdeProblem transport_problem(const TransportSystem& sys, const Grid& grid, InterpolationRule rule,
                             SchemeKind kind, bool cfl_strict) {
    OdeProblem p;
    p.size = grid.nodes();
    p.rhs = [sys, grid, rule, kind](double t, std::span<const double> y, std::span<double> dydt) {
        rhs(kind, y, t, sys, grid, rule, dydt);
    };
    p.impose = [sys](double t, std::span<double> y) { impose_boundaries(sys, t, y); };
    p.max_stable_dt = [sys, grid, cfl_strict](double, std::span<const double> y) {
        return cfl_dt_nonlinear(y, sys, grid, cfl_strict);
    };
    return p;
}

Field step_euler(const Field& field, const TransportSystem& sys, const Grid& grid, InterpolationRule rule, double dt,
                 SchemeKind kind) {
    if (!(dt > 0.0)) throw DomainError("step_euler: dt must be positive");
    std::vector<double> f(field.size());
    rhs(kind, field.view(), field.time, sys, grid, rule, f);
    std::vector<double> u(field.values);
    for (std::size_t j = 0; j < u.size(); ++j) u[j] += dt * f[j];
    const double t = field.time + dt;
    impose_boundaries(sys, t, u);
    check_finite(u, t);
    return Field(std::move(u), t);
}

Trajectory integrate(const IntegratorSpec& spec, const TransportSystem& sys, const Grid& grid,
                     InterpolationRule rule, SchemeKind kind, const Field& initial,
                     std::span<const double> sample_times) {
    if (initial.size() != grid.nodes()) throw DomainError("initial field does not match the grid");
    IntegratorSpec s = spec;
    const OdeProblem p = transport_problem(sys, grid, rule, kind, spec.cfl_strict);
    OdeSolution sol = solve_ode(p, s, initial.view(), sample_times);
    Trajectory tr;
    tr.step_count = sol.step_count;
    tr.rhs_eval_count = sol.rhs_eval_count;
    tr.times = std::move(sol.times);
    tr.states.reserve(tr.times.size());
    tr.heights.reserve(tr.times.size());
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        tr.heights.push_back(height_of(sol.states[i], HeightDefinition::integral()));
        tr.states.emplace_back(std::move(sol.states[i]), tr.times[i]);
    }
    return tr;
}

}  // namespace uptake
