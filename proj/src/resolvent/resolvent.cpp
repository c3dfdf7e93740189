#include "mehler/resolvent.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mehler/support/errors.hpp"
#include "mehler/support/montecarlo.hpp"
#include "mehler/support/parallel.hpp"

namespace mehler {

namespace {

// Appends the 21-point Kronrod rule on [a, b], with the embedded 10-point Gauss weights.
void append_panel(TimeRule& rule, double a, double b) {
    using Kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
    using Gauss = boost::math::quadrature::gauss<double, 10>;
    const auto& xk = Kronrod::abscissa();
    const auto& wk = Kronrod::weights();
    const auto& wg = Gauss::weights();
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    rule.panel_start.push_back(rule.nodes.size());
    rule.nodes.push_back(mid);
    rule.weights.push_back(wk[0] * half);
    rule.gauss_weights.push_back(0.0);
    for (std::size_t i = 1; i < xk.size(); ++i) {
        const double g = (i % 2 == 1) ? wg[i / 2] * half : 0.0;
        for (double sign : {-1.0, 1.0}) {
            rule.nodes.push_back(mid + sign * half * xk[i]);
            rule.weights.push_back(wk[i] * half);
            rule.gauss_weights.push_back(g);
        }
    }
}

void check_lambda(double lambda) { require(std::isfinite(lambda) && lambda > 0.0, "λ must be positive and finite"); }

double growth(const DriftSemigroup& drift) { return std::max(0.0, drift.growth_rate()); }

// Σ_i w_i P_{t_i} f(x) with a Kronrod-minus-Gauss error per panel.
struct WeightedSum {
    TimeRule rule;
    std::vector<double> scale;  // extra per-node factor (e^{-λt} or forcing profile)
    std::vector<SemigroupEvaluator> evaluators;

    WeightedSum(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f, TimeRule r,
                std::vector<double> s, const MethodSpec& method)
        : rule(std::move(r)), scale(std::move(s)) {
        auto built = parallel_map(rule.nodes.size(), [&](std::size_t i) {
            return std::make_shared<SemigroupEvaluator>(family, drift, f, rule.nodes[i], method);
        });
        evaluators.reserve(built.size());
        for (auto& e : built) evaluators.push_back(std::move(*e));
    }

    [[nodiscard]] Estimate value(const Vector& x) const {
        const std::size_t n = rule.nodes.size();
        std::vector<double> vals(n), errs(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Estimate e = evaluators[i].value(x);
            vals[i] = e.value * scale[i];
            errs[i] = e.error * std::abs(scale[i]);
        }
        return combine(vals, errs);
    }

    [[nodiscard]] Estimate combine(const std::vector<double>& vals, const std::vector<double>& errs) const {
        std::vector<double> kron, diff, inner;
        for (std::size_t p = 0; p < rule.panel_start.size(); ++p) {
            const std::size_t lo = rule.panel_start[p];
            const std::size_t hi = p + 1 < rule.panel_start.size() ? rule.panel_start[p + 1] : rule.nodes.size();
            double k = 0.0, g = 0.0, ie = 0.0, w = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                k += rule.weights[i] * vals[i];
                g += rule.gauss_weights[i] * vals[i];
                ie += rule.weights[i] * errs[i];
                w += rule.weights[i];
            }
            kron.push_back(k);
            // QUADPACK scaling of the Kronrod-Gauss difference against the panel variation.
            double asc = 0.0;
            for (std::size_t i = lo; i < hi; ++i) asc += rule.weights[i] * std::abs(vals[i] - k / w);
            double err = std::abs(k - g);
            if (asc > 0.0 && err > 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
            diff.push_back(err + 1e-15 * std::abs(k));
            inner.push_back(ie);
        }
        return {pairwise_sum(kron), pairwise_sum(diff) + pairwise_sum(inner)};
    }
};

// One antithetic draw of f(T_τ z + Y_τ) with τ ~ Exp(rate), for the pair z = a ± y.
double exponential_time_pair(const MeasureFamily& family, const DriftSemigroup& drift, double rate,
                             const std::function<double(const Vector&)>& f, const Vector& a, const Vector& y,
                             RandomStream& stream) {
    const double tau = stream.exponential() / rate;
    const LawSample draw = sample_law(family.law(tau), stream);
    const Vector plus = drift.apply(tau, a + y);
    const Vector minus = drift.apply(tau, a - y);
    if (draw.y.size() == 0) return 0.5 * (f(plus) + f(minus));
    return 0.5 * (f(plus + draw.y) + f(minus - draw.y));
}

}  // namespace

TimeRule laplace_time_rule(double lambda, double cutoff, double t_min) {
    check_lambda(lambda);
    require(t_min > 0.0 && cutoff > t_min, "time rule needs 0 < t_min < cutoff");
    TimeRule rule;
    rule.cutoff = cutoff;
    append_panel(rule, 0.0, t_min);
    for (double a = t_min; a < cutoff;) {
        const double b = std::min(2.0 * a, cutoff);
        append_panel(rule, a, b);
        a = b;
    }
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double damp = std::exp(-lambda * rule.nodes[i]);
        rule.weights[i] *= damp;
        rule.gauss_weights[i] *= damp;
    }
    return rule;
}

TimeRule graded_time_rule(double t, double v_min) {
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    require(v_min > 0.0 && v_min < 1.0, "grading start must lie in (0, 1)");
    TimeRule v;
    append_panel(v, 0.0, v_min);
    for (double a = v_min; a < 1.0;) {
        const double b = std::min(2.0 * a, 1.0);
        append_panel(v, a, b);
        a = b;
    }
    // u = t v², du = 2 t v dv
    TimeRule rule = v;
    rule.cutoff = t;
    for (std::size_t i = 0; i < v.nodes.size(); ++i) {
        const double jac = 2.0 * t * v.nodes[i];
        rule.nodes[i] = t * v.nodes[i] * v.nodes[i];
        rule.weights[i] = v.weights[i] * jac;
        rule.gauss_weights[i] = v.gauss_weights[i] * jac;
    }
    return rule;
}

// ---------------------------------------------------------------------------

struct ResolventEvaluator::Impl {
    double lambda;
    double cutoff;
    double tail;
    TestFunction f;
    bool identity_drift;
    std::optional<WeightedSum> sum;

    Impl(const MeasureFamily& family, const DriftSemigroup& drift, TestFunction fn, double lam,
         const ResolventOptions& opt)
        : lambda(lam), f(std::move(fn)), identity_drift(drift.kind() == DriftSemigroup::Kind::identity) {
        check_lambda(lambda);
        require(f.bounded(), "the resolvent needs a bounded function");
        const double omega = growth(drift);
        require(lambda > omega, "direct quadrature needs λ greater than the drift growth rate");
        cutoff = opt.tail_factor / lambda;
        if (omega > 0.0) cutoff = std::max(cutoff, opt.tail_factor / (lambda - omega));
        tail = f.bound() * std::exp(-lambda * cutoff) / lambda;
        TimeRule rule = laplace_time_rule(lambda, cutoff, opt.t_min);
        std::vector<double> ones(rule.nodes.size(), 1.0);
        sum.emplace(family, drift, f, std::move(rule), std::move(ones), opt.inner);
    }
};

ResolventEvaluator::ResolventEvaluator(const MeasureFamily& family, const DriftSemigroup& drift, TestFunction f,
                                       double lambda, ResolventOptions options)
    : impl_(std::make_unique<Impl>(family, drift, std::move(f), lambda, options)) {}
ResolventEvaluator::~ResolventEvaluator() = default;
ResolventEvaluator::ResolventEvaluator(ResolventEvaluator&&) noexcept = default;

double ResolventEvaluator::lambda() const noexcept { return impl_->lambda; }
double ResolventEvaluator::tail_cutoff() const noexcept { return impl_->cutoff; }
double ResolventEvaluator::tail_bound() const noexcept { return impl_->tail; }

Estimate ResolventEvaluator::value(const Vector& x) const {
    Estimate e = impl_->sum->value(x);
    e.error += impl_->tail;
    return e;
}

std::optional<ResolventEvaluator::Trigonometric> ResolventEvaluator::as_trigonometric() const {
    const auto* spec = impl_->f.spectrum();
    if (!impl_->identity_drift || spec == nullptr) return std::nullopt;
    const auto& sum = *impl_->sum;
    if (!spec->terms.empty() && sum.evaluators.front().trig_multipliers().empty()) return std::nullopt;
    TrigSpectrum out;
    out.constant = spec->constant / impl_->lambda;
    double error = 0.0;
    const std::size_t n = sum.rule.nodes.size();
    for (std::size_t k = 0; k < spec->terms.size(); ++k) {
        std::vector<double> vals(n), errs(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto m = sum.evaluators[i].trig_multipliers();
            vals[i] = m.empty() ? 1.0 : m[k].value;
            errs[i] = m.empty() ? 0.0 : m[k].error;
        }
        const Estimate c = sum.combine(vals, errs);
        const double a = spec->terms[k].amplitude;
        out.terms.push_back({a * c.value, spec->terms[k].frequency, spec->terms[k].phase});
        error += std::abs(a) * (c.error + std::exp(-impl_->lambda * impl_->cutoff) / impl_->lambda);
    }
    return Trigonometric{TestFunction("resolvent(" + impl_->f.name() + ")", impl_->f.dim(), std::move(out)), error};
}

Estimate resolvent(const ResolventProblem& problem, const Vector& x) {
    return ResolventEvaluator(problem.family, problem.drift, problem.f, problem.lambda, problem.options).value(x);
}

Estimate resolvent_monte_carlo(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                               double lambda, const Vector& x, std::size_t samples, std::uint64_t seed) {
    check_lambda(lambda);
    require(x.size() == family.dim() && f.dim() == family.dim(), "dimensions differ");
    const std::function<double(const Vector&)> g = [&](const Vector& z) { return f.value(z); };
    const Vector zero = Vector::Zero(x.size());
    const Estimate e = monte_carlo_mean(samples, seed, 21, [&](RandomStream& stream) {
        return exponential_time_pair(family, drift, lambda, g, x, zero, stream);
    }, 256);
    return {e.value / lambda, e.error / lambda};
}

// ---------------------------------------------------------------------------

struct MildSolutionEvaluator::Impl {
    double t;
    TestFunction initial;
    std::optional<SemigroupEvaluator> free;
    std::optional<WeightedSum> forced;

    Impl(const CauchyProblem& p, double time) : t(time), initial(p.initial) {
        require(p.horizon > 0.0 && std::isfinite(p.horizon), "horizon must be positive");
        require(time >= 0.0 && time <= p.horizon, "time must lie in [0, horizon]");
        require(p.initial.bounded() && p.forcing.bounded(), "initial datum and forcing must be bounded");
        require(p.initial.dim() == p.family.dim() && p.forcing.dim() == p.family.dim(), "dimensions differ");
        if (t == 0.0) return;
        free.emplace(p.family, p.drift, p.initial, t, p.inner);
        TimeRule rule = graded_time_rule(t);
        // P_{t-r} g(r) with u = t - r the semigroup time.
        std::vector<double> profile(rule.nodes.size(), 1.0);
        if (p.forcing_profile) {
            for (std::size_t i = 0; i < profile.size(); ++i) profile[i] = p.forcing_profile(t - rule.nodes[i]);
        }
        forced.emplace(p.family, p.drift, p.forcing, std::move(rule), std::move(profile), p.inner);
    }
};

MildSolutionEvaluator::MildSolutionEvaluator(const CauchyProblem& problem, double t)
    : impl_(std::make_unique<Impl>(problem, t)) {}
MildSolutionEvaluator::~MildSolutionEvaluator() = default;
MildSolutionEvaluator::MildSolutionEvaluator(MildSolutionEvaluator&&) noexcept = default;

double MildSolutionEvaluator::time() const noexcept { return impl_->t; }

Estimate MildSolutionEvaluator::value(const Vector& x) const {
    if (impl_->t == 0.0) return {impl_->initial.value(x), 0.0};
    const Estimate a = impl_->free->value(x);
    const Estimate b = impl_->forced->value(x);
    return {a.value + b.value, a.error + b.error};
}

Estimate mild_solution(const CauchyProblem& problem, double t, const Vector& x) {
    return MildSolutionEvaluator(problem, t).value(x);
}

// ---------------------------------------------------------------------------

Residual resolvent_identity_residual(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                                     double lambda, double mu, const Vector& x, std::size_t samples,
                                     std::uint64_t seed, ResolventOptions options) {
    check_lambda(lambda);
    check_lambda(mu);
    require(lambda != mu, "the resolvent identity needs λ ≠ μ");
    const ResolventEvaluator r_lambda(family, drift, f, lambda, options);
    const ResolventEvaluator r_mu(family, drift, f, mu, options);
    const Estimate a = r_lambda.value(x);
    const Estimate b = r_mu.value(x);
    Estimate c;
    if (auto g = r_mu.as_trigonometric()) {
        const ResolventEvaluator nested(family, drift, g->u, lambda, options);
        c = nested.value(x);
        c.error += g->error / lambda;
    } else {
        // R(λ)R(μ)f(x) = (1/λμ) E f(T_{τ'}(T_τ x + Y_τ) + Y'_{τ'}), τ ~ Exp(λ), τ' ~ Exp(μ).
        const std::function<double(const Vector&)> fn = [&](const Vector& z) { return f.value(z); };
        const Estimate e = monte_carlo_mean(samples, seed, 22, [&](RandomStream& stream) {
            const double tau = stream.exponential() / lambda;
            const LawSample first = sample_law(family.law(tau), stream);
            const Vector a = drift.apply(tau, x);
            const Vector y = first.y.size() == 0 ? Vector::Zero(x.size()) : first.y;
            return exponential_time_pair(family, drift, mu, fn, a, y, stream);
        }, 256);
        c = {e.value / (lambda * mu), e.error / (lambda * mu)};
    }
    const double value = a.value - b.value - (mu - lambda) * c.value;
    return {value, a.error + b.error + std::abs(mu - lambda) * c.error};
}

// ---------------------------------------------------------------------------

std::function<double(const Vector&)> translation_invariant_symbol(const MeasureFamily& family) {
    using K = MeasureFamily::Kind;
    switch (family.kind()) {
        case K::gaussian_heat:
        case K::fractional_heat:
        case K::gross_gaussian:
        case K::gross_mixture: break;
        case K::ou_fractional:
            if (family.b().isZero(0.0)) break;
            [[fallthrough]];
        default: throw InvalidArgument("multiplier oracles need a drift-free family with exponent linear in t");
    }
    const LawAtTime unit = family.law(1.0);
    return [unit](const Vector& xi) { return unit.log_char(xi); };
}

namespace {

const TrigSpectrum& trig_spectrum(const TestFunction& f) {
    const auto* spec = f.spectrum();
    if (spec == nullptr) throw InvalidArgument("multiplier oracles need a trigonometric function");
    return *spec;
}

}  // namespace

TestFunction multiplier_resolvent_oracle(const std::function<double(const Vector&)>& symbol, double lambda,
                                         const TestFunction& f) {
    check_lambda(lambda);
    const auto& spec = trig_spectrum(f);
    TrigSpectrum out;
    out.constant = spec.constant / lambda;
    for (const auto& term : spec.terms) {
        const double m = symbol(term.frequency);
        require(m >= 0.0, "symbol must be non-negative");
        out.terms.push_back({term.amplitude / (lambda + m), term.frequency, term.phase});
    }
    return {"resolvent_oracle(" + f.name() + ")", f.dim(), std::move(out)};
}

TestFunction multiplier_mild_oracle(const std::function<double(const Vector&)>& symbol, double t,
                                    const TestFunction& initial, const TestFunction& forcing) {
    require(t >= 0.0, "time must be non-negative");
    require(initial.dim() == forcing.dim(), "dimensions differ");
    const auto& a = trig_spectrum(initial);
    const auto& b = trig_spectrum(forcing);
    TrigSpectrum out;
    out.constant = a.constant + t * b.constant;
    for (const auto& term : a.terms) {
        out.terms.push_back({term.amplitude * std::exp(-t * symbol(term.frequency)), term.frequency, term.phase});
    }
    for (const auto& term : b.terms) {
        const double m = symbol(term.frequency);
        // (1 - e^{-tm})/m → t as m → 0
        const double factor = m * t < 1e-12 ? t : -std::expm1(-t * m) / m;
        out.terms.push_back({term.amplitude * factor, term.frequency, term.phase});
    }
    return {"mild_oracle", initial.dim(), std::move(out)};
}

}  // namespace mehler
