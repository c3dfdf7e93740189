#include "mehler/cli/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <boost/math/constants/constants.hpp>

#include "mehler/acceptance.hpp"
#include "mehler/resolvent.hpp"
#include "mehler/support/parallel.hpp"

namespace mehler::cli {

namespace fs = std::filesystem;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string number(double v, int digits = 17) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string label(const char* prefix, double v) { return prefix + number(v, 6); }

std::string csv_field(const Cell& cell) {
    if (const auto* d = std::get_if<double>(&cell)) return number(*d);
    const auto& s = std::get<std::string>(cell);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::vector<std::string> coordinate_columns(int dim) {
    std::vector<std::string> out;
    for (int k = 1; k <= dim; ++k) out.push_back("x" + std::to_string(k));
    return out;
}

void append_coordinates(std::vector<Cell>& row, const Vector& x) {
    for (Eigen::Index k = 0; k < x.size(); ++k) row.emplace_back(x(k));
}

Check bounded_check(std::string name, double measured, double tolerance) {
    return {std::move(name), measured, 0.0, tolerance, std::abs(measured) <= tolerance};
}

Check target_check(std::string name, double measured, double target, double tolerance) {
    return {std::move(name), measured, target, tolerance, std::abs(measured - target) <= tolerance};
}

/// P_t of a trigonometric f for a symmetric law: Σ a e^{-ψ_t(ξ)} cos(ξ·T_t x + φ),
/// with the derivative along h.
struct TrigOracle {
    double value = 0.0;
    double derivative = 0.0;
};

TrigOracle trig_oracle(const TrigSpectrum& spectrum, const LawAtTime& law, const DriftSemigroup& drift, double t,
                       const Vector& x, const Vector* h) {
    const Vector tx = drift.apply(t, x);
    const Vector th = h ? drift.apply(t, *h) : Vector::Zero(x.size());
    TrigOracle out{spectrum.constant, 0.0};
    for (const auto& term : spectrum.terms) {
        const double damp = std::exp(-law.log_char(term.frequency));
        const double phase = term.frequency.dot(tx) + term.phase;
        out.value += term.amplitude * damp * std::cos(phase);
        out.derivative -= term.amplitude * damp * std::sin(phase) * term.frequency.dot(th);
    }
    return out;
}

/// Symbol of a drift-free family when both it and f admit a multiplier oracle.
std::optional<std::function<double(const Vector&)>> multiplier_symbol(const MeasureFamily& family,
                                                                      std::initializer_list<const TestFunction*> fs) {
    for (const auto* f : fs)
        if (f->spectrum() == nullptr) return std::nullopt;
    try {
        return translation_invariant_symbol(family);
    } catch (const InvalidArgument&) {
        return std::nullopt;
    }
}

double poisson_kernel(int dim, double t, double r) {
    const double a = 0.5 * (dim + 1);
    return std::tgamma(a) / std::pow(boost::math::constants::pi<double>(), a) * t / std::pow(t * t + r * r, a);
}

void run_kernel(const KernelSpec& spec, ExperimentResult& out) {
    std::visit(overloaded{
                   [&](const KernelPointwise& p) {
                       const FracHeatKernel kernel(p.dim, p.s);
                       const bool poisson = std::abs(p.s - 0.5) < 1e-15;
                       Table table{"kernel", {"t", "x", "value", "oracle", "rel_error"}, {}};
                       double worst = 0.0;
                       for (double t : spec.times) {
                           for (double r : p.radii) {
                               Vector x = Vector::Zero(p.dim);
                               x(0) = r;
                               const double v = kernel.value(t, x);
                               const double o = poisson ? poisson_kernel(p.dim, t, r) : kernel.value_unscaled(t, x);
                               const double rel = std::abs(v - o) / std::abs(o);
                               worst = std::max(worst, rel);
                               table.rows.push_back({t, r, v, o, rel});
                               out.plot.push_back({"x", r, "density", label("t=", t), v});
                               out.plot.push_back({"x", r, "oracle", label("t=", t), o});
                           }
                       }
                       out.tables.push_back(std::move(table));
                       out.summary["oracle"] = poisson ? "poisson_closed_form" : "direct_mixture";
                       out.summary["max_rel_error"] = worst;
                       out.checks.push_back(bounded_check("max_rel_error", worst, p.tolerance));
                   },
                   [&](const KernelGridded& g) {
                       const GradL1Scaling sc = ou_grad_l1_scaling_check(g.params, g.axis, spec.times);
                       Table table{"grad_l1", {"t", "grad_l1", "fit_line"}, {}};
                       for (std::size_t i = 0; i < sc.times.size(); ++i) {
                           const double t = sc.times[i];
                           const double line = std::exp(sc.fit.intercept) * std::pow(t, sc.fit.slope);
                           table.rows.push_back({t, sc.norms[i], line});
                           out.plot.push_back({"t", t, "grad_l1", "measured", sc.norms[i]});
                           out.plot.push_back({"t", t, "fit_line", "fit", line});
                       }
                       out.tables.push_back(std::move(table));
                       out.summary["slope"] = sc.fit.slope;
                       out.summary["fit_residual"] = sc.fit.residual;
                       if (g.expected_slope)
                           out.checks.push_back(target_check("slope", sc.fit.slope, *g.expected_slope, g.tolerance));
                   }},
               spec.form);
}

void run_semigroup(const SemigroupSpec& spec, ExperimentResult& out) {
    const auto& family = spec.family.family;
    const int dim = family.dim();
    const TrigSpectrum* spectrum = spec.f.spectrum();
    const Vector* h = spec.direction ? &*spec.direction : nullptr;

    Table table{"semigroup", {"t"}, {}};
    for (auto& c : coordinate_columns(dim)) table.columns.push_back(c);
    for (const char* c : {"value", "error", "oracle", "abs_error", "derivative", "derivative_error",
                          "derivative_oracle", "derivative_abs_error"})
        table.columns.emplace_back(c);

    double worst_value = 0.0, worst_derivative = 0.0;
    for (double t : spec.times) {
        const SemigroupEvaluator ev(family, spec.family.drift, spec.f, t, spec.method, 1);
        const LawAtTime law = family.law(t);
        const bool with_derivative = h != nullptr && t >= min_derivative_time;
        for (const auto& x : spec.points) {
            const Estimate v = ev.value(x);
            std::vector<Cell> row{t};
            append_coordinates(row, x);
            row.insert(row.end(), {v.value, v.error});
            TrigOracle oracle{nan, nan};
            if (spectrum) {
                oracle = trig_oracle(*spectrum, law, spec.family.drift, t, x, h);
                worst_value = std::max(worst_value, std::abs(v.value - oracle.value));
            }
            row.insert(row.end(), {oracle.value, std::abs(v.value - oracle.value)});
            if (with_derivative) {
                const Estimate d = ev.derivative(x, *h);
                const double gap = spectrum ? std::abs(d.value - oracle.derivative) : nan;
                if (spectrum) worst_derivative = std::max(worst_derivative, gap);
                row.insert(row.end(), {d.value, d.error, spectrum ? oracle.derivative : nan, gap});
            } else {
                row.insert(row.end(), {nan, nan, nan, nan});
            }
            table.rows.push_back(std::move(row));
            out.plot.push_back({"x1", x(0), "P_t f", label("t=", t), v.value});
        }
    }
    out.tables.push_back(std::move(table));
    out.summary["method"] = spec.method.kind == Method::quadrature ? "quadrature" : "monte_carlo";
    if (spectrum) {
        out.summary["max_abs_error"] = worst_value;
        out.checks.push_back(bounded_check("max_abs_error", worst_value, spec.tolerance));
        if (h) {
            out.summary["max_derivative_abs_error"] = worst_derivative;
            out.checks.push_back(bounded_check("max_derivative_abs_error", worst_derivative, spec.tolerance));
        }
    }
}

void run_decay(const DecaySpec& spec, ExperimentResult& out) {
    DecayOptions options{spec.probes, spec.method, spec.refine};
    const DecayFit fit = derivative_decay_exponent(spec.family.family, spec.family.drift, spec.f, spec.order,
                                                   spec.times, options);
    std::vector<double> ts, vs;
    for (const auto& r : fit.rows) {
        ts.push_back(r.t);
        vs.push_back(r.sup_derivative);
    }
    const LineFit line = fit_loglog(ts, vs);
    Table table{"decay", {"t", "sup_deriv", "error", "fit_line"}, {}};
    for (const auto& r : fit.rows) {
        const double y = std::exp(line.intercept) * std::pow(r.t, line.slope);
        table.rows.push_back({r.t, r.sup_derivative, r.error, y});
        out.plot.push_back({"t", r.t, "sup_deriv", "measured", r.sup_derivative});
        out.plot.push_back({"t", r.t, "fit_line", "fit", y});
    }
    out.tables.push_back(std::move(table));
    out.summary["order"] = spec.order;
    out.summary["slope"] = fit.fit.slope;
    out.summary["fit_residual"] = fit.fit.residual;
    out.summary["noisy"] = fit.noisy;
    out.summary["family_theta"] = spec.family.family.theta();
    if (spec.expected_slope)
        out.checks.push_back(target_check("slope", fit.fit.slope, *spec.expected_slope, spec.tolerance));
}

void run_resolvent(const ExperimentConfig& cfg, const ResolventSpec& spec, ExperimentResult& out) {
    const auto& family = spec.family.family;
    const ResolventEvaluator ev(family, spec.family.drift, spec.f, spec.lambda);
    const auto symbol = multiplier_symbol(family, {&spec.f});
    std::optional<TestFunction> exact;
    if (symbol) exact = multiplier_resolvent_oracle(*symbol, spec.lambda, spec.f);

    Table table{"resolvent", coordinate_columns(family.dim()), {}};
    for (const char* c : {"u", "error", "oracle", "oracle_error", "abs_error", "z"}) table.columns.emplace_back(c);
    double worst_gap = 0.0, worst_z = 0.0;
    for (std::size_t i = 0; i < spec.points.size(); ++i) {
        const Vector& x = spec.points[i];
        const Estimate u = ev.value(x);
        const Estimate o = exact ? Estimate{exact->value(x), 0.0}
                                 : resolvent_monte_carlo(family, spec.family.drift, spec.f, spec.lambda, x,
                                                         spec.oracle_samples, cfg.seed + i);
        const double gap = std::abs(u.value - o.value);
        const double z = exact ? nan : gap / std::hypot(u.error, o.error);
        worst_gap = std::max(worst_gap, gap);
        if (!exact) worst_z = std::max(worst_z, z);
        std::vector<Cell> row;
        append_coordinates(row, x);
        row.insert(row.end(), {u.value, u.error, o.value, o.error, gap, z});
        table.rows.push_back(std::move(row));
        out.plot.push_back({"x1", x(0), "u", "resolvent", u.value});
        out.plot.push_back({"x1", x(0), "u", "oracle", o.value});
    }
    out.tables.push_back(std::move(table));
    out.summary["oracle"] = exact ? "multiplier" : "exponential_time_monte_carlo";
    out.summary["tail_cutoff"] = ev.tail_cutoff();
    out.summary["max_abs_error"] = worst_gap;
    if (exact) {
        out.checks.push_back(bounded_check("max_abs_error", worst_gap, spec.tolerance));
    } else {
        out.summary["max_z"] = worst_z;
        out.checks.push_back(bounded_check("max_z", worst_z, spec.z_tolerance));
    }
}

void run_cauchy(const CauchySpec& spec, ExperimentResult& out) {
    const auto& family = spec.family.family;
    const CauchyProblem problem{family, spec.family.drift, spec.horizon, spec.initial, spec.forcing};
    const auto symbol = multiplier_symbol(family, {&spec.initial, &spec.forcing});

    Table table{"cauchy", {"t"}, {}};
    for (auto& c : coordinate_columns(family.dim())) table.columns.push_back(c);
    for (const char* c : {"v", "error", "oracle", "abs_error"}) table.columns.emplace_back(c);
    double worst = 0.0;
    for (double t : spec.times) {
        const MildSolutionEvaluator ev(problem, t);
        std::optional<TestFunction> oracle;
        if (symbol) oracle = multiplier_mild_oracle(*symbol, t, spec.initial, spec.forcing);
        for (const auto& x : spec.points) {
            const Estimate v = ev.value(x);
            const double o = oracle ? oracle->value(x) : nan;
            const double gap = oracle ? std::abs(v.value - o) : nan;
            if (oracle) worst = std::max(worst, gap);
            std::vector<Cell> row{t};
            append_coordinates(row, x);
            row.insert(row.end(), {v.value, v.error, o, gap});
            table.rows.push_back(std::move(row));
            out.plot.push_back({"x1", x(0), "v", label("t=", t), v.value});
        }
    }
    out.tables.push_back(std::move(table));
    out.summary["oracle"] = symbol ? "multiplier" : "none";
    if (symbol) {
        out.summary["max_abs_error"] = worst;
        out.checks.push_back(bounded_check("max_abs_error", worst, spec.tolerance));
    }
}

void run_regularity(const RegularitySpec& spec, ExperimentResult& out) {
    Field field = field_of(spec.f);
    if (spec.family) {
        auto ev = std::make_shared<const ResolventEvaluator>(spec.family->family, spec.family->drift, spec.f,
                                                             spec.lambda);
        if (auto trig = ev->as_trigonometric()) {
            field = [base = field_of(trig->u), bound = trig->error](const Vector& x) {
                Estimate e = base(x);
                e.error += bound;
                return e;
            };
        } else {
            field = [ev](const Vector& x) { return ev->value(x); };
        }
    }
    const ExponentFit fit =
        regularity_exponent(field, spec.probes, spec.window_min, spec.window_max, spec.order, spec.levels_per_octave);

    Table table{"scales", {"scale", "sup_difference", "ratio", "noise", "used"}, {}};
    std::vector<ScaleRow> used;
    for (const auto& r : fit.rows) {
        table.rows.push_back({r.scale, r.sup_difference, r.ratio, r.noise, r.used ? 1.0 : 0.0});
        out.plot.push_back({"scale", r.scale, "difference_ratio", "order=" + std::to_string(spec.order), r.ratio});
        if (r.used) used.push_back(r);
    }
    out.tables.push_back(std::move(table));
    out.summary["field"] = spec.family ? "resolvent" : "function";
    out.summary["exponent"] = fit.slope;
    out.summary["window"] = {fit.window_min, fit.window_max};
    out.summary["fit_residual"] = fit.residual;
    out.summary["saturated"] = fit.saturated;
    out.summary["degenerate"] = fit.degenerate;
    if (used.size() >= 2) {
        out.summary["ratio_variation"] = ratio_variation(used);
        out.summary["growth_per_decade"] = growth_per_decade(used);
    }
    if (spec.expected_exponent)
        out.checks.push_back(target_check("exponent", fit.slope, *spec.expected_exponent, spec.tolerance));
}

void run_infinite_dim(const ExperimentConfig& cfg, const InfiniteDimSpec& spec, ExperimentResult& out) {
    const SpectralModel model = build_model(spec.model, spec.modes, spec.params);
    Table modes{"modes", {"k", "covariance", "eigenvalue"}, {}};
    for (int k = 0; k < model.modes(); ++k)
        modes.rows.push_back({double(k + 1), model.covariance()(k), model.eigenvalues()(k)});
    out.tables.push_back(std::move(modes));
    out.summary["model"] = to_string(spec.model);
    out.summary["modes"] = model.modes();
    out.summary["partial_trace"] = model.partial_trace();
    out.summary["tail_estimate"] = model.tail_estimate();
    out.summary["tail_ratio"] = model.tail_ratio();
    if (spec.max_tail_ratio) out.checks.push_back(bounded_check("tail_ratio", model.tail_ratio(), *spec.max_tail_ratio));

    if (!spec.smoothing_times.empty()) {
        const SmoothingFit sf = smoothing_norm_slope(model, spec.smoothing_times);
        Table table{"smoothing", {"t", "norm", "argmax", "at_truncation"}, {}};
        for (std::size_t i = 0; i < sf.times.size(); ++i) {
            const auto& n = sf.norms[i];
            table.rows.push_back({sf.times[i], n.value, double(n.argmax), n.at_truncation ? 1.0 : 0.0});
            out.plot.push_back({"t", sf.times[i], "smoothing_norm", "measured", n.value});
        }
        out.tables.push_back(std::move(table));
        out.summary["smoothing_slope"] = sf.fit.slope;
        if (spec.expected_slope)
            out.checks.push_back(target_check("smoothing_slope", sf.fit.slope, *spec.expected_slope, spec.tolerance));
    }

    if (!spec.cameron_martin_times.empty()) {
        const Vector h = model.mode(spec.cameron_martin_mode);
        Table table{"cameron_martin", {"t", "ratio_exact", "ratio_numeric", "beta_expected", "beta", "beta_error", "z"}, {}};
        double worst_z = 0.0, worst_ratio = 0.0;
        for (std::size_t i = 0; i < spec.cameron_martin_times.size(); ++i) {
            const double t = spec.cameron_martin_times[i];
            const auto c = cameron_martin_scaling(model, t, h, spec.cameron_martin_samples, cfg.seed + i);
            const double z = std::abs(c.beta.value - c.beta_expected) / c.beta.error;
            worst_z = std::max(worst_z, z);
            worst_ratio = std::max(worst_ratio, std::abs(c.ratio_numeric / c.ratio_exact - 1.0));
            table.rows.push_back({t, c.ratio_exact, c.ratio_numeric, c.beta_expected, c.beta.value, c.beta.error, z});
            out.plot.push_back({"t", t, "beta_l1", "measured", c.beta.value});
            out.plot.push_back({"t", t, "beta_l1", "closed_form", c.beta_expected});
        }
        out.tables.push_back(std::move(table));
        out.summary["cameron_martin_max_ratio_gap"] = worst_ratio;
        out.summary["cameron_martin_max_z"] = worst_z;
        out.checks.push_back(bounded_check("cameron_martin_ratio_gap", worst_ratio, 1e-9));
        out.checks.push_back(bounded_check("cameron_martin_max_z", worst_z, spec.z_tolerance));
    }
}

void run_acceptance(const ExperimentConfig& cfg, const AcceptanceSpec& spec, ExperimentResult& out) {
    const acceptance::Options options{cfg.seed};
    Table table{"criteria", {"id", "title", "passed", "measured", "target", "tolerance", "detail"}, {}};
    std::string errors;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : acceptance::criteria()) {
        if (!spec.criteria.empty() && std::find(spec.criteria.begin(), spec.criteria.end(), c.id) == spec.criteria.end())
            continue;
        const auto r = acceptance::run(c, options);
        table.rows.push_back({double(r.id), r.title, r.passed ? 1.0 : 0.0, r.measured, r.target, r.tolerance,
                              r.error.empty() ? r.detail : r.error});
        char name[32];
        std::snprintf(name, sizeof name, "criterion_%02d", r.id);
        out.checks.push_back({name, r.measured, r.target, r.tolerance, r.passed});
        auto j = acceptance::to_json(r);
        j.erase("seconds");
        list.push_back(std::move(j));
        if (!r.error.empty()) errors += std::string(errors.empty() ? "" : "; ") + name + ": " + r.error;
    }
    out.tables.push_back(std::move(table));
    out.summary["criteria"] = std::move(list);
    if (!errors.empty()) throw NumericalFailure(errors);
}

nlohmann::json checks_json(const std::vector<Check>& checks) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : checks)
        out.push_back({{"name", c.name},
                       {"measured", c.measured},
                       {"target", c.target},
                       {"tolerance", c.tolerance},
                       {"passed", c.passed}});
    return out;
}

std::string stamp_of(const RunConfig& config) {
    return "# config_sha256=" + config.sha256 + " seed=" + std::to_string(config.seed);
}

void write_experiment(const RunConfig& config, const ExperimentResult& r) {
    const fs::path dir = config.output / r.name;
    fs::create_directories(dir);
    const std::string stamp = stamp_of(config);
    for (const auto& t : r.tables) {
        std::ofstream f(dir / (t.name + ".csv"));
        write_csv(f, t, stamp);
    }
    Table plot{"plot", {"x_var", "x", "y_var", "series", "value"}, {}};
    for (const auto& p : r.plot) plot.rows.push_back({p.x_var, p.x, p.y_var, p.series, p.value});
    {
        std::ofstream f(dir / "plot.csv");
        write_csv(f, plot, stamp);
    }
    const nlohmann::json result{{"name", r.name},
                                {"kind", to_string(r.kind)},
                                {"status", to_string(r.status)},
                                {"config_sha256", config.sha256},
                                {"seed", config.seed},
                                {"checks", checks_json(r.checks)},
                                {"summary", r.summary},
                                {"error", r.error}};
    std::ofstream f(dir / "result.json");
    f << result.dump(2) << '\n';
    if (!f) throw Error("cannot write " + (dir / "result.json").string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') field += '"', ++i;
            else if (c == '"') quoted = false;
            else field += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

}  // namespace

std::string to_string(Status status) {
    switch (status) {
        case Status::passed: return "passed";
        case Status::tolerance_failure: return "tolerance_failure";
        case Status::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

ExperimentResult run_experiment(const ExperimentConfig& experiment) {
    ExperimentResult out;
    out.name = experiment.name;
    out.kind = experiment.kind;
    const auto start = std::chrono::steady_clock::now();
    try {
        std::visit(overloaded{[&](const KernelSpec& s) { run_kernel(s, out); },
                              [&](const SemigroupSpec& s) { run_semigroup(s, out); },
                              [&](const DecaySpec& s) { run_decay(s, out); },
                              [&](const ResolventSpec& s) { run_resolvent(experiment, s, out); },
                              [&](const CauchySpec& s) { run_cauchy(s, out); },
                              [&](const RegularitySpec& s) { run_regularity(s, out); },
                              [&](const InfiniteDimSpec& s) { run_infinite_dim(experiment, s, out); },
                              [&](const AcceptanceSpec& s) { run_acceptance(experiment, s, out); }},
                   experiment.spec);
        out.status = Status::passed;
        for (const auto& c : out.checks)
            if (!c.passed) out.status = Status::tolerance_failure;
    } catch (const std::exception& e) {
        out.status = Status::numerical_failure;
        out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

int exit_code_for(std::span<const ExperimentResult> results) {
    int code = 0;
    for (const auto& r : results) {
        if (r.status == Status::numerical_failure) return 3;
        if (r.status == Status::tolerance_failure) code = 1;
    }
    return code;
}

void write_csv(std::ostream& out, const Table& table, const std::string& stamp) {
    out << stamp << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(row[i]);
        out << '\n';
    }
}

RunOutcome run(const RunConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    set_worker_count(config.jobs);
    fs::create_directories(config.output);

    RunOutcome outcome;
    outcome.results = parallel_map(config.experiments.size(), [&](std::size_t i) {
        ExperimentResult r = run_experiment(config.experiments[i]);
        try {
            write_experiment(config, r);
        } catch (const std::exception& e) {
            r.status = Status::numerical_failure;
            r.error = std::string("writing outputs failed: ") + e.what();
        }
        return r;
    });
    outcome.exit_code = exit_code_for(outcome.results);

    nlohmann::json experiments = nlohmann::json::array();
    for (const auto& r : outcome.results)
        experiments.push_back({{"name", r.name},
                               {"kind", to_string(r.kind)},
                               {"status", to_string(r.status)},
                               {"seconds", r.seconds},
                               {"checks", checks_json(r.checks)},
                               {"summary", r.summary},
                               {"error", r.error}});
    const nlohmann::json summary{
        {"config", config.source},
        {"config_sha256", config.sha256},
        {"seed", config.seed},
        {"exit_code", outcome.exit_code},
        {"wall_clock_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
        {"experiments", std::move(experiments)}};
    std::ofstream(config.output / "summary.json") << summary.dump(2) << '\n';
    return outcome;
}

void emit_plot_data(const fs::path& report, const std::string& selector, std::ostream& out) {
    std::ifstream in(report / "summary.json");
    if (!in) throw InvalidArgument("no report at " + report.string() + " (summary.json missing)");
    nlohmann::json summary;
    try {
        summary = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("unreadable report summary: " + std::string(e.what()));
    }

    std::vector<std::string> names;
    bool known = selector == "all" || experiment_kind_from_string(selector).has_value();
    for (const auto& e : summary.at("experiments")) {
        const auto name = e.at("name").get<std::string>();
        const auto kind = e.at("kind").get<std::string>();
        if (selector == name) known = true;
        if (selector == "all" || selector == kind || selector == name) names.push_back(name);
    }
    if (!known)
        throw InvalidArgument("unknown selector '" + selector + "': use all, an experiment kind or an experiment name");

    out << "experiment,x_var,x,y_var,series,value\n";
    for (const auto& name : names) {
        std::ifstream plot(report / name / "plot.csv");
        if (!plot) continue;  // failed experiments leave no plot rows
        std::string line;
        bool header = true;
        while (std::getline(plot, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (header) {
                header = false;
                continue;
            }
            if (split_csv_line(line).size() != 5) throw InvalidArgument("malformed plot row in " + name + ": " + line);
            out << csv_field(name) << ',' << line << '\n';
        }
    }
}

}  // namespace mehler::cli
