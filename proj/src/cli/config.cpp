#include "mehler/cli/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace mehler::cli {

namespace {

const std::vector<std::pair<ExperimentKind, std::string>>& kind_table() {
    static const std::vector<std::pair<ExperimentKind, std::string>> table{
        {ExperimentKind::kernel, "kernel"},
        {ExperimentKind::semigroup, "semigroup"},
        {ExperimentKind::derivative_decay, "derivative_decay"},
        {ExperimentKind::resolvent, "resolvent"},
        {ExperimentKind::cauchy, "cauchy"},
        {ExperimentKind::regularity, "regularity"},
        {ExperimentKind::infinite_dim, "infinite_dim"},
        {ExperimentKind::acceptance_suite, "acceptance_suite"}};
    return table;
}

std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
    return out;
}

struct Range {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false;
    bool hi_open = false;

    [[nodiscard]] bool contains(double v) const {
        if (!std::isfinite(v)) return false;
        if (lo_open ? v <= lo : v < lo) return false;
        if (hi_open ? v >= hi : v > hi) return false;
        return true;
    }
    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
        return os.str();
    }
};

constexpr double inf = std::numeric_limits<double>::infinity();
const Range any{};
const Range positive{0.0, inf, true, false};
const Range nonnegative{0.0, inf, false, false};
const Range unit_open{0.0, 1.0, true, true};

/// Map node with source positions and a record of the keys that were read.
class Reader {
public:
    Reader(YAML::Node node, std::string path, const std::string& source)
        : node_(std::move(node)), path_(std::move(path)), source_(&source) {}

    [[nodiscard]] const YAML::Node& node() const { return node_; }
    [[nodiscard]] const std::string& source() const { return *source_; }

    [[noreturn]] void fail(const std::string& message) const { fail_at(node_, message); }
    [[noreturn]] void fail_at(const YAML::Node& n, const std::string& message) const {
        const auto mark = n.Mark();
        throw ConfigError(*source_, mark.line + 1, mark.column + 1, path_ + ": " + message);
    }

    void expect_map() const {
        if (!node_.IsMap()) fail("expected a mapping");
    }

    /// Marks the key as read.
    [[nodiscard]] bool has(const std::string& key) const {
        used_.insert(key);
        return node_[key].IsDefined() && !node_[key].IsNull();
    }

    [[nodiscard]] YAML::Node raw(const std::string& key) const {
        used_.insert(key);
        const YAML::Node n = node_[key];
        if (!n.IsDefined() || n.IsNull()) fail("missing required key '" + key + "'");
        return n;
    }

    [[nodiscard]] Reader child(const std::string& key) const {
        Reader r(raw(key), path_ + "." + key, *source_);
        r.expect_map();
        return r;
    }

    [[nodiscard]] std::optional<Reader> optional_child(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return child(key);
    }

    [[nodiscard]] double scalar_number(const YAML::Node& n, const std::string& what, const Range& range) const {
        if (!n.IsScalar()) fail_at(n, what + " must be a number");
        double v = 0.0;
        try {
            v = n.as<double>();
        } catch (const YAML::Exception&) {
            fail_at(n, what + " must be a number, got '" + n.Scalar() + "'");
        }
        if (!range.contains(v)) fail_at(n, what + " = " + n.Scalar() + " outside " + range.describe());
        return v;
    }

    [[nodiscard]] double number(const std::string& key, const Range& range = any) const {
        return scalar_number(raw(key), "'" + key + "'", range);
    }
    [[nodiscard]] double number_or(const std::string& key, double fallback, const Range& range = any) const {
        return has(key) ? number(key, range) : fallback;
    }
    [[nodiscard]] std::optional<double> optional_number(const std::string& key, const Range& range = any) const {
        if (!has(key)) return std::nullopt;
        return number(key, range);
    }

    [[nodiscard]] long long integer(const std::string& key, long long lo, long long hi) const {
        const YAML::Node n = raw(key);
        long long v = 0;
        try {
            v = n.as<long long>();
        } catch (const YAML::Exception&) {
            fail_at(n, "'" + key + "' must be an integer, got '" + (n.IsScalar() ? n.Scalar() : std::string("?")) + "'");
        }
        if (v < lo || v > hi)
            fail_at(n, "'" + key + "' = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
        return v;
    }
    [[nodiscard]] long long integer_or(const std::string& key, long long fallback, long long lo, long long hi) const {
        return has(key) ? integer(key, lo, hi) : fallback;
    }

    [[nodiscard]] bool boolean_or(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const YAML::Node n = raw(key);
        try {
            return n.as<bool>();
        } catch (const YAML::Exception&) {
            fail_at(n, "'" + key + "' must be true or false");
        }
    }

    [[nodiscard]] std::string text(const std::string& key) const {
        const YAML::Node n = raw(key);
        if (!n.IsScalar()) fail_at(n, "'" + key + "' must be a string");
        return n.Scalar();
    }
    [[nodiscard]] std::string text_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }
    [[nodiscard]] std::string choice(const std::string& key, const std::vector<std::string>& allowed) const {
        const std::string v = text(key);
        for (const auto& a : allowed)
            if (a == v) return v;
        fail_at(node_[key], "'" + key + "' = '" + v + "' is not one of: " + join(allowed));
    }

    [[nodiscard]] std::vector<double> numbers(const YAML::Node& n, const std::string& what, const Range& range,
                                              std::size_t min_size) const {
        if (!n.IsSequence()) fail_at(n, what + " must be a list of numbers");
        if (n.size() < min_size) fail_at(n, what + " needs at least " + std::to_string(min_size) + " entries");
        std::vector<double> out;
        for (const auto& item : n) out.push_back(scalar_number(item, what + " entry", range));
        return out;
    }
    [[nodiscard]] std::vector<double> numbers(const std::string& key, const Range& range = any,
                                              std::size_t min_size = 1) const {
        return numbers(raw(key), "'" + key + "'", range, min_size);
    }

    [[nodiscard]] Vector vector(const std::string& key, int dim = -1) const {
        const auto v = numbers(key);
        if (dim > 0 && static_cast<int>(v.size()) != dim)
            fail_at(node_[key], "'" + key + "' must have " + std::to_string(dim) + " entries");
        return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    /// Nested list (full matrix) or flat list (diagonal).
    [[nodiscard]] Matrix matrix(const std::string& key, int dim = -1) const {
        const YAML::Node n = raw(key);
        if (!n.IsSequence() || n.size() == 0) fail_at(n, "'" + key + "' must be a non-empty list");
        Matrix m;
        if (n[0].IsSequence()) {
            const auto rows = static_cast<Eigen::Index>(n.size());
            m.resize(rows, rows);
            for (Eigen::Index i = 0; i < rows; ++i) {
                const auto row = numbers(n[i], "'" + key + "' row", any, 1);
                if (static_cast<Eigen::Index>(row.size()) != rows) fail_at(n[i], "'" + key + "' must be square");
                for (Eigen::Index j = 0; j < rows; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
            }
        } else {
            const auto diag = numbers(n, "'" + key + "'", any, 1);
            m = Eigen::Map<const Vector>(diag.data(), static_cast<Eigen::Index>(diag.size())).asDiagonal();
        }
        if (dim > 0 && m.rows() != dim) fail_at(n, "'" + key + "' must be " + std::to_string(dim) + "x" + std::to_string(dim));
        return m;
    }

    /// Rejects keys that were never read.
    void finish() const {
        for (const auto& kv : node_) {
            const auto key = kv.first.Scalar();
            if (!used_.count(key)) fail_at(kv.first, "unknown key '" + key + "'");
        }
    }

    /// Runs a library constructor; its InvalidArgument is reported at this node.
    template <class Fn>
    auto guarded(Fn&& fn) const -> decltype(fn()) {
        try {
            return fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const InvalidArgument& e) {
            fail(e.what());
        } catch (const MethodUnavailable& e) {
            fail(e.what());
        }
    }

private:
    YAML::Node node_;
    std::string path_;
    const std::string* source_;
    mutable std::set<std::string> used_;
};

/// Explicit list, or {lo, hi, count, spacing: log | linear}.
std::vector<double> parse_grid(const Reader& r, const std::string& key, const Range& range, std::size_t min_size) {
    const YAML::Node n = r.raw(key);
    if (n.IsSequence()) {
        auto v = r.numbers(key, range, min_size);
        return v;
    }
    Reader g = r.child(key);
    const double lo = g.number("lo", range);
    const double hi = g.number("hi", range);
    if (!(hi > lo)) g.fail("'hi' must exceed 'lo'");
    const auto count = static_cast<std::size_t>(g.integer("count", static_cast<long long>(min_size), 100000));
    const std::string spacing = g.text_or("spacing", "linear");
    if (spacing != "linear" && spacing != "log") g.fail("'spacing' must be linear or log");
    if (spacing == "log" && lo <= 0.0) g.fail("log spacing needs lo > 0");
    g.finish();
    return spacing == "log" ? logspace(lo, hi, count) : linspace(lo, hi, count);
}

/// Explicit list of points, or a grid along the first axis.
std::vector<Vector> parse_points(const Reader& r, const std::string& key, int dim) {
    const YAML::Node n = r.raw(key);
    std::vector<Vector> out;
    if (n.IsSequence() && n.size() > 0 && n[0].IsSequence()) {
        for (const auto& item : n) {
            const auto v = r.numbers(item, "'" + key + "' entry", any, 1);
            if (static_cast<int>(v.size()) != dim)
                r.fail_at(item, "point must have " + std::to_string(dim) + " coordinates");
            out.emplace_back(Eigen::Map<const Vector>(v.data(), dim));
        }
        return out;
    }
    for (double u : parse_grid(r, key, any, 1)) {
        Vector x = Vector::Zero(dim);
        x(0) = u;
        out.push_back(x);
    }
    return out;
}

FamilySpec parse_family(const Reader& parent) {
    const Reader r = parent.child("family");
    const std::string kind = r.choice("kind", {"gaussian_heat", "fractional_heat", "ou_fractional", "classical_ou",
                                               "gross_gaussian", "gross_mixture", "p_scaled", "truncated_spectral"});
    const MeasureFamily family = r.guarded([&] {
        if (kind == "gaussian_heat") return MeasureFamily::gaussian_heat(static_cast<int>(r.integer("dim", 1, 64)));
        if (kind == "fractional_heat")
            return MeasureFamily::fractional_heat(static_cast<int>(r.integer("dim", 1, 64)), r.number("s", unit_open));
        if (kind == "ou_fractional") {
            const Matrix q = r.matrix("q");
            const Matrix b = r.matrix("b", static_cast<int>(q.rows()));
            return MeasureFamily::ou_fractional(q, b, r.number("s", unit_open));
        }
        if (kind == "classical_ou") return MeasureFamily::classical_ou(r.matrix("q"));
        if (kind == "gross_gaussian") return MeasureFamily::gross_gaussian(r.matrix("q"));
        if (kind == "gross_mixture") return MeasureFamily::gross_mixture(r.matrix("q"), r.number("s", unit_open));
        if (kind == "p_scaled") return MeasureFamily::p_scaled(r.matrix("q"), r.number("p", Range{0.0, 2.0, true, true}));
        return MeasureFamily::truncated_spectral(r.vector("eigenvalues"), r.vector("covariance"));
    });
    r.finish();
    return {family, family.natural_drift()};
}

TestFunction parse_function(const Reader& parent, const std::string& key, int dim) {
    const Reader r = parent.child(key);
    const std::string kind = r.choice("kind", {"constant", "cosine", "trig", "weierstrass", "smoothed_step", "affine",
                                               "monomial", "mollified_xlogx", "bump", "tabulated"});
    TestFunction f = r.guarded([&]() -> TestFunction {
        if (kind == "constant") return functions::constant(dim, r.number("value"));
        if (kind == "cosine")
            return functions::cosine(r.vector("frequency", dim), r.number_or("amplitude", 1.0), r.number_or("phase", 0.0));
        if (kind == "trig") {
            std::vector<TrigTerm> terms;
            const YAML::Node list = r.raw("terms");
            if (!list.IsSequence() || list.size() == 0) r.fail_at(list, "'terms' must be a non-empty list");
            for (std::size_t i = 0; i < list.size(); ++i) {
                const Reader t(list[i], "terms[" + std::to_string(i) + "]", r.source());
                t.expect_map();
                terms.push_back({t.number_or("amplitude", 1.0), t.vector("frequency", dim), t.number_or("phase", 0.0)});
                t.finish();
            }
            return functions::trig_polynomial(dim, r.number_or("constant", 0.0), std::move(terms));
        }
        const Vector w = r.vector("direction", dim);
        if (kind == "weierstrass")
            return functions::weierstrass(w, r.number("gamma", unit_open), static_cast<int>(r.integer_or("terms", 13, 1, 40)));
        if (kind == "smoothed_step")
            return functions::smoothed_step(w, r.number("width", positive), r.number_or("offset", 0.0));
        if (kind == "affine") return functions::affine(w, r.number_or("intercept", 0.0));
        if (kind == "monomial") return functions::monomial(w, static_cast<int>(r.integer("degree", 0, 12)));
        if (kind == "mollified_xlogx") return functions::mollified_xlogx(w, r.number("width", positive));
        if (kind == "bump") return functions::bump(w, r.number("radius", positive));
        return functions::tabulated(w, r.numbers("nodes", any, 2), r.numbers("values", any, 2));
    });
    r.finish();
    return f;
}

MethodSpec parse_method(const Reader& parent, std::uint64_t seed, MethodSpec fallback) {
    const auto r = parent.optional_child("method");
    if (!r) return fallback;
    const std::string kind = r->choice("kind", {"quadrature", "monte_carlo"});
    MethodSpec m;
    if (kind == "quadrature") {
        m = MethodSpec::quadrature(r->number_or("rel_tol", 1e-10, Range{1e-15, 1e-2}));
    } else {
        m = MethodSpec::monte_carlo(static_cast<std::size_t>(r->integer("samples", 100, 1000000000)), seed);
    }
    r->finish();
    return m;
}

/// {lo, hi, per_axis, extra, directions?}; default directions are the unit H-directions.
ProbeSet parse_probes(const Reader& parent, int dim, const HNormRule& rule) {
    const Reader r = parent.child("probes");
    const double lo = r.number("lo");
    const double hi = r.number("hi");
    if (!(hi > lo)) r.fail("'hi' must exceed 'lo'");
    const auto per_axis = static_cast<std::size_t>(r.integer("per_axis", 1, 100000));
    const auto extra = static_cast<std::size_t>(r.integer_or("extra", 0, 0, 100000));
    std::vector<Vector> directions;
    if (r.has("directions")) {
        for (const auto& d : parse_points(r, "directions", dim)) {
            if (d.norm() == 0.0) r.fail("directions must be nonzero");
            directions.push_back(d);
        }
    } else {
        directions = ProbeSet::directions_for(rule);
    }
    r.finish();
    return r.guarded([&] { return ProbeSet::lattice(dim, lo, hi, per_axis, extra, directions); });
}

void check_dims(const Reader& r, const FamilySpec& family, const TestFunction& f) {
    if (f.dim() != family.family.dim())
        r.fail("function dimension " + std::to_string(f.dim()) + " differs from family dimension " +
               std::to_string(family.family.dim()));
}

KernelSpec parse_kernel(const Reader& r) {
    KernelSpec spec;
    const Reader fam = r.child("family");
    const std::string kind = fam.choice("kind", {"fractional_heat", "ou_fractional"});
    spec.times = parse_grid(r, "times", positive, 1);
    if (kind == "fractional_heat") {
        KernelPointwise p;
        p.dim = static_cast<int>(fam.integer("dim", 1, 8));
        p.s = fam.number("s", unit_open);
        p.radii = parse_grid(r, "radii", nonnegative, 1);
        p.tolerance = r.number_or("tolerance", 1e-6, positive);
        spec.form = p;
    } else {
        KernelGridded g;
        g.params.q = fam.matrix("q");
        if (g.params.q.rows() > 2) fam.fail_at(fam.node()["q"], "gridded kernels support dimension 1 or 2");
        g.params.b = fam.matrix("b", static_cast<int>(g.params.q.rows()));
        g.params.s = fam.number("s", unit_open);
        g.axis = static_cast<int>(r.integer_or("axis", 0, 0, g.params.q.rows() - 1));
        g.expected_slope = r.optional_number("expected_slope");
        g.tolerance = r.number_or("tolerance", 0.05, positive);
        if (spec.times.size() < 2) r.fail("gridded kernels need at least two times");
        spec.form = g;
    }
    fam.finish();
    return spec;
}

SemigroupSpec parse_semigroup(const Reader& r, std::uint64_t seed) {
    const FamilySpec family = parse_family(r);
    const int dim = family.family.dim();
    SemigroupSpec spec{family, parse_function(r, "function", dim), parse_grid(r, "times", nonnegative, 1),
                       parse_points(r, "points", dim), parse_method(r, seed, MethodSpec::quadrature(1e-10)),
                       std::nullopt, r.number_or("tolerance", 1e-6, positive)};
    if (r.has("direction")) spec.direction = r.vector("direction", dim);
    check_dims(r, family, spec.f);
    return spec;
}

DecaySpec parse_decay(const Reader& r, std::uint64_t seed) {
    const FamilySpec family = parse_family(r);
    const int dim = family.family.dim();
    DecaySpec spec{family,
                   parse_function(r, "function", dim),
                   static_cast<int>(r.integer_or("order", 1, 1, 2)),
                   parse_grid(r, "times", Range{min_derivative_time, 0.5}, 3),
                   parse_probes(r, dim, family.family.h_norm()),
                   parse_method(r, seed, MethodSpec::quadrature(1e-8)),
                   r.boolean_or("refine", true),
                   r.optional_number("expected_slope"),
                   r.number_or("tolerance", 0.05, positive)};
    check_dims(r, family, spec.f);
    return spec;
}

ResolventSpec parse_resolvent(const Reader& r) {
    const FamilySpec family = parse_family(r);
    const int dim = family.family.dim();
    ResolventSpec spec{family,
                       parse_function(r, "function", dim),
                       r.number("lambda", positive),
                       parse_points(r, "points", dim),
                       r.number_or("tolerance", 1e-6, positive),
                       static_cast<std::size_t>(r.integer_or("oracle_samples", 20000, 100, 100000000)),
                       r.number_or("z_tolerance", 4.0, positive)};
    check_dims(r, family, spec.f);
    return spec;
}

CauchySpec parse_cauchy(const Reader& r) {
    const FamilySpec family = parse_family(r);
    const int dim = family.family.dim();
    const double horizon = r.number("horizon", positive);
    CauchySpec spec{family,
                    parse_function(r, "initial", dim),
                    parse_function(r, "forcing", dim),
                    horizon,
                    parse_grid(r, "times", Range{0.0, horizon}, 1),
                    parse_points(r, "points", dim),
                    r.number_or("tolerance", 1e-6, positive)};
    check_dims(r, family, spec.initial);
    check_dims(r, family, spec.forcing);
    return spec;
}

RegularitySpec parse_regularity(const Reader& r) {
    std::optional<FamilySpec> family;
    double lambda = 1.0;
    int dim = 0;
    if (r.has("family")) {
        family = parse_family(r);
        dim = family->family.dim();
        lambda = r.number("lambda", positive);
    } else {
        dim = static_cast<int>(r.integer("dim", 1, 8));
    }
    const TestFunction f = parse_function(r, "function", dim);
    const HNormRule rule = family ? family->family.h_norm() : HNormRule::euclidean(dim);
    RegularitySpec spec{f,
                        family,
                        lambda,
                        parse_probes(r, dim, rule),
                        r.number("window_min", positive),
                        r.number("window_max", positive),
                        static_cast<int>(r.integer_or("order", 1, 1, 3)),
                        static_cast<int>(r.integer_or("levels_per_octave", 1, 1, 8)),
                        r.optional_number("expected_exponent"),
                        r.number_or("tolerance", 0.05, positive)};
    if (!(spec.window_max > spec.window_min)) r.fail("'window_max' must exceed 'window_min'");
    if (family) check_dims(r, *family, f);
    return spec;
}

InfiniteDimSpec parse_infinite_dim(const Reader& r) {
    InfiniteDimSpec spec;
    const Reader m = r.child("model");
    spec.model = m.guarded([&] { return model_kind_from_string(m.text("kind")); });
    spec.modes = static_cast<int>(m.integer("modes", 1, 1000000));
    spec.params = ModelParams::defaults(spec.model);
    spec.params.s = m.number_or("s", spec.params.s, unit_open);
    spec.params.p = m.number_or("p", spec.params.p, Range{0.0, 2.0, true, true});
    spec.params.q_scale = m.number_or("q_scale", spec.params.q_scale, positive);
    spec.params.q_decay = m.number_or("q_decay", spec.params.q_decay, nonnegative);
    spec.params.drift_scale = m.number_or("drift_scale", spec.params.drift_scale, positive);
    if (m.has("covariance")) {
        spec.params.covariance = m.numbers("covariance", positive);
        if (static_cast<int>(spec.params.covariance.size()) != spec.modes)
            m.fail_at(m.node()["covariance"], "'covariance' must list one value per mode");
    }
    m.finish();
    (void)m.guarded([&] { return build_model(spec.model, spec.modes, spec.params).modes(); });
    spec.max_tail_ratio = r.optional_number("max_tail_ratio", positive);
    if (const auto s = r.optional_child("smoothing")) {
        if (spec.model != ModelKind::smoothing_ou) s->fail("smoothing norms need the smoothing_ou model");
        spec.smoothing_times = parse_grid(*s, "times", positive, 2);
        spec.expected_slope = s->optional_number("expected_slope");
        spec.tolerance = s->number_or("tolerance", 0.05, positive);
        s->finish();
    }
    if (const auto c = r.optional_child("cameron_martin")) {
        if (spec.model != ModelKind::classical_ou)
            c->fail("Cameron-Martin scaling needs the classical_ou model");
        spec.cameron_martin_times = parse_grid(*c, "times", positive, 1);
        spec.cameron_martin_samples = static_cast<std::size_t>(c->integer_or("samples", 100000, 100, 100000000));
        spec.cameron_martin_mode = static_cast<int>(c->integer_or("mode", 1, 1, spec.modes));
        spec.z_tolerance = c->number_or("z_tolerance", 4.0, positive);
        c->finish();
    }
    return spec;
}

AcceptanceSpec parse_acceptance(const Reader& r) {
    AcceptanceSpec spec;
    if (!r.has("criteria")) return spec;
    const YAML::Node list = r.raw("criteria");
    for (double v : r.numbers("criteria", Range{1.0, 14.0}, 1)) {
        if (v != std::floor(v)) r.fail_at(list, "criterion ids are integers in [1, 14]");
        spec.criteria.push_back(static_cast<int>(v));
    }
    return spec;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    for (const auto& [k, name] : kind_table())
        if (k == kind) return name;
    return "unknown";
}

std::optional<ExperimentKind> experiment_kind_from_string(const std::string& name) {
    for (const auto& [k, n] : kind_table())
        if (n == name) return k;
    return std::nullopt;
}

const std::vector<std::string>& experiment_kind_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& kv : kind_table()) out.push_back(kv.second);
        return out;
    }();
    return names;
}

ConfigError::ConfigError(const std::string& source, int line, int column, const std::string& message)
    : InvalidArgument(line > 0 ? source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message
                               : source + ": " + message),
      line_(line),
      column_(column),
      message_(message) {}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::uint64_t experiment_seed(std::uint64_t run_seed, const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) h = (h ^ c) * 1099511628211ULL;
    // splitmix64 finalizer
    std::uint64_t z = run_seed + 0x9E3779B97F4A7C15ULL * (h | 1ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

RunConfig parse_config(const std::string& text, const std::string& source, std::optional<std::uint64_t> seed_override) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source, e.mark.line + 1, e.mark.column + 1, e.msg);
    }
    if (!root.IsMap()) throw ConfigError(source, 1, 1, "top level must be a mapping");
    const Reader top(root, "config", source);

    RunConfig config;
    config.source = source;
    config.sha256 = sha256_hex(text);
    config.seed = static_cast<std::uint64_t>(top.integer("seed", 0, std::numeric_limits<long long>::max()));
    if (seed_override) config.seed = *seed_override;
    config.output = top.text_or("output", "results");
    config.jobs = static_cast<unsigned>(top.integer_or("jobs", 0, 0, 1024));

    const YAML::Node list = top.raw("experiments");
    if (!list.IsSequence()) top.fail_at(list, "'experiments' must be a list");
    std::set<std::string> names;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const Reader r(list[i], "experiments[" + std::to_string(i) + "]", source);
        r.expect_map();
        const std::string name = r.text("name");
        if (name.empty() || name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
                                std::string::npos)
            r.fail_at(r.node()["name"], "'name' must be non-empty and use only letters, digits, '_' and '-'");
        if (!names.insert(name).second) r.fail_at(r.node()["name"], "duplicate experiment name '" + name + "'");
        const auto kind = experiment_kind_from_string(r.choice("kind", experiment_kind_names()));
        // Acceptance suites reproduce the standalone acceptance binary for the same seed.
        const std::uint64_t seed =
            *kind == ExperimentKind::acceptance_suite ? config.seed : experiment_seed(config.seed, name);

        ExperimentSpec spec = [&]() -> ExperimentSpec {
            switch (*kind) {
                case ExperimentKind::kernel: return parse_kernel(r);
                case ExperimentKind::semigroup: return parse_semigroup(r, seed);
                case ExperimentKind::derivative_decay: return parse_decay(r, seed);
                case ExperimentKind::resolvent: return parse_resolvent(r);
                case ExperimentKind::cauchy: return parse_cauchy(r);
                case ExperimentKind::regularity: return parse_regularity(r);
                case ExperimentKind::infinite_dim: return parse_infinite_dim(r);
                case ExperimentKind::acceptance_suite: return parse_acceptance(r);
            }
            r.fail("unhandled kind");
        }();
        r.finish();
        config.experiments.push_back({name, *kind, seed, r.node().Mark().line + 1, std::move(spec)});
    }
    top.finish();
    return config;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string(), 0, 0, "cannot open config file");
    std::ostringstream bytes;
    bytes << in.rdbuf();
    return parse_config(bytes.str(), path.string(), seed_override);
}

}  // namespace mehler::cli
