#include "mehler/subordinator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "mehler/support/errors.hpp"
#include "mehler/support/quadrature.hpp"

namespace mehler {

namespace {

constexpr double kPi = std::numbers::pi;

// Monotone root of fn on [lo, hi] where fn(lo) < 0 < fn(hi).
template <class F>
double bisect(F&& fn, double lo, double hi, int iterations = 200) {
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (fn(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double cubic_hermite(double x0, double x1, double y0, double y1, double d0, double d1, double x) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
}

}  // namespace

SubordinatorDensity::SubordinatorDensity(double s, SubordinatorQuadrature quad)
    : s_(s), quad_(quad), series_threshold_(std::pow(10.0, 1.0 / s)) {
    require(s > 0.0 && s < 1.0, "stability exponent must lie in (0, 1), got " + std::to_string(s));
}

double SubordinatorDensity::density_oscillatory(double sigma) const {
    require(sigma > 0.0, "sigma must be positive");
    const double c = std::cos(s_ * kPi);
    const double sn = std::sin(s_ * kPi);
    const double inv_s = 1.0 / s_;
    const double log_pref = -std::log(kPi * s_);
    // Integrand in u = r^s.
    auto envelope = [&](double u) { return log_pref + (inv_s - 1.0) * std::log(u) - sigma * std::pow(u, inv_s) - c * u; };
    auto envelope_slope = [&](double u) { return (inv_s - 1.0) / u - sigma * inv_s * std::pow(u, inv_s - 1.0) - c; };

    double hi = 1.0;
    while (envelope_slope(hi) > 0.0) hi *= 2.0;
    double lo = hi;
    while (envelope_slope(lo) < 0.0 && lo > 1e-300) lo *= 0.5;
    const double u_peak = bisect([&](double u) { return -envelope_slope(u); }, lo, hi);
    const double e_peak = envelope(u_peak);
    if (e_peak > std::log(quad_.max_cancellation)) {
        throw NumericalFailure("oscillatory representation ill conditioned at sigma " + std::to_string(sigma));
    }
    const double cut = e_peak + std::log(quad_.truncation);
    double u_end = std::max(2.0 * u_peak, 1e-300);
    while (envelope(u_end) > cut) u_end *= 2.0;
    u_end = bisect([&](double u) { return cut - envelope(u); }, u_peak, u_end);

    const double period = kPi / sn;
    const auto panels = static_cast<std::size_t>(std::ceil(u_end / period));
    if (panels > quad_.max_panels) {
        throw NumericalFailure("oscillatory representation needs too many panels at sigma " + std::to_string(sigma));
    }
    std::vector<double> points;
    points.reserve(panels + 2);
    points.push_back(0.0);
    for (std::size_t j = 1; j <= panels; ++j) {
        const double b = std::min(u_end, static_cast<double>(j) * period);
        if (b > points.back()) points.push_back(b);
    }
    auto integrand = [&](double u) {
        if (u <= 0.0) return 0.0;
        return std::exp(envelope(u)) * std::sin(sn * u);
    };
    quad::Options opt;
    opt.rel_tol = 0.0;
    opt.l1_tol = quad_.rel_tol / quad_.max_cancellation;
    opt.throw_on_failure = true;
    const auto r = quad::integrate(integrand, points, opt);
    if (!(std::abs(r.value) * quad_.max_cancellation >= r.l1)) {
        throw NumericalFailure("oscillatory representation cancels too strongly at sigma " + std::to_string(sigma));
    }
    return r.value;
}

namespace {

// log(sin x / x), accurate for small x.
double log_sinc(double x) {
    if (std::abs(x) < 1e-3) {
        const double x2 = x * x;
        return -x2 / 6.0 - x2 * x2 / 180.0;
    }
    return std::log(std::sin(x) / x);
}

// A(u) = (sin(su)/sin u)^{1/(1-s)} sin((1-s)u)/sin(su) rises from a0 at u=0 to
// infinity at u=pi. delta(u) = log(A(u)/a0) is evaluated without cancellation.
struct PositiveIntegrand {
    double s;
    double a0;

    double delta(double u) const {
        if (u <= 0.0) return 0.0;
        return (log_sinc(s * u) - log_sinc(u)) / (1.0 - s) + log_sinc((1.0 - s) * u) - log_sinc(s * u);
    }
    double solve(double target_delta) const {
        if (target_delta <= 0.0) return 0.0;
        return bisect([&](double u) { return delta(u) - target_delta; }, 0.0, kPi, 300);
    }
};

}  // namespace

void SubordinatorDensity::log_density_and_slope(double sigma, double& log_value, double& log_slope) const {
    require(sigma > 0.0, "sigma must be positive");
    const double a = s_ / (1.0 - s_);
    const double p = 1.0 / (1.0 - s_);
    const double a0 = (1.0 - s_) * std::pow(s_, a);
    const double log_z = -a * std::log(sigma);
    if (log_z > 700.0) {
        // Far left tail: log η ≈ -a0 z overflows; report it as -infinity.
        log_value = -std::numeric_limits<double>::infinity();
        log_slope = std::numeric_limits<double>::infinity();
        return;
    }
    const double z = std::exp(log_z);
    const double a0z = a0 * z;
    PositiveIntegrand pi{s_, a0};

    // Breakpoints where (A - a0) z = w, plus the peak A = 1/z when it exists.
    std::vector<double> points{0.0};
    for (double w : {0.0625, 0.25, 1.0, 4.0, 16.0, 64.0}) points.push_back(pi.solve(std::log1p(w / a0z)));
    if (a0z < 1.0) points.push_back(pi.solve(-std::log(a0z)));
    const double u_max = pi.solve(std::log1p(90.0 / a0z));
    points.push_back(u_max);
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    while (points.back() > u_max) points.pop_back();

    quad::Options opt;
    opt.rel_tol = 0.1 * quad_.rel_tol;
    auto f1 = [&](double u) {
        const double d = pi.delta(u);
        return a0 * std::exp(d - a0z * std::expm1(d));
    };
    auto f2 = [&](double u) {
        const double d = pi.delta(u);
        return a0 * a0 * std::exp(2.0 * d - a0z * std::expm1(d));
    };
    const double j1 = quad::integrate(f1, points, opt).value;
    const double j2 = quad::integrate(f2, points, opt).value;
    if (!(j1 > 0.0)) throw NumericalFailure("positive-integral representation vanished at sigma " + std::to_string(sigma));
    log_value = std::log(a / kPi) - p * std::log(sigma) - a0z + std::log(j1);
    log_slope = -p + a * z * j2 / j1;
}

double SubordinatorDensity::density_positive_integral(double sigma) const {
    double lv = 0.0, ls = 0.0;
    log_density_and_slope(sigma, lv, ls);
    return std::exp(lv);
}

namespace {

template <class TermFn>
double alternating_series(TermFn&& term, const std::string& what) {
    // sin(kπs) can vanish for isolated k, so several consecutive small terms
    // are required before stopping.
    double sum = 0.0;
    int small = 0;
    for (int k = 1; k <= 400; ++k) {
        const double t = term(k);
        sum += t;
        small = (std::abs(t) <= 1e-17 * std::abs(sum)) ? small + 1 : 0;
        if (small >= 4) return sum;
    }
    throw NumericalFailure(what + " series did not converge");
}

}  // namespace

void SubordinatorDensity::log_density_and_slope_series(double sigma, double& log_value, double& log_slope) const {
    require(sigma > 0.0, "sigma must be positive");
    const double ls = std::log(sigma);
    auto coeff = [&](int k) {
        const double kk = k;
        const double sign = (k % 2 == 1) ? 1.0 : -1.0;
        return sign * std::exp(std::lgamma(kk * s_ + 1.0) - std::lgamma(kk + 1.0) - (kk * s_ + 1.0) * ls) *
               std::sin(kk * kPi * s_) / kPi;
    };
    const double v = alternating_series(coeff, "density");
    const double dv = alternating_series([&](int k) { return -(k * s_ + 1.0) * coeff(k); }, "density slope");
    if (!(v > 0.0)) throw NumericalFailure("series density non-positive at sigma " + std::to_string(sigma));
    log_value = std::log(v);
    log_slope = dv / v;
}

double SubordinatorDensity::density_series(double sigma) const {
    double lv = 0.0, ls = 0.0;
    log_density_and_slope_series(sigma, lv, ls);
    return std::exp(lv);
}

double SubordinatorDensity::tail_moment(double sigma, double q) const {
    require(q < s_, "tail moment diverges for q >= s");
    const double ls = std::log(sigma);
    return alternating_series(
        [&](int k) {
            const double kk = k;
            const double sign = (k % 2 == 1) ? 1.0 : -1.0;
            return sign * std::exp(std::lgamma(kk * s_ + 1.0) - std::lgamma(kk + 1.0) + (q - kk * s_) * ls) *
                   std::sin(kk * kPi * s_) / (kPi * (kk * s_ - q));
        },
        "tail moment");
}

DensityEvaluation SubordinatorDensity::evaluate(double sigma) const {
    require(sigma > 0.0, "sigma must be positive");
    DensityEvaluation out;
    if (sigma >= series_threshold_) {
        out.value = density_series(sigma);
        out.path = DensityPath::series;
    } else {
        try {
            out.value = density_oscillatory(sigma);
            out.path = DensityPath::oscillatory;
        } catch (const NumericalFailure&) {
            out.value = density_positive_integral(sigma);
            out.path = DensityPath::positive_integral;
        }
    }
    if (out.value < 0.0) {
        if (out.value < -quad_.negative_floor) {
            throw NumericalFailure("density negative beyond floor at sigma " + std::to_string(sigma));
        }
        out.value = 0.0;
    }
    return out;
}

double SubordinatorDensity::density(double sigma) const { return evaluate(sigma).value; }

double SubordinatorDensity::density_scaled(double t, double sigma) const {
    require(t > 0.0, "time must be positive");
    const double scale = std::pow(t, -1.0 / s_);
    return scale * density(scale * sigma);
}

double SubordinatorDensity::lower_cutoff(double log_floor) const {
    auto log_eta = [&](double log_sigma) {
        double lv = 0.0, sl = 0.0;
        log_density_and_slope(std::exp(log_sigma), lv, sl);
        return lv;
    };
    double hi = 0.0;
    if (log_eta(hi) < log_floor) return 1.0;
    double lo = -1.0;
    while (log_eta(lo) > log_floor) {
        lo *= 2.0;
        if (lo < -690.0) return 0.0;
    }
    return std::exp(bisect([&](double l) { return log_eta(l) - log_floor; }, lo, hi, 80));
}

double SubordinatorDensity::fractional_moment(double q, std::size_t panels) const {
    if (!(q >= -0.5 && q < s_)) {
        throw InvalidArgument("fractional moment requested outside the convergent window [-1/2, s): q = " +
                              std::to_string(q));
    }
    if (panels == 0) panels = quad_.moment_panels;
    const double lo = std::log(lower_cutoff(-60.0));
    const double hi = std::log(series_threshold_);
    using Kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
    const auto& xk = Kronrod::abscissa();
    const auto& wk = Kronrod::weights();
    const double width = (hi - lo) / static_cast<double>(panels);
    std::vector<double> parts(panels);
    for (std::size_t j = 0; j < panels; ++j) {
        const double mid = lo + (static_cast<double>(j) + 0.5) * width;
        const double half = 0.5 * width;
        auto f = [&](double l) { return std::exp((q + 1.0) * l) * density(std::exp(l)); };
        double acc = wk[0] * f(mid);
        for (std::size_t i = 1; i < xk.size(); ++i) acc += wk[i] * (f(mid + half * xk[i]) + f(mid - half * xk[i]));
        parts[j] = acc * half;
    }
    double body = 0.0;
    for (double v : parts) body += v;
    return body + tail_moment(series_threshold_, q);
}

double SubordinatorDensity::sample(double t, RandomStream& stream) const {
    require(t >= 0.0, "time must be non-negative");
    if (t == 0.0) return 0.0;
    const double u = kPi * stream.uniform();
    const double e = stream.exponential();
    const double r = (1.0 - s_) / s_;
    const double log_sigma = std::log(t) / s_ + std::log(std::sin(s_ * u)) + r * std::log(std::sin((1.0 - s_) * u)) -
                             std::log(std::sin(u)) / s_ - r * std::log(e);
    return std::exp(log_sigma);
}

SubordinatorTable::SubordinatorTable(double s, SubordinatorQuadrature quad) : exact_(s, quad) {
    left_ = exact_.lower_cutoff(-700.0);
    table_left_ = std::max(quad.table_left, left_);
    right_ = exact_.series_threshold();
    if (!(table_left_ < right_)) return;

    auto node = [&](double l, double& y, double& d) {
        const double sigma = std::exp(l);
        if (sigma >= right_) exact_.log_density_and_slope_series(sigma, y, d);
        else exact_.log_density_and_slope(sigma, y, d);
    };
    auto direct_log = [&](double l) {
        const double sigma = std::exp(l);
        double y = 0.0, d = 0.0;
        exact_.log_density_and_slope(sigma, y, d);
        if (y > -575.0) {
            const double v = exact_.density(sigma);
            if (v > 0.0) return std::log(v);
        }
        return y;
    };

    struct Node {
        double l, y, d;
    };
    std::vector<Node> nodes;
    const double l0 = std::log(table_left_), l1 = std::log(right_);
    const auto initial = static_cast<std::size_t>(std::ceil((l1 - l0) / 0.25));
    for (std::size_t i = 0; i <= initial; ++i) {
        const double l = l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(initial);
        Node n{l, 0.0, 0.0};
        node(l, n.y, n.d);
        nodes.push_back(n);
    }
    const double tol = quad.table_tol;
    std::vector<Node> refined;
    refined.push_back(nodes.front());
    // Depth-first bisection keeps nodes ordered.
    auto refine = [&](auto&& self, const Node& a, const Node& b, int depth) -> void {
        const double lm = 0.5 * (a.l + b.l);
        const double interp = cubic_hermite(a.l, b.l, a.y, b.y, a.d, b.d, lm);
        const double exact = direct_log(lm);
        const double err = std::abs(std::expm1(interp - exact));
        if (err <= tol || depth >= 14) {
            max_error_ = std::max(max_error_, err);
            refined.push_back(b);
            return;
        }
        Node m{lm, 0.0, 0.0};
        node(lm, m.y, m.d);
        self(self, a, m, depth + 1);
        self(self, m, b, depth + 1);
    };
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) refine(refine, nodes[i], nodes[i + 1], 0);
    if (max_error_ > tol) {
        throw NumericalFailure("density table failed to reach its interpolation budget for s = " + std::to_string(s));
    }
    for (const auto& n : refined) {
        log_sigma_.push_back(n.l);
        log_value_.push_back(n.y);
        log_slope_.push_back(n.d);
    }
}

std::shared_ptr<const SubordinatorTable> SubordinatorTable::get(double s) {
    static std::mutex mutex;
    static std::map<double, std::shared_ptr<const SubordinatorTable>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
    auto table = std::make_shared<const SubordinatorTable>(s);
    cache.emplace(s, table);
    return table;
}

double SubordinatorTable::interpolate_log(double l) const {
    auto it = std::upper_bound(log_sigma_.begin(), log_sigma_.end(), l);
    std::size_t i = static_cast<std::size_t>(it - log_sigma_.begin());
    i = std::clamp<std::size_t>(i, 1, log_sigma_.size() - 1);
    return cubic_hermite(log_sigma_[i - 1], log_sigma_[i], log_value_[i - 1], log_value_[i], log_slope_[i - 1],
                         log_slope_[i], l);
}

double SubordinatorTable::density(double sigma) const {
    require(sigma > 0.0, "sigma must be positive");
    if (sigma < left_) return 0.0;
    if (sigma >= right_) return exact_.density_series(sigma);
    if (sigma < table_left_ || log_sigma_.empty()) return exact_.density(sigma);
    return std::exp(interpolate_log(std::log(sigma)));
}

double SubordinatorTable::density_scaled(double t, double sigma) const {
    require(t > 0.0, "time must be positive");
    const double scale = std::pow(t, -1.0 / s());
    return scale * density(scale * sigma);
}

double eta_density(double s, double sigma) { return SubordinatorDensity(s).density(sigma); }

double eta_density_scaled(double s, double t, double sigma) { return SubordinatorDensity(s).density_scaled(t, sigma); }

double sample_positive_stable(double s, double t, RandomStream& stream) {
    return SubordinatorDensity(s).sample(t, stream);
}

double fractional_moment(double s, double q) { return SubordinatorDensity(s).fractional_moment(q); }

}  // namespace mehler
