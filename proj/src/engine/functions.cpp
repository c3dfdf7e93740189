#include "mehler/functions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "mehler/support/errors.hpp"

namespace mehler {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

class ZeroProfile final : public RidgeProfile {
public:
    double value(double) const override { return 0.0; }
    double derivative(double) const override { return 0.0; }
    double bound() const override { return 0.0; }
    std::shared_ptr<const RidgeProfile> differentiated() const override { return std::make_shared<ZeroProfile>(); }
};

class ConstantProfile final : public RidgeProfile {
public:
    explicit ConstantProfile(double c) : c_(c) {}
    double value(double) const override { return c_; }
    double derivative(double) const override { return 0.0; }
    double bound() const override { return std::abs(c_); }
    std::shared_ptr<const RidgeProfile> differentiated() const override { return std::make_shared<ZeroProfile>(); }

private:
    double c_;
};

class AffineProfile final : public RidgeProfile {
public:
    explicit AffineProfile(double intercept) : c_(intercept) {}
    double value(double u) const override { return c_ + u; }
    double derivative(double) const override { return 1.0; }
    double bound() const override { return inf; }
    std::shared_ptr<const RidgeProfile> differentiated() const override { return std::make_shared<ConstantProfile>(1.0); }

private:
    double c_;
};

class MonomialProfile final : public RidgeProfile {
public:
    MonomialProfile(int degree, double scale) : degree_(degree), scale_(scale) {}
    double value(double u) const override { return scale_ * std::pow(u, degree_); }
    double derivative(double u) const override { return degree_ == 0 ? 0.0 : scale_ * degree_ * std::pow(u, degree_ - 1); }
    double bound() const override { return degree_ == 0 ? std::abs(scale_) : inf; }
    std::shared_ptr<const RidgeProfile> differentiated() const override {
        if (degree_ == 0) return std::make_shared<ZeroProfile>();
        return std::make_shared<MonomialProfile>(degree_ - 1, scale_ * degree_);
    }

private:
    int degree_;
    double scale_;
};

class ErfProfile final : public RidgeProfile {
public:
    ErfProfile(double width, double offset) : width_(width), offset_(offset) {}
    double value(double u) const override { return std::erf((u - offset_) / width_); }
    double derivative(double u) const override {
        const double z = (u - offset_) / width_;
        return 2.0 / (std::sqrt(std::numbers::pi) * width_) * std::exp(-z * z);
    }
    std::vector<double> breakpoints() const override {
        return {offset_ - 6.0 * width_, offset_ - width_, offset_, offset_ + width_, offset_ + 6.0 * width_};
    }
    double bound() const override { return 1.0; }
    std::shared_ptr<const RidgeProfile> differentiated() const override;

private:
    double width_;
    double offset_;
};

// c · exp(-((u - offset)/width)²) · ((u - offset)/width)^k scaled, used for derivatives of erf.
class GaussianProfile final : public RidgeProfile {
public:
    GaussianProfile(double scale, double width, double offset, int power)
        : scale_(scale), width_(width), offset_(offset), power_(power) {}
    double value(double u) const override {
        const double z = (u - offset_) / width_;
        return scale_ * std::pow(z, power_) * std::exp(-z * z);
    }
    double derivative(double u) const override {
        const double z = (u - offset_) / width_;
        const double poly = (power_ == 0 ? 0.0 : power_ * std::pow(z, power_ - 1)) - 2.0 * std::pow(z, power_ + 1);
        return scale_ / width_ * poly * std::exp(-z * z);
    }
    std::vector<double> breakpoints() const override {
        return {offset_ - 6.0 * width_, offset_ - width_, offset_, offset_ + width_, offset_ + 6.0 * width_};
    }
    double bound() const override {
        if (power_ == 0) return std::abs(scale_);
        // max of |z|^k e^{-z²} at z² = k/2
        const double k = power_;
        return std::abs(scale_) * std::pow(0.5 * k, 0.5 * k) * std::exp(-0.5 * k);
    }
    std::shared_ptr<const RidgeProfile> differentiated() const override;

private:
    double scale_, width_, offset_;
    int power_;
};

// Sum of two profiles.
class SumProfile final : public RidgeProfile {
public:
    SumProfile(std::shared_ptr<const RidgeProfile> a, std::shared_ptr<const RidgeProfile> b)
        : a_(std::move(a)), b_(std::move(b)) {}
    double value(double u) const override { return a_->value(u) + b_->value(u); }
    double derivative(double u) const override { return a_->derivative(u) + b_->derivative(u); }
    std::vector<double> breakpoints() const override {
        auto p = a_->breakpoints();
        auto q = b_->breakpoints();
        p.insert(p.end(), q.begin(), q.end());
        return p;
    }
    double bound() const override { return a_->bound() + b_->bound(); }
    std::shared_ptr<const RidgeProfile> differentiated() const override {
        return std::make_shared<SumProfile>(a_->differentiated(), b_->differentiated());
    }

private:
    std::shared_ptr<const RidgeProfile> a_, b_;
};

std::shared_ptr<const RidgeProfile> ErfProfile::differentiated() const {
    return std::make_shared<GaussianProfile>(2.0 / (std::sqrt(std::numbers::pi) * width_), width_, offset_, 0);
}

std::shared_ptr<const RidgeProfile> GaussianProfile::differentiated() const {
    auto lead = std::make_shared<GaussianProfile>(-2.0 * scale_ / width_, width_, offset_, power_ + 1);
    if (power_ == 0) return lead;
    auto low = std::make_shared<GaussianProfile>(scale_ * power_ / width_, width_, offset_, power_ - 1);
    return std::make_shared<SumProfile>(lead, low);
}

class XLogXProfile final : public RidgeProfile {
public:
    explicit XLogXProfile(double width) : w2_(width * width), width_(width) {}
    double value(double u) const override { return 0.5 * u * std::log(u * u + w2_); }
    double derivative(double u) const override { return 0.5 * std::log(u * u + w2_) + u * u / (u * u + w2_); }
    std::vector<double> breakpoints() const override { return {-10.0 * width_, 0.0, 10.0 * width_}; }
    double bound() const override { return inf; }
    std::shared_ptr<const RidgeProfile> differentiated() const override;

private:
    double w2_, width_;
};

class XLogXDerivative final : public RidgeProfile {
public:
    explicit XLogXDerivative(double width) : w2_(width * width), width_(width) {}
    double value(double u) const override { return 0.5 * std::log(u * u + w2_) + u * u / (u * u + w2_); }
    double derivative(double u) const override {
        const double d = u * u + w2_;
        return u / d + 2.0 * u * w2_ / (d * d);
    }
    std::vector<double> breakpoints() const override { return {-10.0 * width_, 0.0, 10.0 * width_}; }
    double bound() const override { return inf; }
    std::shared_ptr<const RidgeProfile> differentiated() const override {
        throw MethodUnavailable("second derivative of the mollified u log|u| profile is not provided");
    }

private:
    double w2_, width_;
};

std::shared_ptr<const RidgeProfile> XLogXProfile::differentiated() const {
    return std::make_shared<XLogXDerivative>(width_);
}

class BumpProfile final : public RidgeProfile {
public:
    explicit BumpProfile(double radius) : r_(radius) {}
    double value(double u) const override {
        const double z = u / r_;
        if (std::abs(z) >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - z * z));
    }
    double derivative(double u) const override {
        const double z = u / r_;
        if (std::abs(z) >= 1.0) return 0.0;
        const double d = 1.0 - z * z;
        return value(u) * (-2.0 * z / (d * d)) / r_;
    }
    std::vector<double> breakpoints() const override { return {-r_, 0.0, r_}; }
    double bound() const override { return 1.0; }
    std::shared_ptr<const RidgeProfile> differentiated() const override;

private:
    double r_;
};

class BumpDerivative final : public RidgeProfile {
public:
    explicit BumpDerivative(double radius) : base_(radius), r_(radius) {}
    double value(double u) const override { return base_.derivative(u); }
    double derivative(double u) const override {
        // centred difference is adequate for this auxiliary profile
        const double h = 1e-6 * r_;
        return (base_.derivative(u + h) - base_.derivative(u - h)) / (2.0 * h);
    }
    std::vector<double> breakpoints() const override { return {-r_, 0.0, r_}; }
    double bound() const override {
        double m = 0.0;
        for (int i = 1; i < 2000; ++i) m = std::max(m, std::abs(base_.derivative(-r_ + r_ * i / 1000.0)));
        return m * 1.01;
    }
    std::shared_ptr<const RidgeProfile> differentiated() const override {
        throw MethodUnavailable("second derivative of the bump profile is not provided");
    }

private:
    BumpProfile base_;
    double r_;
};

std::shared_ptr<const RidgeProfile> BumpProfile::differentiated() const { return std::make_shared<BumpDerivative>(r_); }

class PiecewiseLinearProfile final : public RidgeProfile {
public:
    PiecewiseLinearProfile(std::vector<double> nodes, std::vector<double> values)
        : nodes_(std::move(nodes)), values_(std::move(values)) {}
    double value(double u) const override {
        if (u <= nodes_.front()) return values_.front();
        if (u >= nodes_.back()) return values_.back();
        const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), u);
        const std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
        const double w = (u - nodes_[i]) / (nodes_[i + 1] - nodes_[i]);
        return (1.0 - w) * values_[i] + w * values_[i + 1];
    }
    double derivative(double u) const override {
        if (u <= nodes_.front() || u >= nodes_.back()) return 0.0;
        const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), u);
        const std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
        return (values_[i + 1] - values_[i]) / (nodes_[i + 1] - nodes_[i]);
    }
    std::vector<double> breakpoints() const override { return nodes_; }
    double bound() const override {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }
    std::shared_ptr<const RidgeProfile> differentiated() const override;

private:
    std::vector<double> nodes_, values_;
};

class PiecewiseConstantProfile final : public RidgeProfile {
public:
    PiecewiseConstantProfile(std::vector<double> nodes, std::vector<double> slopes)
        : nodes_(std::move(nodes)), slopes_(std::move(slopes)) {}
    double value(double u) const override {
        if (u <= nodes_.front() || u >= nodes_.back()) return 0.0;
        const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), u);
        return slopes_[static_cast<std::size_t>(it - nodes_.begin()) - 1];
    }
    double derivative(double) const override { return 0.0; }
    std::vector<double> breakpoints() const override { return nodes_; }
    double bound() const override {
        double m = 0.0;
        for (double v : slopes_) m = std::max(m, std::abs(v));
        return m;
    }
    std::shared_ptr<const RidgeProfile> differentiated() const override {
        throw MethodUnavailable("tabulated profiles are only once differentiable");
    }

private:
    std::vector<double> nodes_, slopes_;
};

std::shared_ptr<const RidgeProfile> PiecewiseLinearProfile::differentiated() const {
    std::vector<double> slopes;
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
        slopes.push_back((values_[i + 1] - values_[i]) / (nodes_[i + 1] - nodes_[i]));
    }
    return std::make_shared<PiecewiseConstantProfile>(nodes_, slopes);
}

class ScaledProfile final : public RidgeProfile {
public:
    ScaledProfile(std::shared_ptr<const RidgeProfile> base, double factor) : base_(std::move(base)), factor_(factor) {}
    double value(double u) const override { return factor_ * base_->value(u); }
    double derivative(double u) const override { return factor_ * base_->derivative(u); }
    std::vector<double> breakpoints() const override { return base_->breakpoints(); }
    double bound() const override { return factor_ == 0.0 ? 0.0 : std::abs(factor_) * base_->bound(); }
    std::shared_ptr<const RidgeProfile> differentiated() const override {
        return std::make_shared<ScaledProfile>(base_->differentiated(), factor_);
    }

private:
    std::shared_ptr<const RidgeProfile> base_;
    double factor_;
};

void check_direction(const Vector& d) {
    require(d.size() >= 1, "direction must be non-empty");
    require(d.allFinite(), "direction must be finite");
}

double spectrum_bound(const TrigSpectrum& s) {
    double b = std::abs(s.constant);
    for (const auto& t : s.terms) b += std::abs(t.amplitude);
    return b;
}

}  // namespace

TestFunction::TestFunction(std::string name, int dim, TrigSpectrum spectrum) : name_(std::move(name)), dim_(dim) {
    require(dim >= 1, "dimension must be positive");
    require(std::isfinite(spectrum.constant), "constant term must be finite");
    for (const auto& t : spectrum.terms) {
        require(t.frequency.size() == dim_, "all trigonometric frequencies must share one dimension");
        require(t.frequency.allFinite() && std::isfinite(t.amplitude) && std::isfinite(t.phase),
                "trigonometric terms must be finite");
    }
    bound_ = spectrum_bound(spectrum);
    rep_ = std::move(spectrum);
}

TestFunction::TestFunction(std::string name, Ridge ridge) : name_(std::move(name)) {
    require(ridge.profile != nullptr, "ridge profile is missing");
    check_direction(ridge.direction);
    dim_ = static_cast<int>(ridge.direction.size());
    bound_ = ridge.profile->bound();
    rep_ = std::move(ridge);
}

bool TestFunction::bounded() const noexcept { return std::isfinite(bound_); }

double TestFunction::value(const Vector& x) const {
    if (const auto* s = spectrum()) {
        require(x.size() == dim_, "point dimension does not match the function");
        double acc = s->constant;
        for (const auto& t : s->terms) acc += t.amplitude * std::cos(t.frequency.dot(x) + t.phase);
        return acc;
    }
    const auto& r = *ridge();
    require(x.size() == dim_, "point dimension does not match the function");
    return r.profile->value(r.direction.dot(x));
}

Vector TestFunction::gradient(const Vector& x) const {
    if (const auto* s = spectrum()) {
        require(x.size() == dim_, "point dimension does not match the function");
        Vector g = Vector::Zero(dim_);
        for (const auto& t : s->terms) g -= t.amplitude * std::sin(t.frequency.dot(x) + t.phase) * t.frequency;
        return g;
    }
    const auto& r = *ridge();
    require(x.size() == dim_, "point dimension does not match the function");
    return r.profile->derivative(r.direction.dot(x)) * r.direction;
}

TestFunction TestFunction::directional_derivative(const Vector& d) const {
    if (const auto* s = spectrum()) {
        require(d.size() == dim_, "direction dimension does not match the function");
        TrigSpectrum out;
        for (const auto& t : s->terms) {
            out.terms.push_back({t.amplitude * t.frequency.dot(d), t.frequency, t.phase + 0.5 * std::numbers::pi});
        }
        return TestFunction("d(" + name_ + ")", dim_, std::move(out));
    }
    const auto& r = *ridge();
    require(d.size() == dim_, "direction dimension does not match the function");
    auto profile = std::make_shared<ScaledProfile>(r.profile->differentiated(), r.direction.dot(d));
    return TestFunction("d(" + name_ + ")", Ridge{profile, r.direction});
}

namespace functions {

TestFunction constant(int dim, double c) {
    return TestFunction("constant", dim, TrigSpectrum{c, {}});
}

TestFunction cosine(const Vector& frequency, double amplitude, double phase) {
    check_direction(frequency);
    return TestFunction("cosine", static_cast<int>(frequency.size()), TrigSpectrum{0.0, {{amplitude, frequency, phase}}});
}

TestFunction trig_polynomial(int dim, double constant, std::vector<TrigTerm> terms) {
    return TestFunction("trig_polynomial", dim, TrigSpectrum{constant, std::move(terms)});
}

TestFunction weierstrass(const Vector& direction, double gamma, int terms) {
    check_direction(direction);
    require(gamma > 0.0 && gamma <= 1.0, "Weierstrass exponent must lie in (0, 1]");
    require(terms >= 1 && terms <= 60, "Weierstrass term count must lie in [1, 60]");
    TrigSpectrum s;
    for (int k = 0; k < terms; ++k) s.terms.push_back({std::pow(2.0, -gamma * k), std::ldexp(1.0, k) * direction, 0.0});
    return TestFunction("weierstrass", static_cast<int>(direction.size()), std::move(s));
}

TestFunction smoothed_step(const Vector& direction, double width, double offset) {
    check_direction(direction);
    require(width > 0.0, "step width must be positive");
    return TestFunction("smoothed_step", Ridge{std::make_shared<ErfProfile>(width, offset), direction});
}

TestFunction affine(const Vector& direction, double intercept) {
    check_direction(direction);
    return TestFunction("affine", Ridge{std::make_shared<AffineProfile>(intercept), direction});
}

TestFunction monomial(const Vector& direction, int degree) {
    check_direction(direction);
    require(degree >= 0 && degree <= 8, "monomial degree must lie in [0, 8]");
    return TestFunction("monomial", Ridge{std::make_shared<MonomialProfile>(degree, 1.0), direction});
}

TestFunction mollified_xlogx(const Vector& direction, double width) {
    check_direction(direction);
    require(width > 0.0, "mollification width must be positive");
    return TestFunction("mollified_xlogx", Ridge{std::make_shared<XLogXProfile>(width), direction});
}

TestFunction bump(const Vector& direction, double radius) {
    check_direction(direction);
    require(radius > 0.0, "bump radius must be positive");
    return TestFunction("bump", Ridge{std::make_shared<BumpProfile>(radius), direction});
}

TestFunction tabulated(const Vector& direction, std::vector<double> nodes, std::vector<double> values) {
    check_direction(direction);
    require(nodes.size() >= 2 && nodes.size() == values.size(), "tabulated function needs at least two (u, value) rows");
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) require(nodes[i + 1] > nodes[i], "tabulated nodes must increase");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        require(std::isfinite(nodes[i]) && std::isfinite(values[i]), "tabulated entries must be finite");
    }
    return TestFunction("tabulated",
                        Ridge{std::make_shared<PiecewiseLinearProfile>(std::move(nodes), std::move(values)), direction});
}

TestFunction tabulated_csv(const Vector& direction, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open tabulated function file: " + path);
    std::vector<double> nodes, values;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double u = 0.0, v = 0.0;
        if (!(ss >> u >> v)) {
            if (nodes.empty() && row == 1) continue;  // header
            throw InvalidArgument(path + ":" + std::to_string(row) + ": expected two numeric columns");
        }
        nodes.push_back(u);
        values.push_back(v);
    }
    return tabulated(direction, std::move(nodes), std::move(values));
}

}  // namespace functions

}  // namespace mehler
