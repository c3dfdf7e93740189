#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mehler/engine.hpp"
#include "mehler/infinite_dim.hpp"
#include "mehler/kernels.hpp"
#include "mehler/regularity.hpp"
#include "mehler/support/errors.hpp"

namespace mehler::cli {

enum class ExperimentKind { kernel, semigroup, derivative_decay, resolvent, cauchy, regularity, infinite_dim, acceptance_suite };

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> experiment_kind_from_string(const std::string& name);
const std::vector<std::string>& experiment_kind_names();

/// Rejected configuration; what() reads "source:line:column: message".
class ConfigError : public InvalidArgument {
public:
    ConfigError(const std::string& source, int line, int column, const std::string& message);

    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] int column() const noexcept { return column_; }
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    int line_;
    int column_;
    std::string message_;
};

/// Measure family with the drift it is paired with.
struct FamilySpec {
    MeasureFamily family;
    DriftSemigroup drift;
};

/// Fractional heat kernel on ray points x = (r, 0, ..., 0).
struct KernelPointwise {
    int dim = 1;
    double s = 0.5;
    std::vector<double> radii;
    double tolerance = 1e-6;  ///< max relative gap to the oracle
};

/// OU-fractional kernels on FFT grids: ‖∂_k g_t‖_{L¹} against t.
struct KernelGridded {
    OUFracParams params;
    int axis = 0;
    std::optional<double> expected_slope;
    double tolerance = 0.05;
};

struct KernelSpec {
    std::vector<double> times;
    std::variant<KernelPointwise, KernelGridded> form;
};

struct SemigroupSpec {
    FamilySpec family;
    TestFunction f;
    std::vector<double> times;
    std::vector<Vector> points;
    MethodSpec method;
    std::optional<Vector> direction;
    double tolerance = 1e-6;  ///< max |value - oracle| for trigonometric f
};

struct DecaySpec {
    FamilySpec family;
    TestFunction f;
    int order = 1;
    std::vector<double> times;
    ProbeSet probes;
    MethodSpec method;
    bool refine = true;
    std::optional<double> expected_slope;
    double tolerance = 0.05;
};

struct ResolventSpec {
    FamilySpec family;
    TestFunction f;
    double lambda = 1.0;
    std::vector<Vector> points;
    double tolerance = 1e-6;         ///< against a multiplier oracle
    std::size_t oracle_samples = 20000;  ///< Monte-Carlo oracle otherwise
    double z_tolerance = 4.0;
};

struct CauchySpec {
    FamilySpec family;
    TestFunction initial;
    TestFunction forcing;
    double horizon = 1.0;
    std::vector<double> times;
    std::vector<Vector> points;
    double tolerance = 1e-6;
};

struct RegularitySpec {
    TestFunction f;
    /// When set the measured field is R(λ)f for this family.
    std::optional<FamilySpec> family;
    double lambda = 1.0;
    ProbeSet probes;
    double window_min = 1e-3;
    double window_max = 1e-1;
    int order = 1;
    int levels_per_octave = 1;
    std::optional<double> expected_exponent;
    double tolerance = 0.05;
};

struct InfiniteDimSpec {
    ModelKind model = ModelKind::gross;
    int modes = 50;
    ModelParams params;
    std::optional<double> max_tail_ratio;
    std::vector<double> smoothing_times;
    std::optional<double> expected_slope;
    double tolerance = 0.05;
    std::vector<double> cameron_martin_times;
    std::size_t cameron_martin_samples = 100000;
    int cameron_martin_mode = 1;
    double z_tolerance = 4.0;
};

struct AcceptanceSpec {
    std::vector<int> criteria;  ///< empty means all
};

using ExperimentSpec = std::variant<KernelSpec, SemigroupSpec, DecaySpec, ResolventSpec, CauchySpec, RegularitySpec,
                                    InfiniteDimSpec, AcceptanceSpec>;

struct ExperimentConfig {
    std::string name;
    ExperimentKind kind;
    std::uint64_t seed;  ///< derived from the run seed and the name (the run seed for acceptance suites)
    int line;
    ExperimentSpec spec;
};

struct RunConfig {
    std::string source;
    std::string sha256;  ///< of the config bytes
    std::uint64_t seed = 0;
    std::filesystem::path output;
    unsigned jobs = 0;
    std::vector<ExperimentConfig> experiments;
};

/// Parses and range-checks a YAML experiment file. Every error carries the
/// line and column of the offending node.
RunConfig parse_config(const std::string& text, const std::string& source,
                       std::optional<std::uint64_t> seed_override = std::nullopt);
RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);

std::string sha256_hex(const std::string& bytes);

/// Per-experiment seed: FNV-1a of the name mixed into the run seed.
std::uint64_t experiment_seed(std::uint64_t run_seed, const std::string& name);

}  // namespace mehler::cli
