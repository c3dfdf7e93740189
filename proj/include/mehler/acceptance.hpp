#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mehler::acceptance {

struct Options {
    std::uint64_t seed = 1;
};

struct Result {
    int id = 0;
    std::string title;
    bool passed = false;
    /// Headline measurement and its admissible band.
    double measured = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    std::string detail;
    /// Set when the check threw instead of producing a measurement.
    std::string error;
    double seconds = 0.0;
};

struct Criterion {
    int id;
    std::string title;
    std::function<Result(const Options&)> run;
};

/// Criteria 1-14 in order.
const std::vector<Criterion>& criteria();

/// Runs one criterion; exceptions become a failed result carrying the message.
Result run(const Criterion& criterion, const Options& options);

/// "[PASS] 07 derivative-decay exponents  measured=... target=... tol=...  detail"
std::string format_line(const Result& r);

nlohmann::json to_json(const Result& r);

}  // namespace mehler::acceptance
