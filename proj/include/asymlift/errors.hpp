#pragma once

#include <stdexcept>
#include <string>

namespace asymlift {

// Failure taxonomy shared across the library. Per-row ingest problems are
// reported as diagnostics, not exceptions; everything here aborts the
// operation that raised it.
enum class errc {
    empty_dataset,
    insufficient_data,
    degenerate_variance,
    degenerate_costs,
    invalid_profile,
    non_finite_result,
    zero_delta,
    out_of_order_week,
    invalid_spec,
    insufficient_history,
    bad_input,
    io_failure,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::empty_dataset: return "empty_dataset";
        case errc::insufficient_data: return "insufficient_data";
        case errc::degenerate_variance: return "degenerate_variance";
        case errc::degenerate_costs: return "degenerate_costs";
        case errc::invalid_profile: return "invalid_profile";
        case errc::non_finite_result: return "non_finite_result";
        case errc::zero_delta: return "zero_delta";
        case errc::out_of_order_week: return "out_of_order_week";
        case errc::invalid_spec: return "invalid_spec";
        case errc::insufficient_history: return "insufficient_history";
        case errc::bad_input: return "bad_input";
        case errc::io_failure: return "io_failure";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace asymlift
