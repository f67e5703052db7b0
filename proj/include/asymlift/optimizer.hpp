#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asymlift/cost_model.hpp"
#include "asymlift/errors.hpp"
#include "asymlift/normal.hpp"
#include "asymlift/quadrature.hpp"
#include "asymlift/week.hpp"

namespace asymlift {

// Feedback terms folded into the optimization: a shift of the error mean and
// additive corrections to the two cost slopes.
struct CorrectionTerms {
    double calib_mean = 0.0;  // rolling mean of (o - f), packages
    double cpp_l_bar = 0.0;   // rolling mean of realized-minus-predicted CPP_L
    double cpp_h_bar = 0.0;   // rolling mean of realized-minus-predicted CPP_H
};

struct QuadratureConfig {
    double width = 10.0;  // truncation half-width in sigmas
    int panels = 64;      // composite panels per side of the kink
    int order = 8;        // Gauss-Legendre points per panel
};

struct OptimizerConfig {
    QuadratureConfig quad;
    double tol = 1e-6;            // golden-section bracket width, relative to sigma
    double bracket_sigmas = 6.0;  // search bracket half-width around the calibration mean
};

// Correction-adjusted slopes, floored at 0: a negative effective slope has no
// economic meaning and would break convexity of the objective.
struct EffectiveSlopes {
    double cpp_l = 0.0;
    double cpp_h = 0.0;
};

inline EffectiveSlopes effective_slopes(const CostProfile& profile, const CorrectionTerms& corr) {
    return {std::max(0.0, profile.cpp_l_hat + corr.cpp_l_bar),
            std::max(0.0, profile.cpp_h_hat + corr.cpp_h_bar)};
}

// Expected regret cost of applying adjustment delta. The error density is
// Gaussian with mean (calib_mean - delta) and std sigma; the integrand kinks
// at e = 0, so each branch is integrated separately over the truncated
// support [mean - W*sigma, mean + W*sigma].
inline double expected_cost_with_slopes(double delta, double mean_shift, double sigma,
                                        double cpp_l, double cpp_h,
                                        const QuadratureConfig& quad) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) raise(errc::invalid_profile, "sigma must be > 0");
    const double mean = mean_shift - delta;
    const double lo = mean - quad.width * sigma;
    const double hi = mean + quad.width * sigma;
    const auto& rule = GaussLegendreRule::of_order(quad.order);

    const double inv_sigma = 1.0 / sigma;
    const double norm = 1.0 / (sigma * kSqrt2Pi);
    const auto density = [&](double e) {
        const double z = (e - mean) * inv_sigma;
        return norm * std::exp(-0.5 * z * z);
    };

    double total = 0.0;
    const double l_hi = std::min(0.0, hi);
    if (l_hi > lo && cpp_l > 0.0)
        total += integrate([&](double e) { return -cpp_l * e * density(e); }, lo, l_hi,
                           quad.panels, rule);
    const double h_lo = std::max(0.0, lo);
    if (hi > h_lo && cpp_h > 0.0)
        total += integrate([&](double e) { return cpp_h * e * density(e); }, h_lo, hi,
                           quad.panels, rule);

    if (!std::isfinite(total)) raise(errc::non_finite_result, "expected cost is not finite");
    return total;
}

inline double expected_cost(double delta, const CostProfile& profile,
                            const CorrectionTerms& corrections = {},
                            const QuadratureConfig& quad = {}) {
    const EffectiveSlopes s = effective_slopes(profile, corrections);
    return expected_cost_with_slopes(delta, corrections.calib_mean, profile.sigma, s.cpp_l,
                                     s.cpp_h, quad);
}

// Golden-section search on a convex objective. Returns the midpoint of the
// final bracket, which is within tol/2 of the interior minimizer.
template <typename F>
double golden_section_minimize(F&& f, double a, double b, double tol) {
    constexpr double invphi = 0.6180339887498949;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

enum class DecisionReason {
    ok,
    insufficient_data,
    degenerate_variance,
    degenerate_costs,
    insufficient_history,
};

inline const char* decision_reason_name(DecisionReason r) {
    switch (r) {
        case DecisionReason::ok: return "ok";
        case DecisionReason::insufficient_data: return "insufficient_data";
        case DecisionReason::degenerate_variance: return "degenerate_variance";
        case DecisionReason::degenerate_costs: return "degenerate_costs";
        case DecisionReason::insufficient_history: return "insufficient_history";
    }
    return "unknown";
}

struct AdjustmentDecision {
    std::string station_id;
    WeekKey week;
    double delta_star = 0.0;
    double p_l_star = 0.5;
    double expected_cost_at_delta = 0.0;
    double expected_cost_at_zero = 0.0;
    DecisionReason reason = DecisionReason::ok;

    bool actionable() const { return reason == DecisionReason::ok; }
};

// Minimizes the expected cost over delta by golden-section search on the
// quadrature objective, bracketed around the calibration mean. The implied
// lightness probability comes from the critical-fractile identity
// P(L)* = CPP_H / (CPP_H + CPP_L), which the numerical minimizer must agree
// with; the closed form itself stays out of the production path.
inline AdjustmentDecision optimal_delta(const CostProfile& profile,
                                        const CorrectionTerms& corrections = {},
                                        const OptimizerConfig& config = {},
                                        const std::string& station_id = {},
                                        WeekKey week = {}) {
    if (!(profile.sigma > 0.0)) raise(errc::invalid_profile, "profile sigma must be > 0");
    const EffectiveSlopes s = effective_slopes(profile, corrections);
    if (s.cpp_l <= 0.0 && s.cpp_h <= 0.0)
        raise(errc::degenerate_costs, "both effective cost slopes are zero");
    if (s.cpp_l <= 0.0 || s.cpp_h <= 0.0)
        raise(errc::degenerate_costs,
              "one effective cost slope is zero; the critical fractile is degenerate");

    const double sigma = profile.sigma;
    const auto objective = [&](double delta) {
        return expected_cost_with_slopes(delta, corrections.calib_mean, sigma, s.cpp_l, s.cpp_h,
                                         config.quad);
    };

    const double center = corrections.calib_mean;
    const double half = config.bracket_sigmas * sigma;
    const double delta_star =
        golden_section_minimize(objective, center - half, center + half, config.tol * sigma);

    AdjustmentDecision decision;
    decision.station_id = station_id;
    decision.week = week;
    decision.delta_star = delta_star;
    decision.p_l_star = s.cpp_h / (s.cpp_h + s.cpp_l);
    decision.expected_cost_at_delta = objective(delta_star);
    decision.expected_cost_at_zero = objective(0.0);
    decision.reason = DecisionReason::ok;
    // No adjustment is always feasible; if the search candidate cannot beat
    // it (possible within the termination tolerance), keep the baseline so
    // expected_cost_at_delta <= expected_cost_at_zero holds unconditionally.
    if (decision.expected_cost_at_zero < decision.expected_cost_at_delta) {
        decision.delta_star = 0.0;
        decision.expected_cost_at_delta = decision.expected_cost_at_zero;
    }
    return decision;
}

inline AdjustmentDecision null_decision(const std::string& station_id, WeekKey week,
                                        DecisionReason reason) {
    AdjustmentDecision d;
    d.station_id = station_id;
    d.week = week;
    d.delta_star = 0.0;
    d.p_l_star = 0.5;
    d.expected_cost_at_delta = 0.0;
    d.expected_cost_at_zero = 0.0;
    d.reason = reason;
    return d;
}

inline DecisionReason reason_from_error(const Error& e) {
    switch (e.code()) {
        case errc::insufficient_data: return DecisionReason::insufficient_data;
        case errc::degenerate_variance: return DecisionReason::degenerate_variance;
        case errc::degenerate_costs: return DecisionReason::degenerate_costs;
        case errc::insufficient_history: return DecisionReason::insufficient_history;
        default: throw e;
    }
}

// One decision per station; stations whose profile or objective is not
// estimable get delta = 0 and a reason code instead of failing the fleet.
inline std::vector<AdjustmentDecision> solve_fleet(
    const std::vector<CostProfile>& profiles,
    const std::map<std::string, CorrectionTerms>& feedback, WeekKey week,
    const OptimizerConfig& config = {}) {
    std::vector<AdjustmentDecision> decisions;
    decisions.reserve(profiles.size());
    for (const auto& profile : profiles) {
        CorrectionTerms corr;
        if (auto it = feedback.find(profile.station_id); it != feedback.end()) corr = it->second;
        try {
            decisions.push_back(optimal_delta(profile, corr, config, profile.station_id, week));
        } catch (const Error& e) {
            decisions.push_back(null_decision(profile.station_id, week, reason_from_error(e)));
        }
    }
    return decisions;
}

}  // namespace asymlift
