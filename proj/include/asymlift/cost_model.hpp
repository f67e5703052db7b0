#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "asymlift/errors.hpp"
#include "asymlift/preprocess.hpp"

#include "json.hpp"

namespace asymlift {

enum class Scenario { heaviness, lightness };

// Per-station cost model: predicted cost-per-package slopes for each scenario
// and the standard deviation of the package error.
struct CostProfile {
    std::string station_id;
    double cpp_h_hat = 0.0;
    double cpp_l_hat = 0.0;
    double sigma = 0.0;
    int n_h_obs = 0;
    int n_l_obs = 0;
};

// Ratio of weight-scaled cleaned costs to weight-scaled absolute package
// errors, restricted to records whose error sign matches the scenario.
// Mismatching cost/scenario pairs are excluded: cost booked against H in an
// L week cannot be driven by the WK-1 error.
inline double estimate_cpp(std::span<const WeightedRecord> weighted, Scenario scenario,
                           int min_obs = 4) {
    min_obs = std::max(1, min_obs);  // the ratio needs at least one record
    double cost_sum = 0.0;
    double err_sum = 0.0;
    int n_obs = 0;
    for (const auto& w : weighted) {
        const double e = w.metrics.err_pkg;
        if (scenario == Scenario::heaviness && e > 0.0) {
            cost_sum += w.weight * w.cost_h_clean;
            err_sum += w.weight * e;
            ++n_obs;
        } else if (scenario == Scenario::lightness && e < 0.0) {
            cost_sum += w.weight * w.cost_l_clean;
            err_sum += w.weight * (-e);  // |e| so the estimate is a nonnegative slope
            ++n_obs;
        }
    }
    if (n_obs < min_obs)
        raise(errc::insufficient_data,
              "scenario has " + std::to_string(n_obs) + " observations, need " + std::to_string(min_obs));
    return cost_sum / err_sum;
}

inline int count_scenario_obs(std::span<const WeightedRecord> weighted, Scenario scenario) {
    int n = 0;
    for (const auto& w : weighted) {
        const double e = w.metrics.err_pkg;
        if ((scenario == Scenario::heaviness && e > 0.0) ||
            (scenario == Scenario::lightness && e < 0.0))
            ++n;
    }
    return n;
}

// Weighted sample standard deviation of the package error over D*. Uses the
// frequency-weight Bessel correction sum(w) - sum(w^2)/sum(w): uniform weights
// reduce to the plain n-1 sample estimator regardless of the uniform level.
inline double estimate_sigma(std::span<const WeightedRecord> weighted) {
    if (weighted.size() < 2)
        raise(errc::insufficient_data, "sigma needs at least 2 records");
    double wsum = 0.0, wsq = 0.0, mean = 0.0;
    for (const auto& w : weighted) {
        wsum += w.weight;
        wsq += static_cast<double>(w.weight) * w.weight;
        mean += w.weight * w.metrics.err_pkg;
    }
    mean /= wsum;
    double ss = 0.0;
    for (const auto& w : weighted) {
        const double d = w.metrics.err_pkg - mean;
        ss += w.weight * d * d;
    }
    const double denom = wsum - wsq / wsum;
    if (denom <= 0.0) raise(errc::insufficient_data, "sigma needs at least 2 distinct records");
    const double var = ss / denom;
    if (!(var > 0.0)) raise(errc::degenerate_variance, "all package errors identical");
    return std::sqrt(var);
}

inline CostProfile estimate_profile(const std::string& station_id,
                                    std::span<const WeightedRecord> weighted, int min_obs = 4) {
    CostProfile profile;
    profile.station_id = station_id;
    profile.n_h_obs = count_scenario_obs(weighted, Scenario::heaviness);
    profile.n_l_obs = count_scenario_obs(weighted, Scenario::lightness);
    profile.cpp_h_hat = estimate_cpp(weighted, Scenario::heaviness, min_obs);
    profile.cpp_l_hat = estimate_cpp(weighted, Scenario::lightness, min_obs);
    profile.sigma = estimate_sigma(weighted);
    return profile;
}

// The V-shaped regret cost curve: -cpp_l * e on e <= 0, cpp_h * e on e > 0.
inline double regret_cost(double e_pkg, const CostProfile& profile) {
    return e_pkg <= 0.0 ? -profile.cpp_l_hat * e_pkg : profile.cpp_h_hat * e_pkg;
}

inline nlohmann::json profile_to_json(const CostProfile& p) {
    return nlohmann::json{{"station_id", p.station_id}, {"cpp_h_hat", p.cpp_h_hat},
                          {"cpp_l_hat", p.cpp_l_hat},   {"sigma", p.sigma},
                          {"n_h_obs", p.n_h_obs},       {"n_l_obs", p.n_l_obs}};
}

inline CostProfile profile_from_json(const nlohmann::json& j) {
    CostProfile p;
    p.station_id = j.at("station_id").get<std::string>();
    p.cpp_h_hat = j.at("cpp_h_hat").get<double>();
    p.cpp_l_hat = j.at("cpp_l_hat").get<double>();
    p.sigma = j.at("sigma").get<double>();
    p.n_h_obs = j.at("n_h_obs").get<int>();
    p.n_l_obs = j.at("n_l_obs").get<int>();
    return p;
}

}  // namespace asymlift
