#pragma once

#include <algorithm>
#include <exception>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "asymlift/cost_model.hpp"
#include "asymlift/errors.hpp"
#include "asymlift/feedback.hpp"
#include "asymlift/ingest.hpp"
#include "asymlift/optimizer.hpp"
#include "asymlift/preprocess.hpp"

#include "json.hpp"

namespace asymlift {

struct BacktestConfig {
    PreprocessConfig pre;
    OptimizerConfig opt;
    int min_obs = 4;
    int min_train_weeks = 8;  // expanding window start
    bool use_feedback = true; // corrections modulate decisions week over week
    int feedback_window = 26;
    int jobs = 1;
};

struct StationResult {
    std::string station_id;
    int weeks_evaluated = 0;
    int weeks_adjusted = 0;  // weeks with a nonzero adjustment
    double cost_generated = 0.0;
    double utilization_sum = 0.0;  // over adjusted weeks
    double max_achievable = 0.0;   // realized matching-scenario cleaned cost
    std::vector<AdjustmentDecision> decisions;  // one per evaluated week
    std::vector<RealizedOutcome> outcomes;

    double avg_utilization() const {
        return weeks_adjusted > 0 ? utilization_sum / weeks_adjusted : 0.0;
    }
    double capture_ratio() const {
        return max_achievable > 0.0 ? -cost_generated / max_achievable : 0.0;
    }
};

struct BacktestReport {
    bool time_weighting = true;
    bool noise_reduction = true;
    double total_cost_generated = 0.0;  // negative = savings
    double avg_utilization = 0.0;       // unweighted mean over adjusted station-weeks
    double max_achievable_savings = 0.0;
    double capture_ratio = 0.0;
    std::vector<StationResult> per_station;   // sorted by station id
    std::vector<std::string> excluded;        // stations without enough history
};

// Realized regret cost attributable to the WK-1 error for one record: the
// cleaned cost of the scenario that materialized. A perfect adjustment
// (e = 0 everywhere) would have avoided exactly this.
inline double realized_regret_cost(const StationWeekRecord& rec, const PreprocessConfig& pre) {
    const ErrorMetrics m = compute_error_metrics(rec);
    double noise_h = 0.0, noise_l = 0.0;
    if (pre.noise_reduction) {
        const double u = d1_utilization(m.err_pct, m.d1_delta_pct);
        std::tie(noise_h, noise_l) =
            noise_costs(m.err_pct, m.d1_delta_pct, u, rec.cost_h_raw, rec.cost_l_raw, pre.d1_cap);
    }
    if (m.err_pkg > 0.0) return clean_cost(rec.cost_h_raw, noise_h);
    if (m.err_pkg < 0.0) return clean_cost(rec.cost_l_raw, noise_l);
    return 0.0;
}

// Sum of realized cleaned regret costs: the savings ceiling of a policy that
// drives every error to zero.
inline double max_achievable_savings(std::span<const StationWeekRecord> records,
                                     const PreprocessConfig& pre = {}) {
    double total = 0.0;
    for (const auto& rec : records) total += realized_regret_cost(rec, pre);
    return total;
}

namespace detail {

inline StationResult backtest_station(std::span<const StationWeekRecord> records,
                                      const BacktestConfig& config) {
    StationResult result;
    result.station_id = records.front().station_id;
    FeedbackState state(result.station_id, config.pre.effective_k(), config.feedback_window);

    const int n = static_cast<int>(records.size());
    for (int t = config.min_train_weeks; t < n; ++t) {
        const auto training = records.subspan(0, static_cast<std::size_t>(t));
        const StationWeekRecord& actual = records[static_cast<std::size_t>(t)];

        // Fit strictly on weeks before t.
        bool have_profile = true;
        CostProfile profile;
        AdjustmentDecision decision;
        const CorrectionTerms corr = config.use_feedback ? state.corrections() : CorrectionTerms{};
        try {
            const auto weighted = preprocess_station(training, config.pre);
            profile = estimate_profile(result.station_id, weighted, config.min_obs);
            decision = optimal_delta(profile, corr, config.opt, result.station_id, actual.week);
        } catch (const Error& e) {
            have_profile = false;
            decision = null_decision(result.station_id, actual.week, reason_from_error(e));
        }

        // Score against the realized week, cleaned under the same config.
        const ErrorMetrics m = compute_error_metrics(actual);
        double noise_h = 0.0, noise_l = 0.0;
        if (config.pre.noise_reduction) {
            const double u = d1_utilization(m.err_pct, m.d1_delta_pct);
            std::tie(noise_h, noise_l) = noise_costs(m.err_pct, m.d1_delta_pct, u,
                                                     actual.cost_h_raw, actual.cost_l_raw,
                                                     config.pre.d1_cap);
        }
        const RealizedWeek realized =
            realized_week(actual, clean_cost(actual.cost_h_raw, noise_h),
                          clean_cost(actual.cost_l_raw, noise_l));

        RealizedOutcome outcome;
        if (have_profile) {
            const double calib_est = state.prospective_calib_mean(realized.obs_err());
            outcome = decompose_error(decision, profile, corr, realized, calib_est,
                                      config.opt.quad);
        } else {
            outcome.station_id = result.station_id;
            outcome.week = actual.week;
            outcome.obs_err = realized.obs_err();
        }
        state.update(outcome);

        result.decisions.push_back(decision);
        result.outcomes.push_back(outcome);
        ++result.weeks_evaluated;
        result.cost_generated += outcome.cost_generated;
        if (decision.actionable() && decision.delta_star != 0.0) {
            ++result.weeks_adjusted;
            result.utilization_sum += outcome.utilization;
        }
        result.max_achievable += realized_regret_cost(actual, config.pre);
    }
    return result;
}

}  // namespace detail

// Walk-forward replay: for each station-week t past the warmup, profiles and
// feedback state are fit on weeks < t only and the decision is scored against
// the realized week t. Stations run independently; weeks within a station are
// strictly sequential.
inline BacktestReport run_backtest(std::span<const StationWeekRecord> records,
                                   const BacktestConfig& config = {}) {
    if (records.empty()) raise(errc::empty_dataset, "backtest needs records");

    struct StationSpanInfo {
        std::size_t begin, count;
    };
    std::vector<StationSpanInfo> stations;
    std::size_t start = 0;
    while (start < records.size()) {
        std::size_t end = start;
        while (end < records.size() && records[end].station_id == records[start].station_id) ++end;
        stations.push_back({start, end - start});
        start = end;
    }

    BacktestReport report;
    report.time_weighting = config.pre.time_weighting;
    report.noise_reduction = config.pre.noise_reduction;

    std::vector<StationResult> results(stations.size());
    std::vector<char> evaluated(stations.size(), 0);

    const auto run_range = [&](std::size_t lo, std::size_t hi, std::exception_ptr& error) {
        try {
            for (std::size_t i = lo; i < hi; ++i) {
                const auto span = records.subspan(stations[i].begin, stations[i].count);
                if (static_cast<int>(span.size()) < config.min_train_weeks + 1) continue;
                results[i] = detail::backtest_station(span, config);
                evaluated[i] = 1;
            }
        } catch (...) {
            error = std::current_exception();
        }
    };

    const int jobs = std::max(1, config.jobs);
    if (jobs == 1 || stations.size() <= 1) {
        std::exception_ptr error;
        run_range(0, stations.size(), error);
        if (error) std::rethrow_exception(error);
    } else {
        const std::size_t workers = std::min<std::size_t>(jobs, stations.size());
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(workers);
        const std::size_t chunk = (stations.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(stations.size(), lo + chunk);
            threads.emplace_back(run_range, lo, hi, std::ref(errors[w]));
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    int total_adjusted = 0;
    for (std::size_t i = 0; i < stations.size(); ++i) {
        if (!evaluated[i]) {
            report.excluded.push_back(records[stations[i].begin].station_id);
            continue;
        }
        StationResult& r = results[i];
        report.total_cost_generated += r.cost_generated;
        report.max_achievable_savings += r.max_achievable;
        report.avg_utilization += r.utilization_sum;
        total_adjusted += r.weeks_adjusted;
        report.per_station.push_back(std::move(r));
    }
    report.avg_utilization = total_adjusted > 0 ? report.avg_utilization / total_adjusted : 0.0;
    report.capture_ratio = report.max_achievable_savings > 0.0
                               ? -report.total_cost_generated / report.max_achievable_savings
                               : 0.0;
    return report;
}

// The 2x2 ablation of time weighting x noise reduction. Feedback modulation
// is switched off in every cell: the correction loop learns around weak data
// processing, which would mask exactly the differences this grid measures.
inline std::vector<BacktestReport> ablation_grid(std::span<const StationWeekRecord> records,
                                                 const BacktestConfig& base = {}) {
    static constexpr std::pair<bool, bool> kCells[] = {
        {true, true}, {true, false}, {false, true}, {false, false}};
    std::vector<BacktestReport> reports;
    for (const auto& [tw, nr] : kCells) {
        BacktestConfig config = base;
        config.pre.time_weighting = tw;
        config.pre.noise_reduction = nr;
        config.use_feedback = false;
        reports.push_back(run_backtest(records, config));
    }
    return reports;
}

inline nlohmann::json report_to_json(const BacktestReport& r) {
    nlohmann::json stations = nlohmann::json::array();
    for (const auto& s : r.per_station) {
        stations.push_back(nlohmann::json{{"station_id", s.station_id},
                                          {"weeks_evaluated", s.weeks_evaluated},
                                          {"cost_generated", s.cost_generated},
                                          {"avg_utilization", s.avg_utilization()},
                                          {"max_achievable_savings", s.max_achievable},
                                          {"capture_ratio", s.capture_ratio()}});
    }
    return nlohmann::json{{"cell",
                           {{"time_weighting", r.time_weighting},
                            {"noise_reduction", r.noise_reduction}}},
                          {"total_cost_generated", r.total_cost_generated},
                          {"avg_utilization", r.avg_utilization},
                          {"max_achievable_savings", r.max_achievable_savings},
                          {"capture_ratio", r.capture_ratio},
                          {"per_station", std::move(stations)},
                          {"excluded_stations", r.excluded}};
}

// Table-shaped CSV of the ablation grid.
inline std::string grid_to_csv(const std::vector<BacktestReport>& reports) {
    std::string out = "time_weighting,noise_reduction,total_cost_generated,avg_utilization\n";
    for (const auto& r : reports) {
        out += r.time_weighting ? "Y," : "N,";
        out += r.noise_reduction ? "Y," : "N,";
        out += format_double(r.total_cost_generated);
        out += ',';
        out += format_double(r.avg_utilization);
        out += '\n';
    }
    return out;
}

}  // namespace asymlift
