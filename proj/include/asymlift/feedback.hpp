#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asymlift/csv.hpp"
#include "asymlift/errors.hpp"
#include "asymlift/optimizer.hpp"
#include "asymlift/preprocess.hpp"

#include "json.hpp"

namespace asymlift {

// Fraction of the applied adjustment that reduced the realized error.
// Positive adjustments follow the stated formula; negative adjustments use
// the sign-mirrored form.
inline double utilization(double delta, double observed, double forecast) {
    if (delta == 0.0) raise(errc::zero_delta, "utilization undefined for delta = 0");
    if (delta > 0.0) return std::min(1.0, std::max(0.0, observed - forecast) / delta);
    return std::min(1.0, std::max(0.0, forecast - observed) / (-delta));
}

// Incremental cost generated by the adjustment; negative values are savings.
// For delta > 0 the non-utilized part buys lightness cost and the utilized
// part avoids heaviness cost; the slope roles swap for delta < 0.
inline double cost_generated(double delta, double u, double cpp_l, double cpp_h) {
    if (delta == 0.0) return 0.0;
    if (delta > 0.0) return delta * ((1.0 - u) * cpp_l - u * cpp_h);
    return (-delta) * ((1.0 - u) * cpp_h - u * cpp_l);
}

// Observed per-package costs for one week: cleaned cost over |error|, defined
// only for the scenario that actually materialized.
struct RealizedWeek {
    double observed_demand = 0.0;
    double wk1_forecast = 0.0;
    std::optional<double> cpp_h;
    std::optional<double> cpp_l;

    double obs_err() const { return observed_demand - wk1_forecast; }
};

inline RealizedWeek realized_week(const StationWeekRecord& rec, double cost_h_clean,
                                  double cost_l_clean) {
    RealizedWeek r;
    r.observed_demand = rec.observed_demand;
    r.wk1_forecast = rec.wk1_forecast;
    const double e = rec.observed_demand - rec.wk1_forecast;
    if (e > 0.0) r.cpp_h = cost_h_clean / e;
    if (e < 0.0) r.cpp_l = cost_l_clean / (-e);
    return r;
}

struct RealizedOutcome {
    std::string station_id;
    WeekKey week;
    double utilization = 0.0;      // 0 when no adjustment was applied
    double cost_generated = 0.0;   // signed; negative = savings
    double eps_calibration = 0.0;
    double eps_cpp = 0.0;
    double eps_unexplained = 0.0;
    double expected_cost_at_delta = 0.0;
    double obs_err = 0.0;
    std::optional<double> cpp_h_delta;  // realized - predicted CPP_H (H weeks only)
    std::optional<double> cpp_l_delta;
};

// Scores one week and splits the observed-vs-expected gap into calibration
// and CPP-prediction components, leaving the rest as the residual. Both
// quadrature baselines use the density and slopes the deployed decision
// actually used, so a converged feedback loop drives the explained terms to
// zero. calib_estimate is the best available estimate of E[o - f], i.e. the
// rolling mean including the week being scored.
inline RealizedOutcome decompose_error(const AdjustmentDecision& decision,
                                       const CostProfile& profile,
                                       const CorrectionTerms& corrections_used,
                                       const RealizedWeek& realized, double calib_estimate,
                                       const QuadratureConfig& quad = {}) {
    RealizedOutcome out;
    out.station_id = decision.station_id;
    out.week = decision.week;
    out.obs_err = realized.obs_err();
    out.expected_cost_at_delta = decision.expected_cost_at_delta;

    const EffectiveSlopes used = effective_slopes(profile, corrections_used);
    const double e = out.obs_err;
    if (e > 0.0 && realized.cpp_h) out.cpp_h_delta = *realized.cpp_h - profile.cpp_h_hat;
    if (e < 0.0 && realized.cpp_l) out.cpp_l_delta = *realized.cpp_l - profile.cpp_l_hat;

    const double delta = decision.delta_star;
    if (decision.actionable() && delta != 0.0) {
        const double u = utilization(delta, realized.observed_demand, realized.wk1_forecast);
        const double cpp_l = realized.cpp_l.value_or(used.cpp_l);
        const double cpp_h = realized.cpp_h.value_or(used.cpp_h);
        out.utilization = u;
        out.cost_generated = cost_generated(delta, u, cpp_l, cpp_h);
    }

    if (decision.actionable()) {
        const double sigma = profile.sigma;
        const auto l_branch = [&](double mean_shift) {
            return expected_cost_with_slopes(delta, mean_shift, sigma, used.cpp_l, 0.0, quad);
        };
        out.eps_calibration = l_branch(calib_estimate) - l_branch(corrections_used.calib_mean);

        // Slope deltas relative to the deployed slopes, not the base
        // prediction: the bars already absorbed into the decision must not be
        // re-counted as prediction error.
        const double d_l = realized.cpp_l ? *realized.cpp_l - used.cpp_l : 0.0;
        const double d_h = realized.cpp_h ? *realized.cpp_h - used.cpp_h : 0.0;
        double eps_cpp = 0.0;
        if (d_l != 0.0)
            eps_cpp += (d_l > 0.0 ? 1.0 : -1.0) *
                       expected_cost_with_slopes(delta, corrections_used.calib_mean, sigma,
                                                 std::abs(d_l), 0.0, quad);
        if (d_h != 0.0)
            eps_cpp += (d_h > 0.0 ? 1.0 : -1.0) *
                       expected_cost_with_slopes(delta, corrections_used.calib_mean, sigma, 0.0,
                                                 std::abs(d_h), quad);
        out.eps_cpp = eps_cpp;
    }

    out.eps_unexplained =
        out.cost_generated - out.expected_cost_at_delta - out.eps_calibration - out.eps_cpp;
    return out;
}

// Per-station feedback memory: an append-only ledger of realized outcomes and
// the rolling, time-weighted correction means derived from its tail.
class FeedbackState {
public:
    FeedbackState() = default;
    FeedbackState(std::string station_id, int k = 10, int window = 26)
        : station_id_(std::move(station_id)), k_(k), window_(window) {}

    const std::string& station_id() const { return station_id_; }
    const std::vector<RealizedOutcome>& ledger() const { return ledger_; }
    int window() const { return window_; }
    int weighting_k() const { return k_; }

    // Appends one week. Weeks must arrive in order; re-sending the latest
    // week with identical content is an idempotent no-op.
    void update(const RealizedOutcome& outcome) {
        if (!ledger_.empty()) {
            const WeekKey last = ledger_.back().week;
            if (outcome.week == last) {
                const RealizedOutcome& prev = ledger_.back();
                if (prev.obs_err == outcome.obs_err &&
                    prev.cost_generated == outcome.cost_generated)
                    return;
                raise(errc::out_of_order_week,
                      station_id_ + ": conflicting update for week " + outcome.week.to_string());
            }
            if (outcome.week < last)
                raise(errc::out_of_order_week,
                      station_id_ + ": week " + outcome.week.to_string() + " is not after " +
                          last.to_string());
        }
        ledger_.push_back(outcome);
    }

    CorrectionTerms corrections() const {
        CorrectionTerms corr;
        const auto tail = window_tail();
        corr.calib_mean = weighted_mean(tail, [](const RealizedOutcome& o) {
            return std::optional<double>(o.obs_err);
        });
        corr.cpp_l_bar = weighted_mean(tail, [](const RealizedOutcome& o) { return o.cpp_l_delta; });
        corr.cpp_h_bar = weighted_mean(tail, [](const RealizedOutcome& o) { return o.cpp_h_delta; });
        return corr;
    }

    // Rolling calibration mean as it will be after ingesting obs_err; used to
    // score a week before its ledger entry exists.
    double prospective_calib_mean(double obs_err) const {
        std::vector<double> values;
        const auto tail = window_tail();
        const std::size_t keep = static_cast<std::size_t>(window_) - 1;
        const std::size_t skip = tail.size() > keep ? tail.size() - keep : 0;
        for (std::size_t i = skip; i < tail.size(); ++i) values.push_back(tail[i].obs_err);
        values.push_back(obs_err);
        double wsum = 0.0, acc = 0.0;
        const int n = static_cast<int>(values.size());
        for (int i = 0; i < n; ++i) {
            const int w = time_weight_of(i + 1, n, k_);
            wsum += w;
            acc += w * values[i];
        }
        return acc / wsum;
    }

    nlohmann::json to_json() const {
        nlohmann::json ledger = nlohmann::json::array();
        for (const auto& o : ledger_) {
            nlohmann::json entry{{"week", o.week.to_string()},
                                 {"utilization", o.utilization},
                                 {"cost_generated", o.cost_generated},
                                 {"eps_calibration", o.eps_calibration},
                                 {"eps_cpp", o.eps_cpp},
                                 {"eps_unexplained", o.eps_unexplained},
                                 {"expected_cost_at_delta", o.expected_cost_at_delta},
                                 {"obs_err", o.obs_err}};
            if (o.cpp_h_delta) entry["cpp_h_delta"] = *o.cpp_h_delta;
            if (o.cpp_l_delta) entry["cpp_l_delta"] = *o.cpp_l_delta;
            ledger.push_back(std::move(entry));
        }
        const CorrectionTerms corr = corrections();
        return nlohmann::json{{"station_id", station_id_}, {"k", k_},
                              {"window", window_},        {"calib_mean", corr.calib_mean},
                              {"cpp_l_bar", corr.cpp_l_bar}, {"cpp_h_bar", corr.cpp_h_bar},
                              {"ledger", std::move(ledger)}};
    }

    static FeedbackState from_json(const nlohmann::json& j) {
        FeedbackState state(j.at("station_id").get<std::string>(), j.value("k", 10),
                            j.value("window", 26));
        for (const auto& entry : j.at("ledger")) {
            RealizedOutcome o;
            o.station_id = state.station_id_;
            o.week = WeekKey::parse(entry.at("week").get<std::string>());
            o.utilization = entry.at("utilization").get<double>();
            o.cost_generated = entry.at("cost_generated").get<double>();
            o.eps_calibration = entry.at("eps_calibration").get<double>();
            o.eps_cpp = entry.at("eps_cpp").get<double>();
            o.eps_unexplained = entry.at("eps_unexplained").get<double>();
            o.expected_cost_at_delta = entry.at("expected_cost_at_delta").get<double>();
            o.obs_err = entry.at("obs_err").get<double>();
            if (entry.contains("cpp_h_delta")) o.cpp_h_delta = entry["cpp_h_delta"].get<double>();
            if (entry.contains("cpp_l_delta")) o.cpp_l_delta = entry["cpp_l_delta"].get<double>();
            state.ledger_.push_back(std::move(o));
        }
        return state;
    }

    void save(const std::filesystem::path& state_dir) const {
        atomic_write_file(state_dir / (station_id_ + ".json"), to_json().dump(2) + "\n");
    }

    static FeedbackState load_or_init(const std::filesystem::path& state_dir,
                                      const std::string& station_id, int k = 10, int window = 26) {
        const auto path = state_dir / (station_id + ".json");
        if (!std::filesystem::exists(path)) return FeedbackState(station_id, k, window);
        return from_json(nlohmann::json::parse(read_file(path)));
    }

private:
    std::span<const RealizedOutcome> window_tail() const {
        const std::size_t n = ledger_.size();
        const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(window_));
        return std::span<const RealizedOutcome>(ledger_).subspan(n - take, take);
    }

    // Time-weighted mean over the entries where the extractor yields a value;
    // ranks (and so weights) are taken within that subsequence.
    template <typename Extract>
    double weighted_mean(std::span<const RealizedOutcome> tail, Extract&& extract) const {
        std::vector<double> values;
        values.reserve(tail.size());
        for (const auto& o : tail) {
            if (auto v = extract(o)) values.push_back(*v);
        }
        if (values.empty()) return 0.0;
        double wsum = 0.0, acc = 0.0;
        const int n = static_cast<int>(values.size());
        for (int i = 0; i < n; ++i) {
            const int w = time_weight_of(i + 1, n, k_);
            wsum += w;
            acc += w * values[i];
        }
        return acc / wsum;
    }

    std::string station_id_;
    int k_ = 10;
    int window_ = 26;
    std::vector<RealizedOutcome> ledger_;
};

}  // namespace asymlift
