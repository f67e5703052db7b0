#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "asymlift/errors.hpp"
#include "asymlift/ingest.hpp"
#include "asymlift/preprocess.hpp"
#include "asymlift/rng.hpp"

#include "json.hpp"

namespace asymlift {

// Generator for synthetic station fleets with controllable cost asymmetry,
// calibration bias, linear CPP drift and D-1 behavior. D-1 noise is injected
// by inverting the same capped noise formulas the preprocessor applies, so
// noise reduction has a provable recovery target.
struct ScenarioSpec {
    int n_stations = 1;
    int n_weeks = 52;
    double cpp_h_true = 5.0;
    double cpp_l_true = 1.0;
    double cpp_h_drift = 0.0;  // additive change per week
    double cpp_l_drift = 0.0;
    double sigma_true = 500.0;
    double calib_bias = 0.0;
    double d1_skill = 0.5;  // probability a week's D-1 move goes toward demand
    std::optional<double> d1_skill_h;  // per-scenario overrides
    std::optional<double> d1_skill_l;
    double d1_up_bias = 0.5;  // sign bias of skill-less D-1 moves
    double base_forecast = 10000.0;
    double d1_cap = 0.05;
    std::uint64_t seed = 1;
    WeekKey start_week{2024, 1};

    double skill_h() const { return d1_skill_h.value_or(d1_skill); }
    double skill_l() const { return d1_skill_l.value_or(d1_skill); }

    void validate() const {
        if (n_stations < 1 || n_weeks < 1)
            raise(errc::invalid_spec, "n_stations and n_weeks must be >= 1");
        if (!(cpp_h_true > 0.0) || !(cpp_l_true > 0.0))
            raise(errc::invalid_spec, "cost rates must be > 0");
        if (!(sigma_true >= 0.0)) raise(errc::invalid_spec, "sigma_true must be >= 0");
        if (!(base_forecast > 0.0)) raise(errc::invalid_spec, "base_forecast must be > 0");
        for (double p : {skill_h(), skill_l(), d1_up_bias})
            if (!(p >= 0.0 && p <= 1.0)) raise(errc::invalid_spec, "d1 fractions must be in [0,1]");
        if (!(d1_cap > 0.0 && d1_cap < 1.0)) raise(errc::invalid_spec, "d1_cap must be in (0,1)");
    }

    static ScenarioSpec from_json(const nlohmann::json& j) {
        ScenarioSpec s;
        s.n_stations = j.value("n_stations", s.n_stations);
        s.n_weeks = j.value("n_weeks", s.n_weeks);
        s.cpp_h_true = j.value("cpp_h_true", s.cpp_h_true);
        s.cpp_l_true = j.value("cpp_l_true", s.cpp_l_true);
        s.cpp_h_drift = j.value("cpp_h_drift", s.cpp_h_drift);
        s.cpp_l_drift = j.value("cpp_l_drift", s.cpp_l_drift);
        s.sigma_true = j.value("sigma_true", s.sigma_true);
        s.calib_bias = j.value("calib_bias", s.calib_bias);
        s.d1_skill = j.value("d1_skill", s.d1_skill);
        if (j.contains("d1_skill_h")) s.d1_skill_h = j["d1_skill_h"].get<double>();
        if (j.contains("d1_skill_l")) s.d1_skill_l = j["d1_skill_l"].get<double>();
        s.d1_up_bias = j.value("d1_up_bias", s.d1_up_bias);
        s.base_forecast = j.value("base_forecast", s.base_forecast);
        s.d1_cap = j.value("d1_cap", s.d1_cap);
        s.seed = j.value("seed", s.seed);
        if (j.contains("start_week")) s.start_week = WeekKey::parse(j["start_week"].get<std::string>());
        s.validate();
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"n_stations", n_stations},
                         {"n_weeks", n_weeks},
                         {"cpp_h_true", cpp_h_true},
                         {"cpp_l_true", cpp_l_true},
                         {"cpp_h_drift", cpp_h_drift},
                         {"cpp_l_drift", cpp_l_drift},
                         {"sigma_true", sigma_true},
                         {"calib_bias", calib_bias},
                         {"d1_skill", d1_skill},
                         {"d1_up_bias", d1_up_bias},
                         {"base_forecast", base_forecast},
                         {"d1_cap", d1_cap},
                         {"seed", seed},
                         {"start_week", start_week.to_string()}};
        if (d1_skill_h) j["d1_skill_h"] = *d1_skill_h;
        if (d1_skill_l) j["d1_skill_l"] = *d1_skill_l;
        return j;
    }
};

// Ground truth the generator knows but the pipeline has to recover.
struct SynthTruth {
    double cost_h_clean = 0.0;
    double cost_l_clean = 0.0;
    double cpp_h = 0.0;  // rate in effect that week
    double cpp_l = 0.0;
};

inline std::string synth_station_id(int index, int n_stations) {
    std::size_t digits = 1;
    for (int v = n_stations; v >= 10; v /= 10) ++digits;
    std::string number = std::to_string(index + 1);
    if (number.size() < digits) number.insert(0, digits - number.size(), '0');
    return "S" + number;
}

inline std::vector<StationWeekRecord> generate(const ScenarioSpec& spec,
                                               std::vector<SynthTruth>* truth_out = nullptr) {
    spec.validate();
    std::vector<StationWeekRecord> records;
    records.reserve(static_cast<std::size_t>(spec.n_stations) * spec.n_weeks);
    if (truth_out) {
        truth_out->clear();
        truth_out->reserve(records.capacity());
    }

    for (int s = 0; s < spec.n_stations; ++s) {
        Rng rng = Rng::substream(spec.seed, static_cast<std::uint64_t>(s));
        WeekKey week = spec.start_week;
        const double f = spec.base_forecast;
        for (int t = 0; t < spec.n_weeks; ++t, week = week.next()) {
            double e = spec.calib_bias + spec.sigma_true * rng.gaussian();
            double o = f + e;
            if (o < 0.0) {
                o = 0.0;
                e = o - f;
            }
            const double eps = e / f;

            const double cpp_h = std::max(1e-9, spec.cpp_h_true + spec.cpp_h_drift * t);
            const double cpp_l = std::max(1e-9, spec.cpp_l_true + spec.cpp_l_drift * t);
            const double clean_h = e > 0.0 ? cpp_h * e : 0.0;
            const double clean_l = e < 0.0 ? cpp_l * (-e) : 0.0;

            // D-1 move: with probability skill it tracks the realized error
            // (scale up to 1.25 so the overshoot branch gets exercised),
            // otherwise an error-independent move with a sign bias.
            const double skill = e >= 0.0 ? spec.skill_h() : spec.skill_l();
            double phi;
            if (rng.bernoulli(skill)) {
                phi = eps * rng.uniform(0.0, 1.25);
            } else {
                const double magnitude = rng.uniform(0.0, 0.08);
                phi = rng.bernoulli(spec.d1_up_bias) ? magnitude : -magnitude;
            }
            phi = std::max(phi, -0.9);  // keep the D-1 forecast positive

            const double u = d1_utilization(eps, phi);
            const NoiseFactors factor = noise_factors(eps, phi, u, spec.d1_cap);

            StationWeekRecord rec;
            rec.station_id = synth_station_id(s, spec.n_stations);
            rec.week = week;
            rec.observed_demand = o;
            rec.wk1_forecast = f;
            rec.d1_forecast = f * (1.0 + phi);
            // raw = clean / (1 - factor): the preprocessor's subtraction
            // raw - factor*raw lands back on the clean cost.
            rec.cost_h_raw = clean_h / (1.0 - factor.h);
            rec.cost_l_raw = clean_l / (1.0 - factor.l);
            records.push_back(std::move(rec));

            if (truth_out) truth_out->push_back(SynthTruth{clean_h, clean_l, cpp_h, cpp_l});
        }
    }

    // Match parse_dataset ordering. Per-station generation already emits
    // week-ascending rows and station ids sort lexicographically.
    return records;
}

inline std::string generate_csv(const ScenarioSpec& spec) { return write_dataset_csv(generate(spec)); }

}  // namespace asymlift
