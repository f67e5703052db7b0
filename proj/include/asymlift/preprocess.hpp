#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "asymlift/errors.hpp"
#include "asymlift/ingest.hpp"

namespace asymlift {

struct PreprocessConfig {
    int k = 10;                   // duplication factor bound; 1 disables weighting
    bool time_weighting = true;   // off forces k = 1
    bool noise_reduction = true;  // off forces zero noise terms
    double d1_cap = 0.05;         // cap on the D-1 noise fraction

    int effective_k() const { return time_weighting ? k : 1; }
};

// A record annotated with its duplication weight and D-1-cleaned costs.
// Weights are carried as multiplicities; downstream sums are weight-scaled
// instead of physically duplicating rows.
struct WeightedRecord {
    StationWeekRecord base;
    ErrorMetrics metrics;
    int weight = 1;
    double cost_h_clean = 0.0;
    double cost_l_clean = 0.0;
    double noise_h = 0.0;
    double noise_l = 0.0;
    double d1_utilization = 0.0;
};

struct PreprocessStats {
    std::size_t clamped_costs = 0;  // cleaned cost hit the 0 floor (inconsistent input)
};

// Duplication factor w = ceil(k * p) with recentness percentile p = rank/n,
// rank 1 = oldest. Ranks are per station; callers pass one station's count.
inline int time_weight_of(int rank, int n, int k) {
    if (n < 1 || rank < 1 || rank > n) raise(errc::bad_input, "bad rank/n for time weighting");
    if (k < 1) raise(errc::bad_input, "k must be >= 1");
    const double p = static_cast<double>(rank) / static_cast<double>(n);
    int w = static_cast<int>(std::ceil(static_cast<double>(k) * p));
    return std::clamp(w, 1, k);
}

inline std::vector<int> time_weights(std::size_t n, int k) {
    if (n == 0) raise(errc::empty_dataset, "cannot weight an empty dataset");
    std::vector<int> weights(n);
    for (std::size_t i = 0; i < n; ++i)
        weights[i] = time_weight_of(static_cast<int>(i) + 1, static_cast<int>(n), k);
    return weights;
}

// Fraction of the D-1 move that reduced the WK-1 error. Positive only when
// the D-1 forecast moved toward observed demand. eps == 0 leaves nothing to
// reduce and returns 0.
inline double d1_utilization(double eps, double phi) {
    if (eps > 0.0) return phi >= 0.0 ? std::min(eps, phi) : 0.0;
    if (eps < 0.0) return phi <= 0.0 ? std::min(-eps, -phi) : 0.0;
    return 0.0;
}

// Signed noise fractions of the raw costs. On heaviness weeks a D-1 move
// toward demand removes up to cap of the H cost (negative noise = the D-1
// flex saved money); a move away adds the unutilized fraction. Lightness
// weeks are the sign mirror (swap the signs of eps and phi and the H/L
// roles); both branch sets agree at eps == 0. Caps apply to the fraction
// before multiplying by the raw cost.
struct NoiseFactors {
    double h = 0.0;
    double l = 0.0;
};

inline NoiseFactors noise_factors(double eps, double phi, double u, double cap = 0.05) {
    NoiseFactors f;
    if (eps >= 0.0) {
        if (phi >= 0.0) {
            f.h = -std::min(u, cap);
            f.l = std::min(phi - u, cap);
        } else {
            f.h = std::min(-phi - u, cap);
            f.l = -std::min(u, cap);
        }
    } else {
        if (phi <= 0.0) {
            f.l = -std::min(u, cap);
            f.h = std::min(-phi - u, cap);
        } else {
            f.l = std::min(phi - u, cap);
            f.h = -std::min(u, cap);
        }
    }
    return f;
}

inline std::pair<double, double> noise_costs(double eps, double phi, double u, double cost_h_raw,
                                             double cost_l_raw, double cap = 0.05) {
    const NoiseFactors f = noise_factors(eps, phi, u, cap);
    return {f.h * cost_h_raw, f.l * cost_l_raw};
}

// cost_clean = cost_raw - noise, floored at 0. A clamp means the inputs were
// inconsistent with the cap and is counted for diagnostics.
inline double clean_cost(double raw, double noise, PreprocessStats* stats = nullptr) {
    const double cleaned = raw - noise;
    if (cleaned < 0.0) {
        if (stats) ++stats->clamped_costs;
        return 0.0;
    }
    return cleaned;
}

// Weighted, noise-cleaned view of one station's week-ascending records.
inline std::vector<WeightedRecord> preprocess_station(std::span<const StationWeekRecord> records,
                                                      const PreprocessConfig& config,
                                                      PreprocessStats* stats = nullptr) {
    if (records.empty()) raise(errc::empty_dataset, "no records for station");
    const int k = config.effective_k();

    std::vector<WeightedRecord> out;
    out.reserve(records.size());
    const int n = static_cast<int>(records.size());
    for (int i = 0; i < n; ++i) {
        WeightedRecord w;
        w.base = records[i];
        w.metrics = compute_error_metrics(records[i]);
        w.weight = time_weight_of(i + 1, n, k);
        w.d1_utilization = d1_utilization(w.metrics.err_pct, w.metrics.d1_delta_pct);
        if (config.noise_reduction) {
            auto [nh, nl] = noise_costs(w.metrics.err_pct, w.metrics.d1_delta_pct, w.d1_utilization,
                                        w.base.cost_h_raw, w.base.cost_l_raw, config.d1_cap);
            w.noise_h = nh;
            w.noise_l = nl;
        }
        w.cost_h_clean = clean_cost(w.base.cost_h_raw, w.noise_h, stats);
        w.cost_l_clean = clean_cost(w.base.cost_l_raw, w.noise_l, stats);
        out.push_back(std::move(w));
    }
    return out;
}

// Groups parsed (sorted) records by station and preprocesses each stream.
inline std::map<std::string, std::vector<WeightedRecord>> preprocess_dataset(
    std::span<const StationWeekRecord> records, const PreprocessConfig& config,
    PreprocessStats* stats = nullptr) {
    std::map<std::string, std::vector<WeightedRecord>> by_station;
    std::size_t start = 0;
    while (start < records.size()) {
        std::size_t end = start;
        while (end < records.size() && records[end].station_id == records[start].station_id) ++end;
        by_station.emplace(records[start].station_id,
                           preprocess_station(records.subspan(start, end - start), config, stats));
        start = end;
    }
    return by_station;
}

}  // namespace asymlift
