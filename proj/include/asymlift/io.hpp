#pragma once

#include <map>
#include <string>
#include <vector>

#include "asymlift/cost_model.hpp"
#include "asymlift/csv.hpp"
#include "asymlift/optimizer.hpp"

#include "json.hpp"

namespace asymlift {

inline constexpr const char* kDecisionsHeader =
    "station_id,week,delta_star,p_l_star,expected_cost_at_delta,expected_cost_at_zero,reason";

// Decisions CSV. Non-actionable rows carry empty numeric cells except for the
// zero adjustment; the reason column says why.
inline std::string write_decisions_csv(const std::vector<AdjustmentDecision>& decisions) {
    std::string out = kDecisionsHeader;
    out += '\n';
    for (const auto& d : decisions) {
        out += d.station_id;
        out += ',';
        out += d.week.to_string();
        out += ',';
        out += format_double(d.delta_star);
        out += ',';
        if (d.actionable()) {
            out += format_double(d.p_l_star);
            out += ',';
            out += format_double(d.expected_cost_at_delta);
            out += ',';
            out += format_double(d.expected_cost_at_zero);
        } else {
            out += ",,";
        }
        out += ',';
        out += decision_reason_name(d.reason);
        out += '\n';
    }
    return out;
}

inline DecisionReason decision_reason_from_name(std::string_view name) {
    for (DecisionReason r : {DecisionReason::ok, DecisionReason::insufficient_data,
                             DecisionReason::degenerate_variance, DecisionReason::degenerate_costs,
                             DecisionReason::insufficient_history}) {
        if (name == decision_reason_name(r)) return r;
    }
    raise(errc::bad_input, "unknown decision reason '" + std::string(name) + "'");
}

inline std::vector<AdjustmentDecision> read_decisions_csv(const std::string& text) {
    std::vector<AdjustmentDecision> decisions;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        if (header) {
            header = false;
            continue;
        }
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 7) raise(errc::bad_input, "decisions row needs 7 fields");
        AdjustmentDecision d;
        d.station_id = std::string(fields[0]);
        d.week = WeekKey::parse(fields[1]);
        d.delta_star = parse_double(fields[2]);
        d.reason = decision_reason_from_name(fields[6]);
        if (d.actionable()) {
            d.p_l_star = parse_double(fields[3]);
            d.expected_cost_at_delta = parse_double(fields[4]);
            d.expected_cost_at_zero = parse_double(fields[5]);
        }
        decisions.push_back(std::move(d));
    }
    return decisions;
}

inline std::string write_profiles_json(const std::vector<CostProfile>& profiles) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : profiles) arr.push_back(profile_to_json(p));
    return arr.dump(2) + "\n";
}

inline std::map<std::string, CostProfile> read_profiles_json(const std::string& text) {
    std::map<std::string, CostProfile> profiles;
    for (const auto& item : nlohmann::json::parse(text)) {
        CostProfile p = profile_from_json(item);
        profiles.emplace(p.station_id, std::move(p));
    }
    return profiles;
}

}  // namespace asymlift
