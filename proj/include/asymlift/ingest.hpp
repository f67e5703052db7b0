#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "asymlift/csv.hpp"
#include "asymlift/errors.hpp"
#include "asymlift/week.hpp"

#include "json.hpp"

namespace asymlift {

// One station-week observation: demand, the two forecast horizons, and the
// raw regret costs booked against heaviness and lightness that week.
struct StationWeekRecord {
    std::string station_id;
    WeekKey week;
    double observed_demand = 0.0;
    double wk1_forecast = 0.0;
    double d1_forecast = 0.0;
    double cost_h_raw = 0.0;
    double cost_l_raw = 0.0;
};

struct ErrorMetrics {
    double err_pct = 0.0;       // (o - f) / f
    double err_pkg = 0.0;       // o - f, in packages
    double d1_delta_pct = 0.0;  // (f2 - f) / f
};

inline ErrorMetrics compute_error_metrics(const StationWeekRecord& r) {
    ErrorMetrics m;
    m.err_pkg = r.observed_demand - r.wk1_forecast;
    m.err_pct = m.err_pkg / r.wk1_forecast;
    m.d1_delta_pct = (r.d1_forecast - r.wk1_forecast) / r.wk1_forecast;
    return m;
}

inline constexpr const char* kDatasetColumns[] = {
    "station_id", "week", "observed_demand", "wk1_forecast",
    "d1_forecast", "cost_h_raw", "cost_l_raw",
};

// Optional remapping of canonical column names onto the header actually
// present in the file.
struct ColumnSchema {
    std::map<std::string, std::string> canonical_to_actual;

    std::string actual(const std::string& canonical) const {
        auto it = canonical_to_actual.find(canonical);
        return it == canonical_to_actual.end() ? canonical : it->second;
    }

    static ColumnSchema from_json(const nlohmann::json& j) {
        ColumnSchema schema;
        for (const auto& [key, value] : j.items()) {
            bool known = false;
            for (const char* col : kDatasetColumns) known = known || key == col;
            if (!known) raise(errc::bad_input, "schema maps unknown column '" + key + "'");
            schema.canonical_to_actual[key] = value.get<std::string>();
        }
        return schema;
    }
};

enum class RowIssue {
    malformed_row,
    duplicate_key,
    non_positive_forecast,
    negative_value,
};

inline const char* row_issue_name(RowIssue issue) {
    switch (issue) {
        case RowIssue::malformed_row: return "malformed_row";
        case RowIssue::duplicate_key: return "duplicate_key";
        case RowIssue::non_positive_forecast: return "non_positive_forecast";
        case RowIssue::negative_value: return "negative_value";
    }
    return "unknown";
}

struct RowDiagnostic {
    std::size_t line;  // 1-based line number in the source
    RowIssue issue;
    std::string detail;
};

struct ParseResult {
    std::vector<StationWeekRecord> records;  // sorted by (station_id, week)
    std::vector<RowDiagnostic> diagnostics;  // rejected rows, in file order
};

// Bad rows are skipped with a diagnostic rather than aborting the run;
// operational datasets routinely carry sparse junk rows.
inline ParseResult parse_dataset(std::istream& in, const ColumnSchema& schema = {}) {
    ParseResult result;

    std::string line;
    if (!std::getline(in, line)) raise(errc::bad_input, "dataset is empty (missing header)");
    const auto header = split_csv_line(line);

    std::map<std::string, std::size_t> column_index;
    for (std::size_t i = 0; i < header.size(); ++i) column_index.emplace(std::string(header[i]), i);

    std::size_t index[7];
    for (std::size_t c = 0; c < 7; ++c) {
        const std::string actual = schema.actual(kDatasetColumns[c]);
        auto it = column_index.find(actual);
        if (it == column_index.end())
            raise(errc::bad_input, "missing column '" + actual + "' in dataset header");
        index[c] = it->second;
    }

    std::set<std::pair<std::string, long>> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);

        const auto reject = [&](RowIssue issue, std::string detail) {
            result.diagnostics.push_back(RowDiagnostic{line_no, issue, std::move(detail)});
        };

        std::size_t needed = 0;
        for (std::size_t c = 0; c < 7; ++c) needed = std::max(needed, index[c] + 1);
        if (fields.size() < needed) {
            reject(RowIssue::malformed_row, "expected at least " + std::to_string(needed) + " fields");
            continue;
        }

        StationWeekRecord rec;
        rec.station_id = std::string(fields[index[0]]);
        if (rec.station_id.empty()) {
            reject(RowIssue::malformed_row, "empty station_id");
            continue;
        }
        try {
            rec.week = WeekKey::parse(fields[index[1]]);
        } catch (const Error& e) {
            reject(RowIssue::malformed_row, e.what());
            continue;
        }

        double* slots[5] = {&rec.observed_demand, &rec.wk1_forecast, &rec.d1_forecast,
                            &rec.cost_h_raw, &rec.cost_l_raw};
        bool ok = true;
        for (std::size_t c = 0; c < 5 && ok; ++c) {
            if (!try_parse_double(fields[index[c + 2]], *slots[c])) {
                reject(RowIssue::malformed_row,
                       std::string("bad numeric '") + std::string(fields[index[c + 2]]) + "' in " +
                           kDatasetColumns[c + 2]);
                ok = false;
            }
        }
        if (!ok) continue;

        if (!(rec.wk1_forecast > 0.0) || !(rec.d1_forecast > 0.0)) {
            reject(RowIssue::non_positive_forecast,
                   "forecasts must be > 0 (wk1=" + format_double(rec.wk1_forecast) +
                       ", d1=" + format_double(rec.d1_forecast) + ")");
            continue;
        }
        if (rec.observed_demand < 0.0 || rec.cost_h_raw < 0.0 || rec.cost_l_raw < 0.0) {
            reject(RowIssue::negative_value, "demand and costs must be >= 0");
            continue;
        }
        if (!seen.emplace(rec.station_id, rec.week.ordinal()).second) {
            reject(RowIssue::duplicate_key,
                   "duplicate (station, week) = (" + rec.station_id + ", " + rec.week.to_string() + ")");
            continue;
        }
        result.records.push_back(std::move(rec));
    }

    std::sort(result.records.begin(), result.records.end(),
              [](const StationWeekRecord& a, const StationWeekRecord& b) {
                  if (a.station_id != b.station_id) return a.station_id < b.station_id;
                  return a.week < b.week;
              });
    return result;
}

inline ParseResult parse_dataset_string(const std::string& text, const ColumnSchema& schema = {}) {
    std::istringstream in(text);
    return parse_dataset(in, schema);
}

inline std::string dataset_header_line() {
    std::string line;
    for (std::size_t c = 0; c < 7; ++c) {
        if (c) line += ',';
        line += kDatasetColumns[c];
    }
    line += '\n';
    return line;
}

inline void append_dataset_row(std::string& out, const StationWeekRecord& r) {
    out += r.station_id;
    out += ',';
    out += r.week.to_string();
    out += ',';
    out += format_double(r.observed_demand);
    out += ',';
    out += format_double(r.wk1_forecast);
    out += ',';
    out += format_double(r.d1_forecast);
    out += ',';
    out += format_double(r.cost_h_raw);
    out += ',';
    out += format_double(r.cost_l_raw);
    out += '\n';
}

// Round-trips bit-for-bit through parse_dataset.
inline std::string write_dataset_csv(const std::vector<StationWeekRecord>& records) {
    std::string out = dataset_header_line();
    for (const auto& r : records) append_dataset_row(out, r);
    return out;
}

}  // namespace asymlift
