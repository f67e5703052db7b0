// asymlift: cost-asymmetry forecast adjustments from station-week regret
// cost history. Subcommands mirror the weekly operating loop:
//   adjust   fit cost profiles and emit per-station adjustment decisions
//   feedback score decisions against actuals and update per-station state
//   backtest walk-forward replay, optionally as the 2x2 ablation grid
//   synth    generate synthetic fleets for benchmarking and tests

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "asymlift/asymlift.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace asymlift;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitComputation = 1;
constexpr int kExitUsage = 2;

void report_error(const std::string& code, const std::string& message) {
    const nlohmann::json j{{"error", {{"code", code}, {"message", message}}}};
    std::cerr << j.dump() << "\n";
}

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case errc::io_failure:
        case errc::bad_input:
        case errc::invalid_spec:
            return kExitUsage;
        default:
            return kExitComputation;
    }
}

struct PipelineFlags {
    PreprocessConfig pre;
    OptimizerConfig opt;
    int min_obs = 4;
    int feedback_window = 26;
    int jobs = 1;
    std::string schema_path;

    void attach(CLI::App* cmd, bool with_optimizer = true) {
        cmd->add_option("--k", pre.k, "Time-weighting duplication bound")->default_val(10);
        cmd->add_flag_callback("--no-time-weighting", [this] { pre.time_weighting = false; },
                               "Disable recentness weighting (k=1)");
        cmd->add_flag_callback("--no-noise-reduction", [this] { pre.noise_reduction = false; },
                               "Keep raw costs; skip D-1 noise removal");
        cmd->add_option("--d1-cap", pre.d1_cap, "Cap on the D-1 noise fraction")
            ->default_val(0.05);
        cmd->add_option("--min-obs", min_obs, "Minimum per-scenario observations per station")
            ->default_val(4);
        cmd->add_option("--schema", schema_path, "JSON remapping of input column names");
        if (with_optimizer) {
            cmd->add_option("--quad-width", opt.quad.width, "Quadrature truncation, in sigmas")
                ->default_val(10.0);
            cmd->add_option("--quad-panels", opt.quad.panels, "Quadrature panels per side")
                ->default_val(64);
            cmd->add_option("--tol", opt.tol, "Search tolerance relative to sigma")
                ->default_val(1e-6);
        }
        cmd->add_option("--feedback-window", feedback_window,
                        "Rolling window (weeks) for correction means")
            ->default_val(26);
        cmd->add_option("--jobs", jobs, "Worker parallelism cap")->default_val(1);
    }

    ColumnSchema schema() const {
        if (schema_path.empty()) return {};
        return ColumnSchema::from_json(nlohmann::json::parse(read_file(schema_path)));
    }
};

std::string default_state_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("ASYMLIFT_STATE_DIR")) return env;
    return {};
}

ParseResult load_dataset(const std::string& path, const PipelineFlags& flags) {
    if (!fs::exists(path)) raise(errc::io_failure, "input file '" + path + "' does not exist");
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(errc::io_failure, "cannot open '" + path + "'");
    ParseResult result = parse_dataset(in, flags.schema());
    for (const auto& d : result.diagnostics)
        std::cerr << "warning: line " << d.line << ": " << row_issue_name(d.issue) << ": "
                  << d.detail << "\n";
    if (result.records.empty()) raise(errc::empty_dataset, "no valid rows in '" + path + "'");
    return result;
}

// Cleans one realized record under the active preprocessing flags.
RealizedWeek realize(const StationWeekRecord& rec, const PreprocessConfig& pre) {
    const ErrorMetrics m = compute_error_metrics(rec);
    double noise_h = 0.0, noise_l = 0.0;
    if (pre.noise_reduction) {
        const double u = d1_utilization(m.err_pct, m.d1_delta_pct);
        std::tie(noise_h, noise_l) =
            noise_costs(m.err_pct, m.d1_delta_pct, u, rec.cost_h_raw, rec.cost_l_raw, pre.d1_cap);
    }
    return realized_week(rec, clean_cost(rec.cost_h_raw, noise_h),
                         clean_cost(rec.cost_l_raw, noise_l));
}

int cmd_adjust(const PipelineFlags& flags, const std::string& input, const std::string& out_dir,
               const std::string& state_dir_flag) {
    const auto parsed = load_dataset(input, flags);
    const auto by_station = preprocess_dataset(parsed.records, flags.pre);
    const std::string state_dir = default_state_dir(state_dir_flag);

    std::vector<CostProfile> profiles;
    std::vector<AdjustmentDecision> decisions;
    for (const auto& [station, weighted] : by_station) {
        const WeekKey next_week = weighted.back().base.week.next();
        CorrectionTerms corr;
        if (!state_dir.empty() && fs::exists(state_dir))
            corr = FeedbackState::load_or_init(state_dir, station, flags.pre.effective_k(),
                                               flags.feedback_window)
                       .corrections();
        try {
            CostProfile profile = estimate_profile(station, weighted, flags.min_obs);
            decisions.push_back(optimal_delta(profile, corr, flags.opt, station, next_week));
            profiles.push_back(std::move(profile));
        } catch (const Error& e) {
            decisions.push_back(null_decision(station, next_week, reason_from_error(e)));
        }
    }

    atomic_write_file(fs::path(out_dir) / "decisions.csv", write_decisions_csv(decisions));
    atomic_write_file(fs::path(out_dir) / "profiles.json", write_profiles_json(profiles));
    std::cout << nlohmann::json{{"stations", by_station.size()},
                                {"decisions", decisions.size()},
                                {"profiles", profiles.size()},
                                {"skipped_rows", parsed.diagnostics.size()}}
                     .dump()
              << "\n";
    return kExitOk;
}

int cmd_feedback(const PipelineFlags& flags, const std::string& decisions_path,
                 const std::string& actuals_path, const std::string& profiles_path,
                 const std::string& state_dir_flag) {
    const std::string state_dir = default_state_dir(state_dir_flag);
    if (state_dir.empty())
        raise(errc::bad_input, "--state-dir (or ASYMLIFT_STATE_DIR) is required");

    auto decisions = read_decisions_csv(read_file(decisions_path));
    const auto actuals = load_dataset(actuals_path, flags);
    std::map<std::string, CostProfile> profiles;
    if (!profiles_path.empty()) profiles = read_profiles_json(read_file(profiles_path));

    std::map<std::pair<std::string, long>, const StationWeekRecord*> actual_index;
    for (const auto& rec : actuals.records)
        actual_index[{rec.station_id, rec.week.ordinal()}] = &rec;

    std::sort(decisions.begin(), decisions.end(), [](const auto& a, const auto& b) {
        return a.station_id != b.station_id ? a.station_id < b.station_id : a.week < b.week;
    });

    std::map<std::string, FeedbackState> states;
    std::size_t scored = 0, missing = 0, already = 0;
    for (const auto& decision : decisions) {
        auto it = actual_index.find({decision.station_id, decision.week.ordinal()});
        if (it == actual_index.end()) {
            ++missing;
            std::cerr << "warning: no actuals for " << decision.station_id << " "
                      << decision.week.to_string() << "\n";
            continue;
        }
        auto state_it = states.find(decision.station_id);
        if (state_it == states.end())
            state_it = states
                           .emplace(decision.station_id,
                                    FeedbackState::load_or_init(state_dir, decision.station_id,
                                                                flags.pre.effective_k(),
                                                                flags.feedback_window))
                           .first;
        FeedbackState& state = state_it->second;
        if (!state.ledger().empty() && decision.week <= state.ledger().back().week) {
            // Re-submitted week: the ledger entry already reflects it.
            ++already;
            continue;
        }

        const RealizedWeek realized = realize(*it->second, flags.pre);
        RealizedOutcome outcome;
        const auto profile_it = profiles.find(decision.station_id);
        if (decision.actionable() && profile_it != profiles.end()) {
            // The state has not seen this week yet, so its corrections are
            // exactly what the deployed decision used.
            const CorrectionTerms used = state.corrections();
            const double est = state.prospective_calib_mean(realized.obs_err());
            outcome = decompose_error(decision, profile_it->second, used, realized, est,
                                      flags.opt.quad);
        } else {
            outcome.station_id = decision.station_id;
            outcome.week = decision.week;
            outcome.obs_err = realized.obs_err();
        }
        state.update(outcome);
        ++scored;
    }

    nlohmann::json corrections = nlohmann::json::object();
    for (auto& [station, state] : states) {
        state.save(state_dir);
        const CorrectionTerms corr = state.corrections();
        corrections[station] = {{"calib_mean", corr.calib_mean},
                                {"cpp_l_bar", corr.cpp_l_bar},
                                {"cpp_h_bar", corr.cpp_h_bar}};
    }
    std::cout << nlohmann::json{{"scored", scored},
                                {"missing_actuals", missing},
                                {"already_ingested", already},
                                {"stations", states.size()},
                                {"corrections", corrections}}
                     .dump()
              << "\n";
    return kExitOk;
}

int cmd_backtest(const PipelineFlags& flags, const std::string& input, const std::string& out_path,
                 bool grid, const std::string& csv_path, int min_train, bool no_feedback) {
    const auto parsed = load_dataset(input, flags);

    BacktestConfig config;
    config.pre = flags.pre;
    config.opt = flags.opt;
    config.min_obs = flags.min_obs;
    config.min_train_weeks = min_train;
    config.feedback_window = flags.feedback_window;
    config.use_feedback = !no_feedback;
    config.jobs = flags.jobs;

    nlohmann::json out;
    if (grid) {
        const auto reports = ablation_grid(parsed.records, config);
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& r : reports) cells.push_back(report_to_json(r));
        out = nlohmann::json{{"cells", std::move(cells)}};
        if (!csv_path.empty()) atomic_write_file(csv_path, grid_to_csv(reports));
        for (const auto& r : reports)
            std::cout << (r.time_weighting ? "TW=Y " : "TW=N ")
                      << (r.noise_reduction ? "NR=Y" : "NR=N")
                      << "  cost_generated=" << format_double(r.total_cost_generated)
                      << "  avg_utilization=" << format_double(r.avg_utilization) << "\n";
    } else {
        const auto report = run_backtest(parsed.records, config);
        out = report_to_json(report);
        std::cout << "cost_generated=" << format_double(report.total_cost_generated)
                  << "  max_achievable=" << format_double(report.max_achievable_savings)
                  << "  capture_ratio=" << format_double(report.capture_ratio)
                  << "  avg_utilization=" << format_double(report.avg_utilization) << "\n";
    }
    if (!out_path.empty()) atomic_write_file(out_path, out.dump(2) + "\n");
    return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out_path) {
    const auto spec = ScenarioSpec::from_json(nlohmann::json::parse(read_file(spec_path)));
    atomic_write_file(out_path, generate_csv(spec));
    std::cout << nlohmann::json{{"stations", spec.n_stations},
                                {"weeks", spec.n_weeks},
                                {"rows", spec.n_stations * spec.n_weeks},
                                {"out", out_path}}
                     .dump()
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cost-optimal forecast adjustments from asymmetric regret costs"};
    app.require_subcommand(1);

    PipelineFlags adjust_flags, feedback_flags, backtest_flags;

    auto* adjust = app.add_subcommand("adjust", "Fit profiles and emit adjustment decisions");
    std::string adjust_input, adjust_out_dir = ".", adjust_state_dir;
    adjust->add_option("--input", adjust_input, "Station-week CSV")->required();
    adjust->add_option("--out-dir", adjust_out_dir, "Output directory")->default_val(".");
    adjust->add_option("--state-dir", adjust_state_dir,
                       "Feedback state directory (default $ASYMLIFT_STATE_DIR)");
    adjust_flags.attach(adjust);

    auto* feedback = app.add_subcommand("feedback", "Score decisions against actuals");
    std::string fb_decisions, fb_actuals, fb_profiles, fb_state_dir;
    feedback->add_option("--decisions", fb_decisions, "decisions.csv from adjust")->required();
    feedback->add_option("--actuals", fb_actuals, "Realized station-week CSV")->required();
    feedback->add_option("--profiles", fb_profiles, "profiles.json from adjust");
    feedback->add_option("--state-dir", fb_state_dir,
                         "Feedback state directory (default $ASYMLIFT_STATE_DIR)");
    feedback_flags.attach(feedback);

    auto* backtest = app.add_subcommand("backtest", "Walk-forward historical replay");
    std::string bt_input, bt_out, bt_csv;
    bool bt_grid = false, bt_no_feedback = false;
    int bt_min_train = 8;
    backtest->add_option("--input", bt_input, "Station-week CSV")->required();
    backtest->add_option("--out", bt_out, "Report JSON path");
    backtest->add_flag("--grid", bt_grid,
                       "Run the 2x2 time-weighting x noise-reduction grid "
                       "(modulation disabled to isolate data processing)");
    backtest->add_option("--csv", bt_csv, "Also write a table-shaped grid CSV");
    backtest->add_option("--min-train", bt_min_train, "Minimum training weeks")->default_val(8);
    backtest->add_flag("--no-feedback", bt_no_feedback, "Disable feedback modulation");
    backtest_flags.attach(backtest);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic fleet dataset");
    std::string synth_spec, synth_out;
    synth->add_option("--spec", synth_spec, "Scenario spec JSON")->required();
    synth->add_option("--out", synth_out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        report_error("usage", e.what());
        return kExitUsage;
    }

    try {
        if (*adjust) return cmd_adjust(adjust_flags, adjust_input, adjust_out_dir, adjust_state_dir);
        if (*feedback)
            return cmd_feedback(feedback_flags, fb_decisions, fb_actuals, fb_profiles, fb_state_dir);
        if (*backtest)
            return cmd_backtest(backtest_flags, bt_input, bt_out, bt_grid, bt_csv, bt_min_train,
                                bt_no_feedback);
        if (*synth) return cmd_synth(synth_spec, synth_out);
    } catch (const Error& e) {
        report_error(errc_name(e.code()), e.what());
        return exit_code_for(e);
    } catch (const nlohmann::json::exception& e) {
        report_error("bad_input", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        report_error("internal", e.what());
        return kExitComputation;
    }
    return kExitUsage;
}
