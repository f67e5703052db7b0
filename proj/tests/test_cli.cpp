#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "asymlift/asymlift.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using namespace asymlift;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir, const std::string& env = "") {
    const fs::path out_file = dir / "stdout.txt";
    const fs::path err_file = dir / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + ASYMLIFT_CLI_PATH + " " + args +
                            " >" + out_file.string() + " 2>" + err_file.string();
    const int raw = std::system(cmd.c_str());
    CliResult result;
    result.code = WEXITSTATUS(raw);
    result.out = read_file(out_file);
    result.err = read_file(err_file);
    return result;
}

void write(const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    f << content;
}

// Five weeks, phi = 0, mixed error signs; easy to push through the math by
// hand once weighting and noise reduction are switched off.
const char* kFixture5 =
    "station_id,week,observed_demand,wk1_forecast,d1_forecast,cost_h_raw,cost_l_raw\n"
    "S1,2024-W01,1100,1000,1000,200,0\n"
    "S1,2024-W02,1050,1000,1000,150,0\n"
    "S1,2024-W03,900,1000,1000,0,50\n"
    "S1,2024-W04,950,1000,1000,0,100\n"
    "S1,2024-W05,1025,1000,1000,100,0\n";

}  // namespace

TEST_CASE("cli: missing input exits 2 with machine-readable error") {
    testutil::TempDir dir("cli_missing");
    const auto r = run_cli("adjust --input " + (dir.path() / "nope.csv").string(), dir.path());
    CHECK(r.code == 2);
    const auto j = nlohmann::json::parse(r.err.substr(0, r.err.find('\n')));
    CHECK(j.at("error").at("code") == "io_failure");
}

TEST_CASE("cli: unknown flag exits 2") {
    testutil::TempDir dir("cli_badflag");
    const auto r = run_cli("adjust --bogus 3", dir.path());
    CHECK(r.code == 2);
}

TEST_CASE("cli: adjust on the hand fixture matches the unweighted pipeline") {
    testutil::TempDir dir("cli_fixture");
    write(dir.path() / "data.csv", kFixture5);

    const auto r = run_cli("adjust --input " + (dir.path() / "data.csv").string() + " --out-dir " +
                               dir.path().string() +
                               " --no-time-weighting --no-noise-reduction --min-obs 2",
                           dir.path());
    REQUIRE(r.code == 0);

    const auto decisions = read_decisions_csv(read_file(dir.path() / "decisions.csv"));
    REQUIRE(decisions.size() == 1);
    const auto& d = decisions[0];
    CHECK(d.station_id == "S1");
    CHECK(d.week == (WeekKey{2024, 6}));
    REQUIRE(d.actionable());

    // Hand-computed estimates: CPP_H = 450/175, CPP_L = 150/150, sigma from
    // the n-1 sample over {100, 50, -100, -50, 25}.
    const double cpp_h = 450.0 / 175.0;
    const double cpp_l = 1.0;
    const double sigma = std::sqrt(25500.0 / 4.0);
    const double want = sigma * normal_quantile(cpp_h / (cpp_h + cpp_l));
    CHECK(d.delta_star == Catch::Approx(want).margin(1e-3 * sigma));
    CHECK(d.p_l_star == Catch::Approx(cpp_h / (cpp_h + cpp_l)).margin(1e-12));

    const auto profiles = read_profiles_json(read_file(dir.path() / "profiles.json"));
    REQUIRE(profiles.count("S1") == 1);
    CHECK(profiles.at("S1").cpp_h_hat == Catch::Approx(cpp_h).epsilon(1e-12));
    CHECK(profiles.at("S1").cpp_l_hat == Catch::Approx(cpp_l).epsilon(1e-12));
    CHECK(profiles.at("S1").sigma == Catch::Approx(sigma).epsilon(1e-12));
    CHECK(profiles.at("S1").n_h_obs == 3);
    CHECK(profiles.at("S1").n_l_obs == 2);
}

TEST_CASE("cli: adjust outputs are byte-identical across runs") {
    testutil::TempDir dir("cli_determinism");
    ScenarioSpec spec;
    spec.n_stations = 3;
    spec.n_weeks = 30;
    spec.seed = 99;
    write(dir.path() / "data.csv", generate_csv(spec));

    fs::create_directories(dir.path() / "a");
    fs::create_directories(dir.path() / "b");
    const std::string base = "adjust --input " + (dir.path() / "data.csv").string();
    REQUIRE(run_cli(base + " --out-dir " + (dir.path() / "a").string(), dir.path()).code == 0);
    REQUIRE(run_cli(base + " --out-dir " + (dir.path() / "b").string(), dir.path()).code == 0);
    CHECK(read_file(dir.path() / "a" / "decisions.csv") ==
          read_file(dir.path() / "b" / "decisions.csv"));
    CHECK(read_file(dir.path() / "a" / "profiles.json") ==
          read_file(dir.path() / "b" / "profiles.json"));
}

TEST_CASE("cli: synth then adjust then feedback round trip") {
    testutil::TempDir dir("cli_roundtrip");
    ScenarioSpec spec;
    spec.n_stations = 2;
    spec.n_weeks = 40;
    spec.calib_bias = 60.0;
    spec.seed = 42;
    write(dir.path() / "spec.json", spec.to_json().dump());

    auto r = run_cli("synth --spec " + (dir.path() / "spec.json").string() + " --out " +
                         (dir.path() / "fleet.csv").string(),
                     dir.path());
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out).at("rows") == 80);

    // Adjust on the first 39 weeks; week 40 becomes the actuals.
    const auto all = parse_dataset_string(read_file(dir.path() / "fleet.csv")).records;
    std::vector<StationWeekRecord> history, actuals;
    for (const auto& rec : all)
        (rec.week < WeekKey{2024, 40} ? history : actuals).push_back(rec);
    REQUIRE(actuals.size() == 2);
    write(dir.path() / "history.csv", write_dataset_csv(history));
    write(dir.path() / "actuals.csv", write_dataset_csv(actuals));

    const std::string state_dir = (dir.path() / "state").string();
    r = run_cli("adjust --input " + (dir.path() / "history.csv").string() + " --out-dir " +
                    dir.path().string() + " --state-dir " + state_dir,
                dir.path());
    REQUIRE(r.code == 0);
    const auto decisions = read_decisions_csv(read_file(dir.path() / "decisions.csv"));
    REQUIRE(decisions.size() == 2);
    for (const auto& d : decisions) {
        REQUIRE(d.actionable());
        CHECK(d.week == (WeekKey{2024, 40}));
        CHECK(d.expected_cost_at_delta <= d.expected_cost_at_zero);
    }

    r = run_cli("feedback --decisions " + (dir.path() / "decisions.csv").string() + " --actuals " +
                    (dir.path() / "actuals.csv").string() + " --profiles " +
                    (dir.path() / "profiles.json").string() + " --state-dir " + state_dir,
                dir.path());
    REQUIRE(r.code == 0);
    auto summary = nlohmann::json::parse(r.out);
    CHECK(summary.at("scored") == 2);
    CHECK(summary.at("missing_actuals") == 0);

    const fs::path state_file = fs::path(state_dir) / "S1.json";
    REQUIRE(fs::exists(state_file));
    const auto state = FeedbackState::load_or_init(state_dir, "S1");
    REQUIRE(state.ledger().size() == 1);
    CHECK(std::isfinite(state.corrections().calib_mean));

    // Re-running the same feedback is a no-op on the stored state.
    const std::string before = read_file(state_file);
    r = run_cli("feedback --decisions " + (dir.path() / "decisions.csv").string() + " --actuals " +
                    (dir.path() / "actuals.csv").string() + " --profiles " +
                    (dir.path() / "profiles.json").string() + " --state-dir " + state_dir,
                dir.path());
    REQUIRE(r.code == 0);
    summary = nlohmann::json::parse(r.out);
    CHECK(summary.at("already_ingested") == 2);
    CHECK(read_file(state_file) == before);
}

TEST_CASE("cli: state dir can come from the environment") {
    testutil::TempDir dir("cli_env");
    write(dir.path() / "data.csv", kFixture5);
    const std::string state_dir = (dir.path() / "envstate").string();
    fs::create_directories(state_dir);

    const auto r = run_cli("adjust --input " + (dir.path() / "data.csv").string() + " --out-dir " +
                               dir.path().string() + " --min-obs 2 --no-time-weighting",
                           dir.path(), "ASYMLIFT_STATE_DIR=" + state_dir);
    CHECK(r.code == 0);  // empty state dir: zero corrections, still succeeds
}

TEST_CASE("cli: backtest grid emits four cells and a table csv") {
    testutil::TempDir dir("cli_grid");
    ScenarioSpec spec;
    spec.n_stations = 2;
    spec.n_weeks = 24;
    spec.seed = 7;
    write(dir.path() / "data.csv", generate_csv(spec));

    const auto r = run_cli("backtest --input " + (dir.path() / "data.csv").string() + " --grid" +
                               " --out " + (dir.path() / "report.json").string() + " --csv " +
                               (dir.path() / "table.csv").string(),
                           dir.path());
    REQUIRE(r.code == 0);

    const auto report = nlohmann::json::parse(read_file(dir.path() / "report.json"));
    REQUIRE(report.at("cells").size() == 4);
    CHECK(report["cells"][0]["cell"]["time_weighting"] == true);
    CHECK(report["cells"][3]["cell"]["noise_reduction"] == false);

    const std::string table = read_file(dir.path() / "table.csv");
    CHECK(table.find("time_weighting,noise_reduction") == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);
}

TEST_CASE("cli: single backtest writes a report with capture ratio") {
    testutil::TempDir dir("cli_bt");
    ScenarioSpec spec;
    spec.n_stations = 2;
    spec.n_weeks = 30;
    spec.seed = 3;
    write(dir.path() / "data.csv", generate_csv(spec));

    const auto r = run_cli("backtest --input " + (dir.path() / "data.csv").string() + " --out " +
                               (dir.path() / "report.json").string(),
                           dir.path());
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(read_file(dir.path() / "report.json"));
    CHECK(report.at("capture_ratio").get<double>() <= 1.0);
    CHECK(report.at("per_station").size() == 2);
}
