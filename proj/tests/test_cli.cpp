#include <catch2/catch_amalgamated.hpp>

#include "opl/cli.hpp"
#include "test_util.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace {

std::string out_dir(const std::string& name) {
    const auto dir = test_util::temp_dir("cli") / name;
    fs::remove_all(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("simulate is reproducible byte for byte", "[cli]") {
    const std::string dir_a = out_dir("sim_a");
    const std::string dir_b = out_dir("sim_b");
    REQUIRE(opl::cli::run({"simulate", "--seed", "7", "--n", "200", "--output-dir", dir_a}) == 0);
    REQUIRE(opl::cli::run({"simulate", "--seed", "7", "--n", "200", "--output-dir", dir_b}) == 0);
    REQUIRE(test_util::read_file(dir_a + "/dataset.csv") == test_util::read_file(dir_b + "/dataset.csv"));

    const std::string dir_c = out_dir("sim_c");
    REQUIRE(opl::cli::run({"simulate", "--seed", "8", "--n", "200", "--output-dir", dir_c}) == 0);
    REQUIRE(test_util::read_file(dir_a + "/dataset.csv") != test_util::read_file(dir_c + "/dataset.csv"));
}

TEST_CASE("a run is reproducible from its manifest alone", "[cli]") {
    const std::string dir_a = out_dir("man_a");
    REQUIRE(opl::cli::run({"simulate", "--seed", "19", "--n", "150", "--p", "4", "--noise-sd", "0.5",
                           "--output-dir", dir_a}) == 0);
    const std::string manifest = dir_a + "/manifest.txt";
    REQUIRE(fs::exists(manifest));

    const std::string dir_b = out_dir("man_b");
    REQUIRE(opl::cli::run({"simulate", "--config", manifest, "--output-dir", dir_b}) == 0);
    REQUIRE(test_util::read_file(dir_a + "/dataset.csv") == test_util::read_file(dir_b + "/dataset.csv"));
}

TEST_CASE("evaluate with estimator=all writes one row per estimator", "[cli]") {
    const std::string sim_dir = out_dir("eval_sim");
    REQUIRE(opl::cli::run({"simulate", "--seed", "3", "--n", "400", "--output-dir", sim_dir}) == 0);
    const std::string data = sim_dir + "/dataset.csv";

    const std::string search_dir = out_dir("eval_search");
    REQUIRE(opl::cli::run({"search", "--input", data, "--grid", "-0.6:0.3:0.6", "--estimator", "dr",
                           "--output-dir", search_dir}) == 0);
    REQUIRE(fs::exists(search_dir + "/policy.txt"));
    REQUIRE(fs::exists(search_dir + "/value_surface.csv"));

    const std::string eval_dir = out_dir("eval_out");
    REQUIRE(opl::cli::run({"evaluate", "--input", data, "--policy", search_dir + "/policy.txt", "--estimator",
                           "all", "--output-dir", eval_dir}) == 0);
    const std::string values = test_util::read_file(eval_dir + "/values.csv");
    REQUIRE(values.find("ra,") != std::string::npos);
    REQUIRE(values.find("ipw,") != std::string::npos);
    REQUIRE(values.find("dr,") != std::string::npos);

    // inputs are never mutated
    const std::string before = test_util::read_file(data);
    REQUIRE(opl::cli::run({"evaluate", "--input", data, "--estimator", "ra", "--output-dir",
                           out_dir("eval_obs")}) == 0);
    REQUIRE(test_util::read_file(data) == before);
}

TEST_CASE("risk sweep formats the three preference blocks", "[cli]") {
    const std::string dir = out_dir("risk");
    REQUIRE(opl::cli::run({"risk-sweep", "--input", test_util::jtrain2_path(), "--reward-col", "re78",
                           "--subsample", "50", "--seed", "4", "--ridge", "0.01", "--output-dir", dir}) == 0);
    const std::string table = test_util::read_file(dir + "/risk_sweep.csv");
    REQUIRE(table.find("regime,match_rate,regret_ra,regret_ipw,regret_dr") != std::string::npos);
    REQUIRE(table.find("neutral,") != std::string::npos);
    REQUIRE(table.find("linear,") != std::string::npos);
    REQUIRE(table.find("quadratic,") != std::string::npos);
}

TEST_CASE("online replay writes a trajectory", "[cli]") {
    const std::string dir = out_dir("online");
    REQUIRE(opl::cli::run({"online", "--input", test_util::jtrain2_path(), "--reward-col", "re78",
                           "--warm-count", "400", "--ridge", "0.01", "--update-mode", "refit-every",
                           "--refit-every", "5", "--output-dir", dir}) == 0);
    const std::string trajectory = test_util::read_file(dir + "/trajectory.csv");
    REQUIRE(trajectory.find("round,x_hash,chosen_arm,recorded_arm,match,predicted_reward,reward,imputed") !=
            std::string::npos);
    REQUIRE(fs::exists(dir + "/online_summary.txt"));
}

TEST_CASE("diagnose runs the overlap report", "[cli]") {
    const std::string sim_dir = out_dir("diag_sim");
    REQUIRE(opl::cli::run({"simulate", "--seed", "5", "--n", "500", "--output-dir", sim_dir}) == 0);
    const std::string dir = out_dir("diag");
    REQUIRE(opl::cli::run({"diagnose", "--input", sim_dir + "/dataset.csv", "--output-dir", dir}) == 0);
    REQUIRE(fs::exists(dir + "/overlap.csv"));
    REQUIRE(fs::exists(dir + "/coverage.csv"));
}

TEST_CASE("usage errors exit with code 2 and runtime errors with 1", "[cli]") {
    REQUIRE(opl::cli::run({"evaluate", "--no-such-flag"}) == 2);
    REQUIRE(opl::cli::run({"unknown-subcommand"}) == 2);
    REQUIRE(opl::cli::run({}) == 2);
    REQUIRE(opl::cli::run({"--help"}) == 0);
    // a missing input file parses fine but fails at runtime
    REQUIRE(opl::cli::run({"evaluate", "--input", "/nonexistent/data.csv", "--output-dir", out_dir("err")}) == 1);
}
