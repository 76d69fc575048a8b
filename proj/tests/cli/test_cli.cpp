#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "storecycle/calibration.hpp"
#include "storecycle/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace storecycle;

namespace {

const fs::path kConfigs = STORECYCLE_CONFIG_DIR;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("storecycle_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path write(const std::string& name, const std::string& body) const {
    std::ofstream(path(name)) << body;
    return path(name);
  }

  std::string read(const fs::path& p) const { return io::read_text(p.string()); }

  Outcome run(const std::string& args, const std::string& env = "") const {
    const auto out = path("stdout.txt");
    const auto err = path("stderr.txt");
    const std::string cmd = env + " '" + std::string(STORECYCLE_CLI) + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read(out), read(err)};
  }

  fs::path dir_;
};

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_F(Cli, SimulateStartsWithZeroCashFlow) {
  const auto r = run("simulate " + q(kConfigs / "single_type.json") + " --t-max 100 -o " +
                     q(path("curve.csv")) + " --metrics " + q(path("metrics.json")));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(read(path("curve.csv")));
  const auto table = io::read_table_csv(csv);
  EXPECT_EQ(table.header, (std::vector<std::string>{"t", "N_t", "beta_t", "CF_t"}));
  ASSERT_EQ(table.rows.size(), 101u);
  EXPECT_EQ(table.rows[0][0], 0.0);
  EXPECT_EQ(table.rows[0][3], 0.0);
  for (const auto& row : table.rows) EXPECT_GE(row[3], 0.0);
  const json m = json::parse(read(path("metrics.json")));
  EXPECT_GT(m["metrics"]["theoretical_lifespan"].get<double>(), 0.0);
}

TEST_F(Cli, StoreCLifespan) {
  const auto r = run("simulate " + q(kConfigs / "store_c.json") + " -o " + q(path("c.csv")));
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(r.out);
  EXPECT_NEAR(m["metrics"]["theoretical_lifespan"].get<double>(), 233.0, 0.03 * 233.0);
  EXPECT_EQ(m["metrics"]["multi_peak"], false);
}

TEST_F(Cli, RerunsAreByteIdentical) {
  const std::string cfg = q(kConfigs / "two_types.json");
  ASSERT_EQ(run("simulate " + cfg + " -o " + q(path("a.csv")) + " --metrics " + q(path("a.json"))).code, 0);
  ASSERT_EQ(run("simulate " + cfg + " -o " + q(path("b.csv")) + " --metrics " + q(path("b.json"))).code, 0);
  EXPECT_EQ(read(path("a.csv")), read(path("b.csv")));
  EXPECT_EQ(read(path("a.json")), read(path("b.json")));
  const auto u1 = run("udensity " + cfg + " --mc --samples 20000 --seed 4");
  const auto u2 = run("udensity " + cfg + " --mc --samples 20000 --seed 4");
  ASSERT_EQ(u1.code, 0) << u1.err;
  EXPECT_EQ(u1.out, u2.out);
}

TEST_F(Cli, EquilibriumReportsResidualsAndLifespans) {
  const auto r = run("equilibrium " + q(kConfigs / "two_types.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  ASSERT_EQ(doc["residuals"].size(), 2u);
  for (const auto& v : doc["residuals"]) EXPECT_LT(v.get<double>(), 1e-6);
  ASSERT_EQ(doc["investments"].size(), 2u);
  for (const auto& inv : doc["investments"]) EXPECT_GT(inv["lifespan"].get<double>(), 0.0);
}

TEST_F(Cli, DivergenceExitsWithThree) {
  json cfg = json::parse(read(kConfigs / "single_type.json"));
  cfg["options"] = {{"equilibrium", {{"max_iter", 1}, {"max_backward_sweeps", 0}}}};
  const auto r = run("equilibrium " + q(write("diverge.json", cfg.dump())));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("FixedPointDivergence"), std::string::npos) << r.err;
}

TEST_F(Cli, UdensityWithoutCompetitors) {
  const auto r = run("udensity " + q(write("alone.json", R"({"u": 750, "delta": 1.535})")));
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["u_prime"].get<double>(), 750.0);
  EXPECT_NEAR(doc["long_run_flow"].get<double>(), 2.0 * M_PI * 750.0 / (1.535 * 1.535), 1e-9);
}

TEST_F(Cli, UdensityTwinHalves) {
  const auto r = run("udensity " + q(kConfigs / "twin_scene.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_NEAR(doc["u_prime"].get<double>() / doc["u"].get<double>(), 0.5, 0.005);
}

TEST_F(Cli, UdensityCoLocatedEntrantNeverRaisesIt) {
  json scene = json::parse(read(kConfigs / "two_types.json"))["scene"];
  auto u_prime = [&](const json& s) {
    const auto r = run("udensity " + q(write("scene.json", s.dump())));
    EXPECT_EQ(r.code, 0) << r.err;
    return json::parse(r.out)["u_prime"].get<double>();
  };
  double before = u_prime(scene);
  const json existing = scene["competitors"];
  for (const auto& at : existing) {
    json entrant = at;
    entrant["t0"] = at["t0"].get<double>() + 30.0;
    scene["competitors"].push_back(entrant);
    const double after = u_prime(scene);
    EXPECT_LE(after, before * (1.0 + 1e-12));
    before = after;
  }
}

TEST_F(Cli, FitRecoversASyntheticSeries) {
  const auto csv = path("series.csv");
  ASSERT_EQ(run("synthesize --u-prime 3000 --theta 20 --k 0.05 --nu 5e-6 --beta0 0.02 --days 600 -o " +
                q(csv)).code, 0);
  const auto r = run("fit " + q(csv) + " --u-prime 3000 --theta 20 --fitted " + q(path("fitted.csv")));
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["fixed"]["delta"].get<double>(), 1.535);
  EXPECT_NEAR(doc["estimate"]["k"].get<double>() / 0.05, 1.0, 1e-6);
  EXPECT_NEAR(doc["estimate"]["nu"].get<double>() / 5e-6, 1.0, 1e-6);
  EXPECT_NEAR(doc["estimate"]["beta0"].get<double>() / 0.02, 1.0, 1e-6);
  EXPECT_NEAR(doc["scaled"]["nu_x1e6"].get<double>(), 5.0, 5e-6);
  EXPECT_EQ(doc["n_obs"], 600);
  EXPECT_EQ(doc["boundary_estimate"], false);
  std::istringstream fitted(read(path("fitted.csv")));
  const auto table = io::read_table_csv(fitted);
  ASSERT_EQ(table.rows.size(), 600u);
  for (const auto& row : table.rows) EXPECT_NEAR(row[2], row[1], 1e-6 * std::max(1.0, row[1]));
}

TEST_F(Cli, SynthesizedCsvParsesBackLosslessly) {
  const auto csv = path("series.csv");
  ASSERT_EQ(run("synthesize --u-prime 3000 --theta 20 --k 0.05 --nu 5e-6 --beta0 0.02 --days 200 "
                "--sigma 25 --seed 8 -o " + q(csv)).code, 0);
  const auto expected = calibration::simulate_series({1.535, 3000.0, 20.0}, {0.05, 5e-6, 0.02}, 200,
                                                     25.0, 8, calibration::parse_date("2020-01-01"));
  const auto back = calibration::ingest(io::read_cash_flow_csv_file(csv.string()));
  ASSERT_EQ(back.size(), expected.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.observations[i].date, expected.observations[i].date);
    EXPECT_EQ(back.observations[i].value, expected.observations[i].value);
  }
}

TEST_F(Cli, SeedComesFromTheEnvironment) {
  const std::string args = "synthesize --u-prime 3000 --theta 20 --k 0.05 --nu 5e-6 --beta0 0.02 --sigma 25";
  const auto with_env = run(args, "STORECYCLE_SEED=31");
  const auto with_flag = run(args + " --seed 31");
  const auto other = run(args, "STORECYCLE_SEED=32");
  ASSERT_EQ(with_env.code, 0) << with_env.err;
  EXPECT_EQ(with_env.out, with_flag.out);
  EXPECT_NE(with_env.out, other.out);
  EXPECT_EQ(run(args, "STORECYCLE_SEED=abc").code, 1);
}

TEST_F(Cli, MalformedDateNamesTheRow) {
  std::string body = "date,cash_flow\n";
  for (int d = 1; d <= 31; ++d) body += "2024-01-" + std::string(d < 10 ? "0" : "") + std::to_string(d) + ",10\n";
  body += "2024-02-3O,10\n";
  const auto r = run("fit " + q(write("bad.csv", body)) + " --u-prime 3000 --theta 20");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("row 33"), std::string::npos) << r.err;
}

TEST_F(Cli, SweepsFollowTheModel) {
  const std::string cfg = q(kConfigs / "store_c.json");
  auto rows = [&](const std::string& axis, const std::string& values) {
    const auto r = run("sweep " + cfg + " --axis " + axis + " --values " + values + " -o " +
                       q(path(axis + ".csv")) + " --metrics " + q(path(axis + ".json")));
    EXPECT_EQ(r.code, 0) << r.err;
    return json::parse(read(path(axis + ".json")))["rows"];
  };
  const auto u = rows("u", "1000,2000,4000");
  for (const auto& row : u) {
    EXPECT_EQ(row["closing_time"], u[0]["closing_time"]);
    EXPECT_NEAR(row["peak_value"].get<double>() / row["value"].get<double>(),
                u[0]["peak_value"].get<double>() / u[0]["value"].get<double>(), 1e-12);
  }
  const auto nu = rows("nu", "1e-5,3e-5,1e-4");
  for (std::size_t i = 1; i < nu.size(); ++i)
    EXPECT_LT(nu[i]["closing_time"].get<double>(), nu[i - 1]["closing_time"].get<double>());
  const auto k = rows("k", "0.01,0.05,0.2");
  for (std::size_t i = 1; i < k.size(); ++i)
    EXPECT_LT(k[i]["peak_time"].get<double>(), k[i - 1]["peak_time"].get<double>());
  std::istringstream csv(read(path("k.csv")));
  const auto table = io::read_table_csv(csv);
  EXPECT_EQ(table.header, (std::vector<std::string>{"value", "t", "cash_flow"}));
  EXPECT_EQ(table.rows.size(), 3u * 201u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("simulate " + q(path("missing.json"))).code, 1);
  EXPECT_EQ(run("simulate").code, 1);
  EXPECT_EQ(run("bogus").code, 1);
  EXPECT_EQ(run("--help").code, 0);
  const auto bad = run("simulate " + q(write("bad.json", R"({"cash_flow": {"u": 1, "k": -1, "theta": 1}})")));
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("cash_flow.k"), std::string::npos) << bad.err;
  const auto flat = write("flat.json", R"({"cash_flow": {"u": 1, "k": 1, "theta": 1, "curve": [{"beta0": 0.1, "nu": 0}]}})");
  const auto r = run("simulate " + q(flat));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("numerical failure"), std::string::npos) << r.err;
  EXPECT_EQ(run("sweep " + q(kConfigs / "store_c.json") + " --axis u --values 1,-2").code, 2);
  EXPECT_EQ(run("sweep " + q(kConfigs / "store_c.json") + " --axis q --values 1").code, 1);
}
