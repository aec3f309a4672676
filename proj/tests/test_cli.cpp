#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

using diamond::Json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "diamond_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = diamond::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("diamond_cli_test_" + name)).string();
}

}  // namespace

TEST(Cli, ReserveFromFlags) {
  const auto r = run({"reserve", "--dist", R"({"degenerate": 0.5})", "--price", "0.2", "--cost", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_NEAR(j["reservation_value"].get<double>(), 0.2, 1e-15);
}

TEST(Cli, ReserveFromSpecFile) {
  const auto path = temp_path("reserve.json");
  std::ofstream(path) << R"({"dist": {"uniform": true}, "price": 0.25, "cost": 0.03125})";
  const auto r = run({"reserve", "--spec", path});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Json::parse(r.out)["reservation_value"].get<double>(), 0.5);
  std::filesystem::remove(path);
}

TEST(Cli, MalformedSpecNamesTheField) {
  const auto r = run({"reserve", "--spec", R"({"dist": {"uniform": true}, "price": 0.2, "cost": "x"})"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("spec.cost"), std::string::npos) << r.err;
}

TEST(Cli, BadJsonIsAnInputError) {
  EXPECT_EQ(run({"simulate", "--spec", "{not json"}).code, 1);
  EXPECT_EQ(run({"simulate"}).code, 1);
  EXPECT_EQ(run({"repro", "nosuchcase"}).code, 1);
}

TEST(Cli, FuseReportsContraction) {
  const auto r = run({"fuse", "--dist", R"({"uniform": true})", "--fusion", R"({"regions": [[0.5, 1.0, 1.0]]})"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_TRUE(j["is_mpc"].get<bool>());
  EXPECT_EQ(j["mean_after"].get<double>(), 0.5);
}

TEST(Cli, EnvelopeBuiltin) {
  const auto r = run({"--grid-step", "0.001", "envelope", "--builtin", "example2", "--prior-mean", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GE(Json::parse(r.out)["envelope_at_prior"].get<double>(), 0.25 - 2e-3);
}

TEST(Cli, ReproPassesAndWritesCsv) {
  const auto csv = temp_path("ex1.csv");
  const auto r = run({"--csv", csv, "repro", "example1"});
  EXPECT_EQ(r.code, 0) << r.err;
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "x,F_tilde,F_hat");
  std::filesystem::remove(csv);
}

TEST(Cli, FailedReproExitsTwo) {
  // A negative tolerance cannot be met by any closed-form check.
  const auto r = run({"--tol", "-1", "repro", "example1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("repro example1"), std::string::npos);
}

TEST(Cli, SimulateIsIdenticalAcrossThreadCounts) {
  const std::string spec =
      R"({"n": 3, "prior": {"uniform": true}, "cost": 0.03125, "regime": "posted", "trials": 20000, "seed": 4,
          "conjecture": {"mixture": [{"weight": 0.5, "price": 0.2, "dist": {"uniform": true}},
                                     {"weight": 0.5, "price": 0.4, "dist": {"degenerate": 0.5}}]}})";
  const auto a = run({"--threads", "1", "simulate", "--spec", spec});
  const auto b = run({"--threads", "4", "simulate", "--spec", spec});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, CheckWritesReport) {
  const std::string spec =
      R"({"n": 2, "prior": {"uniform": true}, "cost": 0.03125, "regime": "hidden",
          "conjecture": {"price": 0.5, "dist": {"degenerate": 0.5}}})";
  const auto out = temp_path("check.json");
  const auto r = run({"--out", out, "check", "--spec", spec, "--classes", "fusion,price"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(out);
  const auto j = Json::parse(in);
  EXPECT_TRUE(j["report"]["certified"].get<bool>());
  EXPECT_EQ(j["report"]["verdicts"].size(), 2u);
  std::filesystem::remove(out);
}

TEST(Cli, UnknownClassIsRejected) {
  const auto r = run({"check", "--spec", R"({"conjecture": {"price": 0.5, "dist": {"degenerate": 0.5}}})",
                      "--classes", "bogus"});
  EXPECT_EQ(r.code, 1);
}
