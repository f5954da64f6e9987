#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "fluidmc/cli.hpp"
#include "fluidmc/error.hpp"
#include "fluidmc/io.hpp"
#include "fluidmc/plot.hpp"
#include "test_common.hpp"

namespace fluidmc {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fluidmc-cli-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }
  fs::path file(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    write_text_file(p, text);
    return p;
  }
  std::string model(const std::string& name) const { return (test::models_dir() / (name + ".fmc")).string(); }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(Cli, FluidWritesCsv) {
  ASSERT_EQ(run({"fluid", model("two_state"), "--tmax", "1", "--grid", "0.5"}), kExitOk) << err_.str();
  const auto t = parse_csv(out_.str());
  EXPECT_EQ(t.header, (std::vector<std::string>{"t", "x_on", "x_off"}));
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_NEAR(t.numeric(1)[2], (1 + std::exp(-2.0)) / 2, 1e-8);
}

TEST_F(Cli, CheckExitCodes) {
  const auto ok = file("ok.csl", "P>=0.5 [ X[0,1] at_off ]\nR{occ}=? [ I=1 ]\n");
  EXPECT_EQ(run({"check", model("two_state"), ok.string(), "--s0", "on"}), kExitOk) << err_.str();
  const auto t = parse_csv(out_.str());
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_NE(out_.str().find("formula,kind,s0,T,value"), std::string::npos);

  const auto tie = file("tie.csl", "P>=0.6321205588 [ X[0,1] at_off ]\n");
  EXPECT_EQ(run({"check", model("two_state"), tie.string(), "--s0", "on"}), kExitIndeterminate);

  const auto bad = file("bad.csl", "P>=0.5 [ X[0,1] at_nowhere ]\n");
  EXPECT_EQ(run({"check", model("two_state"), bad.string(), "--s0", "on"}), kExitInputError);
  EXPECT_NE(err_.str().find("UnknownIdentifier"), std::string::npos);

  EXPECT_EQ(run({"check", model("two_state"), ok.string(), "--s0", "nowhere"}), kExitInputError);
  EXPECT_EQ(run({"check", (dir_ / "missing.fmc").string(), ok.string()}), kExitInputError);
  EXPECT_EQ(run({"frobnicate"}), kExitInputError);
}

TEST_F(Cli, MixedInitialDensities) {
  const auto m = file("mixed.fmc",
                      "model mixed\nstates on, off\ntransition a { rule on -> off; rate x_on }\n"
                      "transition b { rule off -> on; rate x_off }\ninit x_on = 0.25\ninit x_off = 0.75\n"
                      "reward occ { state on = 1 }\n");
  const auto f = file("occ.csl", "R{occ}=? [ I=0 ]\n");
  ASSERT_EQ(run({"check", m.string(), f.string()}), kExitOk) << err_.str();
  const auto t = parse_csv(out_.str());
  EXPECT_EQ(t.rows[0][t.column("s0")], "init");
  EXPECT_NEAR(t.numeric(t.column("value"))[0], 0.25, 1e-12);
  EXPECT_EQ(run({"compare", m.string(), f.string(), "--runs", "10"}), kExitInputError);
}

TEST_F(Cli, NumericFailureExitCode) {
  const auto m = file("neg.fmc",
                      "model neg\nstates a, b\ntransition t { rule a -> b; rate x_a - 0.5 }\ninit x_a = 0.2\n"
                      "init x_b = 0.8\n");
  EXPECT_EQ(run({"fluid", m.string(), "--tmax", "1"}), kExitNumericError);
}

TEST_F(Cli, SignalFilesForBooleanFormulas) {
  const auto f = file("sig.csl", "P>=0.19 [ !at_d U[0,50] at_d ]\n");
  const auto out = dir_ / "res.csv";
  ASSERT_EQ(run({"check", model("bike"), f.string(), "--s0", "a", "--twin", "100", "--out", out.string()}), kExitOk)
      << err_.str();
  const auto sig = dir_ / "res.signal1.csv";
  ASSERT_TRUE(fs::exists(sig));
  const auto text = read_text_file(sig);
  EXPECT_NE(text.find("# crossing,48.23"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "res.csv.manifest.json"));
}

TEST_F(Cli, SimulateIsDeterministic) {
  const std::vector<std::string> args{"simulate", model("sir"), "--N", "30", "--runs", "40",
                                      "--seed", "5",  "--tmax", "3",  "--grid", "1"};
  ASSERT_EQ(run(args), kExitOk) << err_.str();
  const std::string first = out_.str();
  ASSERT_EQ(run(args), kExitOk);
  EXPECT_EQ(first, out_.str());
}

TEST_F(Cli, ManifestRecordsInputsAndHashes) {
  const auto out = dir_ / "fluid.csv";
  ASSERT_EQ(run({"fluid", model("two_state"), "--tmax", "1", "--out", out.string()}), kExitOk);
  const auto manifest = read_text_file(dir_ / "fluid.csv.manifest.json");
  const auto text = read_text_file(model("two_state"));
  EXPECT_NE(manifest.find("\"command\""), std::string::npos);
  EXPECT_NE(manifest.find(hex64(fnv1a64(text))), std::string::npos);
}

TEST_F(Cli, CompareAllZeroReward) {
  const auto f = file("zero.csl", "R{zero}=? [ C<=2 ]\n");
  const auto summary = dir_ / "summary.csv";
  ASSERT_EQ(run({"compare", model("two_state"), f.string(), "--s0", "on", "--N", "10", "--runs", "50", "--grid",
                 "1", "--summary", summary.string()}),
            kExitOk)
      << err_.str();
  const auto t = read_csv(summary);
  EXPECT_EQ(t.numeric(t.column("max_err"))[0], 0.0);
  EXPECT_EQ(t.numeric(t.column("rel_err_final"))[0], 0.0);
}

TEST_F(Cli, SteadyCommand) {
  ASSERT_EQ(run({"steady", model("two_state_asym")}), kExitOk) << err_.str();
  const auto t = parse_csv(out_.str());
  EXPECT_EQ(t.header, (std::vector<std::string>{"state", "x_star", "pi_star"}));
  EXPECT_NEAR(t.numeric(1)[0], 1.0 / 3.0, 1e-9);
}

TEST_F(Cli, PlotRejectsEmptyCsv) {
  const auto empty = file("empty.csv", "");
  EXPECT_EQ(run({"plot", empty.string(), "--out", (dir_ / "p.svg").string()}), kExitInputError);
  const auto csv = file("ok.csv", "t,a,ci_a\n0,1,0.1\n1,2,0.1\n");
  const auto svg = dir_ / "p.svg";
  ASSERT_EQ(run({"plot", csv.string(), "--out", svg.string()}), kExitOk) << err_.str();
  const auto text = read_text_file(svg);
  EXPECT_EQ(text.rfind("<svg", 0), 0u);
  EXPECT_EQ(text.find("ci_a"), std::string::npos);
}

TEST_F(Cli, Validate) {
  EXPECT_EQ(run({"validate", model("bike")}), kExitOk) << err_.str();
  const auto m = file("neg.fmc", "model neg\nstates a, b\ntransition t { rule a -> b; rate x_a - 0.5 }\ninit x_a = 1\n");
  EXPECT_EQ(run({"validate", m.string()}), kExitInputError);
}

TEST(Io, FormatNumber) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333");
  EXPECT_EQ(format_number(1e-20), "1e-20");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Io, CsvFieldQuoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Io, Fnv1a) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(hex64(0xabcull), "0000000000000abc");
}

TEST(Io, ParseCsv) {
  const auto t = parse_csv("# note\nt,x\n\n0,1\n1,2.5\n");
  EXPECT_EQ(t.column("x"), 1u);
  EXPECT_EQ(t.numeric(1), (std::vector<double>{1.0, 2.5}));
  EXPECT_THROW(t.column("y"), UnknownIdentifier);
  EXPECT_THROW(parse_csv(""), InputError);
  EXPECT_THROW(parse_csv("# only\n"), InputError);
  EXPECT_THROW(parse_csv("a,b\n1\n"), InputError);
}

TEST(Plot, DeterministicSvg) {
  const std::vector<PlotSeries> s{{"a", {0, 1, 2}, {0, 1, 4}, false}, {"b", {0, 1, 2}, {1, 1, 1}, true}};
  const auto one = render_line_chart(s, "title", "t", "y");
  EXPECT_EQ(one, render_line_chart(s, "title", "t", "y"));
  EXPECT_NE(one.find("</svg>"), std::string::npos);
  EXPECT_NE(one.find("stroke-dasharray"), std::string::npos);
}

}  // namespace
}  // namespace fluidmc
