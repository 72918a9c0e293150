#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eattn/cli.hpp"
#include "json.hpp"

namespace eattn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("eattn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path write_config(const std::string& name, const json& j) const {
    std::ofstream(path(name)) << j.dump();
    return path(name);
  }

  static int tool(const std::string& args) {
    const std::string cmd = std::string("\"") + EATTN_TOOL_PATH + "\" " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

  static std::vector<std::string> lines(const fs::path& p) {
    std::vector<std::string> out;
    std::istringstream in(slurp(p));
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }

  fs::path dir_;
};

TEST_F(CliTest, GenIsSeedDeterministic) {
  const auto cfg = write_config("c.json", {{"n", 4}, {"d", 8}, {"seed", 7}, {"heads", 2}});
  const auto other = write_config("o.json", {{"n", 4}, {"d", 8}, {"seed", 8}, {"heads", 2}});
  ASSERT_EQ(tool("--config " + cfg.string() + " --out " + path("a").string() + " gen"), 0);
  ASSERT_EQ(tool("--config " + cfg.string() + " --out " + path("b").string() + " gen"), 0);
  ASSERT_EQ(tool("--config " + other.string() + " --out " + path("c").string() + " gen"), 0);
  for (const char* f : {"X.json", "W_q.json", "W_k.json", "W_v.json", "W_q_h1.json",
                        "W_k_h1.json", "W_v_h1.json"}) {
    EXPECT_EQ(slurp(path("a") / f), slurp(path("b") / f)) << f;
    EXPECT_NE(slurp(path("a") / f), slurp(path("c") / f)) << f;
  }
  const json x = json::parse(slurp(path("a") / "X.json"));
  EXPECT_EQ(x.at("name"), "X");
  EXPECT_EQ(x.at("rows"), 4);
  EXPECT_EQ(x.at("cols"), 8);
  EXPECT_EQ(x.at("data").size(), 32u);
}

TEST_F(CliTest, GenWithoutOutIsUsageError) { EXPECT_EQ(tool("gen"), 2); }

TEST_F(CliTest, RunLinearIsClosedForm) {
  const auto cfg = write_config("c.json", {{"form", "linear"}, {"n", 5}});
  ASSERT_EQ(tool("--config " + cfg.string() + " --out " + path("r.json").string() + " run"), 0);
  const json r = json::parse(slurp(path("r.json")));
  EXPECT_EQ(r.at("heads")[0].at("iters"), 0);
  EXPECT_EQ(r.at("heads")[0].at("converged"), true);
  EXPECT_EQ(r.at("output_shape"), json({5, 4}));
}

TEST_F(CliTest, RunQuadraticFromAvConvergesAtOnce) {
  const auto cfg = write_config("c.json", {{"form", "quadratic"}, {"perturb_sigma", 0.0}});
  ASSERT_EQ(tool("--config " + cfg.string() + " --out " + path("r.json").string() + " run"), 0);
  const json r = json::parse(slurp(path("r.json")));
  EXPECT_EQ(r.at("heads")[0].at("iters"), 0);
  EXPECT_EQ(r.at("heads")[0].at("converged"), true);
}

TEST_F(CliTest, RunPerturbedDescendsAndIsReproducible) {
  const auto cfg = write_config(
      "c.json", {{"form", "quadratic"}, {"perturb_sigma", 0.1}, {"eta", 1.0}, {"heads", 2}});
  const std::string base = "--config " + cfg.string() + " --emit-z --out ";
  ASSERT_EQ(tool(base + path("a.json").string() + " run"), 0);
  ASSERT_EQ(tool(base + path("b.json").string() + " run"), 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  const json r = json::parse(slurp(path("a.json")));
  for (const auto& head : r.at("heads")) {
    EXPECT_LE(head.at("energy_final").get<double>(), head.at("energy_initial").get<double>());
    EXPECT_GT(head.at("iters").get<int>(), 0);
    EXPECT_EQ(head.at("z").at("rows"), 8);
  }
  EXPECT_EQ(r.at("z").at("cols"), 8);
}

TEST_F(CliTest, RunFromGeneratedFilesMatchesInMemory) {
  const auto cfg = write_config("c.json", {{"n", 3}, {"d", 6}, {"seed", 11}});
  const std::string c = "--config " + cfg.string();
  ASSERT_EQ(tool(c + " --out " + path("m").string() + " gen"), 0);
  ASSERT_EQ(tool(c + " --emit-z --out " + path("a.json").string() + " run"), 0);
  ASSERT_EQ(tool(c + " --emit-z --out " + path("b.json").string() + " run --in " +
                 path("m").string()),
            0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  const auto wrong = write_config("w.json", {{"n", 4}, {"d", 6}, {"seed", 11}});
  EXPECT_EQ(tool("--config " + wrong.string() + " --out " + path("x.json").string() +
                 " run --in " + path("m").string()),
            2);
}

TEST_F(CliTest, DivergenceExitCode) {
  const auto cfg = write_config("c.json", {{"form", "quadratic"},
                                           {"perturb_sigma", 0.5},
                                           {"eta", 1e6},
                                           {"backtracking", false},
                                           {"t_max", 200}});
  EXPECT_EQ(tool("--config " + cfg.string() + " --out " + path("r.json").string() + " run"), 3);
}

TEST_F(CliTest, GradcheckAllForms) {
  for (const json& form : {json("linear"), json("quadratic"), json("exponential"),
                           json{{"kind", "polynomial"}, {"p", 3}}}) {
    const auto cfg = write_config("c.json", {{"form", form}, {"n", 5}});
    EXPECT_EQ(tool("--config " + cfg.string() + " --out " + path("g.json").string() +
                   " gradcheck"),
              0)
        << form.dump();
    EXPECT_TRUE(json::parse(slurp(path("g.json"))).at("pass").get<bool>());
  }
  const auto cfg = write_config("c.json", {{"form", "exponential"}});
  EXPECT_EQ(tool("--config " + cfg.string() + " --out " + path("g.json").string() +
                 " gradcheck --tol 1e-15"),
            1);
}

TEST_F(CliTest, StationarityWithAndWithoutRegularizer) {
  const auto cfg = write_config("c.json", {{"form", "quadratic"}});
  const std::string c = "--config " + cfg.string() + " --out " + path("s.json").string();
  EXPECT_EQ(tool(c + " stationarity"), 0);
  EXPECT_EQ(tool(c + " stationarity --omit-regularizer"), 1);
  const json s = json::parse(slurp(path("s.json")));
  EXPECT_EQ(s.at("regularized"), false);
  EXPECT_GT(s.at("grad_norm_at_av").get<double>(), 1e-3);
}

TEST_F(CliTest, TraceRows) {
  const auto at_av = write_config("a.json", {{"form", "quadratic"}});
  ASSERT_EQ(tool("--config " + at_av.string() + " --out " + path("a.csv").string() + " trace"), 0);
  const auto a = lines(path("a.csv"));
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], "iter,energy,grad_norm");

  const auto slow = write_config("b.json", {{"form", "quadratic"},
                                            {"perturb_sigma", 0.5},
                                            {"eta", 1e-4},
                                            {"t_max", 50},
                                            {"grad_tol", 0.0}});
  ASSERT_EQ(tool("--config " + slow.string() + " --out " + path("b.csv").string() + " trace"), 0);
  const auto b = lines(path("b.csv"));
  EXPECT_EQ(b.size(), 52u);
  EXPECT_EQ(b.back().substr(0, 3), "50,");
}

TEST_F(CliTest, SweepOverDegree) {
  const auto cfg = write_config("c.json", {{"perturb_sigma", 0.05}, {"eta", 1.0}});
  ASSERT_EQ(tool("--config " + cfg.string() + " --out " + path("s.csv").string() +
                 " sweep --sweep p=1,2,3"),
            0);
  const auto rows = lines(path("s.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "p,converged,iters,final_grad_norm,wall_time_ms");
  EXPECT_EQ(rows[1].substr(0, 2), "1,");
  EXPECT_EQ(rows[3].substr(0, 2), "3,");
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(tool(""), 2);
  EXPECT_EQ(tool("frobnicate"), 2);
  EXPECT_EQ(tool("sweep --sweep bogus=1,2"), 2);
  EXPECT_EQ(tool("sweep --sweep n=1,x"), 2);
  EXPECT_EQ(tool("sweep"), 2);
  const auto bad = write_config("bad.json", {{"n", 0}});
  EXPECT_EQ(tool("--config " + bad.string() + " run"), 2);
  EXPECT_EQ(tool("--config " + path("missing.json").string() + " run"), 2);
  EXPECT_EQ(tool("--help >/dev/null"), 0);
}

TEST(SweepSpec, Parsing) {
  const auto s = parse_sweep_spec("eta=0.1,1e-2,3");
  EXPECT_EQ(s.param, "eta");
  EXPECT_EQ(s.values, (std::vector<double>{0.1, 1e-2, 3}));
  EXPECT_THROW(parse_sweep_spec("eta"), ConfigError);
  EXPECT_THROW(parse_sweep_spec("=1"), ConfigError);
  EXPECT_THROW(parse_sweep_spec("n=1.5"), ConfigError);
  EXPECT_THROW(parse_sweep_spec("seed=1"), ConfigError);
}

TEST(SweepSpec, WithParameter) {
  EXPECT_EQ(with_parameter(RunConfig{}, "p", 4).form, EnergyForm::polynomial(4));
  EXPECT_EQ(with_parameter(RunConfig{}, "clip_norm", 2).clip_norm, 2.0);
  EXPECT_EQ(with_parameter(RunConfig{}, "n", 32).n, 32);
  EXPECT_THROW(with_parameter(RunConfig{}, "eta", -1), ConfigError);
}

}  // namespace
}  // namespace eattn::cli
