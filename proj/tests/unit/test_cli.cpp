#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "affect_sdt/commands.hpp"
#include "affect_sdt/error.hpp"
#include "support.hpp"

using namespace affect_sdt;
using affect_sdt::test::fixture;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("affect_sdt_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig toy_config(const fs::path& out) {
  auto c = load_run_config(fixture("toy_config.json"));
  c.out = out.string();
  c.cache = false;
  return c;
}

}  // namespace

TEST(RunConfig, ParsesAndResolvesPaths) {
  const auto c = load_run_config(fixture("toy_config.json"));
  EXPECT_EQ(c.data, fixture("toy_trials.csv"));
  ASSERT_EQ(c.embeddings.size(), 2u);
  EXPECT_EQ(c.embeddings[0].kind, ProviderKind::HiddenStates);  // "tf" sorts first
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.permutations, 500u);
  EXPECT_FALSE(c.grid.empty());
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_run_config(R"({"seeed": 1})", ""), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"tails": "left"})", ""), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": -1})", ""), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"stages": [4]})", ""), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"embeddings": {"x": {"path": "a", "kind": "bert"}}})", ""),
               ConfigError);
  EXPECT_THROW(parse_run_config("{", ""), ConfigError);
  const auto c = parse_run_config(R"({"stages": ["all", 2], "tails": "two",
                                      "whitening_scope": "outer", "paper_faithful": true})", "");
  EXPECT_EQ(c.stages, (std::vector<int>{0, 2}));
  EXPECT_TRUE(c.two_tailed);
  EXPECT_EQ(c.whitening_scope(), WhiteningScope::All);
}

TEST(RunConfig, FlagsOverrideFile) {
  ConfigOverrides o;
  o.config = fixture("toy_config.json");
  o.seed = 99;
  o.jobs = 3;
  o.data = "other.csv";
  const auto c = resolve_config(o);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.jobs, 3u);
  EXPECT_EQ(c.data, "other.csv");
  EXPECT_EQ(c.permutations, 500u);
}

TEST(ExitCodes, MapErrorKinds) {
  EXPECT_EQ(exit_code_for(ParseError("x")), kExitValidation);
  EXPECT_EQ(exit_code_for(ValidationError("x", {})), kExitValidation);
  EXPECT_EQ(exit_code_for(ConfigError("x")), kExitConfig);
  EXPECT_EQ(exit_code_for(DegenerateError("x")), kExitCompute);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), kExitCompute);
}

TEST(Commands, Validate) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(fixture("toy_trials.csv"), out, err), kExitOk);
  EXPECT_NE(out.str().find("36 trials"), std::string::npos);
  EXPECT_EQ(cmd_validate(fixture("invalid_rating.csv"), out, err), kExitValidation);
  EXPECT_NE(err.str().find("row 4"), std::string::npos);
  EXPECT_EQ(cmd_validate(fixture("missing.csv"), out, err), kExitConfig);
}

TEST(Commands, FitIsByteIdenticalAcrossRuns) {
  const auto a = scratch("fit_a"), b = scratch("fit_b");
  std::ostringstream out, err;
  auto ca = toy_config(a), cb = toy_config(b);
  cb.jobs = 3;
  ASSERT_EQ(cmd_fit(ca, out, err), kExitOk) << err.str();
  ASSERT_EQ(cmd_fit(cb, out, err), kExitOk) << err.str();
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 10u);
  EXPECT_EQ(cmd_fit(ca, out, err), kExitConfig);  // refuses to overwrite
  ca.force = true;
  EXPECT_EQ(cmd_fit(ca, out, err), kExitOk);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Commands, FitRowsCoverStagesFamiliesComponents) {
  const auto a = scratch("fit_rows");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_fit(toy_config(a), out, err), kExitOk);
  const auto csv = slurp(a / "table2.csv");
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  // 4 stages x (4 baselines + Original AA, Original NA, PLM-wv AA, PLM-tf AA)
  EXPECT_EQ(lines, 1 + 4 * 8);
  fs::remove_all(a);
}

TEST(Commands, MissingEmbeddingFailsBeforeCompute) {
  auto c = toy_config(scratch("missing_emb"));
  c.embeddings[0].path = "/nonexistent/vectors.jsonl";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_fit(c, out, err), kExitConfig);
  EXPECT_FALSE(fs::exists(c.out));
}

TEST(Commands, SeedIsRequiredForStochasticCommands) {
  auto c = toy_config(scratch("noseed"));
  c.seed.reset();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_fit(c, out, err), kExitConfig);
  EXPECT_EQ(cmd_analyze(c, "turing", out, err), kExitConfig);
  EXPECT_EQ(cmd_analyze(c, "affect-change", out, err), kExitOk);
  fs::remove_all(c.out);
}

TEST(Commands, AnalyzeWritesStageFiles) {
  const auto dir = scratch("analyze");
  auto c = toy_config(dir);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_analyze(c, "turing", out, err), kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(dir / "fig4.json"));
  for (const char* s : {"1", "2", "3", "all"}) {
    EXPECT_TRUE(fs::exists(dir / ("turing." + std::string(s) + ".csv")));
    EXPECT_TRUE(fs::exists(dir / ("turing." + std::string(s) + ".json")));
  }
  EXPECT_EQ(cmd_analyze(c, "bogus", out, err), kExitConfig);
  fs::remove_all(dir);
}
