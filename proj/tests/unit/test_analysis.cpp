#include <gtest/gtest.h>

#include <cmath>
#include <variant>

#include "affect_sdt/analysis.hpp"
#include "affect_sdt/error.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace affect_sdt;

namespace {

double num(const Table& t, std::size_t row, const std::string& col) {
  const auto& c = t.rows[row][t.column(col)];
  if (std::holds_alternative<double>(c)) return std::get<double>(c);
  if (std::holds_alternative<std::int64_t>(c)) return static_cast<double>(std::get<std::int64_t>(c));
  return std::nan("");
}

std::string text(const Table& t, std::size_t row, const std::string& col) {
  return std::get<std::string>(t.rows[row][t.column(col)]);
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(format_number(std::nan("")), "NA");
  EXPECT_EQ(std::stod(format_number(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(Tables, CsvQuotingAndWidth) {
  Table t{"t", {"a", "b", "c"}, {}};
  t.add_row({std::string("x,y"), 1.5, std::monostate{}});
  t.add_row({std::string("say \"hi\""), std::int64_t{2}, true});
  EXPECT_EQ(to_csv(t), "a,b,c\n\"x,y\",1.5,NA\n\"say \"\"hi\"\"\",2,true\n");
  EXPECT_THROW(t.add_row({1.0}), DomainError);
  EXPECT_THROW(t.column("zzz"), DomainError);
}

TEST(Tables, FilterStageKeepsMatchingRows) {
  AnalysisReport r;
  r.name = "x";
  Table a{"a", {"stage", "v"}, {}};
  a.add_row({std::string("1"), 1.0});
  a.add_row({std::string("all"), 2.0});
  Table b{"b", {"v"}, {}};
  b.add_row({3.0});
  r.tables = {a, b};
  r.series["fig"] = "[1]";
  const auto f = filter_stage(r, "all");
  ASSERT_EQ(f.tables.size(), 2u);
  EXPECT_EQ(f.tables[0].rows.size(), 1u);
  EXPECT_EQ(f.tables[1].rows.size(), 1u);
  EXPECT_TRUE(f.series.empty());
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_EQ(j["tables"]["a"][1]["stage"], "all");
  EXPECT_EQ(j["series"]["fig"][0], 1);
}

TEST(MixedFeelings, SplitOnPunctuation) {
  EXPECT_EQ(split_mf_items("有点担心，但是很安全。 "),
            (std::vector<std::string>{"有点担心", "但是很安全"}));
  EXPECT_EQ(split_mf_items("calm, a bit tense; ok"),
            (std::vector<std::string>{"calm", "a bit tense", "ok"}));
  EXPECT_TRUE(split_mf_items("。，").empty());
}

TEST(AffectChange, PositiveSumDifferences) {
  const auto ds = test::planted_dataset(9, 31, 0.5);
  const auto rep = affect_change_analysis(ds, {});
  const auto& t = rep.table("affect_change");
  ASSERT_EQ(t.rows.size(), 4u);
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    const int stage = std::stoi(text(t, row, "stage"));
    const bool human = text(t, row, "condition") == "human";
    std::vector<double> d;
    for (const auto& r : ds) {
      if (r.stage != stage || (r.condition == Condition::Human) != human) continue;
      double s = 0;
      for (auto e : {Emotion::Enjoyment, Emotion::Interest, Emotion::Surprise,
                     Emotion::Satisfaction}) {
        s += r.post[e] - r.pre[e];
      }
      d.push_back(s);
    }
    EXPECT_NEAR(num(t, row, "delta_mean"), mean(d), 1e-12);
    EXPECT_NEAR(num(t, row, "p"), oracle::wilcoxon_p(d, human ? Tail::OneGreater : Tail::OneLess),
                1e-12);
  }
}

TEST(Turing, GroupsAndFigure) {
  const auto ds = test::planted_dataset(9, 1);
  TuringOptions o;
  o.n_boot = 500;
  const auto rep = turing_test_analysis(ds, o);
  const auto& t = rep.table("turing");
  EXPECT_EQ(t.rows.size(), 8u);
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    EXPECT_LE(num(t, row, "ci_lo"), num(t, row, "mean"));
    EXPECT_GE(num(t, row, "ci_hi"), num(t, row, "mean"));
    EXPECT_EQ(text(t, row, "tail"), text(t, row, "condition") == "human" ? "two" : "one_less");
  }
  const auto fig = nlohmann::json::parse(rep.series.at("fig4"));
  EXPECT_EQ(fig.size(), 8u);
}

TEST(Correlations, ItemRowsAndConditionTests) {
  const auto ds = test::planted_dataset(9, 13);
  const auto rep = correlate_measures(ds);
  const auto& c = rep.table("correlations");
  EXPECT_EQ(c.rows.size(), 4u * 15u);
  EXPECT_NO_THROW(rep.table("condition_differences"));
}

TEST(Wordcloud, MagnitudeShiftsToOne) {
  std::vector<TrialRecord> t;
  t.push_back(test::trial("A", 1, Condition::Human, 3, {1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1},
                          "紧张，刺激"));
  t.push_back(test::trial("B", 1, Condition::AI, 1, {1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1},
                          "安心"));
  t.push_back(test::trial("C", 1, Condition::AI, 1, {1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1}));
  const StudyDataset ds(t);
  const std::vector<double> z{0.5, -1.0, 3.0};
  const auto rep = wordcloud_weights(ds, z);
  const auto& tab = rep.table("wordcloud");
  ASSERT_EQ(tab.rows.size(), 3u);
  EXPECT_EQ(text(tab, 0, "item"), "紧张");
  EXPECT_DOUBLE_EQ(num(tab, 0, "weight"), 2.5);
  EXPECT_EQ(text(tab, 1, "item"), "刺激");
  EXPECT_DOUBLE_EQ(num(tab, 2, "weight"), -1.0);
}

TEST(Magnitude, PredictionModeUsesPredictedRating) {
  const auto ds = test::planted_dataset(9, 6);
  const EmbeddingRegistry reg(builtin_template("zh"));
  ModelSpec s;
  std::map<int, EvaluationReport> reps;
  reps[0] = nested_loocv(ds, {s}, reg, {});
  const auto rep = magnitude_correlation(ds, reps, MagnitudeMode::Prediction);
  const auto& t = rep.table("magnitude");
  ASSERT_EQ(t.rows.size(), 1u);
  std::vector<double> p(reps[0].predictions.begin(), reps[0].predictions.end());
  std::vector<double> r(reps[0].ratings.begin(), reps[0].ratings.end());
  EXPECT_NEAR(num(t, 0, "rho"), spearman(p, r), 1e-12);
  EXPECT_NO_THROW(magnitude_correlation(ds, reps, MagnitudeMode::Tercile));
}

TEST(Rsa, ReportsEveryStageAndCondition) {
  const auto ds = test::planted_dataset(9, 7);
  RsaOptions o;
  o.n_perm = 200;
  const auto rep = rsa_at_behaviour(ds, o);
  EXPECT_FALSE(rep.tables.front().rows.empty());
  EXPECT_TRUE(rep.series.count("fig3"));
}
