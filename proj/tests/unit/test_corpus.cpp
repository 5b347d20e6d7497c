#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "affect_sdt/corpus.hpp"
#include "affect_sdt/error.hpp"
#include "support.hpp"

using namespace affect_sdt;
using affect_sdt::test::fixture;

TEST(Corpus, CsvAndJsonFixturesAgree) {
  const auto a = load_trials_file(fixture("toy_trials.csv"));
  const auto b = load_trials_file(fixture("toy_trials.json"));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 36u);
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.stage(2).size(), 12u);
}

TEST(Corpus, RoundTrip) {
  const auto ds = load_trials_file(fixture("toy_trials.csv"));
  for (auto fmt : {DataFormat::Csv, DataFormat::Json}) {
    std::stringstream s;
    write_trials(s, ds, fmt);
    EXPECT_EQ(load_trials(s, fmt), ds);
  }
}

TEST(Corpus, ValidationListsEveryOffender) {
  auto t = test::trial("P1", 1, Condition::Human, 0, {1, 1, 1, 1, 1, 1}, {5, 1, 1, 1, 1, 1});
  auto dup = test::trial("P1", 1, Condition::AI, 2, {1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1});
  try {
    StudyDataset ds({t, dup});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.offenders().size(), 3u);
  }
}

TEST(Corpus, BadHeaderIsParseError) {
  std::istringstream s("participant,stage\nP1,1\n");
  EXPECT_THROW(load_trials(s, DataFormat::Csv), ParseError);
}

TEST(Corpus, InvalidFixtureCitesRow) {
  try {
    load_trials_file(fixture("invalid_rating.csv"));
    FAIL();
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.offenders().size(), 1u);
    EXPECT_NE(e.offenders()[0].find("row 4"), std::string::npos);
    EXPECT_NE(e.offenders()[0].find("rating"), std::string::npos);
  }
}

TEST(Corpus, ComponentSelection) {
  const auto t = test::trial("P", 2, Condition::AI, 3, {1, 2, 3, 4, 1, 2}, {4, 3, 2, 1, 4, 3}, "好");
  const auto pa = select_component(t, Component::PA_MF, Phase::Post);
  EXPECT_EQ(pa.scores, (std::vector<int>{4, 3, 2, 3}));
  EXPECT_TRUE(pa.includes_mf);
  EXPECT_EQ(pa.mf_text, "好");
  EXPECT_TRUE(select_component(t, Component::MF, Phase::Pre).mf_text.empty());
  EXPECT_EQ(component_emotions(Component::NA),
            (std::vector<Emotion>{Emotion::Fear, Emotion::Tension}));
  EXPECT_DOUBLE_EQ(normalize_rating(3), 1.0);
  EXPECT_EQ(t.trial_id(), "P#2");
  EXPECT_EQ(t.baseline_id(), "P#pre");
}

TEST(Template, VerbalizationIsInjective) {
  for (const char* lang : {"zh", "en"}) {
    const auto tmpl = builtin_template(lang);
    std::set<std::string> seen;
    for (int s = 1; s <= 4; ++s) {
      for (int e = 0; e < 6; ++e) seen.insert(verbalize(s, static_cast<Emotion>(e), tmpl));
    }
    EXPECT_EQ(seen.size(), 24u) << lang;
  }
  EXPECT_EQ(verbalize(3, Emotion::Fear, builtin_template("zh")), "较强烈恐惧");
}
