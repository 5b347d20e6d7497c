#include <gtest/gtest.h>

#include "affect_sdt/error.hpp"
#include "affect_sdt/rdm.hpp"

using namespace affect_sdt;

TEST(Rdm, AbsoluteDifferences) {
  const std::vector<double> v{1, 4, 6};
  const auto r = build_rdm(v);
  EXPECT_EQ(r.size(), 3u);
  EXPECT_EQ(r.lower_triangle(), (std::vector<double>{3, 5, 2}));
  EXPECT_EQ(r.labels, (std::vector<std::string>{"0", "1", "2"}));
}

TEST(Rdm, IdenticalRdmsCorrelatePerfectly) {
  const std::vector<double> v{0.1, 0.5, 0.2, 0.9, 0.4, 0.7};
  const auto a = build_rdm(v);
  const auto res = compare_rdms(a, a, 999, 3);
  EXPECT_NEAR(res.statistic, 1.0, 1e-12);
  EXPECT_LT(res.p, 0.01);
}

TEST(Rdm, ConditionGroupsNeedData) {
  const std::vector<double> v{1, 2, 3, 4, 5, 6};
  const std::vector<int> stages{1, 1, 2, 2, 3, 3};
  const std::vector<Condition> c{Condition::Human, Condition::AI, Condition::Human,
                                 Condition::AI,    Condition::Human, Condition::AI};
  const auto r = condition_rdm(v, stages, c);
  EXPECT_EQ(r.size(), 6u);
  EXPECT_DOUBLE_EQ(r.values(0, 5), 5.0);
  const std::vector<int> only_one{1, 1, 1, 1, 1, 1};
  EXPECT_THROW(condition_rdm(v, only_one, c), DomainError);
}
