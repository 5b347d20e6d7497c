#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "affect_sdt/affect.hpp"
#include "affect_sdt/error.hpp"
#include "affect_sdt/rng.hpp"
#include "support.hpp"

using namespace affect_sdt;

namespace {

double mean_of(const Eigen::ArrayXd& a) { return a.sum() / static_cast<double>(a.size()); }

}  // namespace

TEST(Distance, VectorMeasuresAgainstHandFormulas) {
  const Eigen::VectorXd a{{1, 4, 2, 3}}, b{{2, 2, 2, 4}};
  const Eigen::ArrayXd x = a.array(), y = b.array();
  EXPECT_DOUBLE_EQ(distance(a, b, DistanceMeasure::Absolute), mean_of((x - y).abs()));
  EXPECT_DOUBLE_EQ(distance(a, b, DistanceMeasure::AkMean), mean_of((x + y) / 2));
  EXPECT_DOUBLE_EQ(distance(a, b, DistanceMeasure::AkMin), mean_of(x.min(y)));
  EXPECT_DOUBLE_EQ(distance(a, b, DistanceMeasure::AkAbsMinProduct),
                   mean_of((x - y).abs() * x.min(y)));
  EXPECT_DOUBLE_EQ(distance(a, b, DistanceMeasure::AkMaxReversed), mean_of(x.max(y)));
  EXPECT_NEAR(distance(a, b, DistanceMeasure::Euclidean), std::sqrt(1 + 4 + 0 + 1.0), 1e-15);
  EXPECT_DOUBLE_EQ(distance(a, b, DistanceMeasure::Manhattan), 4.0);
  EXPECT_NEAR(distance(a, b, DistanceMeasure::Cosine), 1 - a.dot(b) / (a.norm() * b.norm()),
              1e-15);
  const double ma = a.mean(), mb = b.mean();
  const double r = ((x - ma) * (y - mb)).sum() /
                   std::sqrt(((x - ma).square().sum()) * ((y - mb).square().sum()));
  EXPECT_NEAR(distance(a, b, DistanceMeasure::Pearson), 1 - r, 1e-15);
}

TEST(Distance, UndefinedCases) {
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(3), a{{1, 2, 3}}, c = Eigen::VectorXd::Ones(3);
  EXPECT_THROW(distance(z, a, DistanceMeasure::Cosine), DegenerateError);
  EXPECT_THROW(distance(c, a, DistanceMeasure::Pearson), DegenerateError);
  EXPECT_THROW(distance(a, Eigen::VectorXd::Ones(2), DistanceMeasure::Euclidean), DomainError);
  EXPECT_THROW(distance(a, a, DistanceMeasure::Mahalanobis), DomainError);
  EXPECT_THROW(distance(a, a, DistanceMeasure::Wmd), DomainError);
}

TEST(Distance, MahalanobisUsesPrecision) {
  Rng rng(6);
  std::vector<Eigen::VectorXd> v;
  for (int i = 0; i < 40; ++i) v.push_back(Eigen::Vector3d(rng.normal(), 2 * rng.normal(), 1.0 + rng.normal()));
  const auto prec = mahalanobis_precision(v);
  Eigen::MatrixXd x(40, 3);
  for (int i = 0; i < 40; ++i) x.row(i) = v[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = c.transpose() * c / 39.0;
  cov.diagonal().array() += 1e-6 * cov.trace() / 3.0;
  EXPECT_LT((prec - cov.inverse()).cwiseAbs().maxCoeff(), 1e-9);
  const Eigen::VectorXd d = v[0] - v[1];
  EXPECT_NEAR(distance(v[0], v[1], DistanceMeasure::Mahalanobis, &prec),
              std::sqrt(d.dot(cov.inverse() * d)), 1e-9);
  std::vector<Eigen::VectorXd> same(5, Eigen::Vector3d(1, 2, 3));
  EXPECT_THROW(mahalanobis_precision(same), DegenerateError);
}

TEST(TransportDistance, WmdAndWrd) {
  const Eigen::MatrixXd a{{0, 0}, {1, 0}}, b{{0, 1}};
  EXPECT_NEAR(transport_distance(a, b, DistanceMeasure::Wmd),
              0.5 * 1.0 + 0.5 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(transport_distance(a, a, DistanceMeasure::Wmd), 0.0, 1e-15);
  const Eigen::MatrixXd c{{3, 0}, {0, 1}}, d{{1, 0}};
  // masses 3/4 and 1/4 against a single row: cost 1 - cos
  EXPECT_NEAR(transport_distance(c, d, DistanceMeasure::Wrd), 0.75 * 0.0 + 0.25 * 1.0, 1e-12);
  EXPECT_THROW(transport_distance(Eigen::MatrixXd{{0, 0}}, d, DistanceMeasure::Wrd),
               DegenerateError);
  EXPECT_THROW(transport_distance(Eigen::MatrixXd(0, 2), d, DistanceMeasure::Wmd),
               DegenerateError);
}

TEST(TransportDistance, DuplicateRowsMerge) {
  const Eigen::MatrixXd a{{0, 0}, {0, 0}, {2, 0}}, b{{0, 0}, {2, 0}, {2, 0}};
  EXPECT_NEAR(transport_distance(a, b, DistanceMeasure::Wmd), 2.0 / 3.0, 1e-12);
}

TEST(ScoreVector, MixedFeelingsCoordinate) {
  const auto t = test::trial("P", 1, Condition::AI, 1, {1, 2, 3, 4, 1, 2}, {2, 2, 2, 2, 2, 2},
                             "紧张");
  EXPECT_EQ(score_vector(t, Component::PA, Phase::Pre), (Eigen::VectorXd{{1, 2, 3, 2}}).eval());
  EXPECT_EQ(score_vector(t, Component::NA_MF, Phase::Pre), (Eigen::VectorXd{{4, 1, 0}}).eval());
  EXPECT_EQ(score_vector(t, Component::NA_MF, Phase::Post), (Eigen::VectorXd{{2, 2, 1}}).eval());
}

TEST(AffectiveTransition, OriginalEuclidean) {
  const auto ds = test::planted_dataset(6, 3);
  TransitionSpec spec;
  spec.component = Component::AA;
  const auto d = affective_transition(ds, spec);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double s = 0;
    for (int e = 0; e < 6; ++e) {
      const double diff = ds[i].pre.scores[e] - ds[i].post.scores[e];
      s += diff * diff;
    }
    EXPECT_NEAR(d[i], std::sqrt(s), 1e-12);
  }
}

TEST(AffectiveTransition, WhiteningOnlyUsesFitTrials) {
  const auto ds = test::planted_dataset(12, 5, 0.8);
  const auto wv = load_word_vectors_file(test::fixture("toy_vectors.txt"));
  EmbeddingProvider p(wv);
  const auto tmpl = builtin_template("zh");
  TransitionSpec spec;
  spec.provider = &p;
  spec.tmpl = &tmpl;
  spec.kappa = 3;
  const auto inputs = prepare_transition(ds, spec);
  std::vector<std::size_t> fit(ds.size() - 1);
  std::iota(fit.begin(), fit.end(), std::size_t{1});
  const auto base = transition_distances(inputs, spec, fit);
  auto changed = inputs;
  changed.post[0] = changed.post[0] * 3.0 + Eigen::VectorXd::Ones(changed.post[0].size());
  const auto after = transition_distances(changed, spec, fit);
  for (std::size_t i = 1; i < ds.size(); ++i) EXPECT_DOUBLE_EQ(base[i], after[i]);
}

TEST(ZNormalize, TrainMoments) {
  const std::vector<double> v{1, 2, 3, 10};
  const std::vector<std::size_t> train{0, 1, 2};
  const auto s = z_normalize(v, train);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.sd, 1.0);
  EXPECT_DOUBLE_EQ(s.ss[3], 8.0);
  const std::vector<double> flat{2, 2, 2};
  const std::vector<std::size_t> all{0, 1, 2};
  EXPECT_THROW(z_normalize(flat, all), DegenerateError);
  EXPECT_THROW(z_normalize(flat, std::vector<std::size_t>{0}), DomainError);
}

TEST(Measures, NamesRoundTrip) {
  for (auto m : kDistanceMeasures) EXPECT_EQ(parse_distance(to_string(m)), m);
  EXPECT_FALSE(parse_distance("chebyshev").has_value());
}
