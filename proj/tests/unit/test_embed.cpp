#include <gtest/gtest.h>

#include <sstream>

#include "affect_sdt/embed.hpp"
#include "affect_sdt/error.hpp"
#include "affect_sdt/rng.hpp"
#include "support.hpp"

using namespace affect_sdt;
using affect_sdt::test::fixture;

namespace {

WordVectors tiny_vocab() {
  WordVectors wv(2, OovPolicy::Skip);
  wv.add("较强烈", Eigen::Vector2d(1, 0));
  wv.add("快乐", Eigen::Vector2d(0, 1));
  wv.add("快", Eigen::Vector2d(2, 2));
  wv.add("很", Eigen::Vector2d(-1, 0));
  return wv;
}

Eigen::MatrixXd biased_cov(const std::vector<Eigen::VectorXd>& v) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(v.size()), v.front().size());
  for (std::size_t i = 0; i < v.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = v[i];
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(v.size());
}

}  // namespace

TEST(WordVectors, GreedyMaxMatchSegmentation) {
  const auto wv = tiny_vocab();
  EXPECT_EQ(wv.segment("较强烈快乐"), (std::vector<std::string>{"较强烈", "快乐"}));
  EXPECT_EQ(wv.segment("很快乐吗"), (std::vector<std::string>{"很", "快乐", "吗"}));
  EXPECT_EQ(wv.segment("快 快乐"), (std::vector<std::string>{"快", "快乐"}));
}

TEST(WordVectors, OovPolicy) {
  auto wv = tiny_vocab();
  const std::vector<std::string> toks{"快乐", "吗"};
  EXPECT_EQ(wv.embed_tokens(toks).rows(), 1);
  wv.set_policy(OovPolicy::Error);
  EXPECT_THROW(wv.embed_tokens(toks), DomainError);
}

TEST(WordVectors, LoaderReportsLine) {
  std::istringstream ok("2 3\na 1 2 3\nb 4 5 6\n");
  const auto wv = load_word_vectors(ok);
  EXPECT_EQ(wv.size(), 2u);
  EXPECT_EQ(wv.dim(), 3u);
  EXPECT_DOUBLE_EQ((*wv.lookup("b"))[2], 6.0);
  std::istringstream bad("2 3\na 1 2 3\nb 4 5\n");
  try {
    load_word_vectors(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(WordVectors, FixtureCoversTemplate) {
  const auto wv = load_word_vectors_file(fixture("toy_vectors.txt"));
  const auto tmpl = builtin_template("zh");
  for (int s = 1; s <= 4; ++s) {
    for (int e = 0; e < 6; ++e) {
      for (const auto& piece : verbalize_pieces(s, static_cast<Emotion>(e), tmpl)) {
        EXPECT_TRUE(wv.contains(piece)) << piece;
      }
    }
  }
}

TEST(HiddenStates, RoundTripAveragesLayers) {
  HiddenStateRecord r;
  r.trial_id = "P1#2";
  r.field = "fear";
  r.tokens = {"a", "b"};
  r.first_layer = Eigen::MatrixXd{{1, 2, 3}, {4, 5, 6}};
  r.last_layer = Eigen::MatrixXd{{3, 2, 1}, {0, 1, 2}};
  r.model_id = "m";
  r.tokenizer_id = "t";
  std::stringstream s;
  write_hidden_state_record(s, r);
  const auto hs = load_hidden_states(s);
  EXPECT_EQ(hs.dim(), 3u);
  EXPECT_TRUE((hs.lookup("P1#2", "fear") - Eigen::MatrixXd{{2, 2, 2}, {2, 3, 4}}).norm() < 1e-12);
  EXPECT_THROW(hs.lookup("P1#2", "tension"), DomainError);
}

TEST(HiddenStates, RejectsTokenCountMismatch) {
  std::istringstream s(
      R"({"trial_id":"P1#1","field":"fear","tokens":["a"],"first_layer":[[1,2],[3,4]],)"
      R"("last_layer":[[1,2],[3,4]],"model_id":"m","tokenizer_id":"t"})"
      "\n");
  EXPECT_THROW(load_hidden_states(s), ParseError);
}

TEST(HiddenStates, RejectsUnknownKey) {
  std::istringstream s(
      R"({"trial_id":"P1#1","field":"fear","tokens":["a"],"first_layer":[[1,2]],)"
      R"("last_layer":[[1,2]],"model_id":"m","tokenizer_id":"t","extra":1})"
      "\n");
  EXPECT_THROW(load_hidden_states(s), ParseError);
}

TEST(HiddenStates, FixtureCoversEveryTrial) {
  const auto hs = load_hidden_states_file(fixture("toy_hidden_states.jsonl"));
  const auto ds = load_trials_file(fixture("toy_trials.csv"));
  EmbeddingProvider p(hs);
  const auto tmpl = builtin_template("zh");
  for (const auto& t : ds) {
    for (auto c : {Component::AA_MF, Component::NA}) {
      EXPECT_NO_THROW(represent(t, c, Phase::Pre, p, ReprLevel::Sentence, tmpl));
      EXPECT_NO_THROW(represent(t, c, Phase::Post, p, ReprLevel::Document, tmpl));
    }
  }
}

TEST(Pooling, ParseAndOrder) {
  const auto spec = parse_pooling("min+max");
  EXPECT_EQ(spec.key(), "max+min");
  EXPECT_THROW(parse_pooling("median"), ConfigError);
  EXPECT_THROW(parse_pooling(""), ConfigError);
  const Eigen::MatrixXd m{{1, 5}, {3, -1}};
  const auto v = pool(m, parse_pooling("max+mean+min"));
  EXPECT_TRUE((v - Eigen::VectorXd{{3, 5, 2, 2, 1, -1}}).norm() < 1e-12);
  EXPECT_THROW(pool(Eigen::MatrixXd(0, 2), spec), DomainError);
}

TEST(Represent, SentenceAndDocumentLevels) {
  const auto wv = tiny_vocab();
  EmbeddingProvider p(wv);
  VerbalizationTemplate tmpl = builtin_template("zh");
  const auto t = test::trial("P1", 1, Condition::Human, 2, {3, 1, 1, 1, 1, 1},
                             {3, 1, 1, 1, 1, 1}, "很快乐");
  const auto sent = represent(t, Component::MF, Phase::Post, p, ReprLevel::Sentence, tmpl);
  EXPECT_EQ(sent.rows(), 2);
  const auto doc = represent(t, Component::MF, Phase::Post, p, ReprLevel::Document, tmpl);
  ASSERT_EQ(doc.rows(), 1);
  EXPECT_TRUE((doc.row(0).transpose() - Eigen::Vector2d(-0.5, 0.5)).norm() < 1e-12);
  EXPECT_EQ(represent(t, Component::MF, Phase::Pre, p, ReprLevel::Sentence, tmpl).rows(), 0);
}

TEST(Represent, FieldWithoutKnownTokensIsDegenerate) {
  const auto wv = tiny_vocab();
  EmbeddingProvider p(wv);
  const auto t = test::trial("P1", 1, Condition::Human, 2, {1, 1, 1, 1, 1, 1},
                             {1, 1, 1, 1, 1, 1}, "吗");
  EXPECT_THROW(represent(t, Component::MF, Phase::Post, p, ReprLevel::Sentence,
                         builtin_template("zh")),
               DegenerateError);
}

TEST(Whitening, IdentityCovariance) {
  Rng rng(4);
  std::vector<Eigen::VectorXd> v;
  Eigen::MatrixXd mix = Eigen::MatrixXd::NullaryExpr(6, 6, [&] { return rng.normal(); });
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd z(6);
    for (auto& x : z) x = rng.normal();
    v.push_back(mix * z + Eigen::VectorXd::Constant(6, 3.0));
  }
  for (int kappa : {kKappaFull, 3}) {
    const auto model = fit_whitening(v, kappa);
    std::vector<Eigen::VectorXd> w;
    for (const auto& x : v) w.push_back(apply_whitening(x, model));
    const auto c = biased_cov(w);
    const auto k = static_cast<Eigen::Index>(model.output_dim());
    EXPECT_EQ(k, kappa == kKappaFull ? 6 : 3);
    EXPECT_LT((c - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Whitening, RankDeficientDataIsDegenerate) {
  std::vector<Eigen::VectorXd> v;
  for (int i = 0; i < 10; ++i) v.push_back(Eigen::Vector3d(i, 2.0 * i, 1.0));
  EXPECT_THROW(fit_whitening(v, kKappaFull), DegenerateError);
  EXPECT_NO_THROW(fit_whitening(v, 1));
  EXPECT_THROW(fit_whitening(v, 4), DomainError);
}
