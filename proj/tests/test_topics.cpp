#include <random>

#include "doctest.h"
#include "planted.hpp"
#include "slant/error.hpp"
#include "slant/topics.hpp"
#include "test_util.hpp"

using namespace slant;
using namespace slant::topics;

namespace {

std::vector<BagOfWords> bags(const std::vector<std::vector<std::string>>& docs, const TopicVocabulary& v) {
  std::vector<BagOfWords> out;
  for (const auto& d : docs) out.push_back(to_bag(d, v));
  return out;
}

TopicModel fixed_model(const std::vector<std::string>& vocab, const Eigen::MatrixXd& rows) {
  TopicModel m;
  m.num_topics = static_cast<int>(rows.rows());
  m.alpha = m.eta = 1.0 / m.num_topics;
  m.vocab = vocab;
  m.lambda = (rows * 1000.0).array() + 1e-3;
  m.refresh();
  return m;
}

}  // namespace

TEST_CASE("topic vocabulary and bags") {
  std::vector<std::vector<std::string>> docs{{"a", "b"}, {"a", "c"}, {"a", "b", "b"}};
  auto v = build_topic_vocabulary(docs, 2);
  CHECK(v.terms == std::vector<std::string>{"a", "b"});
  auto b = to_bag(std::vector<std::string>{"b", "x", "b", "a"}, v);
  CHECK(b.counts == std::vector<std::pair<int, double>>{{0, 1.0}, {1, 2.0}});
  CHECK(b.total() == 3);
}

TEST_CASE("planted two-topic corpus is recovered") {
  std::vector<std::vector<std::string>> docs;
  std::mt19937_64 rng(1);
  for (int d = 0; d < 400; ++d) {
    std::vector<std::string> doc;
    const bool first = d % 2 == 0;
    for (int i = 0; i < 20; ++i) doc.push_back(first ? (rng() % 2 ? "a" : "b") : (rng() % 2 ? "c" : "d"));
    docs.push_back(doc);
  }
  auto v = build_topic_vocabulary(docs, 1);
  LdaOptions o;
  o.num_topics = 2;
  o.passes = 5;
  o.batch_size = 50;
  o.seed = 3;
  auto res = train_lda(bags(docs, v), v, o);
  const auto& tw = res.model.topic_word;
  for (int k = 0; k < 2; ++k) {
    const double ab = tw(k, 0) + tw(k, 1), cd = tw(k, 2) + tw(k, 3);
    CHECK(std::max(ab, cd) > 0.9);
  }
  CHECK((tw(0, 0) + tw(0, 1) > 0.9) != (tw(1, 0) + tw(1, 1) > 0.9));

  auto again = train_lda(bags(docs, v), v, o);
  CHECK(again.model.topic_word == res.model.topic_word);

  const int ab_topic = tw(0, 0) > tw(1, 0) ? 0 : 1;
  auto s = infer_shares(res.model, to_bag(std::vector<std::string>{"a", "b", "a", "a", "b"}, v));
  CHECK(s.shares[ab_topic] > 0.9);
}

TEST_CASE("K = 1 reproduces the unigram distribution") {
  auto c = planted::make(2, 20, 300, 30, 5);
  auto v = build_topic_vocabulary(c.docs, 1);
  LdaOptions o;
  o.num_topics = 1;
  o.passes = 3;
  o.batch_size = 64;
  auto res = train_lda(bags(c.docs, v), v, o);
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v.size()));
  for (const auto& d : c.docs)
    for (const auto& w : d) freq[v.index.at(w)] += 1;
  freq /= freq.sum();
  CHECK((res.model.topic_word.row(0).transpose() - freq).cwiseAbs().maxCoeff() < 0.01);
  auto s = infer_shares(res.model, to_bag(c.docs[0], v));
  CHECK(s.shares.size() == 1);
  CHECK(s.shares[0] == doctest::Approx(1.0));
}

TEST_CASE("simplex invariants") {
  auto c = planted::make(4, 40, 300, 25, 9);
  auto v = build_topic_vocabulary(c.docs, 1);
  LdaOptions o;
  o.num_topics = 4;
  o.passes = 2;
  o.batch_size = 64;
  auto res = train_lda(bags(c.docs, v), v, o);
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(res.model.topic_word.row(k).sum() - 1) < 1e-8);
    CHECK(res.model.topic_word.row(k).minCoeff() >= 0);
  }
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::string> doc;
    for (std::size_t i = 0, n = rng() % 40; i < n; ++i) doc.push_back(v.terms[rng() % v.size()]);
    auto s = infer_shares(res.model, to_bag(doc, v));
    CHECK(std::abs(s.shares.sum() - 1) < 1e-8);
    CHECK(s.shares.minCoeff() >= 0);
    CHECK(s.empty == doc.empty());
  }
  auto e = infer_shares(res.model, BagOfWords{});
  CHECK(e.empty);
  CHECK((e.shares.array() - 0.25).abs().maxCoeff() < 1e-15);
}

TEST_CASE("errors") {
  TopicVocabulary empty;
  LdaOptions o;
  o.num_topics = 2;
  CHECK_THROWS_AS(train_lda(std::vector<BagOfWords>{BagOfWords{}}, empty, o), Error);
}

TEST_CASE("classify_local strict majority") {
  TopicLabelSet labels{{"crime", true, false}, {"war", false, false}, {"", false, true}};
  CHECK(classify_local(Eigen::Vector3d(0.6, 0.4, 0), labels));
  CHECK_FALSE(classify_local(Eigen::Vector3d(0.5, 0.5, 0), labels));
  CHECK(classify_local(Eigen::Vector3d(0.5 + 1e-12, 0.5 - 1e-12, 0), labels));
  TopicLabelSet all_local(3, TopicLabel{"x", true, false});
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::Vector3d s = Eigen::Vector3d::Random().cwiseAbs() + Eigen::Vector3d::Constant(1e-3);
    s /= s.sum();
    CHECK(classify_local(s, all_local));
  }
}

TEST_CASE("topic_covariates") {
  std::vector<Eigen::VectorXd> shares{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(0.3, 0.7)};
  std::vector<std::string> outlets{"o", "o", "p"};
  auto c = topic_covariates(shares, outlets);
  CHECK(c.at("o").isApprox(Eigen::Vector2d(0.5, 0.5)));
  CHECK(c.at("p").isApprox(Eigen::Vector2d(0.3, 0.7)));
  for (const auto& [o, v] : c) CHECK(std::abs(v.sum() - 1) < 1e-8);
}

TEST_CASE("top_words") {
  Eigen::MatrixXd rows(2, 3);
  rows << 0.0, 0.0, 1.0, 1.0 / 3, 1.0 / 3, 1.0 / 3;
  auto m = fixed_model({"ant", "bee", "war"}, rows);
  CHECK(top_words(m, 0, 1) == std::vector<std::string>{"war"});
  CHECK(top_words(m, 0, 0).empty());
  CHECK(top_words(m, 1, 2) == std::vector<std::string>{"ant", "bee"});
}

TEST_CASE("labels and model persistence") {
  slant_test::TempDir tmp("topics");
  TopicLabelSet labels{{"crime, local", true, false}, {"", false, true}};
  write_topic_labels(tmp / "l.csv", labels);
  auto back = load_topic_labels(tmp / "l.csv", 2);
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == "crime, local");
  CHECK(back[0].is_local);
  CHECK(back[1].is_no_label);
  CHECK_THROWS_AS(load_topic_labels(tmp / "l.csv", 3), Error);
  slant_test::write_file(tmp / "dup.csv", "topic_index,label,is_local,is_no_label\n0,a,1,0\n0,b,0,0\n");
  CHECK_THROWS_AS(load_topic_labels(tmp / "dup.csv", 2), Error);

  Eigen::MatrixXd rows(2, 2);
  rows << 0.25, 0.75, 0.6, 0.4;
  auto m = fixed_model({"a", "b"}, rows);
  save_topic_model(m, tmp / "m.bin");
  auto r = load_topic_model(tmp / "m.bin");
  CHECK(r.vocab == m.vocab);
  CHECK(r.lambda == m.lambda);
  CHECK(r.topic_word == m.topic_word);
  CHECK(r.alpha == m.alpha);
  slant_test::write_file(tmp / "bad.bin", "nope");
  CHECK_THROWS_AS(load_topic_model(tmp / "bad.bin"), Error);
}
