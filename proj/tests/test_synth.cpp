#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "slant/error.hpp"
#include "slant/synth.hpp"
#include "slant/textprep.hpp"

using namespace slant;
using namespace slant::synth;

namespace {

double seq_prob(const Eigen::VectorXd& p, const std::vector<int>& w) {
  double out = 1;
  for (int i : w) out *= p[i];
  return out;
}

}  // namespace

TEST_CASE("channel model TV distance is exactly the separation") {
  for (double s : {0.0, 0.05, 0.1, 0.37, 1.0}) {
    for (std::size_t v : {2u, 7u, 500u}) {
      auto m = make_channel_model(v, s, 3);
      CHECK(m.vocab.size() == v);
      CHECK(std::abs(m.fnc.sum() - 1) < 1e-12);
      CHECK(std::abs(m.cnn.sum() - 1) < 1e-12);
      CHECK(m.fnc.minCoeff() >= 0);
      CHECK(m.cnn.minCoeff() >= 0);
      CHECK(std::abs(0.5 * (m.fnc - m.cnn).cwiseAbs().sum() - s) < 1e-12);
      CHECK(tv_distance(m.fnc, m.cnn) == doctest::Approx(s));
    }
  }
  CHECK_THROWS_AS(make_channel_model(10, 1.5, 1), ValidationError);
  CHECK_THROWS_AS(make_channel_model(1, 0.1, 1), ValidationError);
}

TEST_CASE("synthetic words survive text preparation") {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < 3000; ++i) {
    const auto w = synthetic_word(i);
    CHECK(seen.insert(w).second);
    CHECK(textprep::stems_of(w, textprep::default_stopwords()) == std::vector<std::string>{w});
  }
  auto m = make_channel_model(300, 0.2, 5);
  std::mt19937_64 rng(1);
  WordSampler sampler(m);
  const auto words = sampler.draw(true, 25, rng);
  const auto stems = textprep::stems_of(render(m, words), textprep::default_stopwords());
  REQUIRE(stems.size() == words.size());
  for (std::size_t i = 0; i < words.size(); ++i) CHECK(stems[i] == m.vocab[static_cast<std::size_t>(words[i])]);
}

TEST_CASE("bayes rate matches exhaustive enumeration") {
  auto m = make_channel_model(4, 0.3, 9);
  const std::size_t len = 3;
  double exact = 0;
  std::vector<std::vector<int>> all;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        const std::vector<int> w{a, b, c};
        exact += 0.5 * std::max(seq_prob(m.fnc, w), seq_prob(m.cnn, w));
        all.push_back(w);
      }
  // per-snippet posterior maxima
  const double got = bayes_rate(m, all);
  double want = 0;
  for (const auto& w : all) {
    const double f = seq_prob(m.fnc, w), c = seq_prob(m.cnn, w);
    want += std::max(f, c) / (f + c);
  }
  CHECK(got == doctest::Approx(want / static_cast<double>(all.size())).epsilon(1e-12));

  std::mt19937_64 rng(2);
  WordSampler sampler(m);
  std::vector<std::vector<int>> draws;
  for (int i = 0; i < 20000; ++i) draws.push_back(sampler.draw(i % 2 == 0, len, rng));
  CHECK(std::abs(bayes_rate(m, draws) - exact) < 0.01);

  const std::vector<int> w{0, 3, 1};
  CHECK(log_likelihood_ratio(m, w) ==
        doctest::Approx(std::log(seq_prob(m.fnc, w)) - std::log(seq_prob(m.cnn, w))).epsilon(1e-12));
}

TEST_CASE("generators are deterministic") {
  SynthConfig c;
  c.n_snippets = 200;
  c.vocab_size = 60;
  c.n_counties = 50;
  c.n_outlets = 20;
  c.seed = 11;
  auto a = gen_channel_corpora(c), b = gen_channel_corpora(c);
  REQUIRE(a.snippets.size() == 400);
  for (std::size_t i = 0; i < a.snippets.size(); ++i) CHECK(a.snippets[i].text == b.snippets[i].text);
  CHECK(a.words == b.words);
  CHECK(a.bayes_rate == b.bayes_rate);

  auto p = gen_panel(c), q = gen_panel(c);
  REQUIRE(p.slants.size() == q.slants.size());
  for (std::size_t i = 0; i < p.slants.size(); ++i) {
    CHECK(p.slants[i].slant == q.slants[i].slant);
    CHECK(p.slants[i].slant == p.mixture[i]);
    CHECK((p.mixture[i] >= 0 && p.mixture[i] <= 1));
  }
  CHECK(p.truth.measured_theta() == p.truth.theta);
  c.seed = 12;
  CHECK(gen_panel(c).mixture != p.mixture);

  const auto t1 = gen_transcripts(a.model, true, 30, 10, 4, 5), t2 = gen_transcripts(a.model, true, 30, 10, 4, 5);
  REQUIRE(t1.size() == 8);
  for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i].text == t2[i].text);
}

TEST_CASE("validate") {
  SynthConfig c;
  CHECK_NOTHROW(validate(c));
  auto bad = [&](auto mutate) {
    SynthConfig x = c;
    mutate(x);
    CHECK_THROWS_AS(validate(x), ValidationError);
  };
  bad([](SynthConfig& x) { x.separation = -0.1; });
  bad([](SynthConfig& x) { x.vocab_size = 1; });
  bad([](SynthConfig& x) { x.n_snippets = 0; });
  bad([](SynthConfig& x) { x.n_counties = 1; });
  bad([](SynthConfig& x) { x.max_counties_per_outlet = 10'000; });
  bad([](SynthConfig& x) { x.view_noise = -1; });
}

TEST_CASE("snippet scorer agrees with the text path") {
  auto m = make_channel_model(40, 0.3, 4);
  std::mt19937_64 rng(6);
  for (bool bigram : {false, true}) {
    std::vector<std::string> terms;
    for (std::size_t i = 0; i < 15; ++i) {
      std::string t = m.vocab[rng() % 40];
      if (bigram) t += " " + m.vocab[rng() % 40];
      terms.push_back(t);
    }
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    std::vector<double> chi(terms.size());
    for (std::size_t i = 0; i < chi.size(); ++i) chi[i] = static_cast<double>(chi.size() - i);
    auto sel = features::select_top_k(terms, chi, terms.size());
    std::vector<double> scale;
    for (std::size_t i = 0; i < terms.size(); ++i) scale.push_back(0.5 + static_cast<double>(rng() % 10) / 10);
    sel.set_scale(scale);
    classifier::LogisticModel model;
    model.psi = oracle::gaussian(static_cast<Eigen::Index>(terms.size()), 1, rng);
    model.intercept = -0.2;
    model.selector_id = sel.id();
    SnippetScorer scorer(m, sel, model);
    WordSampler sampler(m);
    for (int rep = 0; rep < 30; ++rep) {
      const auto w = sampler.draw(rep % 2 == 0, 30, rng);
      const auto text = render(m, w);
      const auto seq = bigram ? textprep::bigrams_of(text, textprep::default_stopwords())
                              : textprep::stems_of(text, textprep::default_stopwords());
      CHECK(scorer(w) == doctest::Approx(classifier::predict_proba(model, features::vectorize(seq, sel))).epsilon(1e-12));
    }
  }
}

TEST_CASE("text slant hook is linear in the mixture weight") {
  auto m = make_channel_model(50, 0.4, 2);
  auto score = [&](std::span<const int> w) { return std::tanh(log_likelihood_ratio(m, w) / 10); };
  auto ts = text_slant_hook(m, score, 400, 20, 4000, 3);
  CHECK(ts.e_fnc > ts.e_cnn);
  std::mt19937_64 rng(8);
  for (double mix : {0.0, 0.3, 1.0}) {
    double acc = 0;
    for (int i = 0; i < 20; ++i) acc += ts.hook(mix, rng);
    CHECK(std::abs(acc / 20 - (ts.e_cnn + (ts.e_fnc - ts.e_cnn) * mix)) < 0.02);
  }
}
