#include <algorithm>
#include <random>

#include "doctest.h"
#include "slant/error.hpp"
#include "slant/scoring.hpp"
#include "test_util.hpp"

using namespace slant;
using namespace slant::scoring;

namespace {

SnippetScore sc(const std::string& outlet, double p, std::optional<bool> local = std::nullopt) {
  static int id = 0;
  return {"s" + std::to_string(id++), outlet, p, local, std::nullopt};
}

double slant_of(const std::vector<SlantRecord>& r, const std::string& outlet) {
  for (const auto& s : r)
    if (s.outlet_id == outlet) return s.slant;
  return -1;
}

}  // namespace

TEST_CASE("score_corpus") {
  features::FeatureSelector sel = features::select_top_k({"a b", "c d"}, std::vector<double>{2, 1}, 2);
  sel.set_scale({1, 1});
  classifier::LogisticModel null;
  null.psi = Eigen::VectorXd::Zero(2);
  null.selector_id = sel.id();
  const std::vector<features::TermSequence> docs{{"a b"}, {"c d", "c d"}, {}};
  const auto X = features::vectorize_all(docs, sel);
  const std::vector<SnippetKey> keys{{"1", "o"}, {"2", "o"}, {"3", "p"}};
  auto s = score_corpus(null, X, keys);
  REQUIRE(s.size() == 3);
  for (const auto& x : s) CHECK(x.p_fnc == 0.5);

  auto empty = score_corpus(null, features::vectorize_all(std::vector<features::TermSequence>{}, sel),
                            std::span<const SnippetKey>{});
  CHECK(empty.empty());

  classifier::LogisticModel strong = null;
  strong.psi << 1000, -1000;
  for (const auto& x : score_corpus(strong, X, keys)) CHECK((x.p_fnc > 0 && x.p_fnc < 1));

  auto other = sel;
  other.set_scale({2, 2});
  CHECK_THROWS_AS(score_corpus(null, features::vectorize_all(docs, other), keys), Error);
}

TEST_CASE("aggregate_slant") {
  std::vector<SnippetScore> s{sc("o", 0.2), sc("o", 0.4), sc("o", 0.6)};
  auto r = aggregate_slant(s, Subset::All);
  REQUIRE(r.size() == 1);
  CHECK(r[0].slant == doctest::Approx(0.4));
  CHECK(r[0].n_snippets == 3);
  CHECK(aggregate_slant(s, Subset::Local).empty());

  std::vector<SnippetScore> two{sc("b", 0.9), sc("a", 0.1), sc("b", 0.7)};
  auto t = aggregate_slant(two, Subset::All);
  REQUIRE(t.size() == 2);
  CHECK(t[0].outlet_id == "a");
  CHECK(slant_of(t, "a") == doctest::Approx(0.1));
  CHECK(slant_of(t, "b") == doctest::Approx(0.8));
}

TEST_CASE("aggregation properties") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<SnippetScore> s;
    for (int i = 0; i < 30; ++i) s.push_back(sc("o" + std::to_string(rng() % 3), u(rng), rng() % 2 == 0));
    auto all = aggregate_slant(s, Subset::All);
    auto shuffled = s;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto again = aggregate_slant(shuffled, Subset::All);
    REQUIRE(all.size() == again.size());
    auto local = aggregate_slant(s, Subset::Local), nonlocal = aggregate_slant(s, Subset::NonLocal);
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(all[i].slant == doctest::Approx(again[i].slant).epsilon(1e-12));
      double lo = 1, hi = 0;
      for (const auto& x : s)
        if (x.outlet_id == all[i].outlet_id) lo = std::min(lo, x.p_fnc), hi = std::max(hi, x.p_fnc);
      CHECK(all[i].slant >= lo - 1e-15);
      CHECK(all[i].slant <= hi + 1e-15);
      double num = 0, den = 0;
      for (const auto* part : {&local, &nonlocal})
        for (const auto& r : *part)
          if (r.outlet_id == all[i].outlet_id) num += r.slant * static_cast<double>(r.n_snippets), den += static_cast<double>(r.n_snippets);
      CHECK(den == static_cast<double>(all[i].n_snippets));
      CHECK(num / den == doctest::Approx(all[i].slant).epsilon(1e-12));
    }
  }
}

TEST_CASE("county_slant") {
  std::vector<SlantRecord> r{{"o1", 0.4, 5, Subset::All}, {"o2", 0.6, 5, Subset::All}};
  std::vector<corpus::CirculationLink> links{{"o1", "c1", 100, std::nullopt}, {"o2", "c1", 300, std::nullopt},
                                             {"o1", "c2", 10, std::nullopt}, {"o1", "c3", 5, std::nullopt},
                                             {"o2", "c3", 5, std::nullopt}, {"o2", "c4", 0, std::nullopt}};
  auto c = county_slant(r, links);
  REQUIRE(c.size() == 3);
  CHECK(c[0].county_id == "c1");
  CHECK(c[0].slant == doctest::Approx(0.55));
  CHECK(c[1].slant == doctest::Approx(0.4));
  CHECK(c[2].slant == doctest::Approx(0.5));
  for (auto& l : links) l.circulation *= 7.5;
  auto scaled = county_slant(r, links);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(scaled[i].slant == doctest::Approx(c[i].slant).epsilon(1e-14));
}

TEST_CASE("language controls") {
  corpus::Document a;
  a.id = "1";
  a.outlet_id = "o";
  a.text = "Big cat. Big dog!";
  auto l = language_controls(std::vector<corpus::Document>{a});
  REQUIRE(l.count("o"));
  CHECK(l["o"].vocabulary_size == doctest::Approx(3.0 / 4.0));
  CHECK(l["o"].word_length == doctest::Approx(3.5));  // punctuation counts toward length
  CHECK(l["o"].sentence_length == doctest::Approx(2.0));
  CHECK(l["o"].article_length == doctest::Approx(17.0));
}

TEST_CASE("score and slant files round trip") {
  slant_test::TempDir tmp("scoring");
  std::vector<SlantRecord> r{{"o,1", 0.123456789, 5, Subset::All}, {"o,1", 0.2, 2, Subset::Local}};
  write_slants(tmp / "s.csv", r);
  auto back = read_slants(tmp / "s.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].outlet_id == "o,1");
  CHECK(back[0].slant == r[0].slant);
  CHECK(back[1].subset == Subset::Local);
  std::vector<SnippetScore> s{sc("o", 0.25, true), sc("p", 0.75)};
  write_scores(tmp / "p.csv", s);
  auto sb = read_scores(tmp / "p.csv");
  REQUIRE(sb.size() == 2);
  CHECK(sb[0].is_local == std::optional<bool>(true));
  CHECK(!sb[1].is_local);
  CHECK(sb[1].p_fnc == 0.75);
}
