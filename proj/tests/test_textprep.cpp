#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "slant/textprep.hpp"

using namespace slant::textprep;

using Tokens = std::vector<std::string>;

TEST_CASE("normalize examples") {
  const StopwordSet sw{"the", "and", "us"};
  CHECK(normalize("The U.S. and Iraq!", sw) == Tokens{"iraq"});
  CHECK(normalize("", sw).empty());
  CHECK(normalize("War war WAR", {}) == Tokens{"war", "war", "war"});
  CHECK(normalize("tax-cut 2004 plan", {}) == Tokens{"tax", "cut", "plan"});
  CHECK(normalize("caf\xc3\xa9 na\xc3\xafve", {}) == Tokens{"cafe", "naive"});
}

TEST_CASE("normalize invariants and idempotence") {
  const auto& sw = default_stopwords();
  CHECK(sw.count("the"));
  CHECK(sw.size() > 100);
  std::mt19937_64 rng(11);
  const std::string alphabet = "abcdeEFG hij.,!?'0123\t\n-zZ";
  for (int rep = 0; rep < 300; ++rep) {
    std::string text;
    const auto len = rng() % 120;
    for (std::size_t i = 0; i < len; ++i) text += alphabet[rng() % alphabet.size()];
    const auto t = normalize(text, sw);
    std::string joined;
    for (const auto& tok : t) {
      CHECK(tok.size() >= 2);
      for (char c : tok) CHECK((c >= 'a' && c <= 'z'));
      CHECK(!sw.count(tok));
      joined += tok + " ";
    }
    CHECK(normalize(joined, sw) == t);
  }
}

TEST_CASE("stem examples") {
  CHECK(stem("homicide") == "homicid");
  CHECK(stem("detective") == "detect");
  CHECK(stem("political") == "polit");
  CHECK(stem("analyst") == "analyst");
  CHECK(stem("war") == "war");
  CHECK(stem("hannity") == "hanniti");
}

TEST_CASE("stem matches the reference vocabulary") {
  std::ifstream in(std::string(SLANT_TEST_DATA) + "/porter_vocab.tsv");
  REQUIRE(in);
  std::string line;
  std::size_t n = 0, bad = 0;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    const auto word = line.substr(0, tab), expected = line.substr(tab + 1);
    if (stem(word) != expected) {
      if (++bad <= 10) MESSAGE(word << " -> " << stem(word) << " expected " << expected);
    }
    ++n;
  }
  CHECK(n > 5000);
  CHECK(bad == 0);
}

TEST_CASE("to_bigrams") {
  CHECK(to_bigrams(Tokens{"sean", "hanniti", "show"}) == Tokens{"sean hanniti", "hanniti show"});
  CHECK(to_bigrams(Tokens{"war"}).empty());
  CHECK(to_bigrams(Tokens{}).empty());
  CHECK(to_bigrams(Tokens{"a", "b", "a", "b"}) == Tokens{"a b", "b a", "a b"});
  for (std::size_t n = 0; n < 10; ++n) CHECK(to_bigrams(Tokens(n, "x")).size() == (n ? n - 1 : 0));
  CHECK(bigrams_of("Sean Hannity's show", {}) == Tokens{"sean hanniti", "hanniti show"});
}
