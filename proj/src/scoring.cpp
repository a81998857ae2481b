#include "slant/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slant/csv.hpp"
#include "slant/error.hpp"

namespace slant::scoring {

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::All: return "ALL";
    case Subset::Local: return "LOCAL";
    case Subset::NonLocal: return "NONLOCAL";
  }
  return "?";
}

Subset parse_subset(std::string_view s) {
  if (s == "ALL") return Subset::All;
  if (s == "LOCAL") return Subset::Local;
  if (s == "NONLOCAL") return Subset::NonLocal;
  throw ValidationError(fmt::format("unknown subset '{}'", s));
}

std::vector<SnippetScore> score_corpus(const classifier::LogisticModel& model,
                                       const features::FeatureMatrix& X, std::span<const SnippetKey> keys) {
  if (static_cast<std::size_t>(X.X.rows()) != keys.size()) throw Error("score_corpus: rows and keys differ");
  const Eigen::VectorXd p = classifier::predict_proba(model, X);
  std::vector<SnippetScore> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out[i].snippet_id = keys[i].snippet_id;
    out[i].outlet_id = keys[i].outlet_id;
    out[i].p_fnc = p[static_cast<Eigen::Index>(i)];
  }
  return out;
}

std::vector<SlantRecord> aggregate_slant(std::span<const SnippetScore> scores, Subset subset) {
  struct Acc {
    double sum = 0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& s : scores) {
    if (s.outlet_id.empty()) throw Error("aggregate_slant: snippet " + s.snippet_id + " has no outlet");
    auto& a = acc[s.outlet_id];
    const bool keep = subset == Subset::All || (s.is_local && *s.is_local == (subset == Subset::Local));
    if (!keep) continue;
    a.sum += s.p_fnc;
    ++a.n;
  }
  std::vector<SlantRecord> out;
  std::size_t dropped = 0;
  for (const auto& [outlet, a] : acc) {
    if (a.n == 0) {
      ++dropped;
      continue;
    }
    out.push_back({outlet, a.sum / static_cast<double>(a.n), a.n, subset});
  }
  if (dropped > 0)
    spdlog::warn("aggregate_slant: {} outlet(s) have no {} snippets and were omitted", dropped, to_string(subset));
  return out;
}

std::vector<CountySlant> county_slant(std::span<const SlantRecord> slants,
                                      std::span<const corpus::CirculationLink> links) {
  std::map<std::string, double> by_outlet;
  for (const auto& s : slants) by_outlet[s.outlet_id] = s.slant;
  std::map<std::string, std::pair<double, double>> acc;  // county -> (sum w*s, sum w)
  for (const auto& l : links) {
    auto it = by_outlet.find(l.outlet_id);
    if (it == by_outlet.end()) continue;
    auto& a = acc[l.county_id];
    a.first += l.circulation * it->second;
    a.second += l.circulation;
  }
  std::vector<CountySlant> out;
  std::size_t dropped = 0;
  for (const auto& [county, a] : acc) {
    if (a.second <= 0) {
      ++dropped;
      continue;
    }
    out.push_back({county, a.first / a.second, a.second});
  }
  if (dropped > 0) spdlog::warn("county_slant: {} county(ies) with zero circulation omitted", dropped);
  return out;
}

std::map<std::string, LanguageControls> language_controls(std::span<const corpus::Document> articles) {
  struct Acc {
    std::set<std::string> types;
    double words = 0, chars = 0, sentences = 0, articles = 0, article_chars = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& d : articles) {
    if (!d.outlet_id) continue;
    auto& a = acc[*d.outlet_id];
    a.articles += 1;
    a.article_chars += static_cast<double>(d.text.size());
    std::istringstream ss(d.text);
    std::string w;
    double sentences = 0;
    while (ss >> w) {
      a.words += 1;
      a.chars += static_cast<double>(w.size());
      if (w.back() == '.' || w.back() == '!' || w.back() == '?') sentences += 1;
      std::string lw;
      for (char c : w)
        if (std::isalpha(static_cast<unsigned char>(c))) lw += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (!lw.empty()) a.types.insert(lw);
    }
    a.sentences += std::max(1.0, sentences);
  }
  std::map<std::string, LanguageControls> out;
  for (const auto& [outlet, a] : acc) {
    LanguageControls c;
    if (a.words > 0) {
      c.vocabulary_size = static_cast<double>(a.types.size()) / a.words;
      c.word_length = a.chars / a.words;
      c.sentence_length = a.words / a.sentences;
    }
    c.article_length = a.article_chars / a.articles;
    out.emplace(outlet, c);
  }
  return out;
}

void write_scores(const std::filesystem::path& path, std::span<const SnippetScore> scores) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << csv_line({"snippet_id", "outlet_id", "p_fnc", "is_local"});
  for (const auto& s : scores)
    out << csv_line({s.snippet_id, s.outlet_id, format_double(s.p_fnc),
                     s.is_local ? (*s.is_local ? "1" : "0") : ""});
}

std::vector<SnippetScore> read_scores(const std::filesystem::path& path) {
  auto t = read_csv(path);
  const auto c_id = t.require("snippet_id"), c_out = t.require("outlet_id"), c_p = t.require("p_fnc"),
             c_loc = t.require("is_local");
  std::vector<SnippetScore> out;
  for (const auto& r : t.rows) {
    SnippetScore s;
    s.snippet_id = r[c_id];
    s.outlet_id = r[c_out];
    s.p_fnc = parse_double(r[c_p], "p_fnc");
    if (!r[c_loc].empty()) s.is_local = r[c_loc] == "1";
    out.push_back(std::move(s));
  }
  return out;
}

void write_slants(const std::filesystem::path& path, std::span<const SlantRecord> slants) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << csv_line({"outlet_id", "subset", "slant", "n"});
  for (const auto& s : slants)
    out << csv_line({s.outlet_id, std::string(to_string(s.subset)), format_double(s.slant), std::to_string(s.n_snippets)});
}

std::vector<SlantRecord> read_slants(const std::filesystem::path& path) {
  auto t = read_csv(path);
  const auto c_out = t.require("outlet_id"), c_sub = t.require("subset"), c_s = t.require("slant"),
             c_n = t.require("n");
  std::vector<SlantRecord> out;
  for (const auto& r : t.rows)
    out.push_back({r[c_out], parse_double(r[c_s], "slant"), std::stoull(r[c_n]), parse_subset(r[c_sub])});
  return out;
}

}  // namespace slant::scoring
