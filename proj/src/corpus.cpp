#include "slant/corpus.hpp"

#include <algorithm>
#include <limits>
#include <charconv>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "slant/csv.hpp"
#include "slant/error.hpp"

namespace slant::corpus {

using nlohmann::json;

std::string_view to_string(Source s) {
  switch (s) {
    case Source::Fnc: return "FNC";
    case Source::CnnMsnbc: return "CNN_MSNBC";
    case Source::Newspaper: return "NEWSPAPER";
  }
  return "?";
}

Source parse_source(std::string_view s) {
  if (s == "FNC") return Source::Fnc;
  if (s == "CNN_MSNBC" || s == "CNN") return Source::CnnMsnbc;
  if (s == "NEWSPAPER") return Source::Newspaper;
  throw ValidationError(fmt::format("unknown source '{}'", s));
}

std::string_view to_string(Endorsement e) {
  switch (e) {
    case Endorsement::Dem: return "DEM";
    case Endorsement::Rep: return "REP";
    case Endorsement::None: return "NONE";
  }
  return "?";
}

Endorsement parse_endorsement(std::string_view s) {
  if (s == "DEM") return Endorsement::Dem;
  if (s == "REP") return Endorsement::Rep;
  return Endorsement::None;
}

std::string Snippet::id() const { return fmt::format("{}#{}", doc_id, index); }

std::chrono::year_month_day parse_date(std::string_view iso) {
  auto field = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    if (pos + len > iso.size()) throw Error(fmt::format("bad date '{}'", iso));
    auto [p, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, v);
    if (ec != std::errc() || p != iso.data() + pos + len) throw Error(fmt::format("bad date '{}'", iso));
    return v;
  };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw Error(fmt::format("bad date '{}'", iso));
  std::chrono::year_month_day d{std::chrono::year{field(0, 4)},
                                std::chrono::month{static_cast<unsigned>(field(5, 2))},
                                std::chrono::day{static_cast<unsigned>(field(8, 2))}};
  if (!d.ok()) throw Error(fmt::format("bad date '{}'", iso));
  return d;
}

std::string format_date(const std::chrono::year_month_day& d) {
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                     static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

LoadResult load_corpus(const std::filesystem::path& path, Source source) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read corpus " + path.string());
  LoadResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      Document d;
      d.id = j.at("id").get<std::string>();
      d.date = parse_date(j.at("date").get<std::string>());
      d.text = j.at("text").get<std::string>();
      d.source = source;
      if (auto it = j.find("outlet_id"); it != j.end() && !it->is_null())
        d.outlet_id = it->get<std::string>();
      if (source == Source::Newspaper && !d.outlet_id) throw Error("article without outlet_id");
      if (!seen.insert(d.id).second) throw Error("duplicate id " + d.id);
      result.documents.push_back(std::move(d));
    } catch (const std::exception&) {
      ++result.skipped;
    }
  }
  if (result.skipped > 0)
    spdlog::warn("{}: skipped {} malformed record(s)", path.string(), result.skipped);
  return result;
}

void write_corpus(const std::filesystem::path& path, std::span<const Document> docs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& d : docs) {
    json j = {{"id", d.id}, {"date", format_date(d.date)}, {"text", d.text}};
    if (d.outlet_id) j["outlet_id"] = *d.outlet_id;
    out << j.dump() << '\n';
  }
}

std::vector<Snippet> segment(const Document& document, std::size_t window) {
  if (window == 0) throw ValidationError("segmentation window must be positive");
  std::vector<std::string> words;
  {
    std::istringstream ss(document.text);
    std::string w;
    while (ss >> w) words.push_back(std::move(w));
  }
  std::vector<Snippet> out;
  if (words.empty()) return out;

  std::optional<bool> label;
  if (document.source == Source::Fnc) label = true;
  if (document.source == Source::CnnMsnbc) label = false;

  auto emit = [&](std::size_t begin, std::size_t end) {
    Snippet s;
    s.doc_id = document.id;
    s.index = out.size();
    s.word_count = end - begin;
    for (std::size_t i = begin; i < end; ++i) {
      if (i > begin) s.text += ' ';
      s.text += words[i];
    }
    s.fnc = label;
    s.outlet_id = document.outlet_id;
    s.date = document.date;
    out.push_back(std::move(s));
  };

  const std::size_t n = words.size();
  if (n < window) {
    emit(0, n);
    return out;
  }
  std::size_t begin = 0;
  for (; begin + window <= n; begin += window) emit(begin, begin + window);
  const std::size_t rest = n - begin;
  if (rest > 0 && 2 * rest >= window) emit(begin, n);
  return out;
}

std::vector<Snippet> balance_sample(std::span<const Snippet> snippets, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    if (!snippets[i].fnc) throw Error("balance_sample: unlabeled snippet " + snippets[i].id());
    (*snippets[i].fnc ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty())
    throw Error("training corpus unusable: one source class has no snippets");
  auto& majority = pos.size() > neg.size() ? pos : neg;
  const std::size_t target = std::min(pos.size(), neg.size());
  std::vector<std::size_t> kept;
  std::mt19937_64 rng(seed);
  std::sample(majority.begin(), majority.end(), std::back_inserter(kept), target, rng);
  majority = std::move(kept);

  std::vector<std::size_t> all;
  all.reserve(2 * target);
  std::merge(pos.begin(), pos.end(), neg.begin(), neg.end(), std::back_inserter(all));
  std::vector<Snippet> out;
  out.reserve(all.size());
  for (auto i : all) out.push_back(snippets[i]);
  return out;
}

void write_snippets(const std::filesystem::path& path, std::span<const Snippet> snippets) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& s : snippets) {
    json j = {{"doc_id", s.doc_id}, {"index", s.index}, {"text", s.text}, {"date", format_date(s.date)}};
    j["label"] = s.fnc ? json(*s.fnc ? 1 : 0) : json(nullptr);
    j["outlet_id"] = s.outlet_id ? json(*s.outlet_id) : json(nullptr);
    out << j.dump() << '\n';
  }
}

std::vector<Snippet> read_snippets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read snippet store " + path.string());
  std::vector<Snippet> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = json::parse(line);
    Snippet s;
    s.doc_id = j.at("doc_id").get<std::string>();
    s.index = j.at("index").get<std::size_t>();
    s.text = j.at("text").get<std::string>();
    s.date = parse_date(j.at("date").get<std::string>());
    std::istringstream ss(s.text);
    std::string w;
    while (ss >> w) ++s.word_count;
    if (!j.at("label").is_null()) s.fnc = j.at("label").get<int>() == 1;
    if (!j.at("outlet_id").is_null()) s.outlet_id = j.at("outlet_id").get<std::string>();
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

const std::array<std::string, 13> kCountyFixed = {
    "county_id",    "state",       "fnc_position", "cnn_position", "msnbc_position",
    "fnc_rating",   "cnn_rating",  "msnbc_rating", "fnc_access",   "cnn_access",
    "msnbc_access", "population",  "surveyed_households"};

}  // namespace

PanelInputs load_panel_inputs(const std::filesystem::path& county_path,
                              const std::filesystem::path& circulation_path,
                              const std::filesystem::path& outlet_path) {
  PanelInputs in;

  auto ct = read_csv(county_path);
  std::vector<std::size_t> fixed;
  for (const auto& name : kCountyFixed) fixed.push_back(ct.require(name));
  std::vector<std::size_t> demo_cols;
  for (std::size_t c = 0; c < ct.header.size(); ++c)
    if (std::find(fixed.begin(), fixed.end(), c) == fixed.end()) demo_cols.push_back(c);
  std::set<std::string> county_ids;
  for (const auto& r : ct.rows) {
    CountyRecord rec;
    rec.county_id = r[fixed[0]];
    rec.state = r[fixed[1]];
    auto ctx = [&](std::size_t k) { return fmt::format("county {} {}", rec.county_id, kCountyFixed[k]); };
    for (std::size_t ch = 0; ch < 3; ++ch) {
      rec.positions[ch] = parse_double(r[fixed[2 + ch]], ctx(2 + ch));
      rec.ratings[ch] = parse_double(r[fixed[5 + ch]], ctx(5 + ch));
      rec.access_shares[ch] = parse_double(r[fixed[8 + ch]], ctx(8 + ch));
      if (rec.positions[ch] <= 0) throw Error(ctx(2 + ch) + " must be positive");
      if (rec.access_shares[ch] < 0 || rec.access_shares[ch] > 1) throw Error(ctx(8 + ch) + " outside [0,1]");
    }
    rec.population = parse_double(r[fixed[11]], ctx(11));
    rec.surveyed_households = parse_double(r[fixed[12]], ctx(12));
    for (auto c : demo_cols) {
      auto v = parse_optional_double(r[c]);
      rec.demographics[ct.header[c]] = v ? *v : std::numeric_limits<double>::quiet_NaN();
    }
    if (rec.state.empty()) throw Error("county " + rec.county_id + " has no state");
    if (!county_ids.insert(rec.county_id).second) throw Error("duplicate county " + rec.county_id);
    in.counties.push_back(std::move(rec));
  }

  auto ot = read_csv(outlet_path);
  const auto o_id = ot.require("outlet_id"), o_name = ot.require("name"),
             o_end = ot.require("endorsement_1996");
  const auto o_hq = ot.find("headquarters_county");
  std::set<std::string> outlet_ids;
  for (const auto& r : ot.rows) {
    Outlet o;
    o.outlet_id = r[o_id];
    o.name = r[o_name];
    o.endorsement_1996 = parse_endorsement(r[o_end]);
    if (o_hq && !r[*o_hq].empty()) o.headquarters_county = r[*o_hq];
    if (!outlet_ids.insert(o.outlet_id).second) throw Error("duplicate outlet " + o.outlet_id);
    in.outlets.push_back(std::move(o));
  }

  auto lt = read_csv(circulation_path);
  const auto l_out = lt.require("outlet_id"), l_cty = lt.require("county_id"),
             l_circ = lt.require("circulation");
  const auto l_95 = lt.find("circulation_1995");
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& r : lt.rows) {
    CirculationLink l;
    l.outlet_id = r[l_out];
    l.county_id = r[l_cty];
    if (!county_ids.count(l.county_id)) throw Error("circulation link references unknown county " + l.county_id);
    if (!outlet_ids.count(l.outlet_id)) throw Error("circulation link references unknown outlet " + l.outlet_id);
    l.circulation = parse_double(r[l_circ], "circulation");
    if (l.circulation < 0) throw Error("negative circulation for " + l.outlet_id + "/" + l.county_id);
    if (l_95) l.circulation_1995 = parse_optional_double(r[*l_95]);
    if (!pairs.emplace(l.outlet_id, l.county_id).second)
      throw Error(fmt::format("duplicate circulation link ({}, {})", l.outlet_id, l.county_id));
    in.links.push_back(std::move(l));
  }
  return in;
}

void write_panel_inputs(const PanelInputs& inputs, const std::filesystem::path& county_path,
                        const std::filesystem::path& circulation_path,
                        const std::filesystem::path& outlet_path) {
  {
    std::ofstream out(county_path);
    if (!out) throw Error("cannot write " + county_path.string());
    std::vector<std::string> header(kCountyFixed.begin(), kCountyFixed.end());
    std::vector<std::string> demo;
    if (!inputs.counties.empty())
      for (const auto& [k, v] : inputs.counties.front().demographics) demo.push_back(k);
    header.insert(header.end(), demo.begin(), demo.end());
    out << csv_line(header);
    for (const auto& c : inputs.counties) {
      std::vector<std::string> f = {c.county_id, c.state};
      for (double v : c.positions) f.push_back(format_double(v));
      for (double v : c.ratings) f.push_back(format_double(v));
      for (double v : c.access_shares) f.push_back(format_double(v));
      f.push_back(format_double(c.population));
      f.push_back(format_double(c.surveyed_households));
      for (const auto& k : demo) f.push_back(format_double(c.demographics.at(k)));
      out << csv_line(f);
    }
  }
  {
    std::ofstream out(circulation_path);
    if (!out) throw Error("cannot write " + circulation_path.string());
    out << csv_line({"outlet_id", "county_id", "circulation", "circulation_1995"});
    for (const auto& l : inputs.links)
      out << csv_line({l.outlet_id, l.county_id, format_double(l.circulation),
                       l.circulation_1995 ? format_double(*l.circulation_1995) : ""});
  }
  {
    std::ofstream out(outlet_path);
    if (!out) throw Error("cannot write " + outlet_path.string());
    out << csv_line({"outlet_id", "name", "endorsement_1996", "headquarters_county"});
    for (const auto& o : inputs.outlets)
      out << csv_line({o.outlet_id, o.name, std::string(to_string(o.endorsement_1996)),
                       o.headquarters_county.value_or("")});
  }
}

}  // namespace slant::corpus
