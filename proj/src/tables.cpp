#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slant/csv.hpp"
#include "slant/econometrics.hpp"
#include "slant/error.hpp"

namespace slant::econometrics {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string> kLanguage = {"vocabulary_size", "word_length", "sentence_length", "article_length"};
const std::vector<std::string> kChannel = {"fnc_access", "cnn_access", "msnbc_access"};
}  // namespace

Panel build_panel(const corpus::PanelInputs& inputs, std::span<const scoring::SlantRecord> slants,
                  const std::map<std::string, scoring::LanguageControls>* language,
                  const std::map<std::string, Eigen::VectorXd>* topics, const PanelOptions& options) {
  std::map<std::string, const corpus::CountyRecord*> counties;
  for (const auto& c : inputs.counties) counties.emplace(c.county_id, &c);
  std::map<std::string, const corpus::Outlet*> outlets;
  for (const auto& o : inputs.outlets) outlets.emplace(o.outlet_id, &o);
  std::map<std::pair<std::string, scoring::Subset>, double> slant;
  for (const auto& s : slants) slant[{s.outlet_id, s.subset}] = s.slant;

  Panel panel;
  std::set<std::string> demo;
  for (const auto& c : inputs.counties)
    for (const auto& [k, v] : c.demographics)
      if (k != options.vote_column) demo.insert(k);
  panel.groups.demographics.assign(demo.begin(), demo.end());
  panel.groups.channel = kChannel;
  if (language) panel.groups.language = kLanguage;
  std::size_t n_topics = 0;
  if (topics && !topics->empty()) {
    n_topics = static_cast<std::size_t>(topics->begin()->second.size());
    // Shares sum to one, so the last topic is implied by the others.
    for (std::size_t k = 0; k + 1 < n_topics; ++k) panel.groups.topics.push_back(fmt::format("topic_{}", k));
  }

  std::vector<const corpus::CirculationLink*> links;
  for (const auto& l : inputs.links) links.push_back(&l);
  std::sort(links.begin(), links.end(), [](auto* a, auto* b) {
    return std::tie(a->outlet_id, a->county_id) < std::tie(b->outlet_id, b->county_id);
  });
  std::size_t missing_slant = 0;
  for (const auto* l : links) {
    auto st = slant.find({l->outlet_id, scoring::Subset::All});
    if (st == slant.end()) {
      ++missing_slant;
      continue;
    }
    const auto cit = counties.find(l->county_id);
    const auto oit = outlets.find(l->outlet_id);
    if (cit == counties.end()) throw Error("circulation link names unknown county " + l->county_id);
    if (oit == outlets.end()) throw Error("circulation link names unknown outlet " + l->outlet_id);
    const auto& c = *cit->second;
    const auto& o = *oit->second;
    PanelRow r;
    r.outlet_id = o.outlet_id;
    r.newspaper = o.name.empty() ? o.outlet_id : o.name;
    r.county_id = c.county_id;
    r.state = c.state;
    r.slant = st->second;
    if (auto it = slant.find({l->outlet_id, scoring::Subset::Local}); it != slant.end()) r.slant_local = it->second;
    if (auto it = slant.find({l->outlet_id, scoring::Subset::NonLocal}); it != slant.end()) r.slant_nonlocal = it->second;
    r.viewership = c.ratings;
    r.position = c.positions;
    for (const auto& name : panel.groups.demographics) {
      auto it = c.demographics.find(name);
      r.controls[name] = it == c.demographics.end() ? kNaN : it->second;
    }
    for (std::size_t k = 0; k < 3; ++k) r.controls[kChannel[k]] = c.access_shares[k];
    if (language) {
      auto it = language->find(o.outlet_id);
      const bool have = it != language->end();
      r.controls["vocabulary_size"] = have ? it->second.vocabulary_size : kNaN;
      r.controls["word_length"] = have ? it->second.word_length : kNaN;
      r.controls["sentence_length"] = have ? it->second.sentence_length : kNaN;
      r.controls["article_length"] = have ? it->second.article_length : kNaN;
    }
    if (n_topics > 0) {
      auto it = topics->find(o.outlet_id);
      for (std::size_t k = 0; k + 1 < n_topics; ++k)
        r.controls[fmt::format("topic_{}", k)] =
            it == topics->end() ? kNaN : it->second[static_cast<Eigen::Index>(k)];
    }
    r.circulation = l->circulation;
    r.circulation_1995 = l->circulation_1995;
    r.population = c.population;
    r.surveyed_households = c.surveyed_households;
    r.headquarters = o.headquarters_county && *o.headquarters_county == c.county_id;
    r.endorsement = o.endorsement_1996;
    if (auto it = c.demographics.find(options.vote_column); it != c.demographics.end()) r.rep_vote_1996 = it->second;
    panel.rows.push_back(std::move(r));
  }
  if (missing_slant > 0) spdlog::warn("build_panel: {} circulation link(s) without outlet slant dropped", missing_slant);
  return panel;
}

std::size_t Table::rows() const {
  if (!numeric.empty()) return static_cast<std::size_t>(numeric.begin()->second.size());
  if (!text.empty()) return text.begin()->second.size();
  return 0;
}

bool Table::has(const std::string& name) const { return numeric.count(name) || text.count(name); }

const Eigen::VectorXd& Table::num(const std::string& name) const {
  auto it = numeric.find(name);
  if (it == numeric.end()) throw ValidationError("unknown numeric column '" + name + "'");
  return it->second;
}

const std::vector<std::string>& Table::str(const std::string& name) const {
  auto it = text.find(name);
  if (it == text.end()) throw ValidationError("unknown text column '" + name + "'");
  return it->second;
}

std::vector<std::string> Table::labels(const std::string& name) const {
  if (auto it = text.find(name); it != text.end()) return it->second;
  const auto& v = num(name);
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(format_double(v[i]));
  return out;
}

Table Table::select(const std::vector<std::size_t>& rows) const {
  Table t;
  t.groups = groups;
  for (const auto& [k, v] : numeric) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) s[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
    t.numeric.emplace(k, std::move(s));
  }
  for (const auto& [k, v] : text) {
    std::vector<std::string> s;
    for (auto r : rows) s.push_back(v[r]);
    t.text.emplace(k, std::move(s));
  }
  return t;
}

Table panel_table(const Panel& panel) {
  const auto n = static_cast<Eigen::Index>(panel.rows.size());
  Table t;
  t.groups = panel.groups;
  auto col = [&](const std::string& name, auto&& f) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = f(panel.rows[static_cast<std::size_t>(i)]);
    t.numeric[name] = std::move(v);
  };
  auto txt = [&](const std::string& name, auto&& f) {
    std::vector<std::string> v;
    for (const auto& r : panel.rows) v.push_back(f(r));
    t.text[name] = std::move(v);
  };
  using R = const PanelRow&;
  col("slant", [](R r) { return r.slant; });
  col("slant_local", [](R r) { return r.slant_local.value_or(kNaN); });
  col("slant_nonlocal", [](R r) { return r.slant_nonlocal.value_or(kNaN); });
  for (const std::string base : {"viewership", "position"}) {
    const bool view = base == "viewership";
    auto tri = [view](R r) -> const std::array<double, 3>& { return view ? r.viewership : r.position; };
    col(base, [&](R r) { return relative_measure(tri(r)[0], tri(r)[1], tri(r)[2]); });
    col(base + "_fnc_cnn", [&](R r) { return tri(r)[0] - tri(r)[1]; });
    col(base + "_fnc_msnbc", [&](R r) { return tri(r)[0] - tri(r)[2]; });
    col(base + "_fnc", [&](R r) { return tri(r)[0]; });
    col(base + "_cnn", [&](R r) { return tri(r)[1]; });
    col(base + "_msnbc", [&](R r) { return tri(r)[2]; });
    col(base + "_cnn_msnbc", [&](R r) { return 0.5 * (tri(r)[1] + tri(r)[2]); });
  }
  // Circulation share of each row within its county.
  std::map<std::string, double> county_circ;
  for (const auto& r : panel.rows) county_circ[r.county_id] += r.circulation;
  auto share = [&](R r) {
    const double tot = county_circ[r.county_id];
    return tot > 0 ? r.circulation / tot : kNaN;
  };
  col("circulation", [](R r) { return r.circulation; });
  col("circulation_1995", [](R r) { return r.circulation_1995.value_or(kNaN); });
  col("share_surveyed", [&](R r) { return share(r) * r.surveyed_households; });
  col("share_population", [&](R r) { return share(r) * r.population; });
  col("unit", [](R) { return 1.0; });
  col("headquarters", [](R r) { return r.headquarters ? 1.0 : 0.0; });
  col("rep_vote_1996", [](R r) { return r.rep_vote_1996; });
  std::set<std::string> controls;
  for (const auto& r : panel.rows)
    for (const auto& [k, v] : r.controls) controls.insert(k);
  for (const auto& name : controls)
    col(name, [&](R r) {
      auto it = r.controls.find(name);
      return it == r.controls.end() ? kNaN : it->second;
    });
  txt("outlet_id", [](R r) { return r.outlet_id; });
  txt("newspaper", [](R r) { return r.newspaper; });
  txt("county_id", [](R r) { return r.county_id; });
  txt("state", [](R r) { return r.state; });
  txt("endorsement", [](R r) { return std::string(corpus::to_string(r.endorsement)); });
  return t;
}

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::Ols: return "ols";
    case Kind::FirstStage: return "first_stage";
    case Kind::ReducedForm: return "reduced_form";
    case Kind::Tsls: return "tsls";
    case Kind::Identification: return "identification";
  }
  return "?";
}

Kind parse_kind(std::string_view s) {
  for (Kind k : {Kind::Ols, Kind::FirstStage, Kind::ReducedForm, Kind::Tsls, Kind::Identification})
    if (to_string(k) == s) return k;
  throw ValidationError(fmt::format("unknown regression kind '{}'", s));
}

RegressionSpec parse_spec(const json& j) {
  if (!j.is_object()) throw ValidationError("regression spec must be an object");
  static const std::set<std::string> known = {"name", "kind", "outcome", "endogenous", "instruments",
                                              "fe", "controls", "weight", "clusters", "standardize",
                                              "weighted_sd", "filters"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError(fmt::format("unknown regression spec key '{}'", k));
  RegressionSpec s;
  try {
    s.name = j.value("name", "");
    if (j.contains("kind")) s.kind = parse_kind(j["kind"].get<std::string>());
    s.outcome = j.value("outcome", s.outcome);
    s.endogenous = j.value("endogenous", s.endogenous);
    if (j.contains("instruments")) s.instruments = j["instruments"].get<std::vector<std::string>>();
    if (j.contains("fe")) {
      if (j["fe"].is_null()) s.fe.reset();
      else s.fe = j["fe"].get<std::string>();
    }
    if (j.contains("controls")) s.controls = j["controls"].get<std::vector<std::string>>();
    s.weight = j.value("weight", s.weight);
    if (j.contains("clusters")) s.clusters = j["clusters"].get<std::vector<std::string>>();
    s.standardize = j.value("standardize", s.standardize);
    s.weighted_sd = j.value("weighted_sd", s.weighted_sd);
    if (j.contains("filters")) {
      for (const auto& f : j["filters"]) {
        RowFilter rf;
        rf.column = f.at("column").get<std::string>();
        if (f.contains("equals")) rf.equals = f["equals"].is_string() ? f["equals"].get<std::string>() : f["equals"].dump();
        if (f.contains("tercile")) rf.tercile = f["tercile"].get<int>();
        if (rf.equals.has_value() == rf.tercile.has_value())
          throw ValidationError("filter on '" + rf.column + "' needs exactly one of equals/tercile");
        if (rf.tercile && (*rf.tercile < 1 || *rf.tercile > 3)) throw ValidationError("tercile must be 1, 2 or 3");
        s.filters.push_back(std::move(rf));
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("regression spec '{}': {}", s.name, e.what()));
  }
  if (s.name.empty()) throw ValidationError("regression spec needs a name");
  if (s.clusters.size() > 2) throw ValidationError("at most two cluster dimensions");
  if ((s.kind == Kind::Tsls || s.kind == Kind::FirstStage || s.kind == Kind::ReducedForm ||
       s.kind == Kind::Identification) && s.instruments.empty())
    throw ValidationError(fmt::format("spec '{}' needs at least one instrument", s.name));
  return s;
}

json to_json(const RegressionSpec& s) {
  json j = {{"name", s.name},          {"kind", std::string(to_string(s.kind))},
            {"outcome", s.outcome},    {"endogenous", s.endogenous},
            {"instruments", s.instruments}, {"controls", s.controls},
            {"weight", s.weight},      {"clusters", s.clusters},
            {"standardize", s.standardize}, {"weighted_sd", s.weighted_sd}};
  j["fe"] = s.fe ? json(*s.fe) : json(nullptr);
  j["filters"] = json::array();
  for (const auto& f : s.filters) {
    json jf = {{"column", f.column}};
    if (f.equals) jf["equals"] = *f.equals;
    if (f.tercile) jf["tercile"] = *f.tercile;
    j["filters"].push_back(jf);
  }
  return j;
}

namespace {

std::vector<std::string> expand_controls(const Table& t, const std::vector<std::string>& controls) {
  std::vector<std::string> out;
  auto add = [&](const std::string& c) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  };
  for (const auto& c : controls) {
    if (c.empty() || c[0] != '@') {
      add(c);
      continue;
    }
    const std::vector<std::string>* g = nullptr;
    if (c == "@demographics") g = &t.groups.demographics;
    else if (c == "@channel") g = &t.groups.channel;
    else if (c == "@language") g = &t.groups.language;
    else if (c == "@topics") g = &t.groups.topics;
    else throw ValidationError("unknown control group " + c);
    if (g->empty()) throw ValidationError("control group " + c + " is not available for this panel");
    for (const auto& x : *g) add(x);
  }
  return out;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<std::size_t> filter_rows(const Table& t, const std::vector<RowFilter>& filters) {
  std::vector<bool> keep(t.rows(), true);
  for (const auto& f : filters) {
    if (f.equals) {
      const auto labels = t.labels(f.column);
      std::string target = *f.equals;
      if (!t.text.count(f.column)) target = format_double(parse_double(target, "filter value"));
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != target) keep[i] = false;
    } else {
      const auto& v = t.num(f.column);
      std::vector<double> present;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isnan(v[i])) present.push_back(v[i]);
      if (present.empty()) throw Error("tercile filter on an empty column " + f.column);
      const double q1 = quantile(present, 1.0 / 3), q2 = quantile(present, 2.0 / 3);
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = v[i];
        int tc = std::isnan(x) ? 0 : (x <= q1 ? 1 : (x <= q2 ? 2 : 3));
        if (tc != *f.tercile) keep[static_cast<std::size_t>(i)] = false;
      }
    }
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) rows.push_back(i);
  return rows;
}

Eigen::MatrixXd gather(const Table& t, const std::vector<std::string>& names, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto& v = t.num(names[j]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[static_cast<Eigen::Index>(rows[i])];
  }
  return m;
}

}  // namespace

Design make_design(const Table& table, const RegressionSpec& spec, std::size_t* dropped) {
  std::string y_name = spec.outcome;
  std::vector<std::string> endog{spec.endogenous}, instruments;
  switch (spec.kind) {
    case Kind::Ols: break;
    case Kind::FirstStage:
      y_name = spec.endogenous;
      endog = spec.instruments;
      break;
    case Kind::ReducedForm:
    case Kind::Identification:
      endog = spec.instruments;
      break;
    case Kind::Tsls: instruments = spec.instruments; break;
  }
  std::vector<std::string> controls = expand_controls(table, spec.controls);
  std::erase_if(controls, [&](const std::string& c) {
    return c == y_name || std::find(endog.begin(), endog.end(), c) != endog.end() ||
           std::find(instruments.begin(), instruments.end(), c) != instruments.end();
  });

  std::vector<std::string> needed{y_name, spec.weight};
  needed.insert(needed.end(), endog.begin(), endog.end());
  needed.insert(needed.end(), instruments.begin(), instruments.end());
  needed.insert(needed.end(), controls.begin(), controls.end());
  for (const auto& c : needed)
    if (!table.numeric.count(c)) throw ValidationError(fmt::format("spec '{}': unknown numeric column '{}'", spec.name, c));
  if (spec.fe && !table.has(*spec.fe)) throw ValidationError(fmt::format("spec '{}': unknown FE column '{}'", spec.name, *spec.fe));
  for (const auto& c : spec.clusters)
    if (!table.has(c)) throw ValidationError(fmt::format("spec '{}': unknown cluster column '{}'", spec.name, c));

  std::vector<std::size_t> rows;
  std::size_t n_missing = 0, n_zero = 0;
  for (auto i : filter_rows(table, spec.filters)) {
    bool ok = true;
    for (const auto& c : needed)
      if (!std::isfinite(table.numeric.at(c)[static_cast<Eigen::Index>(i)])) ok = false;
    if (!ok) {
      ++n_missing;
      continue;
    }
    const double w = table.numeric.at(spec.weight)[static_cast<Eigen::Index>(i)];
    if (w < 0) throw ValidationError(fmt::format("spec '{}': negative weight in column '{}'", spec.name, spec.weight));
    if (w == 0) {
      ++n_zero;
      continue;
    }
    rows.push_back(i);
  }
  if (n_missing > 0) spdlog::info("spec '{}': {} row(s) with missing values excluded", spec.name, n_missing);
  if (n_zero > 0) spdlog::info("spec '{}': {} zero-weight row(s) excluded", spec.name, n_zero);
  if (dropped) *dropped = n_missing;
  if (rows.empty()) throw Error(fmt::format("spec '{}': empty estimation sample", spec.name));

  Design d;
  d.y = gather(table, {y_name}, rows).col(0);
  d.endog = gather(table, endog, rows);
  d.exog = gather(table, controls, rows);
  d.instruments = gather(table, instruments, rows);
  d.w = gather(table, {spec.weight}, rows).col(0);
  d.endog_names = endog;
  d.exog_names = controls;
  d.instrument_names = instruments;
  if (spec.fe) {
    const auto all = table.labels(*spec.fe);
    std::vector<std::string> sub;
    for (auto i : rows) sub.push_back(all[i]);
    d.groups = encode(sub);
    std::set<std::string> uniq(sub.begin(), sub.end());
    d.group_labels.assign(uniq.begin(), uniq.end());
    d.n_groups = static_cast<int>(uniq.size());
  } else {
    d.groups.assign(rows.size(), 0);
    d.group_labels = {"_cons"};
    d.n_groups = 1;
  }
  for (const auto& c : spec.clusters) {
    const auto all = table.labels(c);
    std::vector<std::string> sub;
    for (auto i : rows) sub.push_back(all[i]);
    d.clusters.push_back(encode(sub));
  }
  if (spec.standardize && spec.kind != Kind::Identification) {
    const Eigen::VectorXd* w = spec.weighted_sd ? &d.w : nullptr;
    d.y = standardize(d.y, w);
    for (Eigen::Index j = 0; j < d.endog.cols(); ++j) d.endog.col(j) = standardize(d.endog.col(j), w);
    for (Eigen::Index j = 0; j < d.instruments.cols(); ++j) d.instruments.col(j) = standardize(d.instruments.col(j), w);
  }
  return d;
}

FitResult identification_step(const Table& table, const RegressionSpec& spec) {
  RegressionSpec s = spec;
  s.kind = Kind::Identification;
  std::size_t dropped = 0;
  Design d = make_design(table, s, &dropped);
  // Step 1: prediction of the outcome from the covariates and FE only.
  Design step1 = d;
  step1.endog.resize(d.y.size(), 0);
  step1.endog_names.clear();
  step1.instruments.resize(d.y.size(), 0);
  step1.instrument_names.clear();
  const FitResult first = wls(step1);
  // Step 2: prediction on the instrument(s).
  Design step2 = d;
  step2.y = first.fitted;
  step2.exog.resize(d.y.size(), 0);
  step2.exog_names.clear();
  if (spec.standardize) {
    const Eigen::VectorXd* w = spec.weighted_sd ? &d.w : nullptr;
    step2.y = standardize(step2.y, w);
    for (Eigen::Index j = 0; j < step2.endog.cols(); ++j) step2.endog.col(j) = standardize(step2.endog.col(j), w);
  }
  FitResult fit = wls(step2);
  fit.dropped = dropped;
  return fit;
}

IdentificationResult identification_check(const Table& table, const RegressionSpec& spec) {
  RegressionSpec v = spec, s = spec;
  v.outcome = spec.endogenous;
  s.outcome = spec.outcome;
  return {identification_step(table, v), identification_step(table, s)};
}

FitResult run(const Table& table, const RegressionSpec& spec) {
  if (spec.kind == Kind::Identification) return identification_step(table, spec);
  std::size_t dropped = 0;
  const Design d = make_design(table, spec, &dropped);
  FitResult fit;
  if (spec.kind == Kind::Tsls) {
    fit = tsls(d);
  } else {
    fit = wls(d);
    if (spec.kind == Kind::FirstStage) {
      const auto l = static_cast<Eigen::Index>(spec.instruments.size());
      FirstStage st;
      st.delta = fit.beta.head(l);
      st.cov = fit.cov.topLeftCorner(l, l);
      fit.first_stage = st;
      fit.first_stage->f = first_stage_f(fit);
      fit.weak = fit.first_stage->f < 10;
    }
  }
  fit.dropped = dropped;
  return fit;
}

std::vector<TableRow> run_table(const Table& table, std::span<const RegressionSpec> specs) {
  std::vector<TableRow> out;
  for (const auto& s : specs) {
    TableRow r;
    r.name = s.name;
    r.kind = s.kind;
    r.fit = run(table, s);
    r.outcome = s.kind == Kind::FirstStage ? s.endogenous : s.outcome;
    r.regressor = r.fit.names.empty() ? "" : r.fit.names[0];
    out.push_back(std::move(r));
  }
  return out;
}

void write_table_csv(const std::filesystem::path& path, std::span<const TableRow> rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << csv_line({"name", "kind", "outcome", "regressor", "theta", "se", "ci_low", "ci_high", "kp_f", "n",
                   "clusters_1", "clusters_2", "weak"});
  for (const auto& r : rows) {
    const auto& f = r.fit;
    const std::string kp = f.first_stage ? format_double(f.first_stage->f) : "";
    out << csv_line({r.name, std::string(to_string(r.kind)), r.outcome, r.regressor, format_double(f.theta),
                     format_double(f.se), format_double(f.theta - 1.96 * f.se), format_double(f.theta + 1.96 * f.se),
                     kp, std::to_string(f.n), f.n_clusters.size() > 0 ? std::to_string(f.n_clusters[0]) : "",
                     f.n_clusters.size() > 1 ? std::to_string(f.n_clusters[1]) : "", f.weak ? "1" : "0"});
  }
}

namespace {
json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}
}  // namespace

void write_table_json(const std::filesystem::path& path, std::span<const TableRow> rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    const auto& f = r.fit;
    json j = {{"name", r.name}, {"kind", std::string(to_string(r.kind))}, {"outcome", r.outcome},
              {"regressor", r.regressor}, {"theta", f.theta}, {"se", f.se}, {"n", f.n},
              {"n_clusters", f.n_clusters}, {"dropped", f.dropped}, {"names", f.names},
              {"clipped", f.clipped}, {"weak", f.weak}};
    j["beta"] = std::vector<double>(f.beta.data(), f.beta.data() + f.beta.size());
    j["cov"] = matrix_json(f.cov);
    j["fixed_effects"] = f.fixed_effects;
    if (f.first_stage) {
      j["first_stage"] = {{"delta", std::vector<double>(f.first_stage->delta.data(),
                                                        f.first_stage->delta.data() + f.first_stage->delta.size())},
                          {"cov", matrix_json(f.first_stage->cov)},
                          {"f", f.first_stage->f}};
    }
    arr.push_back(std::move(j));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << arr.dump(2) << '\n';
}

}  // namespace slant::econometrics
