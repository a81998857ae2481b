#include "slant/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slant/corpus.hpp"
#include "slant/csv.hpp"
#include "slant/error.hpp"
#include "slant/hashing.hpp"
#include "slant/scoring.hpp"
#include "slant/textprep.hpp"

namespace slant::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int e = -7; e <= 0; ++e) g.push_back(2.0 * std::pow(10.0, e));
  return g;
}

void apply_override(json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ValidationError(fmt::format("override '{}' is not key=value", assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError(fmt::format("override key '{}' has an empty segment", key));
    if (!node->is_object()) throw ValidationError(fmt::format("override key '{}' descends into a non-object", key));
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

namespace {

void check_keys(const json& j, const std::set<std::string>& known, std::string_view where) {
  if (!j.is_object()) throw ValidationError(fmt::format("'{}' must be an object", where));
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError(fmt::format("unknown key '{}' in {}", k, where));
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("bad value for '{}': {}", key, e.what()));
  }
}

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  return fingerprint64(fmt::format("{}:{}", seed, name));
}

std::vector<econometrics::RegressionSpec> default_regressions() {
  using econometrics::Kind;
  std::vector<econometrics::RegressionSpec> specs;
  auto make = [&](std::string name, Kind kind, std::vector<std::string> controls) {
    econometrics::RegressionSpec s;
    s.name = std::move(name);
    s.kind = kind;
    s.controls = std::move(controls);
    specs.push_back(std::move(s));
  };
  make("first_stage", Kind::FirstStage, {"@demographics"});
  make("reduced_form", Kind::ReducedForm, {"@demographics"});
  make("ols", Kind::Ols, {"@demographics"});
  make("tsls_demographics", Kind::Tsls, {"@demographics"});
  make("tsls_channel", Kind::Tsls, {"@demographics", "@channel"});
  make("tsls_language", Kind::Tsls, {"@demographics", "@language"});
  return specs;
}

std::vector<Binscatter> default_binscatters() {
  Binscatter a;
  a.name = "viewership_position";
  a.y = "viewership";
  Binscatter b;
  b.name = "slant_position";
  b.y = "slant";
  return {a, b};
}

synth::SynthConfig parse_synth(const json& j) {
  synth::SynthConfig c;
  c.vocab_size = get_or(j, "vocab_size", c.vocab_size);
  c.separation = get_or(j, "separation", c.separation);
  c.n_snippets = get_or(j, "n_snippets", c.n_snippets);
  c.snippet_length = get_or(j, "snippet_length", c.snippet_length);
  c.n_counties = get_or(j, "n_counties", c.n_counties);
  c.n_outlets = get_or(j, "n_outlets", c.n_outlets);
  c.n_states = get_or(j, "n_states", c.n_states);
  c.max_counties_per_outlet = get_or(j, "max_counties_per_outlet", c.max_counties_per_outlet);
  c.n_demographics = get_or(j, "n_demographics", c.n_demographics);
  c.first_stage_delta = get_or(j, "first_stage_delta", c.first_stage_delta);
  c.effect_theta = get_or(j, "effect_theta", c.effect_theta);
  c.confounder_strength = get_or(j, "confounder_strength", c.confounder_strength);
  c.confounder_sd = get_or(j, "confounder_sd", c.confounder_sd);
  c.view_noise = get_or(j, "view_noise", c.view_noise);
  c.slant_noise = get_or(j, "slant_noise", c.slant_noise);
  c.outlet_sd = get_or(j, "outlet_sd", c.outlet_sd);
  c.state_sd = get_or(j, "state_sd", c.state_sd);
  c.demographic_effect = get_or(j, "demographic_effect", c.demographic_effect);
  c.instrument_demographic_loading = get_or(j, "instrument_demographic_loading", c.instrument_demographic_loading);
  c.articles_per_edition = get_or(j, "articles_per_edition", c.articles_per_edition);
  return c;
}

}  // namespace

PipelineConfig config_from_json(json j, const fs::path& base_dir) {
  check_keys(j,
             {"seed", "output_dir", "paths", "segmentation", "features", "classifier", "topics", "panel",
              "regressions", "report", "simulate"},
             "config");
  PipelineConfig c;
  c.raw = j;
  c.base_dir = base_dir;
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.output_dir = resolve(base_dir, get_or<std::string>(j, "output_dir", "out"));

  const json paths = j.value("paths", json::object());
  check_keys(paths, {"fnc", "cnn", "newspapers", "counties", "circulation", "outlets", "topic_labels", "ground_truth"},
             "paths");
  c.paths.fnc = resolve(base_dir, get_or<std::string>(paths, "fnc", ""));
  c.paths.cnn = resolve(base_dir, get_or<std::string>(paths, "cnn", ""));
  c.paths.newspapers = resolve(base_dir, get_or<std::string>(paths, "newspapers", ""));
  c.paths.counties = resolve(base_dir, get_or<std::string>(paths, "counties", ""));
  c.paths.circulation = resolve(base_dir, get_or<std::string>(paths, "circulation", ""));
  c.paths.outlets = resolve(base_dir, get_or<std::string>(paths, "outlets", ""));
  c.paths.topic_labels = resolve(base_dir, get_or<std::string>(paths, "topic_labels", ""));
  c.paths.ground_truth = resolve(base_dir, get_or<std::string>(paths, "ground_truth", ""));

  const json seg = j.value("segmentation", json::object());
  check_keys(seg, {"window"}, "segmentation");
  c.window = get_or(seg, "window", c.window);
  if (c.window == 0) throw ValidationError("segmentation.window must be positive");

  const json feat = j.value("features", json::object());
  check_keys(feat, {"threshold", "k", "chi2_mode", "ngram"}, "features");
  c.features.threshold = get_or(feat, "threshold", c.features.threshold);
  c.features.k = get_or(feat, "k", c.features.k);
  c.features.ngram = get_or(feat, "ngram", c.features.ngram);
  const auto mode = get_or<std::string>(feat, "chi2_mode", "counts");
  if (mode == "counts") c.features.chi2_mode = features::Chi2Mode::Counts;
  else if (mode == "presence") c.features.chi2_mode = features::Chi2Mode::Presence;
  else throw ValidationError("features.chi2_mode must be counts or presence");
  if (c.features.k == 0) throw ValidationError("features.k must be positive");
  if (c.features.ngram != 1 && c.features.ngram != 2) throw ValidationError("features.ngram must be 1 or 2");

  const json cl = j.value("classifier", json::object());
  check_keys(cl, {"lambda_grid", "folds", "test_fraction", "penalty", "fit_intercept", "tol", "max_iter"}, "classifier");
  c.classifier.lambda_grid = get_or(cl, "lambda_grid", default_lambda_grid());
  c.classifier.folds = get_or(cl, "folds", c.classifier.folds);
  c.classifier.test_fraction = get_or(cl, "test_fraction", c.classifier.test_fraction);
  c.classifier.fit_intercept = get_or(cl, "fit_intercept", c.classifier.fit_intercept);
  c.classifier.tol = get_or(cl, "tol", c.classifier.tol);
  c.classifier.max_iter = get_or(cl, "max_iter", c.classifier.max_iter);
  const auto pen = get_or<std::string>(cl, "penalty", "squared_l2");
  if (pen == "squared_l2") c.classifier.penalty = classifier::Penalty::SquaredL2;
  else if (pen == "l2_norm") c.classifier.penalty = classifier::Penalty::L2Norm;
  else throw ValidationError("classifier.penalty must be squared_l2 or l2_norm");
  if (c.classifier.lambda_grid.empty()) throw ValidationError("classifier.lambda_grid is empty");
  for (double l : c.classifier.lambda_grid)
    if (!(l >= 0)) throw ValidationError("classifier.lambda_grid entries must be nonnegative");
  if (c.classifier.folds < 2) throw ValidationError("classifier.folds must be at least 2");
  if (!(c.classifier.test_fraction > 0 && c.classifier.test_fraction < 1))
    throw ValidationError("classifier.test_fraction must lie in (0, 1)");

  const json tp = j.value("topics", json::object());
  check_keys(tp,
             {"enabled", "num_topics", "passes", "batch_size", "kappa", "tau0", "alpha", "eta", "min_df",
              "sample_size", "heldout_fraction", "train_on", "top_words"},
             "topics");
  auto& lda = c.topics.lda;
  c.topics.enabled = get_or(tp, "enabled", false);
  lda.num_topics = get_or(tp, "num_topics", lda.num_topics);
  lda.passes = get_or(tp, "passes", lda.passes);
  lda.batch_size = get_or(tp, "batch_size", lda.batch_size);
  lda.kappa = get_or(tp, "kappa", lda.kappa);
  lda.tau0 = get_or(tp, "tau0", lda.tau0);
  lda.alpha = get_or(tp, "alpha", lda.alpha);
  lda.eta = get_or(tp, "eta", lda.eta);
  lda.sample_size = get_or(tp, "sample_size", lda.sample_size);
  lda.heldout_fraction = get_or(tp, "heldout_fraction", lda.heldout_fraction);
  c.topics.min_df = get_or(tp, "min_df", c.topics.min_df);
  c.topics.train_on = get_or<std::string>(tp, "train_on", c.topics.train_on);
  c.topics.top_words = get_or(tp, "top_words", c.topics.top_words);
  lda.seed = substream_seed(c.seed, "lda");
  if (lda.num_topics < 1 || lda.passes < 1 || lda.batch_size < 1) throw ValidationError("topics sizes must be positive");
  if (c.topics.train_on != "articles" && c.topics.train_on != "transcripts")
    throw ValidationError("topics.train_on must be articles or transcripts");

  const json pn = j.value("panel", json::object());
  check_keys(pn, {"vote_column"}, "panel");
  c.panel.vote_column = get_or(pn, "vote_column", c.panel.vote_column);

  if (j.contains("regressions")) {
    for (const auto& r : j["regressions"]) c.regressions.push_back(econometrics::parse_spec(r));
  } else {
    c.regressions = default_regressions();
  }
  std::set<std::string> names;
  for (const auto& r : c.regressions)
    if (!names.insert(r.name).second) throw ValidationError("duplicate regression name " + r.name);

  const json rp = j.value("report", json::object());
  check_keys(rp, {"bins", "binscatters", "top_bigrams"}, "report");
  const std::size_t bins = get_or<std::size_t>(rp, "bins", 16);
  c.top_bigrams = get_or(rp, "top_bigrams", c.top_bigrams);
  if (rp.contains("binscatters")) {
    for (const auto& b : rp["binscatters"]) {
      check_keys(b, {"name", "y", "x", "fe", "controls", "weight", "standardize"}, "binscatter");
      Binscatter s;
      s.name = get_or<std::string>(b, "name", "");
      if (s.name.empty()) throw ValidationError("binscatter needs a name");
      s.y = get_or(b, "y", s.y);
      s.x = get_or(b, "x", s.x);
      if (b.contains("fe")) s.fe = b["fe"].is_null() ? std::nullopt : std::optional<std::string>(b["fe"].get<std::string>());
      s.controls = get_or(b, "controls", s.controls);
      s.weight = get_or(b, "weight", s.weight);
      s.standardize = get_or(b, "standardize", s.standardize);
      c.binscatters.push_back(std::move(s));
    }
  } else {
    c.binscatters = default_binscatters();
  }
  if (bins < 1) throw ValidationError("report.bins must be positive");
  for (auto& b : c.binscatters) b.bins = bins;

  const json sim = j.value("simulate", json::object());
  check_keys(sim,
             {"output", "snippets_per_transcript", "vocab_size", "separation", "n_snippets", "snippet_length",
              "n_counties", "n_outlets", "n_states", "max_counties_per_outlet", "n_demographics",
              "first_stage_delta", "effect_theta", "confounder_strength", "confounder_sd", "view_noise",
              "slant_noise", "outlet_sd", "state_sd", "demographic_effect", "instrument_demographic_loading",
              "articles_per_edition"},
             "simulate");
  c.simulate.output = resolve(base_dir, get_or<std::string>(sim, "output", "sim"));
  c.simulate.snippets_per_transcript = get_or(sim, "snippets_per_transcript", c.simulate.snippets_per_transcript);
  c.simulate.synth = parse_synth(sim);
  c.simulate.synth.seed = substream_seed(c.seed, "simulate");
  synth::validate(c.simulate.synth);
  return c;
}

PipelineConfig load_config(const fs::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("config " + path.string() + " is not valid JSON");
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(std::move(j), fs::absolute(path).parent_path());
}

fs::path stage_dir(const PipelineConfig& c, std::string_view stage) { return c.output_dir / std::string(stage); }

void check_inputs(const PipelineConfig& c, std::string_view command) {
  auto need = [&](const fs::path& p, std::string_view key) {
    if (p.empty()) throw ValidationError(fmt::format("{} needs paths.{}", command, key));
    if (!fs::exists(p)) throw ValidationError(fmt::format("paths.{} does not exist: {}", key, p.string()));
  };
  if (command == "prepare") {
    need(c.paths.fnc, "fnc");
    need(c.paths.cnn, "cnn");
    need(c.paths.newspapers, "newspapers");
  } else if (command == "score" || command == "regress") {
    need(c.paths.newspapers, "newspapers");
    need(c.paths.counties, "counties");
    need(c.paths.circulation, "circulation");
    need(c.paths.outlets, "outlets");
    if (command == "regress" && !c.paths.ground_truth.empty()) need(c.paths.ground_truth, "ground_truth");
  } else if (command == "topics") {
    if (c.topics.train_on == "articles") need(c.paths.newspapers, "newspapers");
    else {
      need(c.paths.fnc, "fnc");
      need(c.paths.cnn, "cnn");
    }
    need(c.paths.newspapers, "newspapers");
    if (!c.paths.topic_labels.empty()) need(c.paths.topic_labels, "topic_labels");
  }
}

std::vector<std::string> terms_of(std::string_view text, int ngram) {
  const auto& sw = textprep::default_stopwords();
  return ngram == 1 ? textprep::stems_of(text, sw) : textprep::bigrams_of(text, sw);
}

namespace {

// Manifest: config hash plus content hashes of inputs and outputs.
class Manifest {
 public:
  Manifest(const PipelineConfig& c, std::string command) : config_(c), command_(std::move(command)) {}

  void input(const std::string& name, const fs::path& p) { inputs_[name] = sha256_file(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void note(const std::string& key, json value) { notes_[key] = std::move(value); }

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command_;
    j["version"] = std::string(kVersion);
    j["seed"] = config_.seed;
    j["config_hash"] = sha256_hex(config_.raw.dump());
    j["inputs"] = inputs_;
    json outs = json::object();
    for (const auto& p : outputs_) outs[p.filename().string()] = sha256_file(p);
    j["outputs"] = outs;
    if (!notes_.empty()) j["summary"] = notes_;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error("cannot write manifest in " + dir.string());
    out << j.dump(2) << '\n';
  }

 private:
  const PipelineConfig& config_;
  std::string command_;
  std::map<std::string, std::string> inputs_;
  std::vector<fs::path> outputs_;
  json notes_ = json::object();
};

fs::path require_stage(const PipelineConfig& c, std::string_view stage) {
  const auto dir = stage_dir(c, stage);
  if (!fs::exists(dir / "manifest.json"))
    throw Error(fmt::format("missing output of stage '{}' in {}; run `slant {}` first", stage, c.output_dir.string(), stage));
  return dir;
}

fs::path fresh_dir(const PipelineConfig& c, std::string_view stage) {
  const auto dir = stage_dir(c, stage);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  return json::parse(in);
}

std::vector<corpus::Snippet> segment_all(std::span<const corpus::Document> docs, std::size_t window) {
  std::vector<corpus::Snippet> out;
  for (const auto& d : docs) {
    auto s = corpus::segment(d, window);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

std::vector<features::TermSequence> terms_all(std::span<const corpus::Snippet> snippets, int ngram) {
  std::vector<features::TermSequence> out;
  out.reserve(snippets.size());
  for (const auto& s : snippets) out.push_back(terms_of(s.text, ngram));
  return out;
}

// Stratified split: returns true for test rows.
std::vector<bool> test_mask(std::span<const int> y, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<bool> test(y.size(), false);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < n_test && i < idx.size(); ++i) test[idx[i]] = true;
  }
  return test;
}

json calibration_json(const classifier::EvalReport& r) {
  json bins = json::array();
  for (const auto& b : r.calibration)
    bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"mean_prediction", b.mean_prediction},
                    {"rate", b.rate}, {"count", b.count}, {"empty", b.empty}});
  return bins;
}

std::map<std::string, scoring::LanguageControls> read_language(const fs::path& p) {
  auto t = read_csv(p);
  const auto c_o = t.require("outlet_id"), c_v = t.require("vocabulary_size"), c_w = t.require("word_length"),
             c_s = t.require("sentence_length"), c_a = t.require("article_length");
  std::map<std::string, scoring::LanguageControls> out;
  for (const auto& r : t.rows)
    out[r[c_o]] = {parse_double(r[c_v], "vocabulary_size"), parse_double(r[c_w], "word_length"),
                   parse_double(r[c_s], "sentence_length"), parse_double(r[c_a], "article_length")};
  return out;
}

std::map<std::string, Eigen::VectorXd> read_outlet_topics(const fs::path& p) {
  auto t = read_csv(p);
  const auto c_o = t.require("outlet_id");
  std::map<std::string, Eigen::VectorXd> out;
  for (const auto& r : t.rows) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(r.size() - 1));
    for (std::size_t k = 1; k < r.size(); ++k) v[static_cast<Eigen::Index>(k - 1)] = parse_double(r[k], "topic share");
    out[r[c_o]] = v;
  }
  return out;
}

void write_panel_csv(const fs::path& p, const econometrics::Table& t) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  std::vector<std::string> header;
  for (const auto& [k, v] : t.text) header.push_back(k);
  for (const auto& [k, v] : t.numeric) header.push_back(k);
  out << csv_line(header);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    std::vector<std::string> row;
    for (const auto& [k, v] : t.text) row.push_back(v[i]);
    for (const auto& [k, v] : t.numeric) row.push_back(format_double(v[static_cast<Eigen::Index>(i)]));
    out << csv_line(row);
  }
}

synth::ChannelModel channel_model_from_json(const json& j) {
  synth::ChannelModel m;
  m.vocab = j.at("vocab").get<std::vector<std::string>>();
  const auto f = j.at("fnc").get<std::vector<double>>(), c = j.at("cnn").get<std::vector<double>>();
  m.fnc = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
  m.cnn = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  return m;
}

}  // namespace

void cmd_prepare(const PipelineConfig& c) {
  check_inputs(c, "prepare");
  const auto dir = fresh_dir(c, "prepare");
  Manifest m(c, "prepare");
  const auto fnc = corpus::load_labeled_corpus(c.paths.fnc, corpus::Source::Fnc);
  const auto cnn = corpus::load_labeled_corpus(c.paths.cnn, corpus::Source::CnnMsnbc);
  const auto news = corpus::load_corpus(c.paths.newspapers, corpus::Source::Newspaper);
  m.input("fnc", c.paths.fnc);
  m.input("cnn", c.paths.cnn);
  m.input("newspapers", c.paths.newspapers);
  std::vector<corpus::Document> labeled = fnc.documents;
  labeled.insert(labeled.end(), cnn.documents.begin(), cnn.documents.end());
  const auto labeled_snippets = segment_all(labeled, c.window);
  const auto balanced = corpus::balance_sample(labeled_snippets, substream_seed(c.seed, "balance"));
  const auto news_snippets = segment_all(news.documents, c.window);
  corpus::write_snippets(dir / "train_snippets.jsonl", balanced);
  corpus::write_snippets(dir / "newspaper_snippets.jsonl", news_snippets);
  m.output(dir / "train_snippets.jsonl");
  m.output(dir / "newspaper_snippets.jsonl");
  m.note("skipped_lines", {{"fnc", fnc.skipped}, {"cnn", cnn.skipped}, {"newspapers", news.skipped}});
  m.note("labeled_snippets", labeled_snippets.size());
  m.note("balanced_snippets", balanced.size());
  m.note("newspaper_snippets", news_snippets.size());
  m.write(dir);
  spdlog::info("prepare: {} balanced training snippets, {} newspaper snippets", balanced.size(), news_snippets.size());
}

void cmd_train(const PipelineConfig& c) {
  const auto prep = require_stage(c, "prepare");
  const auto dir = fresh_dir(c, "train");
  Manifest m(c, "train");
  const auto train_path = prep / "train_snippets.jsonl";
  m.input("train_snippets", train_path);
  const auto snippets = corpus::read_snippets(train_path);
  const auto terms = terms_all(snippets, c.features.ngram);
  std::vector<int> y;
  for (const auto& s : snippets) {
    if (!s.fnc) throw Error("unlabeled snippet in training store: " + s.id());
    y.push_back(*s.fnc ? 1 : 0);
  }
  const auto test = test_mask(y, c.classifier.test_fraction, substream_seed(c.seed, "split"));
  std::vector<features::TermSequence> tr_terms, te_terms, tr_fnc, tr_cnn;
  std::vector<int> tr_y, te_y;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (test[i]) {
      te_terms.push_back(terms[i]);
      te_y.push_back(y[i]);
    } else {
      tr_terms.push_back(terms[i]);
      tr_y.push_back(y[i]);
      (y[i] ? tr_fnc : tr_cnn).push_back(terms[i]);
    }
  }
  const auto vocab = features::build_vocabulary(tr_fnc, tr_cnn, c.features.threshold);
  const auto vterms = vocab.term_list();
  const auto counts = features::count_terms(tr_terms, vterms);
  const auto chi2 = features::chi2_scores(counts, tr_y, c.features.chi2_mode);
  std::size_t k = c.features.k;
  if (k > vterms.size()) {
    spdlog::warn("train: k = {} exceeds the {} vocabulary terms; using all of them", k, vterms.size());
    k = vterms.size();
  }
  auto selector = features::select_top_k(vterms, chi2, k);
  selector.threshold = c.features.threshold;
  selector.corpus_hash = sha256_file(train_path);
  const auto scaler = features::fit_scaler(features::count_terms(tr_terms, selector.selected));
  selector.set_scale(scaler.scale);
  const auto Xtr = features::vectorize_all(tr_terms, selector);
  const auto Xte = features::vectorize_all(te_terms, selector);

  classifier::TrainOptions opt;
  opt.tol = c.classifier.tol;
  opt.max_iter = c.classifier.max_iter;
  opt.fit_intercept = c.classifier.fit_intercept;
  opt.penalty = c.classifier.penalty;
  const auto cv = classifier::cross_validate(Xtr.X, tr_y, c.classifier.lambda_grid, static_cast<int>(c.classifier.folds),
                                             substream_seed(c.seed, "cv"), opt);
  opt.lambda = cv.best_lambda;
  auto model = classifier::train(Xtr, tr_y, opt);
  if (!model.converged) spdlog::warn("train: optimizer stopped after {} iterations without converging", model.iterations);
  auto report = classifier::evaluate(model, Xte, te_y);
  const auto best = std::find(cv.lambdas.begin(), cv.lambdas.end(), cv.best_lambda) - cv.lambdas.begin();
  report.fold_accuracies = cv.fold_accuracy[static_cast<std::size_t>(best)];

  features::save_selector(selector, dir / "selector.tsv");
  classifier::save_model(model, selector, dir / "model.tsv");
  json ev;
  ev["lambda"] = cv.best_lambda;
  ev["cv"] = {{"lambdas", cv.lambdas}, {"mean_accuracy", cv.mean_accuracy}, {"fold_accuracy", cv.fold_accuracy}};
  ev["accuracy"] = report.accuracy;
  ev["fold_accuracies"] = report.fold_accuracies;
  ev["confusion"] = {{report.confusion[0][0], report.confusion[0][1]}, {report.confusion[1][0], report.confusion[1][1]}};
  ev["calibration"] = calibration_json(report);
  ev["train_size"] = tr_y.size();
  ev["test_size"] = te_y.size();
  ev["vocabulary_size"] = vterms.size();
  ev["k"] = selector.k();
  ev["degenerate_columns"] = scaler.degenerate;
  ev["converged"] = model.converged;
  ev["iterations"] = model.iterations;
  write_json(dir / "eval.json", ev);
  for (const auto* f : {"selector.tsv", "model.tsv", "eval.json"}) m.output(dir / f);
  m.write(dir);
  spdlog::info("train: lambda {} test accuracy {:.4f} on {} snippets", cv.best_lambda, report.accuracy, te_y.size());
}

void cmd_topics(const PipelineConfig& c) {
  check_inputs(c, "topics");
  const auto dir = fresh_dir(c, "topics");
  Manifest m(c, "topics");
  const auto& sw = textprep::default_stopwords();
  const auto articles = corpus::load_corpus(c.paths.newspapers, corpus::Source::Newspaper).documents;
  m.input("newspapers", c.paths.newspapers);
  std::vector<std::vector<std::string>> train_tokens;
  if (c.topics.train_on == "articles") {
    for (const auto& d : articles) train_tokens.push_back(textprep::stems_of(d.text, sw));
  } else {
    for (const auto& [p, src] : {std::pair{c.paths.fnc, corpus::Source::Fnc}, std::pair{c.paths.cnn, corpus::Source::CnnMsnbc}}) {
      for (const auto& d : corpus::load_corpus(p, src).documents) train_tokens.push_back(textprep::stems_of(d.text, sw));
      m.input(std::string(corpus::to_string(src)), p);
    }
  }
  const auto vocab = topics::build_topic_vocabulary(train_tokens, c.topics.min_df);
  std::vector<topics::BagOfWords> bags;
  for (const auto& t : train_tokens) bags.push_back(topics::to_bag(t, vocab));
  const auto res = topics::train_lda(bags, vocab, c.topics.lda);
  const auto& model = res.model;
  topics::save_topic_model(model, dir / "topic_model.bin");

  std::optional<topics::TopicLabelSet> labels;
  if (!c.paths.topic_labels.empty()) {
    labels = topics::load_topic_labels(c.paths.topic_labels, model.num_topics);
    m.input("topic_labels", c.paths.topic_labels);
  }
  {
    std::ofstream out(dir / "topic_summary.csv");
    out << csv_line({"topic_index", "label", "is_local", "top_words"});
    for (int k = 0; k < model.num_topics; ++k) {
      const auto words = topics::top_words(model, k, std::min(c.topics.top_words, model.vocab.size()));
      std::string joined;
      for (const auto& w : words) joined += (joined.empty() ? "" : " ") + w;
      const auto* lab = labels ? &(*labels)[static_cast<std::size_t>(k)] : nullptr;
      out << csv_line({std::to_string(k), lab ? lab->label : "", lab ? (lab->is_local ? "1" : "0") : "", joined});
    }
  }
  std::vector<Eigen::VectorXd> shares;
  std::vector<std::string> outlets;
  std::size_t empty = 0;
  {
    std::ofstream out(dir / "article_topics.csv");
    std::vector<std::string> header{"doc_id", "outlet_id", "empty", "is_local"};
    for (int k = 0; k < model.num_topics; ++k) header.push_back(fmt::format("share_{}", k));
    out << csv_line(header);
    for (const auto& d : articles) {
      const auto inf = topics::infer_shares(model, topics::to_bag(textprep::stems_of(d.text, sw), vocab));
      empty += inf.empty;
      std::vector<std::string> row{d.id, d.outlet_id.value_or(""), inf.empty ? "1" : "0",
                                   labels ? (topics::classify_local(inf.shares, *labels) ? "1" : "0") : ""};
      for (Eigen::Index k = 0; k < inf.shares.size(); ++k) row.push_back(format_double(inf.shares[k]));
      out << csv_line(row);
      shares.push_back(inf.shares);
      outlets.push_back(d.outlet_id.value_or(""));
    }
  }
  {
    const auto cov = topics::topic_covariates(shares, outlets);
    std::ofstream out(dir / "outlet_topics.csv");
    std::vector<std::string> header{"outlet_id"};
    for (int k = 0; k < model.num_topics; ++k) header.push_back(fmt::format("topic_{}", k));
    out << csv_line(header);
    for (const auto& [o, v] : cov) {
      std::vector<std::string> row{o};
      for (Eigen::Index k = 0; k < v.size(); ++k) row.push_back(format_double(v[k]));
      out << csv_line(row);
    }
  }
  if (empty > 0) spdlog::warn("topics: {} article(s) had no in-vocabulary tokens; uniform shares assigned", empty);
  for (const auto* f : {"topic_model.bin", "topic_summary.csv", "article_topics.csv", "outlet_topics.csv"}) m.output(dir / f);
  m.note("perplexity", res.perplexity);
  m.note("initial_perplexity", res.initial_perplexity);
  m.note("vocabulary_size", vocab.size());
  m.note("train_docs", res.train_docs);
  m.note("heldout_docs", res.heldout_docs);
  m.write(dir);
  spdlog::info("topics: perplexity {:.2f} (random init {:.2f})", res.perplexity, res.initial_perplexity);
}

void cmd_score(const PipelineConfig& c) {
  check_inputs(c, "score");
  const auto prep = require_stage(c, "prepare");
  const auto trn = require_stage(c, "train");
  const auto dir = fresh_dir(c, "score");
  Manifest m(c, "score");
  for (const auto& [name, p] : std::vector<std::pair<std::string, fs::path>>{
           {"newspaper_snippets", prep / "newspaper_snippets.jsonl"},
           {"selector", trn / "selector.tsv"},
           {"model", trn / "model.tsv"},
           {"newspapers", c.paths.newspapers},
           {"circulation", c.paths.circulation}})
    m.input(name, p);
  const auto selector = features::load_selector(trn / "selector.tsv");
  const auto model = classifier::load_model(trn / "model.tsv", selector);
  const auto snippets = corpus::read_snippets(prep / "newspaper_snippets.jsonl");
  const auto X = features::vectorize_all(terms_all(snippets, c.features.ngram), selector);
  std::vector<scoring::SnippetKey> keys;
  for (const auto& s : snippets) {
    if (!s.outlet_id) throw Error("newspaper snippet without outlet: " + s.id());
    keys.push_back({s.id(), *s.outlet_id});
  }
  auto scores = scoring::score_corpus(model, X, keys);

  // Locality from the article topic model, when available.
  bool have_locality = false;
  if (c.topics.enabled && !c.paths.topic_labels.empty()) {
    const auto tdir = require_stage(c, "topics");
    m.input("article_topics", tdir / "article_topics.csv");
    auto t = read_csv(tdir / "article_topics.csv");
    const auto c_id = t.require("doc_id"), c_loc = t.require("is_local");
    std::map<std::string, bool> local;
    for (const auto& r : t.rows)
      if (!r[c_loc].empty()) local[r[c_id]] = r[c_loc] == "1";
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (auto it = local.find(snippets[i].doc_id); it != local.end()) scores[i].is_local = it->second;
    have_locality = !local.empty();
  }
  scoring::write_scores(dir / "snippet_scores.csv", scores);
  auto slants = scoring::aggregate_slant(scores, scoring::Subset::All);
  if (have_locality) {
    for (auto subset : {scoring::Subset::Local, scoring::Subset::NonLocal}) {
      auto s = scoring::aggregate_slant(scores, subset);
      slants.insert(slants.end(), s.begin(), s.end());
    }
  }
  scoring::write_slants(dir / "outlet_slant.csv", slants);

  const auto inputs = corpus::load_panel_inputs(c.paths.counties, c.paths.circulation, c.paths.outlets);
  std::vector<scoring::SlantRecord> all;
  for (const auto& s : slants)
    if (s.subset == scoring::Subset::All) all.push_back(s);
  const auto county = scoring::county_slant(all, inputs.links);
  {
    std::ofstream out(dir / "county_slant.csv");
    out << csv_line({"county_id", "slant", "circulation"});
    for (const auto& cs : county) out << csv_line({cs.county_id, format_double(cs.slant), format_double(cs.circulation)});
  }
  const auto articles = corpus::load_corpus(c.paths.newspapers, corpus::Source::Newspaper).documents;
  const auto lang = scoring::language_controls(articles);
  {
    std::ofstream out(dir / "language_controls.csv");
    out << csv_line({"outlet_id", "vocabulary_size", "word_length", "sentence_length", "article_length"});
    for (const auto& [o, l] : lang)
      out << csv_line({o, format_double(l.vocabulary_size), format_double(l.word_length), format_double(l.sentence_length),
                       format_double(l.article_length)});
  }
  for (const auto* f : {"snippet_scores.csv", "outlet_slant.csv", "county_slant.csv", "language_controls.csv"})
    m.output(dir / f);
  m.note("snippets", scores.size());
  m.note("outlets", all.size());
  m.write(dir);
  spdlog::info("score: {} snippets over {} outlets", scores.size(), all.size());
}

econometrics::Table assemble_panel(const PipelineConfig& c) {
  const auto sc = require_stage(c, "score");
  const auto inputs = corpus::load_panel_inputs(c.paths.counties, c.paths.circulation, c.paths.outlets);
  const auto slants = scoring::read_slants(sc / "outlet_slant.csv");
  const auto lang = read_language(sc / "language_controls.csv");
  std::optional<std::map<std::string, Eigen::VectorXd>> topic_cov;
  if (c.topics.enabled) topic_cov = read_outlet_topics(require_stage(c, "topics") / "outlet_topics.csv");
  const auto panel = econometrics::build_panel(inputs, slants, &lang, topic_cov ? &*topic_cov : nullptr, c.panel);
  return econometrics::panel_table(panel);
}

void cmd_regress(const PipelineConfig& c) {
  check_inputs(c, "regress");
  const auto sc = require_stage(c, "score");
  const auto dir = fresh_dir(c, "regress");
  Manifest m(c, "regress");
  m.input("outlet_slant", sc / "outlet_slant.csv");
  m.input("language_controls", sc / "language_controls.csv");
  m.input("counties", c.paths.counties);
  m.input("circulation", c.paths.circulation);
  m.input("outlets", c.paths.outlets);
  if (c.topics.enabled) m.input("outlet_topics", require_stage(c, "topics") / "outlet_topics.csv");
  const auto table = assemble_panel(c);
  write_panel_csv(dir / "panel.csv", table);
  const auto rows = econometrics::run_table(table, c.regressions);
  econometrics::write_table_csv(dir / "table.csv", rows);
  econometrics::write_table_json(dir / "table.json", rows);
  for (const auto* f : {"panel.csv", "table.csv", "table.json"}) m.output(dir / f);

  if (!c.paths.ground_truth.empty()) {
    const auto trn = require_stage(c, "train");
    m.input("ground_truth", c.paths.ground_truth);
    const json gt = read_json(c.paths.ground_truth);
    const auto channels = channel_model_from_json(gt.at("channels"));
    const auto selector = features::load_selector(trn / "selector.tsv");
    const auto model = classifier::load_model(trn / "model.tsv", selector);
    const synth::SnippetScorer scorer(channels, selector, model);
    const auto length = gt.at("snippet_length").get<std::size_t>();
    const auto ts = synth::text_slant_hook(channels, std::cref(scorer), 1, length, 4000, substream_seed(c.seed, "recovery"));
    const double theta = gt.at("theta").get<double>();
    const double target_raw = theta * (ts.e_fnc - ts.e_cnn);
    json rec = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& spec = c.regressions[i];
      if (spec.kind != econometrics::Kind::Tsls || spec.outcome != "slant" || spec.endogenous != "viewership") continue;
      double target = target_raw;
      if (spec.standardize) {
        auto raw = spec;
        raw.standardize = false;
        const auto d = econometrics::make_design(table, raw);
        const Eigen::VectorXd* w = spec.weighted_sd ? &d.w : nullptr;
        const double sd_y = d.y.norm() / econometrics::standardize(d.y, w).norm();
        const double sd_x = d.endog.col(0).norm() / econometrics::standardize(d.endog.col(0), w).norm();
        target = target_raw * sd_x / sd_y;
      }
      const auto& f = rows[i].fit;
      rec.push_back({{"name", spec.name}, {"theta_hat", f.theta}, {"se", f.se}, {"target", target},
                     {"ci_low", f.theta - 1.96 * f.se}, {"ci_high", f.theta + 1.96 * f.se},
                     {"covered", std::abs(f.theta - target) <= 1.96 * f.se}});
    }
    json out = {{"theta_true", theta},
                {"e_fnc", ts.e_fnc},
                {"e_cnn", ts.e_cnn},
                {"measured_target", target_raw},
                {"specs", rec}};
    write_json(dir / "recovery.json", out);
    m.output(dir / "recovery.json");
  }
  m.write(dir);
  spdlog::info("regress: {} specification(s) on {} rows", rows.size(), table.rows());
}

void cmd_simulate(const PipelineConfig& c) {
  const auto& cfg = c.simulate.synth;
  const auto dir = c.simulate.output;
  fs::create_directories(dir);
  Manifest m(c, "simulate");
  const auto corpora = synth::gen_channel_corpora(cfg);
  const auto& model = corpora.model;
  // Transcripts concatenate whole snippets so segmentation recovers them.
  for (bool fnc : {true, false}) {
    std::vector<corpus::Document> docs;
    const std::size_t offset = fnc ? 0 : cfg.n_snippets;
    for (std::size_t i = 0; i < cfg.n_snippets; i += c.simulate.snippets_per_transcript) {
      corpus::Document d;
      d.id = fmt::format("{}-{:06}", fnc ? "fnc" : "cnn", i / c.simulate.snippets_per_transcript);
      d.source = fnc ? corpus::Source::Fnc : corpus::Source::CnnMsnbc;
      d.date = std::chrono::year{2005 + static_cast<int>(i % 4)} / 1 / 1;
      for (std::size_t k = i; k < std::min(cfg.n_snippets, i + c.simulate.snippets_per_transcript); ++k)
        d.text += (d.text.empty() ? "" : " ") + corpora.snippets[offset + k].text;
      docs.push_back(std::move(d));
    }
    const auto path = dir / (fnc ? "fnc.jsonl" : "cnn.jsonl");
    corpus::write_corpus(path, docs);
    m.output(path);
  }
  auto panel = synth::gen_panel(cfg);
  panel.truth.separation = cfg.separation;
  panel.truth.bayes_rate = corpora.bayes_rate;
  const auto articles = synth::gen_articles(model, panel, cfg.articles_per_edition, cfg.snippet_length,
                                            substream_seed(c.seed, "articles"));
  corpus::write_corpus(dir / "newspapers.jsonl", articles);
  corpus::write_panel_inputs(panel.inputs, dir / "counties.csv", dir / "circulation.csv", dir / "outlets.csv");
  {
    std::ofstream out(dir / "mixture.csv");
    out << csv_line({"outlet_id", "mixture"});
    for (std::size_t i = 0; i < panel.slants.size(); ++i)
      out << csv_line({panel.slants[i].outlet_id, format_double(panel.mixture[i])});
  }
  json gt = {{"theta", cfg.effect_theta},
             {"delta", cfg.first_stage_delta},
             {"confounder_strength", cfg.confounder_strength},
             {"separation", cfg.separation},
             {"tv_distance", synth::tv_distance(model.fnc, model.cnn)},
             {"bayes_rate", corpora.bayes_rate},
             {"snippet_length", cfg.snippet_length},
             {"channels",
              {{"vocab", model.vocab},
               {"fnc", std::vector<double>(model.fnc.data(), model.fnc.data() + model.fnc.size())},
               {"cnn", std::vector<double>(model.cnn.data(), model.cnn.data() + model.cnn.size())}}},
             {"county_confounder", panel.truth.county_confounder}};
  write_json(dir / "ground_truth.json", gt);
  for (const auto* f : {"newspapers.jsonl", "counties.csv", "circulation.csv", "outlets.csv", "mixture.csv", "ground_truth.json"})
    m.output(dir / f);
  m.write(dir);
  spdlog::info("simulate: wrote synthetic inputs to {} (Bayes rate {:.4f})", dir.string(), corpora.bayes_rate);
}

void run_command(std::string_view command, const PipelineConfig& c) {
  if (command == "prepare") return cmd_prepare(c);
  if (command == "train") return cmd_train(c);
  if (command == "score") return cmd_score(c);
  if (command == "topics") return cmd_topics(c);
  if (command == "regress") return cmd_regress(c);
  if (command == "simulate") return cmd_simulate(c);
  if (command == "report") return cmd_report(c);
  throw ValidationError(fmt::format("unknown command '{}'", command));
}

}  // namespace slant::pipeline
