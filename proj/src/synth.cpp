#include "slant/synth.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include <fmt/format.h>

#include "slant/econometrics.hpp"
#include "slant/error.hpp"

namespace slant::synth {

namespace {

constexpr std::string_view kLetters = "bcdfghjklmnpqrtvwxz";

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

Eigen::VectorXd dirichlet_ones(std::size_t n, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = g(rng);
  return v / v.sum();
}

std::vector<double> as_weights(const Eigen::VectorXd& p) { return {p.data(), p.data() + p.size()}; }

}  // namespace

void validate(const SynthConfig& c) {
  if (!(c.separation >= 0 && c.separation <= 1)) throw ValidationError("separation must lie in [0, 1]");
  if (c.vocab_size < 2) throw ValidationError("vocab_size must be at least 2");
  if (c.n_snippets == 0 || c.snippet_length == 0) throw ValidationError("snippet counts must be positive");
  if (c.n_counties < 2 || c.n_outlets < 2 || c.n_states == 0) throw ValidationError("panel sizes must be positive");
  if (c.max_counties_per_outlet == 0 || c.max_counties_per_outlet > c.n_counties)
    throw ValidationError("max_counties_per_outlet must be in [1, n_counties]");
  if (c.articles_per_edition == 0) throw ValidationError("articles_per_edition must be positive");
  for (double s : {c.confounder_sd, c.view_noise, c.slant_noise, c.outlet_sd, c.state_sd})
    if (s < 0) throw ValidationError("noise scales must be nonnegative");
}

std::string synthetic_word(std::size_t index) {
  std::string w;
  do {
    w.insert(w.begin(), kLetters[index % kLetters.size()]);
    index /= kLetters.size();
  } while (index > 0);
  while (w.size() < 3) w.insert(w.begin(), kLetters[0]);
  return w;
}

double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

ChannelModel make_channel_model(std::size_t vocab_size, double separation, std::uint64_t seed) {
  if (vocab_size < 2) throw ValidationError("vocab_size must be at least 2");
  if (!(separation >= 0 && separation <= 1)) throw ValidationError("separation must lie in [0, 1]");
  auto rng = substream(seed, 11);
  ChannelModel m;
  for (std::size_t i = 0; i < vocab_size; ++i) m.vocab.push_back(synthetic_word(i));
  const auto V = static_cast<Eigen::Index>(vocab_size);
  const auto half = V / 2;
  const Eigen::VectorXd q = dirichlet_ones(vocab_size, rng);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(V), b = Eigen::VectorXd::Zero(V);
  a.head(half) = dirichlet_ones(static_cast<std::size_t>(half), rng);
  b.tail(V - half) = dirichlet_ones(static_cast<std::size_t>(V - half), rng);
  m.fnc = (1 - separation) * q + separation * a;
  m.cnn = (1 - separation) * q + separation * b;
  return m;
}

WordSampler::WordSampler(const ChannelModel& model) {
  const auto f = as_weights(model.fnc), c = as_weights(model.cnn);
  fnc_ = std::discrete_distribution<int>(f.begin(), f.end());
  cnn_ = std::discrete_distribution<int>(c.begin(), c.end());
}

std::vector<int> WordSampler::draw(bool fnc, std::size_t length, std::mt19937_64& rng) {
  std::vector<int> out(length);
  auto& d = fnc ? fnc_ : cnn_;
  for (auto& w : out) w = d(rng);
  return out;
}

double log_likelihood_ratio(const ChannelModel& model, std::span<const int> words) {
  double llr = 0;
  for (int w : words) {
    const double a = model.fnc[w], b = model.cnn[w];
    if (a == 0 && b == 0) continue;
    if (b == 0) return std::numeric_limits<double>::infinity();
    if (a == 0) return -std::numeric_limits<double>::infinity();
    llr += std::log(a) - std::log(b);
  }
  return llr;
}

double bayes_rate(const ChannelModel& model, std::span<const std::vector<int>> snippets) {
  if (snippets.empty()) throw Error("bayes_rate: no snippets");
  double acc = 0;
  for (const auto& s : snippets) {
    const double llr = std::abs(log_likelihood_ratio(model, s));
    acc += std::isinf(llr) ? 1.0 : 1.0 / (1.0 + std::exp(-llr));
  }
  return acc / static_cast<double>(snippets.size());
}

std::string render(const ChannelModel& model, std::span<const int> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += model.vocab[static_cast<std::size_t>(words[i])];
  }
  return out;
}

ChannelCorpora gen_channel_corpora(const SynthConfig& config) {
  validate(config);
  ChannelCorpora c;
  c.model = make_channel_model(config.vocab_size, config.separation, config.seed);
  WordSampler sampler(c.model);
  auto rng = substream(config.seed, 12);
  for (bool fnc : {true, false}) {
    for (std::size_t i = 0; i < config.n_snippets; ++i) {
      auto words = sampler.draw(fnc, config.snippet_length, rng);
      corpus::Snippet s;
      s.doc_id = fmt::format("{}-{:06}", fnc ? "fnc" : "cnn", i);
      s.text = render(c.model, words);
      s.word_count = words.size();
      s.fnc = fnc;
      s.date = std::chrono::year{2006} / 1 / 1;
      c.snippets.push_back(std::move(s));
      c.words.push_back(std::move(words));
    }
  }
  c.bayes_rate = bayes_rate(c.model, c.words);
  return c;
}

std::vector<corpus::Document> gen_transcripts(const ChannelModel& model, bool fnc, std::size_t n_snippets,
                                              std::size_t snippet_length, std::size_t per_doc, std::uint64_t seed) {
  if (per_doc == 0) throw ValidationError("per_doc must be positive");
  WordSampler sampler(model);
  auto rng = substream(seed, fnc ? 21 : 22);
  std::vector<corpus::Document> docs;
  for (std::size_t done = 0, k = 0; done < n_snippets; ++k) {
    const std::size_t take = std::min(per_doc, n_snippets - done);
    corpus::Document d;
    d.id = fmt::format("{}-{:06}", fnc ? "fnc" : "cnn", k);
    d.source = fnc ? corpus::Source::Fnc : corpus::Source::CnnMsnbc;
    d.date = std::chrono::year{2005 + static_cast<int>(k % 4)} / 1 / 1;
    d.text = render(model, sampler.draw(fnc, take * snippet_length, rng));
    docs.push_back(std::move(d));
    done += take;
  }
  return docs;
}

SynthPanel gen_panel(const SynthConfig& cfg, const SlantHook& hook) {
  validate(cfg);
  auto rng = substream(cfg.seed, 31);
  auto slant_rng = substream(cfg.seed, 32);
  std::normal_distribution<double> N01(0.0, 1.0);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  std::uniform_int_distribution<int> position(1, 80);

  SynthPanel out;
  auto& truth = out.truth;
  truth.delta = cfg.first_stage_delta;
  truth.theta = cfg.effect_theta;
  truth.confounder_strength = cfg.confounder_strength;

  std::vector<double> state_view(cfg.n_states), state_slant(cfg.n_states);
  for (std::size_t s = 0; s < cfg.n_states; ++s) {
    state_view[s] = cfg.state_sd * N01(rng);
    state_slant[s] = cfg.state_sd * N01(rng);
  }

  const auto C = cfg.n_counties;
  std::vector<double> view(C), demo_sum(C);
  std::vector<std::size_t> state_of(C);
  for (std::size_t j = 0; j < C; ++j) {
    corpus::CountyRecord c;
    c.county_id = fmt::format("C{:05}", j);
    state_of[j] = j < cfg.n_states ? j : static_cast<std::size_t>(U01(rng) * static_cast<double>(cfg.n_states));
    state_of[j] = std::min(state_of[j], cfg.n_states - 1);
    c.state = fmt::format("S{:02}", state_of[j]);
    double dsum = 0;
    double first_demo = 0;
    for (std::size_t k = 0; k < cfg.n_demographics; ++k) {
      const double x = N01(rng);
      if (k == 0) first_demo = x;
      dsum += x;
      c.demographics[fmt::format("demo_{}", k + 1)] = x;
    }
    c.demographics["rep_vote_1996"] = std::clamp(0.45 + 0.1 * N01(rng), 0.05, 0.95);
    demo_sum[j] = dsum;
    for (auto& p : c.positions) p = position(rng);
    if (cfg.instrument_demographic_loading != 0)
      c.positions[corpus::kFnc] =
          std::clamp(std::round(c.positions[corpus::kFnc] + cfg.instrument_demographic_loading * first_demo), 1.0, 200.0);
    const double z = econometrics::relative_measure(c.positions[0], c.positions[1], c.positions[2]);
    const double conf = cfg.confounder_sd * N01(rng);
    truth.county_confounder.push_back(conf);
    view[j] = 0.35 + cfg.first_stage_delta * z + cfg.confounder_strength * conf + cfg.demographic_effect * dsum +
              state_view[state_of[j]] + cfg.view_noise * N01(rng);
    c.ratings[corpus::kCnn] = 0.1 + 0.2 * U01(rng);
    c.ratings[corpus::kMsnbc] = 0.1 + 0.2 * U01(rng);
    c.ratings[corpus::kFnc] = view[j] + 0.5 * (c.ratings[corpus::kCnn] + c.ratings[corpus::kMsnbc]);
    for (auto& a : c.access_shares) a = 0.7 + 0.3 * U01(rng);
    c.population = std::round(std::exp(10 + N01(rng)));
    c.surveyed_households = std::max(1.0, std::round(c.population / 500));
    out.inputs.counties.push_back(std::move(c));
  }

  std::uniform_int_distribution<std::size_t> pick_county(0, C - 1);
  std::uniform_int_distribution<std::size_t> pick_span(1, cfg.max_counties_per_outlet);
  for (std::size_t i = 0; i < cfg.n_outlets; ++i) {
    const std::string name = fmt::format("paper_{:04}", i);
    const std::size_t hq = pick_county(rng);
    const double u = U01(rng);
    const auto endorsement = u < 0.35 ? corpus::Endorsement::Dem : (u < 0.7 ? corpus::Endorsement::Rep : corpus::Endorsement::None);
    const double outlet_effect = cfg.outlet_sd * N01(rng);
    std::vector<std::size_t> served{hq};
    const std::size_t span = pick_span(rng);
    while (served.size() < span) {
      const auto j = pick_county(rng);
      if (std::find(served.begin(), served.end(), j) == served.end()) served.push_back(j);
    }
    std::sort(served.begin(), served.end());
    for (auto j : served) {
      const auto& county = out.inputs.counties[j];
      corpus::Outlet o;
      o.outlet_id = fmt::format("N{:04}_{}", i, county.county_id);
      o.name = name;
      o.endorsement_1996 = endorsement;
      o.headquarters_county = out.inputs.counties[hq].county_id;
      corpus::CirculationLink l;
      l.outlet_id = o.outlet_id;
      l.county_id = county.county_id;
      l.circulation = std::round(std::exp(j == hq ? 9 + 0.5 * N01(rng) : 7 + N01(rng))) + 1;
      if (U01(rng) < 0.6) l.circulation_1995 = std::round(l.circulation * (0.8 + 0.4 * U01(rng)));
      const double m = std::clamp(0.45 + cfg.effect_theta * (view[j] - 0.35) +
                                      cfg.confounder_strength * truth.county_confounder[j] +
                                      cfg.demographic_effect * demo_sum[j] + state_slant[state_of[j]] +
                                      outlet_effect + cfg.slant_noise * N01(rng),
                                  0.0, 1.0);
      const double measured = hook ? hook(m, slant_rng) : m;
      out.slants.push_back({o.outlet_id, measured, cfg.articles_per_edition, scoring::Subset::All});
      out.mixture.push_back(m);
      out.inputs.outlets.push_back(std::move(o));
      out.inputs.links.push_back(std::move(l));
    }
  }
  return out;
}

SnippetScorer::SnippetScorer(const ChannelModel& channels, const features::FeatureSelector& selector,
                             const classifier::LogisticModel& model)
    : vocab_(channels.vocab.size()), intercept_(model.fit_intercept ? model.intercept : 0.0) {
  if (static_cast<std::size_t>(model.psi.size()) != selector.k()) throw Error("SnippetScorer: model and selector differ");
  std::unordered_map<std::string, int> ids;
  for (std::size_t i = 0; i < channels.vocab.size(); ++i) ids.emplace(channels.vocab[i], static_cast<int>(i));
  for (const auto& t : selector.selected)
    if (t.find(' ') != std::string::npos) bigram_ = true;
  unigram_.assign(vocab_, 0.0);
  for (std::size_t f = 0; f < selector.k(); ++f) {
    const auto& t = selector.selected[f];
    const double w = model.psi[static_cast<Eigen::Index>(f)] * selector.scale[f];
    const auto sp = t.find(' ');
    if (sp == std::string::npos) {
      if (auto it = ids.find(t); it != ids.end()) unigram_[static_cast<std::size_t>(it->second)] += w;
      continue;
    }
    auto a = ids.find(t.substr(0, sp)), b = ids.find(t.substr(sp + 1));
    if (a == ids.end() || b == ids.end()) continue;
    bigram_weights_[static_cast<std::uint64_t>(a->second) * vocab_ + static_cast<std::uint64_t>(b->second)] += w;
  }
}

double SnippetScorer::operator()(std::span<const int> words) const {
  double z = intercept_;
  for (std::size_t i = 0; i < words.size(); ++i) {
    z += unigram_[static_cast<std::size_t>(words[i])];
    if (bigram_ && i + 1 < words.size()) {
      auto it = bigram_weights_.find(static_cast<std::uint64_t>(words[i]) * vocab_ + static_cast<std::uint64_t>(words[i + 1]));
      if (it != bigram_weights_.end()) z += it->second;
    }
  }
  return classifier::sigmoid(z);
}

TextSlant text_slant_hook(const ChannelModel& model, std::function<double(std::span<const int>)> score,
                          std::size_t snippets, std::size_t snippet_length, std::size_t calibration,
                          std::uint64_t seed) {
  if (snippets == 0 || calibration == 0) throw ValidationError("text_slant_hook: counts must be positive");
  auto sampler = std::make_shared<WordSampler>(model);
  TextSlant ts;
  auto rng = substream(seed, 41);
  for (bool fnc : {true, false}) {
    double acc = 0;
    for (std::size_t i = 0; i < calibration; ++i) acc += score(sampler->draw(fnc, snippet_length, rng));
    (fnc ? ts.e_fnc : ts.e_cnn) = acc / static_cast<double>(calibration);
  }
  ts.hook = [sampler, score, snippets, snippet_length](double m, std::mt19937_64& r) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double acc = 0;
    for (std::size_t i = 0; i < snippets; ++i) acc += score(sampler->draw(u(r) < m, snippet_length, r));
    return acc / static_cast<double>(snippets);
  };
  return ts;
}

std::vector<corpus::Document> gen_articles(const ChannelModel& model, const SynthPanel& panel,
                                           std::size_t per_edition, std::size_t length, std::uint64_t seed) {
  WordSampler sampler(model);
  auto rng = substream(seed, 51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<corpus::Document> docs;
  for (std::size_t e = 0; e < panel.slants.size(); ++e) {
    for (std::size_t k = 0; k < per_edition; ++k) {
      corpus::Document d;
      d.id = fmt::format("{}-{:04}", panel.slants[e].outlet_id, k);
      d.source = corpus::Source::Newspaper;
      d.outlet_id = panel.slants[e].outlet_id;
      d.date = std::chrono::year{2005 + static_cast<int>(k % 4)} / 1 / 1;
      d.text = render(model, sampler.draw(u(rng) < panel.mixture[e], length, rng));
      docs.push_back(std::move(d));
    }
  }
  return docs;
}

}  // namespace slant::synth
