#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slant/classifier.hpp"
#include "slant/corpus.hpp"
#include "slant/features.hpp"
#include "slant/scoring.hpp"

namespace slant::synth {

struct SynthConfig {
  // channel language models
  std::size_t vocab_size = 500;
  double separation = 0.1;  // total-variation distance between the two channels
  std::size_t n_snippets = 10'000;  // per channel
  std::size_t snippet_length = 80;
  // panel
  std::size_t n_counties = 400;
  std::size_t n_outlets = 150;
  std::size_t n_states = 20;
  std::size_t max_counties_per_outlet = 6;
  std::size_t n_demographics = 3;
  double first_stage_delta = -0.004;  // per channel position
  double effect_theta = 0.5;
  double confounder_strength = 0.5;
  double confounder_sd = 0.2;
  double view_noise = 0.1;
  double slant_noise = 0.03;
  double outlet_sd = 0.03;
  double state_sd = 0.03;
  double demographic_effect = 0.02;
  double instrument_demographic_loading = 0;  // > 0 plants an exclusion violation
  std::size_t articles_per_edition = 40;
  std::uint64_t seed = 1;
};

/// Throws ValidationError on out-of-range settings.
void validate(const SynthConfig& config);

// Two categorical word distributions over a shared vocabulary.
struct ChannelModel {
  std::vector<std::string> vocab;
  Eigen::VectorXd fnc;
  Eigen::VectorXd cnn;
};

/// Vocabulary words are consonant strings that survive normalization and
/// stemming unchanged. fnc = (1-s) q + s a and cnn = (1-s) q + s b with a, b
/// on disjoint halves of the vocabulary, so their TV distance is exactly s.
ChannelModel make_channel_model(std::size_t vocab_size, double separation, std::uint64_t seed);

std::string synthetic_word(std::size_t index);
double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

class WordSampler {
 public:
  explicit WordSampler(const ChannelModel& model);
  std::vector<int> draw(bool fnc, std::size_t length, std::mt19937_64& rng);

 private:
  std::discrete_distribution<int> fnc_, cnn_;
};

/// log P(words | fnc) - log P(words | cnn); may be +-inf under disjoint support.
double log_likelihood_ratio(const ChannelModel& model, std::span<const int> words);

/// Mean over snippets of the larger posterior class probability (equal priors).
double bayes_rate(const ChannelModel& model, std::span<const std::vector<int>> snippets);

std::string render(const ChannelModel& model, std::span<const int> words);

struct ChannelCorpora {
  ChannelModel model;
  std::vector<corpus::Snippet> snippets;  // labeled, fnc first then cnn
  std::vector<std::vector<int>> words;    // word ids per snippet
  double bayes_rate = 0.5;
};

ChannelCorpora gen_channel_corpora(const SynthConfig& config);

/// Transcripts for the labeled corpora; each document holds `per_doc` snippets.
std::vector<corpus::Document> gen_transcripts(const ChannelModel& model, bool fnc, std::size_t n_snippets,
                                              std::size_t snippet_length, std::size_t per_doc, std::uint64_t seed);

/// Maps a mixture weight (probability each snippet is an FNC draw) to a
/// measured outlet slant.
using SlantHook = std::function<double(double mixture_weight, std::mt19937_64& rng)>;

struct GroundTruth {
  double separation = 0;
  double bayes_rate = 0.5;
  double delta = 0;
  double theta = 0;
  double confounder_strength = 0;
  // Expected measured slant is e_cnn + (e_fnc - e_cnn) * mixture weight.
  double e_fnc = 1;
  double e_cnn = 0;
  double measured_theta() const { return theta * (e_fnc - e_cnn); }
  std::vector<double> county_confounder;
};

struct SynthPanel {
  corpus::PanelInputs inputs;
  std::vector<scoring::SlantRecord> slants;  // one per outlet edition
  std::vector<double> mixture;               // latent mixture weight per edition, same order
  GroundTruth truth;
};

/// Counties with random integer channel positions; viewership loads on the
/// relative position, demographics, a state effect and a county confounder.
/// Each newspaper appears as one edition (its own outlet id, shared name) per
/// county it circulates in. Without a hook the measured slant is the mixture weight.
SynthPanel gen_panel(const SynthConfig& config, const SlantHook& hook = {});

/// Scores word-id snippets with a trained selector/model pair whose terms are
/// unigrams or bigrams of model vocabulary words.
class SnippetScorer {
 public:
  SnippetScorer(const ChannelModel& channels, const features::FeatureSelector& selector,
                const classifier::LogisticModel& model);
  double operator()(std::span<const int> words) const;

 private:
  bool bigram_ = false;
  std::size_t vocab_ = 0;
  double intercept_ = 0;
  std::vector<double> unigram_;
  std::unordered_map<std::uint64_t, double> bigram_weights_;
};

struct TextSlant {
  SlantHook hook;
  double e_fnc = 0;
  double e_cnn = 0;
};

/// Hook drawing `snippets` snippets per edition, each from FNC with the
/// mixture probability, averaging their scores. E[score] per channel is
/// estimated from `calibration` fresh draws each.
TextSlant text_slant_hook(const ChannelModel& model, std::function<double(std::span<const int>)> score,
                          std::size_t snippets, std::size_t snippet_length, std::size_t calibration,
                          std::uint64_t seed);

/// Newspaper articles, one snippet-length article per draw, each from FNC with
/// the edition's mixture weight.
std::vector<corpus::Document> gen_articles(const ChannelModel& model, const SynthPanel& panel,
                                           std::size_t per_edition, std::size_t length, std::uint64_t seed);

}  // namespace slant::synth
