#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "slant/classifier.hpp"
#include "slant/econometrics.hpp"
#include "slant/features.hpp"
#include "slant/synth.hpp"
#include "slant/topics.hpp"

namespace slant::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

struct Paths {
  std::filesystem::path fnc;
  std::filesystem::path cnn;
  std::filesystem::path newspapers;
  std::filesystem::path counties;
  std::filesystem::path circulation;
  std::filesystem::path outlets;
  std::filesystem::path topic_labels;  // optional
  std::filesystem::path ground_truth;  // optional
};

struct ClassifierConfig {
  std::vector<double> lambda_grid;
  std::size_t folds = 5;
  double test_fraction = 0.2;
  classifier::Penalty penalty = classifier::Penalty::SquaredL2;
  bool fit_intercept = true;
  double tol = 1e-8;
  int max_iter = 1000;
};

struct FeatureConfig {
  std::uint64_t threshold = 20;
  std::size_t k = 2000;
  features::Chi2Mode chi2_mode = features::Chi2Mode::Counts;
  int ngram = 2;
};

struct TopicConfig {
  bool enabled = false;
  topics::LdaOptions lda;
  std::size_t min_df = 5;
  std::string train_on = "articles";  // or "transcripts"
  std::size_t top_words = 10;
};

struct Binscatter {
  std::string name;
  std::string y = "slant";
  std::string x = "position";
  std::optional<std::string> fe = "state";
  std::vector<std::string> controls;
  std::string weight = "circulation";
  bool standardize = true;
  std::size_t bins = 16;
};

struct SimulateConfig {
  std::filesystem::path output;
  synth::SynthConfig synth;
  std::size_t snippets_per_transcript = 10;
};

struct PipelineConfig {
  nlohmann::json raw;  // after overrides, used for hashing
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  Paths paths;
  std::size_t window = 80;
  FeatureConfig features;
  ClassifierConfig classifier;
  TopicConfig topics;
  econometrics::PanelOptions panel;
  std::vector<econometrics::RegressionSpec> regressions;
  std::vector<Binscatter> binscatters;
  std::size_t top_bigrams = 20;
  SimulateConfig simulate;
};

/// Default lambda grid: 2 * 10^e for e = -7..0.
std::vector<double> default_lambda_grid();

/// Applies "a.b.c=value" overrides; value is parsed as JSON when it parses,
/// otherwise taken as a string.
void apply_override(nlohmann::json& j, std::string_view assignment);

/// Relative paths resolve against `base_dir`. Throws ValidationError on bad keys or values.
PipelineConfig config_from_json(nlohmann::json j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});

/// Throws ValidationError when an input path needed by `command` does not exist.
void check_inputs(const PipelineConfig& config, std::string_view command);

std::filesystem::path stage_dir(const PipelineConfig& config, std::string_view stage);

void cmd_prepare(const PipelineConfig& config);
void cmd_train(const PipelineConfig& config);
void cmd_score(const PipelineConfig& config);
void cmd_topics(const PipelineConfig& config);
void cmd_regress(const PipelineConfig& config);
void cmd_simulate(const PipelineConfig& config);
void cmd_report(const PipelineConfig& config);

/// Runs a command by name. Unknown names throw ValidationError.
void run_command(std::string_view command, const PipelineConfig& config);

// Building blocks shared with report and tests.

/// Panel table from the score stage (and topics, when enabled) plus the panel inputs.
econometrics::Table assemble_panel(const PipelineConfig& config);

/// Feature terms of a text: stemmed bigrams (ngram 2) or stems (ngram 1).
std::vector<std::string> terms_of(std::string_view text, int ngram);

struct BinscatterPoint {
  std::size_t bin = 0;
  double x = 0;
  double y = 0;
  double weight = 0;
  std::size_t count = 0;
};

/// Residualizes y and x on FE and controls (the regression module's
/// projection), then forms `bins` weight-balanced bins on the x residual and
/// returns weighted bin means.
std::vector<BinscatterPoint> binscatter(const econometrics::Table& table, const Binscatter& spec);

/// Assigns sorted observations to weight-balanced bins by cumulative weight midpoint.
std::vector<std::size_t> weight_balanced_bins(std::span<const double> x, std::span<const double> w, std::size_t bins);

}  // namespace slant::pipeline
