#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slant/classifier.hpp"
#include "slant/corpus.hpp"

namespace slant::scoring {

struct SnippetKey {
  std::string snippet_id;
  std::string outlet_id;
};

struct SnippetScore {
  std::string snippet_id;
  std::string outlet_id;
  double p_fnc = 0.5;
  std::optional<bool> is_local;
  std::optional<Eigen::VectorXd> topic_shares;
};

enum class Subset { All, Local, NonLocal };

std::string_view to_string(Subset s);
Subset parse_subset(std::string_view s);

struct SlantRecord {
  std::string outlet_id;
  double slant = 0;
  std::size_t n_snippets = 0;
  Subset subset = Subset::All;
};

struct CountySlant {
  std::string county_id;
  double slant = 0;
  double circulation = 0;
};

/// One score per row of X, in row order. Throws on selector mismatch.
std::vector<SnippetScore> score_corpus(const classifier::LogisticModel& model,
                                       const features::FeatureMatrix& X, std::span<const SnippetKey> keys);

/// Unweighted mean p_fnc per outlet over the snippets passing `subset`,
/// sorted by outlet id. Outlets with no qualifying snippet are dropped (warned).
std::vector<SlantRecord> aggregate_slant(std::span<const SnippetScore> scores, Subset subset);

/// Circulation-weighted mean of outlet slants per county, sorted by county id.
/// Counties with zero total circulation are dropped (warned).
std::vector<CountySlant> county_slant(std::span<const SlantRecord> slants,
                                      std::span<const corpus::CirculationLink> links);

// Generic newspaper language measures per outlet.
struct LanguageControls {
  double vocabulary_size = 0;  // distinct / total words
  double word_length = 0;      // mean characters per word
  double sentence_length = 0;  // mean words per sentence
  double article_length = 0;   // mean characters per article
};

std::map<std::string, LanguageControls> language_controls(std::span<const corpus::Document> articles);

void write_scores(const std::filesystem::path& path, std::span<const SnippetScore> scores);
std::vector<SnippetScore> read_scores(const std::filesystem::path& path);
void write_slants(const std::filesystem::path& path, std::span<const SlantRecord> slants);
std::vector<SlantRecord> read_slants(const std::filesystem::path& path);

}  // namespace slant::scoring
