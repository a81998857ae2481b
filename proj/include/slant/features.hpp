#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace slant::features {

// Terms are bigrams in the production pipeline, but nothing here depends on that.
using TermSequence = std::vector<std::string>;
using CountMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct TermFrequency {
  std::uint64_t fnc = 0;
  std::uint64_t cnn = 0;
};

struct Vocabulary {
  std::map<std::string, TermFrequency> terms;
  std::uint64_t threshold = 20;

  std::vector<std::string> term_list() const;
};

/// Terms whose total count exceeds `threshold` in both corpora.
/// Throws slant::Error if either corpus is empty or the intersection is empty.
Vocabulary build_vocabulary(std::span<const TermSequence> fnc_docs,
                            std::span<const TermSequence> cnn_docs, std::uint64_t threshold = 20);

/// Per-document counts of `terms` (columns in the given order). Unknown terms are ignored.
CountMatrix count_terms(std::span<const TermSequence> docs, const std::vector<std::string>& terms);

enum class Chi2Mode { Counts, Presence };

/// One-degree-of-freedom chi-squared score per column over class totals:
/// sum_c (O_c - E_c)^2 / E_c with E_c = column total * (class document share).
/// Labels are 1 (FNC) / 0. Columns with zero total score 0.
std::vector<double> chi2_scores(const CountMatrix& counts, std::span<const int> labels,
                                Chi2Mode mode = Chi2Mode::Counts);

struct FeatureSelector {
  std::vector<std::string> selected;
  std::vector<double> chi2;
  std::vector<double> scale;  // 1 / training SD, or 1 for degenerate columns
  std::uint64_t threshold = 0;
  std::string corpus_hash;

  std::size_t k() const { return selected.size(); }
  /// Content fingerprint over terms and scales; models record it.
  std::uint64_t id() const;
  /// Position of a term in `selected`, or -1.
  int index_of(const std::string& term) const;
  void set_scale(std::vector<double> s);
  /// Call after editing `selected` or `scale` directly.
  void invalidate();

 private:
  mutable std::unordered_map<std::string, int> index_;
  mutable std::optional<std::uint64_t> id_;
};

/// The k highest scores, score-descending with lexicographic tie-break.
/// Throws if k is zero or exceeds the number of terms.
FeatureSelector select_top_k(const std::vector<std::string>& terms, std::span<const double> scores,
                             std::size_t k);

struct ScalerFit {
  std::vector<double> scale;
  std::size_t degenerate = 0;
};

/// scale_b = 1 / population SD of column b; zero-variance columns get scale 1.
ScalerFit fit_scaler(const CountMatrix& training_counts);

// Sparse scaled counts tagged with the selector they were built with.
struct FeatureVector {
  std::vector<std::pair<int, double>> entries;  // index-sorted
  std::uint64_t selector_id = 0;
};

struct FeatureMatrix {
  CountMatrix X;
  std::uint64_t selector_id = 0;
};

FeatureVector vectorize(std::span<const std::string> terms, const FeatureSelector& selector);
FeatureMatrix vectorize_all(std::span<const TermSequence> docs, const FeatureSelector& selector);

/// Flat file: '#'-prefixed header lines (format, k, threshold, corpus_hash, id)
/// followed by "term<TAB>chi2<TAB>scale" lines.
void save_selector(const FeatureSelector& selector, const std::filesystem::path& path);
FeatureSelector load_selector(const std::filesystem::path& path);

}  // namespace slant::features
