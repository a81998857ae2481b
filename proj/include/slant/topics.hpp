#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace slant::topics {

// Unigram-stem vocabulary for topic models.
struct TopicVocabulary {
  std::vector<std::string> terms;  // sorted
  std::unordered_map<std::string, int> index;

  std::size_t size() const { return terms.size(); }
};

/// Terms appearing in at least `min_df` documents.
TopicVocabulary build_topic_vocabulary(std::span<const std::vector<std::string>> docs, std::size_t min_df = 5);

// Sparse word counts over a TopicVocabulary, index-sorted.
struct BagOfWords {
  std::vector<std::pair<int, double>> counts;
  double total() const;
};

BagOfWords to_bag(std::span<const std::string> tokens, const TopicVocabulary& vocab);

struct LdaOptions {
  int num_topics = 128;
  int passes = 1;
  int batch_size = 256;
  double kappa = 0.7;
  double tau0 = 64;
  double alpha = -1;  // <= 0 means 1/K
  double eta = -1;    // <= 0 means 1/K
  std::uint64_t seed = 0;
  std::size_t sample_size = 1'000'000;
  double heldout_fraction = 0.1;
  int estep_max_iter = 100;
  double estep_tol = 1e-3;
};

struct TopicModel {
  int num_topics = 0;
  double alpha = 0;
  double eta = 0;
  std::vector<std::string> vocab;
  Eigen::MatrixXd lambda;          // K x V variational topic-word parameters
  Eigen::MatrixXd topic_word;      // rows of lambda normalized to sum to 1
  Eigen::MatrixXd exp_elog_beta;   // exp(E_q[log beta])

  /// Recomputes topic_word and exp_elog_beta from lambda.
  void refresh();
};

struct LdaResult {
  TopicModel model;
  double perplexity = 0;          // held-out, after training
  double initial_perplexity = 0;  // held-out, at the seeded random initialization
  std::size_t train_docs = 0;
  std::size_t heldout_docs = 0;
};

/// Online variational Bayes for LDA with step size (tau0 + t)^-kappa.
/// Deterministic for a fixed seed. Throws on an empty vocabulary or corpus.
LdaResult train_lda(std::span<const BagOfWords> docs, const TopicVocabulary& vocab, const LdaOptions& options);

struct InferredShares {
  Eigen::VectorXd shares;
  bool empty = false;  // no in-vocabulary tokens; shares are uniform
};

/// Variational posterior mean of the document-topic proportions.
InferredShares infer_shares(const TopicModel& model, const BagOfWords& doc, int max_iter = 100, double tol = 1e-3);

/// Per-word perplexity by document completion: topic proportions are inferred
/// from every other token and the remaining tokens are scored.
double heldout_perplexity(const TopicModel& model, std::span<const BagOfWords> docs);

struct TopicLabel {
  std::string label;
  bool is_local = false;
  bool is_no_label = false;
};

using TopicLabelSet = std::vector<TopicLabel>;

/// CSV "topic_index,label,is_local,is_no_label"; must cover topics 0..K-1 exactly once.
TopicLabelSet load_topic_labels(const std::filesystem::path& path, int num_topics);
void write_topic_labels(const std::filesystem::path& path, const TopicLabelSet& labels);

/// True iff the shares on local-labelled topics sum to strictly more than 0.5.
bool classify_local(const Eigen::VectorXd& shares, const TopicLabelSet& labels);

/// Mean share vector per outlet.
std::map<std::string, Eigen::VectorXd> topic_covariates(std::span<const Eigen::VectorXd> shares,
                                                        std::span<const std::string> outlet_ids);

/// The n most probable words of a topic, ties broken lexicographically.
std::vector<std::string> top_words(const TopicModel& model, int topic, std::size_t n);

void save_topic_model(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_topic_model(const std::filesystem::path& path);

}  // namespace slant::topics
