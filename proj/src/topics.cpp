#include "slant/topics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <boost/math/special_functions/digamma.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slant/csv.hpp"
#include "slant/error.hpp"

namespace slant::topics {

namespace {

using boost::math::digamma;

Eigen::VectorXd exp_elog_dirichlet(const Eigen::VectorXd& gamma) {
  const double psi_sum = digamma(gamma.sum());
  Eigen::VectorXd out(gamma.size());
  for (Eigen::Index k = 0; k < gamma.size(); ++k) out[k] = std::exp(digamma(gamma[k]) - psi_sum);
  return out;
}

struct EStep {
  Eigen::VectorXd gamma;
  Eigen::VectorXd exp_elog_theta;
  Eigen::VectorXd phinorm;
};

// Coordinate ascent on one document's variational parameters.
EStep estep(const Eigen::MatrixXd& exp_elog_beta, double alpha, const BagOfWords& doc, int max_iter, double tol) {
  const auto K = exp_elog_beta.rows();
  const auto n = static_cast<Eigen::Index>(doc.counts.size());
  Eigen::MatrixXd beta_d(K, n);
  Eigen::VectorXd cts(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    beta_d.col(j) = exp_elog_beta.col(doc.counts[static_cast<std::size_t>(j)].first);
    cts[j] = doc.counts[static_cast<std::size_t>(j)].second;
  }
  EStep s;
  s.gamma = Eigen::VectorXd::Constant(K, alpha + doc.total() / static_cast<double>(K));
  s.exp_elog_theta = exp_elog_dirichlet(s.gamma);
  s.phinorm = (beta_d.transpose() * s.exp_elog_theta).array() + 1e-100;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd last = s.gamma;
    const Eigen::VectorXd ratio = cts.array() / s.phinorm.array();
    s.gamma = (alpha + s.exp_elog_theta.array() * (beta_d * ratio).array()).matrix();
    s.exp_elog_theta = exp_elog_dirichlet(s.gamma);
    s.phinorm = (beta_d.transpose() * s.exp_elog_theta).array() + 1e-100;
    if ((s.gamma - last).cwiseAbs().mean() < tol) break;
  }
  return s;
}

void split_tokens(const BagOfWords& doc, BagOfWords& observed, BagOfWords& held) {
  std::size_t pos = 0;
  std::map<int, double> a, b;
  for (const auto& [w, c] : doc.counts) {
    const auto cnt = static_cast<std::size_t>(std::llround(c));
    for (std::size_t i = 0; i < cnt; ++i, ++pos) (pos % 2 == 0 ? a : b)[w] += 1;
  }
  observed.counts.assign(a.begin(), a.end());
  held.counts.assign(b.begin(), b.end());
}

}  // namespace

TopicVocabulary build_topic_vocabulary(std::span<const std::vector<std::string>> docs, std::size_t min_df) {
  std::map<std::string, std::size_t> df;
  for (const auto& d : docs) {
    std::set<std::string> seen(d.begin(), d.end());
    for (const auto& t : seen) ++df[t];
  }
  TopicVocabulary v;
  for (const auto& [t, n] : df)
    if (n >= min_df) v.terms.push_back(t);
  for (std::size_t i = 0; i < v.terms.size(); ++i) v.index.emplace(v.terms[i], static_cast<int>(i));
  return v;
}

double BagOfWords::total() const {
  double s = 0;
  for (const auto& [w, c] : counts) s += c;
  return s;
}

BagOfWords to_bag(std::span<const std::string> tokens, const TopicVocabulary& vocab) {
  std::map<int, double> acc;
  for (const auto& t : tokens)
    if (auto it = vocab.index.find(t); it != vocab.index.end()) acc[it->second] += 1;
  BagOfWords b;
  b.counts.assign(acc.begin(), acc.end());
  return b;
}

void TopicModel::refresh() {
  topic_word = lambda;
  exp_elog_beta.resize(lambda.rows(), lambda.cols());
  for (Eigen::Index k = 0; k < lambda.rows(); ++k) {
    const double row = lambda.row(k).sum();
    topic_word.row(k) /= row;
    const double psi_row = digamma(row);
    for (Eigen::Index w = 0; w < lambda.cols(); ++w)
      exp_elog_beta(k, w) = std::exp(digamma(lambda(k, w)) - psi_row);
  }
}

InferredShares infer_shares(const TopicModel& model, const BagOfWords& doc, int max_iter, double tol) {
  InferredShares out;
  const auto K = model.num_topics;
  if (doc.total() <= 0) {
    out.shares = Eigen::VectorXd::Constant(K, 1.0 / K);
    out.empty = true;
    return out;
  }
  for (const auto& [w, c] : doc.counts)
    if (w < 0 || w >= model.lambda.cols()) throw Error("infer_shares: word index outside the model vocabulary");
  auto s = estep(model.exp_elog_beta, model.alpha, doc, max_iter, tol);
  out.shares = s.gamma / s.gamma.sum();
  return out;
}

double heldout_perplexity(const TopicModel& model, std::span<const BagOfWords> docs) {
  double ll = 0, n = 0;
  for (const auto& d : docs) {
    BagOfWords observed, held;
    split_tokens(d, observed, held);
    if (held.counts.empty()) continue;
    const Eigen::VectorXd theta = infer_shares(model, observed).shares;
    for (const auto& [w, c] : held.counts) {
      const double p = theta.dot(model.topic_word.col(w));
      ll += c * std::log(std::max(p, 1e-300));
      n += c;
    }
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::exp(-ll / n);
}

LdaResult train_lda(std::span<const BagOfWords> docs, const TopicVocabulary& vocab, const LdaOptions& opt) {
  if (vocab.size() == 0) throw Error("train_lda: empty vocabulary");
  if (docs.empty()) throw Error("train_lda: empty corpus");
  if (opt.num_topics < 1) throw Error("train_lda: need at least one topic");
  if (opt.batch_size < 1 || opt.passes < 1) throw Error("train_lda: batch_size and passes must be positive");

  const int K = opt.num_topics;
  const auto V = static_cast<Eigen::Index>(vocab.size());
  std::mt19937_64 rng(opt.seed);

  std::vector<std::size_t> ids(docs.size());
  std::iota(ids.begin(), ids.end(), 0);
  if (ids.size() > opt.sample_size) {
    std::vector<std::size_t> sampled;
    std::sample(ids.begin(), ids.end(), std::back_inserter(sampled), opt.sample_size, rng);
    ids = std::move(sampled);
  }
  std::shuffle(ids.begin(), ids.end(), rng);
  auto n_held = static_cast<std::size_t>(std::floor(opt.heldout_fraction * static_cast<double>(ids.size())));
  if (n_held >= ids.size()) n_held = 0;
  std::vector<BagOfWords> heldout;
  for (std::size_t i = 0; i < n_held; ++i) heldout.push_back(docs[ids[i]]);
  std::vector<std::size_t> train(ids.begin() + static_cast<std::ptrdiff_t>(n_held), ids.end());
  std::sort(train.begin(), train.end());

  LdaResult res;
  TopicModel& m = res.model;
  m.num_topics = K;
  m.alpha = opt.alpha > 0 ? opt.alpha : 1.0 / K;
  m.eta = opt.eta > 0 ? opt.eta : 1.0 / K;
  m.vocab = vocab.terms;
  m.lambda.resize(K, V);
  std::gamma_distribution<double> init(100.0, 1.0 / 100.0);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index w = 0; w < V; ++w) m.lambda(k, w) = init(rng);
  m.refresh();

  std::span<const BagOfWords> eval_docs = heldout;
  std::vector<BagOfWords> train_copy;
  if (heldout.empty()) {
    for (auto i : train) train_copy.push_back(docs[i]);
    eval_docs = train_copy;
  }
  res.initial_perplexity = heldout_perplexity(m, eval_docs);

  const auto D = static_cast<double>(train.size());
  long updates = 0;
  for (int pass = 0; pass < opt.passes; ++pass) {
    std::vector<std::size_t> order = train;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      Eigen::MatrixXd sstats = Eigen::MatrixXd::Zero(K, V);
      for (std::size_t b = start; b < end; ++b) {
        const auto& doc = docs[order[b]];
        if (doc.counts.empty()) continue;
        auto s = estep(m.exp_elog_beta, m.alpha, doc, opt.estep_max_iter, opt.estep_tol);
        for (std::size_t j = 0; j < doc.counts.size(); ++j) {
          const auto [w, c] = doc.counts[j];
          sstats.col(w) += s.exp_elog_theta * (c / s.phinorm[static_cast<Eigen::Index>(j)]);
        }
      }
      sstats = sstats.cwiseProduct(m.exp_elog_beta);
      const double rho = std::pow(opt.tau0 + static_cast<double>(updates), -opt.kappa);
      const double scale = D / static_cast<double>(end - start);
      m.lambda = (1 - rho) * m.lambda + rho * ((sstats * scale).array() + m.eta).matrix();
      m.refresh();
      ++updates;
    }
  }
  res.perplexity = heldout_perplexity(m, eval_docs);
  res.train_docs = train.size();
  res.heldout_docs = heldout.size();
  return res;
}

TopicLabelSet load_topic_labels(const std::filesystem::path& path, int num_topics) {
  auto t = read_csv(path);
  const auto c_idx = t.require("topic_index"), c_lab = t.require("label"), c_loc = t.require("is_local"),
             c_nl = t.require("is_no_label");
  TopicLabelSet labels(static_cast<std::size_t>(num_topics));
  std::vector<bool> seen(labels.size(), false);
  for (const auto& r : t.rows) {
    const int k = std::stoi(r[c_idx]);
    if (k < 0 || k >= num_topics) throw Error(fmt::format("topic label index {} out of range", k));
    if (seen[static_cast<std::size_t>(k)]) throw Error(fmt::format("topic {} labelled twice", k));
    seen[static_cast<std::size_t>(k)] = true;
    labels[static_cast<std::size_t>(k)] = {r[c_lab], r[c_loc] == "1", r[c_nl] == "1"};
  }
  for (std::size_t k = 0; k < seen.size(); ++k)
    if (!seen[k]) throw Error(fmt::format("topic {} has no label", k));
  return labels;
}

void write_topic_labels(const std::filesystem::path& path, const TopicLabelSet& labels) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << csv_line({"topic_index", "label", "is_local", "is_no_label"});
  for (std::size_t k = 0; k < labels.size(); ++k)
    out << csv_line({std::to_string(k), labels[k].label, labels[k].is_local ? "1" : "0",
                     labels[k].is_no_label ? "1" : "0"});
}

bool classify_local(const Eigen::VectorXd& shares, const TopicLabelSet& labels) {
  if (static_cast<std::size_t>(shares.size()) != labels.size())
    throw Error("classify_local: labels do not cover every topic");
  double local = 0;
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k].is_local) local += shares[static_cast<Eigen::Index>(k)];
  return local > 0.5;
}

std::map<std::string, Eigen::VectorXd> topic_covariates(std::span<const Eigen::VectorXd> shares,
                                                        std::span<const std::string> outlet_ids) {
  if (shares.size() != outlet_ids.size()) throw Error("topic_covariates: one outlet per article required");
  std::map<std::string, std::pair<Eigen::VectorXd, double>> acc;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    auto [it, fresh] = acc.try_emplace(outlet_ids[i], Eigen::VectorXd::Zero(shares[i].size()), 0.0);
    it->second.first += shares[i];
    it->second.second += 1;
  }
  std::map<std::string, Eigen::VectorXd> out;
  for (auto& [o, a] : acc) out.emplace(o, a.first / a.second);
  return out;
}

std::vector<std::string> top_words(const TopicModel& model, int topic, std::size_t n) {
  if (topic < 0 || topic >= model.num_topics) throw Error("top_words: topic out of range");
  if (n > model.vocab.size()) throw Error("top_words: n exceeds vocabulary size");
  std::vector<int> order(model.vocab.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), [&](int a, int b) {
    const double pa = model.topic_word(topic, a), pb = model.topic_word(topic, b);
    if (pa != pb) return pa > pb;
    return model.vocab[static_cast<std::size_t>(a)] < model.vocab[static_cast<std::size_t>(b)];
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(model.vocab[static_cast<std::size_t>(order[i])]);
  return out;
}

namespace {
constexpr char kMagic[8] = {'S', 'L', 'D', 'A', 'v', '1', 0, 0};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated topic model file");
  return v;
}
}  // namespace

void save_topic_model(const TopicModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::int64_t>(out, model.num_topics);
  put<std::int64_t>(out, static_cast<std::int64_t>(model.vocab.size()));
  put(out, model.alpha);
  put(out, model.eta);
  for (const auto& w : model.vocab) {
    put<std::int64_t>(out, static_cast<std::int64_t>(w.size()));
    out.write(w.data(), static_cast<std::streamsize>(w.size()));
  }
  for (Eigen::Index k = 0; k < model.lambda.rows(); ++k)
    for (Eigen::Index w = 0; w < model.lambda.cols(); ++w) put(out, model.lambda(k, w));
}

TopicModel load_topic_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read topic model " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw Error("not a topic model file: " + path.string());
  TopicModel m;
  m.num_topics = static_cast<int>(get<std::int64_t>(in));
  const auto V = get<std::int64_t>(in);
  m.alpha = get<double>(in);
  m.eta = get<double>(in);
  for (std::int64_t i = 0; i < V; ++i) {
    const auto len = get<std::int64_t>(in);
    std::string w(static_cast<std::size_t>(len), '\0');
    in.read(w.data(), len);
    m.vocab.push_back(std::move(w));
  }
  m.lambda.resize(m.num_topics, V);
  for (Eigen::Index k = 0; k < m.lambda.rows(); ++k)
    for (Eigen::Index w = 0; w < m.lambda.cols(); ++w) m.lambda(k, w) = get<double>(in);
  m.refresh();
  return m;
}

}  // namespace slant::topics
